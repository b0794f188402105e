"""Synthetic multi-substation records with a known forced oscillation.

Every substation gets low-pass ambient noise plus a gated sinusoid whose
amplitude decays exponentially with distance from a source substation.  Each
reporting rate is produced by evaluating the analytic mode at that rate's own
sample instants, so the aliasing seen at every rate is exact.  Noise streams
are seeded per (seed, substation, rate, stream) and are independent of
generation order.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal

from .errors import ParameterError
from .ingest import ChannelKind, ChannelSet, PhasorChannel

# 2020-07-01 06:00 UTC-4, the summer-day start used throughout the demos
DEMO_T0 = 1593597600.0

_STREAM_V, _STREAM_I, _STREAM_P, _STREAM_Q = 0, 1, 2, 3


def snr_amplitude(snr: float, variance: float) -> float:
    """Sinusoid amplitude whose power A^2/2 is ``snr`` times ``variance``."""
    return math.sqrt(2.0 * snr * variance)


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def _lowpass(fs: float, corner_hz: float):
    if not 0 < corner_hz < fs / 2:
        raise ParameterError(f"corner {corner_hz} Hz must lie in (0, {fs / 2}) at {fs} sps")
    return signal.butter(1, corner_hz, fs=fs)


def _unit_gain_power(b: np.ndarray, a: np.ndarray) -> tuple[float, int]:
    """Output variance for unit white input, and the settling length."""
    pole = abs(a[1]) if a.size > 1 else 0.0
    settle = 1 if pole == 0 else int(math.ceil(math.log(1e-16) / math.log(pole))) + 1
    imp = np.zeros(settle)
    imp[0] = 1.0
    h = signal.lfilter(b, a, imp)
    return float(h @ h), settle


def ambient_noise(n: int, fs: float, variance: float, corner_hz: float, rng) -> np.ndarray:
    b, a = _lowpass(fs, corner_hz)
    gain, settle = _unit_gain_power(b, a)
    w = rng.standard_normal(n + settle)
    y = signal.lfilter(b, a, w)[settle:]
    return y * math.sqrt(variance / gain)


def gen_ambient(
    duration_s: float,
    fs: float,
    variance: float = 1.0,
    corner_hz: float = 1.0,
    seed: int = 0,
    t0: float = 0.0,
) -> PhasorChannel:
    """First-order low-pass Gaussian noise scaled to ``variance``."""
    n = int(round(duration_s * fs))
    x = ambient_noise(n, fs, variance, corner_hz, _rng(seed))
    return PhasorChannel("ambient", "SYNTH", ChannelKind.VPHM, fs, t0, x)


def gen_pow(
    duration_s: float,
    fs: float = 960.0,
    carrier_hz: float = 60.0,
    mod_freq_hz: float = 22.0,
    mod_depth: float = 0.02,
    seed: int = 0,
    noise_std: float = 1e-3,
    t0: float = 0.0,
) -> PhasorChannel:
    """Amplitude-modulated carrier ``(1 + m cos(2 pi f_mod t)) cos(2 pi f_c t) + noise``."""
    if not fs > 2 * (carrier_hz + mod_freq_hz):
        raise ParameterError(
            f"{fs} sps cannot represent carrier {carrier_hz} Hz with {mod_freq_hz} Hz sidebands"
        )
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    v = (1.0 + mod_depth * np.cos(2 * np.pi * mod_freq_hz * t)) * np.cos(2 * np.pi * carrier_hz * t)
    v = v + noise_std * _rng(seed).standard_normal(n)
    return PhasorChannel("POW", "SYNTH", ChannelKind.POW, fs, t0, v)


@dataclass
class SynthScenario:
    """Network layout, forced mode and measurement setup.

    ``gate`` holds (on, off) pairs in seconds after ``t0``.  ``phase_map`` is
    per substation in radians; when omitted, substations west of the source
    (smaller x) swing against it (pi) and the rest swing with it (0).
    """

    n_substations: int = 6
    layout: list[tuple[float, float]] | None = None
    source_idx: int = 0
    f0_hz: float = 22.0
    amplitude0: float = 0.01
    decay_km: float = 70.0
    phase_map: list[float] | None = None
    gate: list[tuple[float, float]] = field(default_factory=lambda: [(0.0, math.inf)])
    noise_variance: float = 1e-6
    noise_corner_hz: float = 1.0
    rates: list[float] = field(default_factory=lambda: [30.0, 60.0])
    duration_s: float = 3600.0
    t0: float = DEMO_T0
    seed: int = 0
    p_on_mw: float = 20.0
    pf_on: float = 0.95
    current_mode_idx: list[int] = field(default_factory=list)
    current_gain: float = 1.0
    emit_current: bool = True

    def __post_init__(self):
        if self.n_substations < 1:
            raise ParameterError("n_substations must be positive")
        if not 0 <= self.source_idx < self.n_substations:
            raise ParameterError(
                f"source index {self.source_idx} out of range for {self.n_substations} substations"
            )
        if self.layout is None:
            self.layout = [(40.0 * k, 0.0) for k in range(self.n_substations)]
        self.layout = [tuple(map(float, p)) for p in self.layout]
        if len(self.layout) != self.n_substations:
            raise ParameterError("layout must list one (x, y) per substation")
        if self.phase_map is None:
            xs = self.layout[self.source_idx][0]
            self.phase_map = [math.pi if p[0] < xs else 0.0 for p in self.layout]
        if len(self.phase_map) != self.n_substations:
            raise ParameterError("phase_map must list one phase per substation")
        self.gate = [(float(a), float(b)) for a, b in self.gate]
        if not self.rates:
            raise ParameterError("at least one rate is required")
        for k in self.current_mode_idx:
            if not 0 <= k < self.n_substations:
                raise ParameterError(f"current_mode_idx entry {k} out of range")

    @property
    def substations(self) -> list[str]:
        return [f"SUB{k:02d}" for k in range(self.n_substations)]

    def distances(self) -> np.ndarray:
        xy = np.asarray(self.layout)
        return np.hypot(*(xy - xy[self.source_idx]).T)

    def amplitudes(self) -> np.ndarray:
        return self.amplitude0 * np.exp(-self.distances() / self.decay_km)

    def gate_mask(self, t_rel: np.ndarray) -> np.ndarray:
        on = np.zeros(t_rel.shape, bool)
        for a, b in self.gate:
            on |= (t_rel >= a) & (t_rel < b)
        return on

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gate"] = [[a, b if math.isfinite(b) else None] for a, b in self.gate]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthScenario":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown scenario field(s): {', '.join(sorted(unknown))}")
        if "gate" in d:
            d["gate"] = [(a, math.inf if b is None else b) for a, b in d["gate"]]
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "SynthScenario":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class GroundTruth:
    f0_hz: float
    amplitudes: dict[str, float]
    phases: dict[str, float]
    gate: list[tuple[float, float]]
    source: str

    def to_dict(self) -> dict:
        return {
            "f0_hz": self.f0_hz,
            "amplitudes": self.amplitudes,
            "phases": self.phases,
            "gate": [[a, b if math.isfinite(b) else None] for a, b in self.gate],
            "source": self.source,
        }


def channel_id(substation: str, kind: ChannelKind | str, rate: float) -> str:
    kind = kind.value if isinstance(kind, ChannelKind) else kind
    return f"{substation}.{kind}.{rate:g}"


def gen_network(sc: SynthScenario) -> tuple[ChannelSet, GroundTruth]:
    """Emit V (and optionally I) magnitudes at every rate plus source P/Q/PF."""
    subs = sc.substations
    amps = sc.amplitudes()
    w0 = 2 * np.pi * sc.f0_hz
    channels = []
    for ri, rate in enumerate(sc.rates):
        n = int(round(sc.duration_s * rate))
        t = np.arange(n) / rate
        gate = sc.gate_mask(t)
        for k, sub in enumerate(subs):
            mode = np.where(gate, amps[k] * np.cos(w0 * t + sc.phase_map[k]), 0.0)
            amb = ambient_noise(n, rate, sc.noise_variance, sc.noise_corner_hz,
                                _rng(sc.seed, k, ri, _STREAM_V))
            channels.append(PhasorChannel(
                channel_id(sub, ChannelKind.VPHM, rate), sub, ChannelKind.VPHM, rate, sc.t0,
                1.0 + amb + mode, sc.layout[k],
            ))
            if sc.emit_current:
                cur = 0.5 + ambient_noise(n, rate, sc.noise_variance, sc.noise_corner_hz,
                                          _rng(sc.seed, k, ri, _STREAM_I))
                if k in sc.current_mode_idx:
                    cur = cur + sc.current_gain * mode
                channels.append(PhasorChannel(
                    channel_id(sub, ChannelKind.IPHM, rate), sub, ChannelKind.IPHM, rate, sc.t0,
                    cur, sc.layout[k],
                ))

    # inverter operating point at the source, at the slowest rate
    rate = min(sc.rates)
    n = int(round(sc.duration_s * rate))
    gate = sc.gate_mask(np.arange(n) / rate)
    sub = subs[sc.source_idx]
    jitter = _rng(sc.seed, sc.source_idx, 0, _STREAM_P).standard_normal(n)
    p = np.where(gate, sc.p_on_mw * (1.0 + 0.01 * jitter), 0.0)
    tan_phi = math.tan(math.acos(sc.pf_on))
    q_idle = 0.05 * _rng(sc.seed, sc.source_idx, 0, _STREAM_Q).standard_normal(n)
    q = np.where(gate, p * tan_phi, q_idle)
    pf = np.where(gate, sc.pf_on, 0.0)
    loc = sc.layout[sc.source_idx]
    for kind, vals in ((ChannelKind.P, p), (ChannelKind.Q, q), (ChannelKind.PF, pf)):
        channels.append(PhasorChannel(channel_id(sub, kind, rate), sub, kind, rate, sc.t0, vals, loc))

    truth = GroundTruth(
        sc.f0_hz,
        {s: float(a) for s, a in zip(subs, amps)},
        {s: float(ph) for s, ph in zip(subs, sc.phase_map)},
        list(sc.gate),
        sub,
    )
    meta = {"generator": "gridosc.synth", "seed": str(sc.seed), "f0_hz": repr(sc.f0_hz)}
    return ChannelSet.from_channels(channels, meta), truth


def demo_scenario() -> SynthScenario:
    """Three hours around sunrise: 22 Hz mode switched on, off, and on again."""
    return SynthScenario(
        n_substations=6,
        layout=[(60.0, 40.0), (20.0, 35.0), (95.0, 50.0), (70.0, 90.0), (130.0, 30.0), (0.0, 0.0)],
        source_idx=0,
        f0_hz=22.0,
        amplitude0=0.01,
        decay_km=70.0,
        gate=[(3600.0, 6600.0), (7800.0, 10800.0)],
        noise_variance=1e-6,
        noise_corner_hz=1.0,
        rates=[30.0, 60.0],
        duration_s=10800.0,
        seed=2020,
        current_mode_idx=[0],
    )
