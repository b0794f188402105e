"""``gridosc`` command line: spectra, alias resolution, modes, energy maps.

Every subcommand that writes artifacts also writes ``manifest.json`` with the
exact argument vector, input hashes, library versions and artifact hashes;
``gridosc replay manifest.json --out DIR`` regenerates the artifacts.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__, aliasing, energy, modal, spectral, svg, synth
from .errors import (
    DataError,
    FormatError,
    GridOscError,
    NumericalError,
    ParameterError,
    RangeError,
    ShapeReferenceError,
)
from .ingest import ChannelKind, ChannelSet, PhasorChannel, load_channels, slice_set, write_channels

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(GridOscError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


class Run:
    """Collects artifacts of one invocation and writes the manifest."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = argv
        self.out = Path(args.out) if getattr(args, "out", None) else None
        self.artifacts: dict[str, str] = {}
        self.inputs: list[dict] = []
        self.seed = None
        # snapshot before subcommands fill in derived values
        self.params = _jsonable({k: v for k, v in vars(args).items() if k not in ("out", "func")})
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str):
        data = text.encode()
        (self.out / name).write_bytes(data)
        self.artifacts[name] = hashlib.sha256(data).hexdigest()

    def write_pair(self, stem: str, svg_text: str, csv_text: str):
        """An SVG view always ships with the CSV of the plotted numbers."""
        self.write(f"{stem}.svg", svg_text)
        self.write(f"{stem}.csv", csv_text)

    def write_file(self, name: str, writer):
        writer(self.out / name)
        self.artifacts[name] = hashlib.sha256((self.out / name).read_bytes()).hexdigest()

    def add_input(self, path):
        p = Path(path).resolve()
        self.inputs.append({"arg": str(path), "path": str(p),
                            "sha256": hashlib.sha256(p.read_bytes()).hexdigest()})

    def finish(self):
        if self.out is None:
            return
        manifest = {
            "tool": "gridosc",
            "version": __version__,
            "subcommand": self.args.command,
            "argv": _strip_out(self.argv),
            "parameters": self.params,
            "inputs": self.inputs,
            "seed": self.seed,
            "versions": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")


def _strip_out(argv):
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        out.append(a)
    return out


def _pmap(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _local(t: float, tz_hours: float) -> str:
    dt = datetime.fromtimestamp(t, tz=timezone.utc) + timedelta(hours=tz_hours)
    return dt.strftime("%H:%M")


def _select(chs: ChannelSet, ids=None, kind=None, rate=None) -> list[PhasorChannel]:
    if ids:
        missing = [i for i in ids if i not in chs]
        if missing:
            raise ParameterError(f"unknown channel id(s): {', '.join(missing)}")
        return [chs[i] for i in ids]
    out = list(chs)
    if kind:
        k = ChannelKind(kind.upper())
        out = [c for c in out if c.kind is k]
    if rate:
        out = [c for c in out if c.rate_sps == rate]
    if not out:
        raise ParameterError("no channel matches the selection")
    return out


def _load(run: Run, path) -> ChannelSet:
    chs = load_channels(path)
    run.add_input(path)
    return chs


def _window(chs: ChannelSet, args) -> ChannelSet:
    if args.t_start is None and args.duration is None:
        return chs
    t0 = min(c.t0 for c in chs)
    start = t0 + (args.t_start or 0.0)
    end = start + args.duration if args.duration else min(c.t0 + c.duration for c in chs)
    return slice_set(chs, start, end)


# --------------------------------------------------------------------------
# subcommands


def _psd_for(ch, args):
    if args.method == "yule-walker":
        return spectral.yule_walker_psd(ch, args.order)
    if args.preset:
        return spectral.welch_preset(ch, args.preset)
    return spectral.welch_psd(ch, args.segment, args.overlap, args.window, args.detrend)


def cmd_psd(run: Run, args):
    chs = _window(_load(run, args.input), args)
    sel = _select(chs, args.channel, args.kind, args.rate)
    psds = _pmap(lambda c: _psd_for(c, args), sel, args.workers)
    peaks = ["id,method,n_segments,resolution_hz,peak_hz"]
    for ch, p in zip(sel, psds):
        run.write(f"psd_{ch.id}.csv", p.to_csv())
        band = args.band or (p.freqs[1], p.freqs[-1])
        f0 = modal.estimate_mode_frequency(p, tuple(band))
        peaks.append(f"{ch.id},{p.method},{p.n_segments if p.n_segments else ''},{p.resolution_hz!r},"
                     f"{'' if f0 is None else repr(f0)}")
    run.write("psd.json", json.dumps({c.id: p.to_dict() for c, p in zip(sel, psds)}))
    run.write("peaks.csv", "\n".join(peaks) + "\n")
    xlim = tuple(args.xlim) if args.xlim else None
    series = [(p.freqs, p.density, c.id) for c, p in zip(sel, psds)]
    run.write_pair("psd_plot", svg.line_plot(series, f"PSD ({psds[0].method})", xlim=xlim),
                   _long_csv(series, xlim))
    print("\n".join(peaks))


def _long_csv(series, xlim=None):
    rows = ["id,freq_hz,density"]
    for x, y, label in series:
        for a, b in zip(np.asarray(x).tolist(), np.asarray(y).tolist()):
            if xlim is None or xlim[0] <= a <= xlim[1]:
                rows.append(f"{label},{a!r},{b!r}")
    return "\n".join(rows) + "\n"


def _spectrogram_artifacts(run: Run, sg: spectral.Spectrogram, stem: str, fmin, fmax, tz, marks=()):
    run.write(f"{stem}.csv", sg.to_csv())
    m = (sg.freqs >= fmin) & (sg.freqs <= fmax)
    pooled, r0, c0 = svg.downsample_max(sg.power[:, m].T, 300, 240)
    freqs = sg.freqs[m][r0]
    hours = (sg.times[c0] - sg.times[0]) / 3600.0
    annotations = [((t - sg.times[0]) / 3600.0, _local(t, tz)) for t in marks]
    text = svg.heatmap(pooled, hours, freqs, f"Spectrogram {sg.source_channel}",
                       f"Hours since {_local(sg.times[0], tz)} local", "Frequency (Hz)",
                       "dB", log=True, annotations=annotations)
    rows = ["hours\\freq_hz," + ",".join(repr(f) for f in freqs.tolist())]
    for h, col in zip(hours.tolist(), pooled.T.tolist()):
        rows.append(repr(h) + "," + ",".join("" if v != v else repr(v) for v in col))
    run.write(f"{stem}_plot.csv", "\n".join(rows) + "\n")
    run.write(f"{stem}.svg", text)


def cmd_spectrogram(run: Run, args):
    chs = _window(_load(run, args.input), args)
    ch = _select(chs, [args.channel] if args.channel else None, args.kind or "VPHM", args.rate)[0]
    sg = spectral.spectrogram(ch, args.window_len, args.hop, args.detrend, args.window)
    fmax = args.fmax if args.fmax is not None else ch.rate_sps / 2
    _spectrogram_artifacts(run, sg, "spectrogram", args.fmin, fmax, args.tz_offset)
    print(f"{ch.id}: {sg.power.shape[0]} windows x {sg.freqs.size} bins at {sg.df:g} Hz")


def _alias_table(cands, obs) -> str:
    head = "freq_hz,interval_lo_hz,interval_hi_hz," + ",".join(
        f"residual_{o.f_obs_hz:g}@{o.fs_hz:g}" for o in obs)
    rows = [head] + [
        f"{c.freq_hz!r},{c.interval_hz[0]!r},{c.interval_hz[1]!r},"
        + ",".join(repr(r) for r in c.residuals_hz)
        for c in cands
    ]
    return "\n".join(rows) + "\n"


def cmd_alias(run: Run, args):
    if not args.obs:
        raise UsageError("alias needs at least one --obs f:fs[:tol]")
    obs = [aliasing.AliasObservation.parse(o, args.tol) for o in args.obs]
    cands = aliasing.resolve_candidates(obs, args.fmax)
    table = _alias_table(cands, obs)
    sys.stdout.write(table)
    if run.out is not None:
        run.write("alias_candidates.csv", table)


def _modes(run: Run, vs, args, ref, f0=None, prefix=""):
    csd = spectral.csd_matrix(vs, args.segment, args.overlap, args.window, args.detrend)
    band = tuple(args.band)
    curves = modal.fdd_curves(csd, band, min(args.m, len(vs)))
    rep = modal.count_modes(curves, args.prominence, args.coincide_tol)
    if f0 is None:
        f0 = rep.freqs[0] if rep.count else float(curves.freqs[np.argmax(curves.sigma[:, 0])])
    shape = modal.mode_shape(csd, f0, ref, args.shape_method)
    series = [(curves.freqs, curves.sigma[:, k], f"sigma{k + 1}") for k in range(curves.m)]
    run.write_pair(f"{prefix}singular_values", svg.line_plot(series, "Top singular values of CSD",
                                                               ylabel="Singular value (dB)"),
                   curves.to_csv())
    run.write_pair(f"{prefix}mode_shape",
                   svg.polar_shape(shape.channel_ids, shape.magnitudes, shape.phases, ref,
                                   f"Mode shape at {shape.mode_freq_hz:.3f} Hz"),
                   shape.to_csv())
    summary = {
        "mode_count": rep.count,
        "mode_freqs_hz": rep.freqs,
        "prominence_ratio": rep.prominence_ratio,
        "coincide_tol_hz": rep.coincide_tol_hz,
        "shape_freq_hz": shape.mode_freq_hz,
        "reference": ref,
        "n_segments": csd.n_segments,
        "shape": {cid: {"magnitude": m, "phase_rad": p}
                  for cid, m, p in zip(shape.channel_ids, shape.magnitudes.tolist(), shape.phases.tolist())},
    }
    run.write(f"{prefix}multiplicity.json", json.dumps(_jsonable(summary), indent=1))
    return summary


def cmd_modes(run: Run, args):
    chs = _window(_load(run, args.input), args)
    vs = _select(chs, args.channel, args.kind or "VPHM", args.rate)
    ref = args.reference or vs[0].id
    s = _modes(run, vs, args, ref, args.f0)
    print(f"modes: {s['mode_count']} at {s['mode_freqs_hz']}; shape at {s['shape_freq_hz']:.4f} Hz")


def _energy_cfg(args, f0):
    half = args.half_width
    if args.mode_band:
        return energy.ModeEnergyConfig(args.f_band[0], args.f_band[1], tuple(args.mode_band), args.trend)
    return energy.ModeEnergyConfig.around(f0, half, tuple(args.f_band), args.trend)


def _grid_for(chs: ChannelSet, n: tuple[int, int]):
    locs = np.array([c.location for c in chs if c.location is not None])
    if locs.size == 0:
        return None
    pad = 0.1 * max(np.ptp(locs[:, 0]), np.ptp(locs[:, 1]), 1.0)
    return (n[0], n[1], (locs[:, 0].min() - pad, locs[:, 0].max() + pad,
                         locs[:, 1].min() - pad, locs[:, 1].max() + pad))


def _energy(run: Run, chs: ChannelSet, sel, args, f0, prefix=""):
    psds = dict(zip([c.id for c in sel], _pmap(lambda c: _psd_for(c, args), sel, args.workers)))
    cfg = _energy_cfg(args, f0)
    rep = energy.energy_report(chs, psds, cfg, args.on_thresh, _grid_for(chs, tuple(args.grid)), args.idw_power)
    run.write(f"{prefix}energy.json", rep.to_json())
    run.write(f"{prefix}energy.csv", rep.to_csv())
    if rep.heatmap is not None:
        h = rep.heatmap
        run.write_pair(f"{prefix}heatmap", svg.heatmap(h.values, h.x, h.y, "Mode energy (%)", "x (km)",
                                                        "y (km)", "E %"), h.to_csv())
    return rep


def cmd_energy(run: Run, args):
    chs = _window(_load(run, args.input), args)
    if args.channel or args.kind:
        sel = _select(chs, args.channel, args.kind, args.rate)
    else:
        sel = [c for c in _select(chs, None, None, args.rate)
               if c.kind in (ChannelKind.VPHM, ChannelKind.IPHM)]
        if not sel:
            raise ParameterError("no voltage or current magnitude channel; pick one with --kind")
    f0 = args.f0
    if f0 is None and not args.mode_band:
        raise UsageError("energy needs --f0 or --mode-band")
    rep = _energy(run, chs, sel, args, f0)
    for c in rep.channels:
        print(f"{c.id},{c.e_percent:.2f},{c.scenario.value}")


def _causality(run: Run, chs, v_id, p_id, q_id, pf_id, args, prefix=""):
    v = chs[v_id]
    es = spectral.band_energy_series(v, tuple(args.band), args.window_len, args.hop, args.detrend)
    drivers = [energy.window_means(chs[i], es.times, es.window_len_s) for i in (p_id, q_id, pf_id)]
    rep = energy.correlate_energy_power(es, *drivers)
    rows = ["time_s,energy"] + [f"{t!r},{e!r}" for t, e in zip(es.times.tolist(), es.energy.tolist())]
    run.write(f"{prefix}energy_series.csv", "\n".join(rows) + "\n")
    for name, stem, label in (("P", "p", "P (MW)"), ("|Q|", "abs_q", "|Q| (MVAr)"), ("PF", "pf", "PF")):
        col = {"P": 1, "|Q|": 2, "PF": 3}[name]
        xs = [r[col] for r in rep.scatter]
        ys = [r[0] for r in rep.scatter]
        run.write_pair(f"{prefix}scatter_{stem}",
                       svg.scatter(xs, ys, f"Band energy vs {name}", label, "Band energy (pu^2)"),
                       rep.scatter_csv(name))
    run.write(f"{prefix}causality.json", json.dumps(_jsonable(rep.to_dict()), indent=1))
    return rep


def cmd_causality(run: Run, args):
    chs = _load(run, args.input)
    rep = _causality(run, chs, args.channel, args.p, args.q, args.pf, args)
    print(json.dumps(_jsonable(rep.to_dict())))


def cmd_synth(run: Run, args):
    sc = _scenario(run, args)
    chs, truth = synth.gen_network(sc)
    run.seed = sc.seed
    run.write_file("channels.csv", lambda path: write_channels(chs, path))
    run.write("truth.json", json.dumps(_jsonable(truth.to_dict()), indent=1))
    run.write("scenario.json", sc.to_json())
    print(f"wrote {len(chs)} channels to {run.out / 'channels.csv'}")


def _scenario(run: Run, args) -> synth.SynthScenario:
    if args.scenario:
        run.add_input(args.scenario)
        return synth.SynthScenario.from_json(Path(args.scenario).read_text())
    return synth.demo_scenario()


def _survey_window(sc: synth.SynthScenario, length: float = 1200.0):
    for a, b in sc.gate:
        start = a + 60.0
        if min(b, sc.duration_s) - start >= length:
            return start, start + length
    return 0.0, min(length, sc.duration_s)


def cmd_pipeline(run: Run, args):
    """Synthesize a scenario, then run every analysis on it."""
    sc = _scenario(run, args)
    run.seed = sc.seed
    chs, truth = synth.gen_network(sc)
    run.write("scenario.json", sc.to_json())
    run.write("truth.json", json.dumps(_jsonable(truth.to_dict()), indent=1))
    if args.write_channels:
        run.write_file("channels.csv", lambda path: write_channels(chs, path))
    src = truth.source
    low = min(sc.rates)
    tz = args.tz_offset
    report: dict = {"scenario_seed": sc.seed, "true_f0_hz": sc.f0_hz}

    # spectrograms per rate, gate edges marked in local time
    marks = [sc.t0 + e for a, b in sc.gate for e in (a, b) if e < sc.duration_s]
    for rate in sc.rates:
        ch = chs[synth.channel_id(src, ChannelKind.VPHM, rate)]
        sg = spectral.spectrogram(ch, args.window_len, args.hop)
        _spectrogram_artifacts(run, sg, f"spectrogram_{rate:g}sps", 0.0, rate / 2, tz, marks)

    # system-wide survey on a 20-minute window inside the first ON period
    a, b = _survey_window(sc)
    win = slice_set(chs, sc.t0 + a, sc.t0 + b)
    v_low = [c for c in win if c.kind is ChannelKind.VPHM and c.rate_sps == low]
    surveys = _pmap(lambda c: spectral.welch_preset(c, "paper-survey"), v_low, args.workers)
    series = [(p.freqs, p.density, c.id) for c, p in zip(v_low, surveys)]
    run.write_pair("survey_psd", svg.line_plot(series, "Welch PSD, 20-min window, 1-min segments"),
                   _long_csv(series))
    src_low = win[synth.channel_id(src, ChannelKind.VPHM, low)]
    yw = spectral.yule_walker_psd(src_low, args.order)
    f_yw = modal.estimate_mode_frequency(yw, (0.5, low / 2 - 0.5))
    run.write_pair("yule_walker_psd", svg.line_plot([(yw.freqs, yw.density, src_low.id)],
                                                    f"Yule-Walker AR({args.order}) PSD"), yw.to_csv())
    report["survey_window_s"] = [a, b]
    report["yule_walker_f0_hz"] = f_yw

    # alias reconciliation from the dominant peak at every rate + waveform envelope
    obs = []
    for rate in sc.rates:
        p = spectral.welch_preset(win[synth.channel_id(src, ChannelKind.VPHM, rate)], "paper-survey")
        f = modal.estimate_mode_frequency(p, (0.5, rate / 2 - p.df))
        if f is not None:
            obs.append(aliasing.AliasObservation(min(f, rate / 2), rate, args.alias_tol))
    pow_ch = synth.gen_pow(args.pow_duration, 960.0, 60.0, sc.f0_hz, 0.02, seed=sc.seed, t0=sc.t0 + a)
    env = spectral.hilbert_envelope(pow_ch, 60.0)
    pe = spectral.welch_psd(env, 10.0, 0.5, "hann", "linear")
    f_env = modal.estimate_mode_frequency(pe, (1.0, 30.0))
    run.write_pair("pow_envelope_psd", svg.line_plot([(pe.freqs, pe.density, "envelope")],
                                                     "PSD of point-on-wave envelope", xlim=(0, 60)),
                   pe.to_csv())
    if f_env is not None:
        obs.append(aliasing.AliasObservation(f_env, 960.0, args.alias_tol))
    cands = aliasing.resolve_candidates(obs, args.fmax) if obs else []
    run.write("alias_candidates.csv", _alias_table(cands, obs))
    report["alias_observations"] = [[o.f_obs_hz, o.fs_hz] for o in obs]
    report["alias_candidates_hz"] = [c.freq_hz for c in cands]

    # multiplicity and shape on the low-rate voltage magnitudes
    f_mode = f_yw if f_yw is not None else aliasing.alias_of(sc.f0_hz, low)
    args.band = [max(f_mode - 1.0, 0.1), min(f_mode + 1.0, low / 2)]
    report["modes"] = _modes(run, v_low, args, src_low.id, f_mode)

    # mode energy and scenario labels over V and I at the low rate
    args.method, args.preset = "welch", None
    args.mode_band = None
    sel = [c for c in win if c.kind in (ChannelKind.VPHM, ChannelKind.IPHM) and c.rate_sps == low]
    rep = _energy(run, win, sel, args, f_mode)
    report["energy"] = {c.id: [c.e_percent, c.scenario.value] for c in rep.channels}

    # causality over the whole record
    args.band = [f_mode - args.half_width, f_mode + args.half_width]
    crep = _causality(run, chs, synth.channel_id(src, ChannelKind.VPHM, low),
                      synth.channel_id(src, ChannelKind.P, low), synth.channel_id(src, ChannelKind.Q, low),
                      synth.channel_id(src, ChannelKind.PF, low), args)
    report["causality"] = crep.to_dict()
    run.write("report.json", json.dumps(_jsonable(report), indent=1))
    print(json.dumps(_jsonable({k: report[k] for k in ("yule_walker_f0_hz", "alias_candidates_hz")})))


def cmd_replay(run: Run, args):
    manifest = json.loads(Path(args.manifest).read_text())
    argv = list(manifest["argv"])
    # inputs given as relative paths are pinned to where the original run found them
    moved = {i["arg"]: i["path"] for i in manifest.get("inputs", []) if "arg" in i}
    argv = [moved.get(a, a) for a in argv]
    if args.workers is not None:
        argv = _set_flag(argv, "--workers", str(args.workers))
    return main(argv + ["--out", args.out])


def _set_flag(argv, flag, value):
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == flag:
            skip = True
            continue
        if a.startswith(flag + "="):
            continue
        out.append(a)
    return out + [flag, value]


# --------------------------------------------------------------------------
# argument parsing


DEFAULT_OUT = "gridosc-out"


def _add_common(p, default_out=DEFAULT_OUT):
    p.add_argument("--out", default=default_out, help=f"output directory (default: {default_out})")
    p.add_argument("--workers", type=int, default=1, help="worker threads for per-channel work")
    p.add_argument("--tz-offset", type=float, default=0.0, help="hours added to UTC for local-time labels")


def _add_window(p):
    p.add_argument("--t-start", type=float, help="seconds after record start")
    p.add_argument("--duration", type=float, help="window length in seconds")


def _add_selection(p):
    p.add_argument("--channel", action="append", help="channel id (repeatable)")
    p.add_argument("--kind", help="channel kind filter, e.g. VPHM")
    p.add_argument("--rate", type=float, help="reporting-rate filter (sps)")


def _add_welch(p):
    p.add_argument("--method", choices=["welch", "yule-walker"], default="welch")
    p.add_argument("--preset", choices=sorted(spectral.PRESETS), help="named Welch configuration")
    p.add_argument("--segment", type=float, default=60.0, help="Welch segment length (s)")
    p.add_argument("--overlap", type=float, default=0.5, help="Welch overlap fraction")
    p.add_argument("--window", choices=["hann", "rectangular"], default="hann")
    p.add_argument("--detrend", choices=["none", "mean", "linear"], default="linear")
    p.add_argument("--order", type=int, default=30, help="AR order for Yule-Walker")


def _add_modes(p):
    p.add_argument("--m", type=int, default=3, help="number of singular-value curves")
    p.add_argument("--prominence", type=float, help="peak ratio to in-band median (default 6 dB)")
    p.add_argument("--coincide-tol", type=float, help="Hz (default two bins)")
    p.add_argument("--shape-method", choices=["fdd", "cross"], default="fdd")


def _add_energy(p):
    p.add_argument("--f-band", type=float, nargs=2, default=list(energy.SURVEY_BAND_HZ), metavar=("F1", "F2"))
    p.add_argument("--mode-band", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--half-width", type=float, default=0.5, help="mode band half width around f0 (Hz)")
    p.add_argument("--trend", choices=["linear", "constant"], default="linear")
    p.add_argument("--on-thresh", type=float, default=energy.DEFAULT_ON_THRESHOLD)
    p.add_argument("--grid", type=int, nargs=2, default=[40, 30], metavar=("NX", "NY"))
    p.add_argument("--idw-power", type=float, default=2.0)


def _add_bandenergy(p):
    p.add_argument("--window-len", type=float, default=300.0, help="spectrogram window (s)")
    p.add_argument("--hop", type=float, help="hop between windows (s); default = window")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridosc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("psd", help="Welch or Yule-Walker PSDs")
    p.add_argument("input")
    _add_common(p); _add_window(p); _add_selection(p); _add_welch(p)
    p.add_argument("--band", type=float, nargs=2, help="peak search band (Hz)")
    p.add_argument("--xlim", type=float, nargs=2, help="plotted frequency range (Hz)")
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("spectrogram", help="windowed-FFT spectrogram of one channel")
    p.add_argument("input")
    _add_common(p); _add_window(p)
    p.add_argument("--channel")
    p.add_argument("--kind")
    p.add_argument("--rate", type=float)
    p.add_argument("--window-len", type=float, default=300.0)
    p.add_argument("--hop", type=float)
    p.add_argument("--window", choices=["hann", "rectangular"], default="hann")
    p.add_argument("--detrend", choices=["none", "mean", "linear"], default="linear")
    p.add_argument("--fmin", type=float, default=0.0)
    p.add_argument("--fmax", type=float)
    p.set_defaults(func=cmd_spectrogram)

    p = sub.add_parser("alias", help="resolve true frequency from multi-rate peaks")
    p.add_argument("action", nargs="?", choices=["resolve"], default="resolve")
    p.add_argument("--obs", action="append", help="f:fs[:tol] (repeatable)")
    p.add_argument("--fmax", type=float, default=aliasing.DEFAULT_FMAX_HZ)
    p.add_argument("--tol", type=float, default=aliasing.DEFAULT_TOLERANCE_HZ)
    _add_common(p, default_out=None)
    p.set_defaults(func=cmd_alias)

    p = sub.add_parser("modes", help="FDD singular values and mode shape")
    p.add_argument("input")
    _add_common(p); _add_window(p); _add_selection(p); _add_welch(p); _add_modes(p)
    p.add_argument("--band", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    p.add_argument("--reference")
    p.add_argument("--f0", type=float, help="shape frequency (default: detected mode)")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("energy", help="mode-energy percentages and heatmap")
    p.add_argument("input")
    _add_common(p); _add_window(p); _add_selection(p); _add_welch(p); _add_energy(p)
    p.add_argument("--f0", type=float)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("causality", help="band energy against P, |Q|, PF")
    p.add_argument("input")
    _add_common(p); _add_bandenergy(p)
    p.add_argument("--channel", required=True, help="voltage channel id")
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)
    p.add_argument("--pf", required=True)
    p.add_argument("--band", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    p.add_argument("--detrend", choices=["none", "mean", "linear"], default="linear")
    p.set_defaults(func=cmd_causality)

    p = sub.add_parser("synth", help="write a synthetic scenario as channel CSV")
    p.add_argument("--scenario", help="scenario JSON (default: built-in demo)")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pipeline", help="synthesize and analyze end to end")
    p.add_argument("--scenario", help="scenario JSON (default: built-in demo)")
    _add_common(p); _add_welch(p); _add_modes(p); _add_energy(p); _add_bandenergy(p)
    p.add_argument("--fmax", type=float, default=50.0, help="alias search ceiling (Hz)")
    p.add_argument("--alias-tol", type=float, default=aliasing.DEFAULT_TOLERANCE_HZ)
    p.add_argument("--pow-duration", type=float, default=30.0, help="synthetic waveform length (s)")
    p.add_argument("--write-channels", action="store_true", help="also write channels.csv")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("replay", help="re-run a manifest into a new directory")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (try --help)")
        if args.command == "replay":
            return cmd_replay(None, args)
        if getattr(args, "workers", 1) < 1:
            raise UsageError("--workers must be at least 1")
        run = Run(args, argv)
        args.func(run, args)
        run.finish()
        return EXIT_OK
    except (UsageError, ParameterError) as exc:
        code, err = EXIT_USAGE, exc
    except (FormatError, DataError, RangeError, ShapeReferenceError, FileNotFoundError) as exc:
        code, err = EXIT_DATA, exc
    except NumericalError as exc:
        code, err = EXIT_NUMERIC, exc
    msg = str(err).splitlines()[0] if str(err) else type(err).__name__
    print(f"gridosc: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
