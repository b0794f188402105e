"""Measurement data model, CSV loading/writing, validation and windowing.

A record is a :class:`ChannelSet` of uniformly sampled :class:`PhasorChannel`
streams.  Gaps are always explicit NaN samples.  Timestamps are UTC seconds.

CSV layout (one file may mix reporting rates)::

    id,CH1,CH2,...
    kind,VPHM,IPHM,...
    rate_sps,30,30,...
    substation,SUB_A,SUB_A,...
    location,12.5;3.0,12.5;3.0,...        (cells may be blank)
    2020-07-01T15:50:00+00:00,1.0001,0.52,...
    ,1.0003,0.51,...

Only the first sample row carries a timestamp; later rows may carry one, in
which case the timestamps must increase.  Empty cells are NaN.  Columns at a
lower rate than the fastest one are blank-padded after their last sample.
Optional ``# key=value`` lines before the header hold free-form metadata.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import os
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import DataError, FormatError, ParameterError, RangeError

_HEADER_ROWS = ("id", "kind", "rate_sps", "substation", "location")


class ChannelKind(str, enum.Enum):
    VPHM = "VPHM"
    VPHA = "VPHA"
    IPHM = "IPHM"
    IPHA = "IPHA"
    P = "P"
    Q = "Q"
    PF = "PF"
    POW = "POW"

    @property
    def is_voltage(self) -> bool:
        return self in (ChannelKind.VPHM, ChannelKind.VPHA)

    @property
    def is_current(self) -> bool:
        return self in (ChannelKind.IPHM, ChannelKind.IPHA)


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class PhasorChannel:
    """One uniformly sampled measurement stream.

    ``values`` is stored as a read-only float array; magnitudes in per-unit,
    angles unwrapped in radians, P/Q in MW/MVAr.
    """

    id: str
    substation: str
    kind: ChannelKind
    rate_sps: float
    t0: float
    values: np.ndarray
    location: tuple[float, float] | None = None

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, ChannelKind) else _parse_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        rate = float(self.rate_sps)
        if not (rate > 0 and math.isfinite(rate)):
            raise ParameterError(f"rate_sps must be positive, got {self.rate_sps!r}")
        object.__setattr__(self, "rate_sps", rate)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "values", _frozen_array(self.values))
        if self.location is not None:
            x, y = self.location
            object.__setattr__(self, "location", (float(x), float(y)))
        if kind is ChannelKind.PF:
            v = self.values[~np.isnan(self.values)]
            if v.size and (v.min() < -1.0 or v.max() > 1.0):
                raise DataError(f"channel {self.id}: power factor outside [-1, 1]")

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, PhasorChannel):
            return NotImplemented
        return (
            self.id == other.id
            and self.substation == other.substation
            and self.kind is other.kind
            and self.rate_sps == other.rate_sps
            and self.t0 == other.t0
            and self.location == other.location
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values, equal_nan=True))
        )

    @property
    def duration(self) -> float:
        return self.values.size / self.rate_sps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.values.size) / self.rate_sps

    def with_values(self, values, **changes) -> "PhasorChannel":
        return replace(self, values=values, **changes)


@dataclass(frozen=True)
class ChannelSet:
    """Channels keyed by id, in insertion order."""

    channels: Mapping[str, PhasorChannel]
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        chans = dict(self.channels)
        locations: dict[str, tuple[float, float] | None] = {}
        for key, ch in chans.items():
            if key != ch.id:
                raise ParameterError(f"channel keyed as {key!r} has id {ch.id!r}")
            if ch.location is not None:
                prev = locations.setdefault(ch.substation, ch.location)
                if prev != ch.location:
                    raise DataError(
                        f"substation {ch.substation!r} has inconsistent locations "
                        f"{prev} and {ch.location}"
                    )
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @classmethod
    def from_channels(cls, channels: Iterable[PhasorChannel], metadata=None) -> "ChannelSet":
        out: dict[str, PhasorChannel] = {}
        dupes = []
        for ch in channels:
            if ch.id in out:
                dupes.append(ch.id)
            out[ch.id] = ch
        if dupes:
            raise FormatError(f"duplicate channel id(s): {', '.join(sorted(set(dupes)))}")
        return cls(out, metadata or {})

    def __len__(self) -> int:
        return len(self.channels)

    def __iter__(self) -> Iterator[PhasorChannel]:
        return iter(self.channels.values())

    def __getitem__(self, key: str) -> PhasorChannel:
        return self.channels[key]

    def __contains__(self, key) -> bool:
        return key in self.channels

    @property
    def ids(self) -> list[str]:
        return list(self.channels)

    def select(self, predicate) -> "ChannelSet":
        return ChannelSet({k: c for k, c in self.channels.items() if predicate(c)}, self.metadata)

    def location_of(self, substation: str) -> tuple[float, float] | None:
        for ch in self:
            if ch.substation == substation and ch.location is not None:
                return ch.location
        return None


@dataclass(frozen=True)
class ValidationReport:
    n_samples: int
    gaps: int
    nan_fraction: float
    duration: float
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.warnings and self.gaps == 0


def _parse_kind(text) -> ChannelKind:
    try:
        return ChannelKind(str(text).strip().upper())
    except ValueError:
        raise FormatError(f"unknown channel kind {text!r}") from None


def _parse_time(text: str) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise FormatError(f"bad timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def format_time(t: float) -> str:
    """ISO-8601 UTC string for ``t`` (UTC seconds)."""
    return datetime.fromtimestamp(t, tz=timezone.utc).isoformat()


def _parse_location(text: str, column: str):
    text = text.strip()
    if not text:
        return None
    parts = text.split(";")
    if len(parts) != 2:
        raise FormatError(f"location of column {column!r} must be 'x;y', got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise FormatError(f"location of column {column!r} is not numeric: {text!r}") from None


def load_channels(path: str | os.PathLike, format: str = "csv") -> ChannelSet:
    """Read a channel CSV file into a :class:`ChannelSet`."""
    if format != "csv":
        raise ParameterError(f"unsupported format {format!r}")
    with open(path, newline="") as fh:
        return read_channels_csv(fh)


def read_channels_csv(fh) -> ChannelSet:
    metadata: dict[str, str] = {}
    lines = iter(fh)
    header_lines = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            metadata[key.strip()] = value.strip()
            continue
        header_lines.append(line)
        break
    for line in lines:
        header_lines.append(line)
        if len(header_lines) == len(_HEADER_ROWS):
            break
    rows = list(csv.reader(header_lines))
    if len(rows) < len(_HEADER_ROWS):
        raise FormatError(f"header truncated: expected {len(_HEADER_ROWS)} rows, got {len(rows)}")
    for row, name in zip(rows, _HEADER_ROWS):
        if not row or row[0].strip() != name:
            got = row[0] if row else ""
            raise FormatError(f"header row {name!r} missing (found {got!r})")
    ids = [c.strip() for c in rows[0][1:]]
    ncol = len(ids)
    if ncol == 0:
        raise FormatError("no data columns in header row 'id'")
    for row, name in zip(rows[1:], _HEADER_ROWS[1:]):
        if len(row) - 1 < ncol and name != "location":
            raise FormatError(f"header row {name!r} has {len(row) - 1} cells, expected {ncol}")
    seen, dupes = set(), []
    for i in ids:
        if not i:
            raise FormatError("empty channel id in header row 'id'")
        if i in seen:
            dupes.append(i)
        seen.add(i)
    if dupes:
        raise FormatError(f"duplicate channel id(s): {', '.join(sorted(set(dupes)))}")
    kinds = [_parse_kind(k) for k in rows[1][1 : ncol + 1]]
    rates = []
    for cid, cell in zip(ids, rows[2][1 : ncol + 1]):
        try:
            r = float(cell)
        except ValueError:
            raise FormatError(f"rate_sps of column {cid!r} is not a number: {cell!r}") from None
        if not (r > 0 and math.isfinite(r)):
            raise FormatError(f"rate_sps of column {cid!r} must be positive: {cell!r}")
        rates.append(r)
    subs = [s.strip() for s in rows[3][1 : ncol + 1]]
    loc_cells = rows[4][1:] + [""] * (ncol - len(rows[4]) + 1)
    locs = [_parse_location(c, cid) for c, cid in zip(loc_cells, ids)]

    body = list(csv.reader(lines))
    body = [r for r in body if len(r) > 1 or (r and r[0].strip())]
    if not body:
        raise FormatError("no sample rows")
    if not body[0][0].strip():
        raise FormatError("first sample row must carry the start timestamp")
    t0 = _parse_time(body[0][0])
    last_t = t0
    data = np.full((len(body), ncol), np.nan)
    for r, row in enumerate(body):
        stamp = row[0].strip()
        if r and stamp:
            t = _parse_time(stamp)
            if t <= last_t:
                raise DataError(f"non-monotonic timestamp at sample row {r + 1}: {stamp!r}")
            last_t = t
        if len(row) - 1 > ncol:
            raise FormatError(f"sample row {r + 1} has {len(row) - 1} cells, expected {ncol}")
        for c, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell:
                try:
                    data[r, c] = float(cell)
                except ValueError:
                    raise FormatError(
                        f"non-numeric sample {cell!r} in column {ids[c]!r}, row {r + 1}"
                    ) from None

    max_rate = max(rates)
    duration = len(body) / max_rate
    channels = []
    for c in range(ncol):
        n = int(round(duration * rates[c]))
        col = data[:, c]
        if np.any(~np.isnan(col[n:])):
            raise FormatError(
                f"column {ids[c]!r} at {rates[c]:g} sps has samples beyond its {n}-sample extent"
            )
        channels.append(
            PhasorChannel(
                id=ids[c],
                substation=subs[c],
                kind=kinds[c],
                rate_sps=rates[c],
                t0=t0,
                values=col[:n],
                location=locs[c],
            )
        )
    return ChannelSet.from_channels(channels, metadata)


def write_channels(chs: ChannelSet, path: str | os.PathLike) -> None:
    """Write ``chs`` in the CSV layout read by :func:`load_channels`.

    Values are written with ``repr`` so a round trip is bit-exact.
    """
    with open(path, "w", newline="") as fh:
        fh.write(channels_to_csv(chs))


def channels_to_csv(chs: ChannelSet) -> str:
    channels = list(chs)
    if not channels:
        raise ParameterError("cannot write an empty ChannelSet")
    t0s = {c.t0 for c in channels}
    if len(t0s) != 1:
        raise ParameterError("all channels in one file must share t0")
    max_rate = max(c.rate_sps for c in channels)
    nrows = max(int(round(c.duration * max_rate)) for c in channels)
    buf = io.StringIO()
    for k, v in chs.metadata.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id"] + [c.id for c in channels])
    w.writerow(["kind"] + [c.kind.value for c in channels])
    w.writerow(["rate_sps"] + [repr(c.rate_sps) for c in channels])
    w.writerow(["substation"] + [c.substation for c in channels])
    w.writerow(
        ["location"]
        + [f"{c.location[0]!r};{c.location[1]!r}" if c.location else "" for c in channels]
    )
    cols = [[("" if math.isnan(v) else repr(v)) for v in c.values.tolist()] for c in channels]
    first = _format_t0(channels[0].t0)
    for r in range(nrows):
        cells = [first if r == 0 else ""]
        cells.extend(col[r] if r < len(col) else "" for col in cols)
        w.writerow(cells)
    return buf.getvalue()


def _format_t0(t0: float) -> str:
    iso = format_time(t0)
    # fall back to raw seconds when ISO cannot reproduce t0 exactly
    return iso if _parse_time(iso) == t0 else repr(t0)


def validate_channel(ch: PhasorChannel) -> ValidationReport:
    """Count NaN gaps and report duration; never raises."""
    n = len(ch)
    warnings = []
    if n == 0:
        return ValidationReport(0, 0, 0.0, 0.0, ("empty channel",))
    nan = np.isnan(ch.values)
    n_nan = int(nan.sum())
    # a gap starts wherever a NaN follows a finite sample (or opens the record)
    starts = nan & ~np.concatenate(([False], nan[:-1]))
    gaps = int(starts.sum())
    if n_nan == n:
        warnings.append("all samples are NaN")
    return ValidationReport(n, gaps, n_nan / n, n / ch.rate_sps, tuple(warnings))


def slice_window(ch: PhasorChannel, t_start: float, t_end: float) -> PhasorChannel:
    """Return the part of ``ch`` covering ``[t_start, t_end)``.

    Bounds are snapped to the nearest sample instant; half a sample of slack is
    allowed so that re-slicing a slice with the same bounds is a no-op.
    """
    if not t_start < t_end:
        raise RangeError(f"t_start ({t_start}) must precede t_end ({t_end})")
    half = 0.5 / ch.rate_sps
    if t_start < ch.t0 - half or t_end > ch.t0 + ch.duration + half:
        raise RangeError(
            f"window [{t_start}, {t_end}) outside channel {ch.id} extent "
            f"[{ch.t0}, {ch.t0 + ch.duration}]"
        )
    i0 = max(0, int(round((t_start - ch.t0) * ch.rate_sps)))
    i1 = min(len(ch), int(round((t_end - ch.t0) * ch.rate_sps)))
    if i1 <= i0:
        raise RangeError(f"window [{t_start}, {t_end}) holds no samples of {ch.id}")
    if i0 == 0 and i1 == len(ch):
        return ch
    return replace(ch, t0=ch.t0 + i0 / ch.rate_sps, values=ch.values[i0:i1])


def slice_set(chs: ChannelSet, t_start: float, t_end: float) -> ChannelSet:
    return ChannelSet(
        {k: slice_window(c, t_start, t_end) for k, c in chs.channels.items()}, chs.metadata
    )
