"""Time-series data model, CSV ingestion and shared interval primitives."""

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._validation import SchemaError, SpacingError, check_1d, check_scalar_int

__all__ = [
    "TimeSeries",
    "Subsequence",
    "AnomalyInterval",
    "CsvSchema",
    "MIN_ANOMALY_LENGTH",
    "ZNORM_EPS",
    "load_csv",
    "write_csv",
    "write_fill_mask",
    "znormalize",
    "moving_average",
    "interval_iou",
    "anomalies_to_json",
    "anomalies_from_json",
]

MIN_ANOMALY_LENGTH = 5
ZNORM_EPS = 1e-8
DETECTORS = ("MDI", "DAMP")


def _frozen(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Equidistantly sampled observations with one or more channels.

    Parameters
    ----------
    timestamps : array-like of int, shape (n,)
        Epoch seconds, strictly increasing with constant spacing.
    values : array-like of float, shape (n, d)
        One column per channel. A 1-D array is read as a single channel.
    channel_names : sequence of str, optional
        Defaults to ``ch0 .. ch{d-1}``.
    sampling_interval : int, optional
        Spacing in seconds. Inferred from `timestamps` when omitted.
    series_id : str
        Identifier used to link anomalies back to their source.
    fill_mask : array-like of bool, shape (n, d), optional
        True where a value was missing in the source and has been filled.
    """

    timestamps: np.ndarray
    values: np.ndarray
    channel_names: tuple = ()
    sampling_interval: Optional[int] = None
    series_id: str = "series"
    fill_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[1] < 1:
            raise ValueError(f"values must be (n, d) with d >= 1, got shape {values.shape}")
        n, d = values.shape
        if n < 1:
            raise ValueError("a time series needs at least one observation")
        if not np.all(np.isfinite(values)):
            raise ValueError("values contain NaN or Inf; fill gaps before construction")
        ts = np.asarray(self.timestamps)
        if ts.shape != (n,):
            raise ValueError(f"expected {n} timestamps, got shape {ts.shape}")
        ts = ts.astype(np.int64)
        diffs = np.diff(ts)
        if n > 1:
            if np.any(diffs <= 0):
                raise SchemaError("timestamps must be strictly increasing")
            if diffs.min() != diffs.max():
                raise SpacingError("timestamps are not equidistant")
            c = int(diffs[0])
        else:
            c = int(self.sampling_interval or 1)
        if self.sampling_interval is not None and n > 1 and int(self.sampling_interval) != c:
            raise SpacingError(
                f"sampling_interval={self.sampling_interval} does not match spacing {c}"
            )
        names = tuple(self.channel_names) if self.channel_names else tuple(
            f"ch{i}" for i in range(d)
        )
        if len(names) != d:
            raise ValueError(f"{len(names)} channel names for {d} channels")
        if self.fill_mask is None:
            mask = np.zeros((n, d), dtype=bool)
        else:
            mask = np.asarray(self.fill_mask, dtype=bool)
            if mask.ndim == 1:
                mask = mask[:, None]
            if mask.shape != (n, d):
                raise ValueError(f"fill_mask must have shape {(n, d)}, got {mask.shape}")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "sampling_interval", c)
        object.__setattr__(self, "fill_mask", _frozen(mask))

    @classmethod
    def from_array(cls, values, *, sampling_interval=300, start=0, **kwargs):
        """Build a series from raw values on a synthetic epoch grid."""
        values = np.asarray(values, dtype=np.float64)
        n = values.shape[0]
        timestamps = start + sampling_interval * np.arange(n, dtype=np.int64)
        return cls(timestamps, values, sampling_interval=sampling_interval, **kwargs)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    @property
    def is_univariate(self):
        return self.d == 1

    def __len__(self):
        return self.n

    def channel_index(self, channel):
        """Resolve a channel given by name or position."""
        if isinstance(channel, str):
            try:
                return self.channel_names.index(channel)
            except ValueError:
                raise KeyError(f"series {self.series_id!r} has no channel {channel!r}") from None
        idx = int(channel)
        if not 0 <= idx < self.d:
            raise KeyError(f"series {self.series_id!r} has no channel index {idx}")
        return idx

    def channel(self, channel):
        """Return a single channel as a univariate series."""
        idx = self.channel_index(channel)
        return TimeSeries(
            self.timestamps,
            self.values[:, idx],
            channel_names=(self.channel_names[idx],),
            series_id=self.series_id,
            fill_mask=self.fill_mask[:, idx],
        )

    def select(self, channels, *, series_id=None):
        idx = [self.channel_index(c) for c in channels]
        return TimeSeries(
            self.timestamps,
            self.values[:, idx],
            channel_names=tuple(self.channel_names[i] for i in idx),
            series_id=series_id or self.series_id,
            fill_mask=self.fill_mask[:, idx],
        )

    def with_values(self, values, channel_names=None):
        """Same time axis, different channels (used by embeddings)."""
        return TimeSeries(
            self.timestamps,
            values,
            channel_names=channel_names or (),
            series_id=self.series_id,
        )


@dataclass(frozen=True, eq=False)
class Subsequence:
    """Contiguous slice ``[start, end)`` of a parent series."""

    parent: TimeSeries
    start: int
    end: int
    channel: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.start < self.end <= self.parent.n:
            raise ValueError(
                f"invalid subsequence [{self.start}, {self.end}) for series of length "
                f"{self.parent.n}"
            )
        if self.channel is not None:
            self.parent.channel_index(self.channel)

    def __len__(self):
        return self.end - self.start

    @property
    def values(self):
        """``(length,)`` for a single channel, ``(length, d)`` otherwise."""
        block = self.parent.values[self.start:self.end]
        if self.channel is not None:
            return block[:, self.channel]
        if self.parent.d == 1:
            return block[:, 0]
        return block


@dataclass(frozen=True)
class AnomalyInterval:
    """A detected anomalous subsequence ``[start, end)``.

    `channel` is set for univariate detections on one channel and None for
    detections on a whole multivariate series. `source_channels` keeps the
    provenance of intervals merged from several per-channel detections.
    """

    start: int
    end: int
    score: float
    detector: str
    channel: Optional[int] = None
    series_id: str = "series"
    source_channels: tuple = field(default=(), compare=False)

    def __post_init__(self):
        start = check_scalar_int(self.start, "start", min_val=0)
        end = check_scalar_int(self.end, "end")
        if end - start < MIN_ANOMALY_LENGTH:
            raise ValueError(
                f"anomaly [{start}, {end}) is shorter than {MIN_ANOMALY_LENGTH} points"
            )
        score = float(self.score)
        if not math.isfinite(score):
            raise ValueError("anomaly score must be finite")
        if self.detector not in DETECTORS:
            raise ValueError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)
        object.__setattr__(self, "score", score)
        if self.channel is not None:
            object.__setattr__(self, "channel", int(self.channel))
        object.__setattr__(self, "source_channels", tuple(int(c) for c in self.source_channels))

    def __len__(self):
        return self.end - self.start

    @property
    def anomaly_id(self):
        ch = "all" if self.channel is None else str(self.channel)
        return f"{self.series_id}:{ch}:{self.detector}:{self.start}-{self.end}"

    def subsequence(self, series):
        return Subsequence(series, self.start, self.end, self.channel)

    def to_dict(self):
        out = {
            "series_id": self.series_id,
            "channel": self.channel,
            "start": self.start,
            "end": self.end,
            "score": self.score,
            "detector": self.detector,
        }
        if self.source_channels:
            out["source_channels"] = list(self.source_channels)
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(
            start=d["start"],
            end=d["end"],
            score=d["score"],
            detector=d["detector"],
            channel=d.get("channel"),
            series_id=d.get("series_id", "series"),
            source_channels=tuple(d.get("source_channels", ())),
        )


def anomalies_to_json(anomalies, path=None):
    """Serialise anomalies as a JSON array; write to `path` if given."""
    text = json.dumps([a.to_dict() for a in anomalies], indent=1)
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")
    return text


def anomalies_from_json(source):
    """Read anomalies from a path or a JSON string."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("[")):
        source = Path(source).read_text(encoding="utf-8")
    return [AnomalyInterval.from_dict(d) for d in json.loads(source)]


# --------------------------------------------------------------------------- CSV


@dataclass
class CsvSchema:
    """Column mapping for :func:`load_csv`.

    `timestamp` names the time column (default: the first column). `channels`
    restricts and orders the value columns (default: all remaining columns).
    """

    timestamp: Optional[str] = None
    channels: Optional[Sequence[str]] = None
    series_id: Optional[str] = None
    max_jitter: Optional[float] = None

    @classmethod
    def coerce(cls, schema):
        if schema is None:
            return cls()
        if isinstance(schema, cls):
            return schema
        return cls(**dict(schema))


def _parse_timestamp(text):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        f = float(text)
    except ValueError:
        pass
    else:
        if not math.isfinite(f):
            raise SchemaError(f"unparseable timestamp {text!r}")
        return int(round(f))
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise SchemaError(f"unparseable timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(round(dt.timestamp()))


def _parse_value(text, row, col):
    text = text.strip()
    if text == "" or text.lower() in ("nan", "na", "null"):
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"non-numeric value {text!r} at row {row}, column {col!r}") from None


def _grid_positions(timestamps, max_jitter):
    diffs = np.diff(timestamps)
    if np.any(diffs <= 0):
        bad = int(np.argmax(diffs <= 0)) + 1
        raise SchemaError(f"timestamps are not strictly increasing at row {bad}")
    vals, counts = np.unique(diffs, return_counts=True)
    c = int(vals[np.argmax(counts)])
    offsets = (timestamps - timestamps[0]) / c
    slots = np.rint(offsets).astype(np.int64)
    jitter = np.abs(timestamps - (timestamps[0] + slots * c))
    # exactly half a sample off is ambiguous, hence >= for the default limit
    off = 2 * jitter >= c if max_jitter is None else jitter > max_jitter
    if np.any(off):
        bad = int(np.argmax(off))
        raise SpacingError(
            f"timestamp at row {bad} deviates {jitter[bad]} s from the {c} s grid"
        )
    if np.any(np.diff(slots) <= 0):
        bad = int(np.argmax(np.diff(slots) <= 0)) + 1
        raise SpacingError(f"rows {bad - 1} and {bad} fall into the same {c} s sample slot")
    return c, slots


def load_csv(path, schema=None):
    """Read an equidistant time series from CSV.

    The first row is a header. Timestamps may be integer epoch seconds or
    ISO-8601 strings. Rows may jitter by less than half a sample around the
    regular grid; whole missing samples are inserted as gaps. Empty cells and
    gaps are filled by linear interpolation between the nearest valid
    neighbours (held constant beyond the first/last valid value) and flagged
    in ``fill_mask``.

    Raises
    ------
    SchemaError
        Missing columns, unparseable cells or non-monotonic timestamps.
    SpacingError
        Timestamps that cannot be placed on a regular grid.
    """
    schema = CsvSchema.coerce(schema)
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        rows = [r for r in reader if r and any(cell.strip() for cell in r)]
    if len(header) < 2:
        raise SchemaError(f"{path} needs a timestamp column and at least one value column")
    t_col = 0 if schema.timestamp is None else _column(header, schema.timestamp, path)
    if schema.channels is None:
        v_cols = [i for i in range(len(header)) if i != t_col]
    else:
        v_cols = [_column(header, c, path) for c in schema.channels]
    if not rows:
        raise SchemaError(f"{path} has no data rows")

    timestamps = np.empty(len(rows), dtype=np.int64)
    raw = np.empty((len(rows), len(v_cols)))
    for r, row in enumerate(rows):
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        timestamps[r] = _parse_timestamp(row[t_col])
        for j, col in enumerate(v_cols):
            raw[r, j] = _parse_value(row[col], r, header[col])

    if len(rows) > 1:
        c, slots = _grid_positions(timestamps, schema.max_jitter)
    else:
        c, slots = 1, np.zeros(1, dtype=np.int64)
    n = int(slots[-1]) + 1
    values = np.full((n, len(v_cols)), np.nan)
    values[slots] = raw
    mask = np.isnan(values)
    idx = np.arange(n)
    for j in range(values.shape[1]):
        ok = ~mask[:, j]
        if not ok.any():
            raise SchemaError(f"column {header[v_cols[j]]!r} has no numeric values")
        if not ok.all():
            values[:, j] = np.interp(idx, idx[ok], values[ok, j])
    return TimeSeries(
        timestamps[0] + c * idx,
        values,
        channel_names=tuple(header[i] for i in v_cols),
        sampling_interval=c,
        series_id=schema.series_id or path.stem,
        fill_mask=mask,
    )


def _column(header, name, path):
    if isinstance(name, int):
        if not 0 <= name < len(header):
            raise SchemaError(f"{path} has no column index {name}")
        return name
    try:
        return header.index(name)
    except ValueError:
        raise SchemaError(f"{path} has no column {name!r}") from None


def write_csv(ts, path, *, blank_filled=False):
    """Write `ts` in the format read by :func:`load_csv`.

    Floats are written with ``repr`` so values round-trip exactly. With
    `blank_filled`, filled cells are written empty instead.
    """
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", *ts.channel_names])
        for i in range(ts.n):
            cells = [
                "" if blank_filled and ts.fill_mask[i, j] else repr(float(ts.values[i, j]))
                for j in range(ts.d)
            ]
            w.writerow([int(ts.timestamps[i]), *cells])


def write_fill_mask(ts, path):
    """Sidecar CSV listing the ``(row, channel)`` cells that were filled."""
    rows, cols = np.nonzero(ts.fill_mask)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "channel"])
        for r, c in zip(rows, cols):
            w.writerow([int(r), ts.channel_names[c]])


# ---------------------------------------------------------------- vector helpers


def znormalize(x):
    """Zero mean, unit population standard deviation.

    Inputs whose standard deviation is at most ``1e-8`` map to all zeros.
    """
    x = check_1d(x)
    std = x.std()
    if std <= ZNORM_EPS:
        return np.zeros_like(x)
    return (x - x.mean()) / std


def moving_average(x, w):
    """Centered moving average; the window is truncated at both edges.

    For even `w` the window reaches one step further to the right.
    """
    x = check_1d(x)
    w = check_scalar_int(w, "w", min_val=1)
    if w > x.shape[0]:
        raise ValueError(f"window {w} is longer than the input ({x.shape[0]})")
    left = (w - 1) // 2
    right = w // 2
    csum = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(x.shape[0])
    lo = np.maximum(idx - left, 0)
    hi = np.minimum(idx + right + 1, x.shape[0])
    out = (csum[hi] - csum[lo]) / (hi - lo)
    # cumsum differences are not exact; constant input must stay constant
    if np.all(x == x[0]):
        out[:] = x[0]
    return out


def interval_iou(a, b):
    """Intersection over union of two half-open index intervals.

    Accepts anything with ``start``/``end`` attributes or ``(start, end)``
    pairs.
    """
    a0, a1 = _bounds(a)
    b0, b1 = _bounds(b)
    inter = max(0, min(a1, b1) - max(a0, b0))
    if inter == 0:
        return 0.0
    union = (a1 - a0) + (b1 - b0) - inter
    return inter / union


def _bounds(iv):
    if hasattr(iv, "start") and hasattr(iv, "end"):
        return int(iv.start), int(iv.end)
    s, e = iv
    return int(s), int(e)
