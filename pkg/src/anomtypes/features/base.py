"""Feature matrices over sets of anomalous subsequences."""

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .._validation import SchemaError
from ..core import ZNORM_EPS, AnomalyInterval, TimeSeries

__all__ = [
    "FEATURE_SETS",
    "METRIC_FOR_SET",
    "FeatureMatrix",
    "MissingReferenceError",
    "slice_anomalies",
    "zscore_columns",
    "atomic_write_text",
]

FEATURE_SETS = ("Denoised", "Crafted", "Rocket", "Catch22")
METRIC_FOR_SET = {"Denoised": "DTW", "Crafted": "Euclidean", "Rocket": "Euclidean",
                  "Catch22": "Euclidean"}


class MissingReferenceError(KeyError):
    """An anomaly points at a series or channel that is not available."""

    def __str__(self):
        return str(self.args[0]) if self.args else "missing reference"


def atomic_write_text(path, text):
    """Write `text` to `path` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def slice_anomalies(anomalies, series):
    """Cut the values of every anomaly out of its parent series.

    Parameters
    ----------
    anomalies : sequence of AnomalyInterval
    series : mapping of series_id to TimeSeries, or a single TimeSeries

    Returns
    -------
    list of ndarray
        ``(length,)`` for channel-level anomalies; ``(length, d)`` with all
        channels for series-level ones. ``source_channels`` is provenance
        only and does not narrow the slice, so rows stay comparable.
    """
    if isinstance(series, TimeSeries):
        series = {series.series_id: series}
    out = []
    for a in anomalies:
        try:
            ts = series[a.series_id]
        except KeyError:
            raise MissingReferenceError(f"anomaly {a.anomaly_id} refers to unknown series "
                                        f"{a.series_id!r}") from None
        if a.end > ts.n:
            raise MissingReferenceError(
                f"anomaly {a.anomaly_id} ends at {a.end} beyond series length {ts.n}")
        try:
            if a.channel is not None:
                cols = [ts.channel_index(a.channel)]
            else:
                for c in a.source_channels:
                    ts.channel_index(c)
                cols = list(range(ts.d))
        except KeyError as exc:
            raise MissingReferenceError(f"anomaly {a.anomaly_id}: {exc.args[0]}") from None
        block = ts.values[a.start:a.end][:, cols]
        out.append(block[:, 0].copy() if len(cols) == 1 else block.copy())
    return out


def zscore_columns(F, mean=None, std=None):
    """Standardize columns (population std); near-constant columns become 0.

    Returns the standardized copy together with the statistics used, so a
    fitted transformer can apply them to new rows.
    """
    F = np.asarray(F, dtype=np.float64)
    if mean is None:
        mean = F.mean(axis=0)
        std = F.std(axis=0)
    safe = np.where(std > ZNORM_EPS, std, 1.0)
    Z = (F - mean) / safe
    Z[:, ~(std > ZNORM_EPS)] = 0.0
    return Z, mean, std


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Features of a set of anomalies, one row per anomaly.

    Attributes
    ----------
    anomaly_ids : tuple of str
        Back-references to the anomalies, in row order.
    feature_set : {'Denoised', 'Crafted', 'Rocket', 'Catch22'}
    metric : {'DTW', 'Euclidean'}
    data : ndarray of shape (n_rows, n_columns), or None for Denoised
    sequences : tuple of ndarray, or None
        Variable-length sequences (Denoised only), each ``(length,)`` or
        ``(length, d)``.
    columns : tuple of str
    meta : dict
        Provenance such as seed, kernel hash, threshold.
    """

    anomaly_ids: tuple
    feature_set: str
    metric: str
    data: np.ndarray = None
    sequences: tuple = None
    columns: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.feature_set not in FEATURE_SETS:
            raise ValueError(f"unknown feature set {self.feature_set!r}")
        if self.metric != METRIC_FOR_SET[self.feature_set]:
            raise ValueError(f"{self.feature_set} features require the "
                             f"{METRIC_FOR_SET[self.feature_set]} metric")
        object.__setattr__(self, "anomaly_ids", tuple(self.anomaly_ids))
        if self.sequences is not None:
            seqs = tuple(np.asarray(s, dtype=np.float64) for s in self.sequences)
            if len(seqs) != len(self.anomaly_ids):
                raise ValueError("one sequence per anomaly required")
            if not all(np.all(np.isfinite(s)) for s in seqs):
                raise ValueError("feature sequences contain NaN or Inf")
            object.__setattr__(self, "sequences", seqs)
        else:
            data = np.asarray(self.data, dtype=np.float64)
            if data.ndim != 2 or data.shape[0] != len(self.anomaly_ids):
                raise ValueError(f"data must have one row per anomaly, got {data.shape}")
            if not np.all(np.isfinite(data)):
                raise ValueError("feature matrix contains NaN or Inf")
            if self.columns and len(self.columns) != data.shape[1]:
                raise ValueError("column names do not match the data width")
            object.__setattr__(self, "data", data)
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def n_rows(self):
        return len(self.anomaly_ids)

    def __len__(self):
        return self.n_rows

    @property
    def is_sequence(self):
        return self.sequences is not None

    def rows(self):
        """Row objects suitable for the clustering routines."""
        return list(self.sequences) if self.is_sequence else self.data

    def meta_dict(self):
        return {
            "feature_set": self.feature_set,
            "metric": self.metric,
            "n_rows": self.n_rows,
            "columns": list(self.columns),
            **self.meta,
        }

    # -- persistence ------------------------------------------------------

    def save(self, path):
        """Write CSV (fixed width) or JSON lines (Denoised) plus ``.meta.json``.

        Returns the paths written.
        """
        path = Path(path)
        if self.is_sequence:
            lines = []
            for aid, s in zip(self.anomaly_ids, self.sequences):
                lines.append(json.dumps({"anomaly_id": aid, "values": s.tolist()}))
            atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))
        else:
            rows = [",".join(["anomaly_id", *self.columns])]
            for aid, r in zip(self.anomaly_ids, self.data):
                rows.append(",".join([_csv_field(aid), *(repr(float(v)) for v in r)]))
            atomic_write_text(path, "\n".join(rows) + "\n")
        meta_path = _meta_path(path)
        atomic_write_text(meta_path, json.dumps(self.meta_dict(), indent=2, sort_keys=True))
        return path, meta_path

    @classmethod
    def load(cls, path):
        path = Path(path)
        meta = json.loads(_meta_path(path).read_text())
        feature_set = meta.pop("feature_set")
        metric = meta.pop("metric")
        columns = tuple(meta.pop("columns", ()))
        meta.pop("n_rows", None)
        if metric == "DTW":
            ids, seqs = [], []
            for line in path.read_text().splitlines():
                if line.strip():
                    rec = json.loads(line)
                    ids.append(rec["anomaly_id"])
                    seqs.append(np.asarray(rec["values"], dtype=np.float64))
            return cls(tuple(ids), feature_set, metric, sequences=tuple(seqs),
                       columns=columns, meta=meta)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[0] != "anomaly_id":
                raise SchemaError(f"{path}: first column must be anomaly_id")
            ids, rows = [], []
            for rec in reader:
                ids.append(rec[0])
                rows.append([float(v) for v in rec[1:]])
        data = np.array(rows, dtype=np.float64).reshape(len(ids), len(header) - 1)
        return cls(tuple(ids), feature_set, metric, data=data,
                   columns=tuple(header[1:]), meta=meta)


def _meta_path(path):
    return path.with_name(path.name + ".meta.json")


def _csv_field(text):
    if any(c in text for c in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def anomaly_ids(anomalies):
    return tuple(a.anomaly_id if isinstance(a, AnomalyInterval) else str(a) for a in anomalies)
