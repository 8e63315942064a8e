"""Synthetic multi-subsystem telemetry with planted, synchronized anomalies."""

import json
from pathlib import Path

import numpy as np

from .core import TimeSeries, write_csv
from .features.base import atomic_write_text

__all__ = ["PLANTED_KINDS", "make_series", "write_fixture"]

PLANTED_KINDS = ("peak", "flat", "shift", "drop", "noise")
DAY = 288


def _plant(x, kind, start, length, rng):
    seg = slice(start, start + length)
    amp = np.ptp(x) if np.ptp(x) > 0 else 1.0
    if kind == "peak":
        x[seg] += amp * np.hanning(length) * rng.uniform(1.0, 1.5)
    elif kind == "flat":
        x[seg] = x[start]
    elif kind == "shift":
        x[seg] += amp * rng.uniform(0.6, 0.9)
    elif kind == "drop":
        x[seg] -= amp * np.hanning(length) * rng.uniform(1.0, 1.5)
    elif kind == "noise":
        x[seg] += rng.normal(0.0, 0.3 * amp, length)
    else:
        raise ValueError(f"unknown anomaly kind {kind!r}")


def make_series(n=20_000, d=3, *, n_events=6, seed=0, series_id="series", t0=2880):
    """One multivariate series and the list of planted events.

    Channels are daily cycles with channel-specific phase and amplitude plus
    weak noise. Each event hits all channels at the same time, except that
    one channel per event may be skipped, which yields both synchronized and
    channel-specific anomalies.

    Returns
    -------
    ts : TimeSeries
    events : list of dict
        ``kind``, ``start``, ``length`` and affected ``channels``.
    """
    if n - t0 < n_events * 3 * DAY:
        raise ValueError(f"n={n} leaves too little room for {n_events} events after t0={t0}; "
                         f"need at least {t0 + n_events * 3 * DAY}")
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    values = np.empty((n, d))
    for c in range(d):
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(1.0, 3.0)
        values[:, c] = (amp * np.sin(2 * np.pi * t / DAY + phase)
                        + 0.3 * amp * np.sin(4 * np.pi * t / DAY + 2 * phase)
                        + rng.normal(0, 0.05 * amp, n) + rng.uniform(-5, 5))
    span = (n - t0) // n_events
    events = []
    for e in range(n_events):
        kind = PLANTED_KINDS[e % len(PLANTED_KINDS)]
        length = int(rng.integers(DAY // 2, DAY))
        start = int(t0 + e * span + rng.integers(DAY, max(DAY + 1, span - length - DAY)))
        skip = int(rng.integers(d)) if d > 1 and rng.random() < 0.4 else None
        chans = [c for c in range(d) if c != skip]
        for c in chans:
            _plant(values[:, c], kind, start, length, rng)
        events.append({"kind": kind, "start": start, "length": length, "channels": chans})
    ts = TimeSeries.from_array(values, sampling_interval=300, start=1_577_836_800,
                               series_id=series_id,
                               channel_names=tuple(f"{series_id}_s{c}" for c in range(d)))
    return ts, events


def write_fixture(out_dir, *, subsystems=("AMS", "NDS", "TCS"), n=20_000, d=3, n_events=6,
                  seed=0):
    """Write one CSV per subsystem, a grouping file and the planted-event truth.

    Returns the list of CSV paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths, truth = [], {}
    for k, name in enumerate(subsystems):
        ts, events = make_series(n, d, n_events=n_events, seed=seed * 1000 + k, series_id=name)
        path = out / f"{name}.csv"
        write_csv(ts, path)
        paths.append(path)
        truth[name] = events
    atomic_write_text(out / "planted.json", json.dumps(truth, indent=2, sort_keys=True))
    groups = {name: [name] for name in subsystems}
    atomic_write_text(out / "groups.json", json.dumps(groups, indent=2, sort_keys=True))
    return paths
