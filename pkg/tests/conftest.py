import sys

import numpy as np
import pytest

from anomtypes.core import AnomalyInterval, TimeSeries


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_anomaly(start, end, channel=0, series_id="s", detector="DAMP", score=1.0):
    return AnomalyInterval(start, end, score, detector, channel=channel, series_id=series_id)


def blob_series(n_per=6, length=40, seed=0):
    """Series with two visually distinct shapes planted at known offsets.

    Returns the series and a list of (AnomalyInterval, label).
    """
    rng = np.random.default_rng(seed)
    n = 2 * n_per * (length + 20) + 20
    x = rng.normal(0, 0.01, n)
    t = np.linspace(0, 1, length)
    out = []
    pos = 10
    for k in range(2 * n_per):
        label = k % 2
        shape = np.sin(2 * np.pi * t) if label == 0 else np.where(t < 0.5, 1.0, -1.0) * 3 + t * 4
        x[pos:pos + length] += shape * rng.uniform(0.9, 1.1) + rng.normal(0, 0.02, length)
        out.append((AnomalyInterval(pos, pos + length, 1.0, "DAMP", channel=0, series_id="b"),
                    label))
        pos += length + 20
    return TimeSeries.from_array(x, series_id="b"), out


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
