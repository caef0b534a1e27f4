import numpy as np
import pytest

from gnmcal.dataset import ModelDataset, PhysicalDataset


def random_instance(rng, m, max_size, min_size=1):
    """Physical inputs 0..m-1 and clusters of random size around each one."""
    xp = np.arange(m, dtype=float)
    sizes = rng.integers(min_size, max_size + 1, size=m)
    xc = np.concatenate([j + rng.uniform(-0.45, 0.45, size=s) for j, s in enumerate(sizes)])
    theta = rng.uniform(0, 1, size=xc.size)
    yc = rng.uniform(0, 1, size=xc.size)
    yp = rng.uniform(0, 1, size=m)
    return PhysicalDataset(xp, yp), ModelDataset(xc, theta, yc)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
