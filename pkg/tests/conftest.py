import numpy as np
import pytest

from gfex.config import GridSpec


@pytest.fixture
def grid_fast():
    return GridSpec(dt=1e-3, level_da=1e-3, seed=1234, replica_index=0)


@pytest.fixture
def rng():
    return np.random.default_rng(987)


def make_hand_path(ys, xs=None):
    """Piecewise-linear hand path on integer times."""
    from gfex.bridges import ExcursionPath

    y = np.asarray(ys, dtype=float)
    t = np.arange(len(y), dtype=float)
    x = t.copy() if xs is None else np.asarray(xs, dtype=float)
    return ExcursionPath(z=float(x[-1] - x[0]), duration=float(t[-1]),
                         times=t, x=x, y=y, dt=1.0)
