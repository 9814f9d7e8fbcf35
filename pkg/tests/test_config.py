import math

import pytest

from gfex.config import GridSpec, LevyConfig, TruncationSpec
from gfex.errors import InvalidParameterError


def test_gridspec_validation():
    GridSpec(dt=1e-4, level_da=1e-3, seed=5, replica_index=2)
    with pytest.raises(InvalidParameterError):
        GridSpec(dt=0.0)
    with pytest.raises(InvalidParameterError):
        GridSpec(level_da=-1.0)
    with pytest.raises(InvalidParameterError):
        GridSpec(replica_index=-1)


def test_levyconfig_validation():
    LevyConfig(eps=1e-3)
    with pytest.raises(InvalidParameterError):
        LevyConfig(eps=math.log(2.0))  # boundary excluded
    with pytest.raises(InvalidParameterError):
        LevyConfig(eps=0.0)
    with pytest.raises(InvalidParameterError):
        LevyConfig(quadrature_tol=1e-9)  # analytics-grade bound


def test_truncation_validation():
    TruncationSpec(s_min=1e-3, G=6)
    with pytest.raises(InvalidParameterError):
        TruncationSpec(s_min=0.0)
    with pytest.raises(InvalidParameterError):
        TruncationSpec(G=-1)
