"""Frozen dataclass configs for grids, the Levy simulator and truncation."""

from __future__ import annotations

from dataclasses import dataclass, field
import math

from .errors import InvalidParameterError

LN2 = math.log(2.0)


@dataclass(frozen=True)
class GridSpec:
    """Discretization and seeding for path-level samplers.

    dt            uniform time step of path grids (the final partial step is
                  retained so the last grid time equals the duration exactly)
    level_da      uniform spacing of horizontal cutting levels
    seed          64-bit master seed
    replica_index replica number; (seed, replica_index) addresses one
                  independent, reproducible stream
    """

    dt: float = 1e-4
    level_da: float = 1e-3
    seed: int = 0
    replica_index: int = 0

    def __post_init__(self):
        if not (self.dt > 0):
            raise InvalidParameterError(f"dt must be > 0, got {self.dt}")
        if not (self.level_da > 0):
            raise InvalidParameterError(f"level_da must be > 0, got {self.level_da}")
        if not (0 <= int(self.seed) < 2**64):
            raise InvalidParameterError("seed must fit in 64 bits")
        if int(self.replica_index) < 0:
            raise InvalidParameterError("replica_index must be >= 0")


@dataclass(frozen=True)
class LevyConfig:
    """Simulation/quadrature knobs for the driving Levy process.

    eps            small-jump cutoff: jumps with |y| > eps are simulated as a
                   compound Poisson train, smaller ones replaced by a Brownian
                   term with matched mean and variance
    dt             maximum time step between diffusion updates
    quadrature_tol absolute tolerance for the adaptive quadratures behind the
                   Laplace exponent and cumulant evaluations
    """

    eps: float = 1e-3
    dt: float = 0.05
    quadrature_tol: float = 1e-11

    def __post_init__(self):
        if not (0 < self.eps < LN2):
            raise InvalidParameterError(f"eps must lie in (0, ln 2), got {self.eps}")
        if not (self.dt > 0):
            raise InvalidParameterError(f"dt must be > 0, got {self.dt}")
        if not (0 < self.quadrature_tol <= 1e-10):
            raise InvalidParameterError(
                "quadrature_tol must be in (0, 1e-10] for analytics-grade calls"
            )


@dataclass(frozen=True)
class TruncationSpec:
    """Truncation of the cell system: children below ``s_min`` in absolute
    birth size are dropped with their progeny, generations are capped at
    ``G``, and cells are only spawned below the level horizon ``A``
    (``A = inf`` simulates full lifetimes)."""

    s_min: float = 1e-3
    G: int = 6
    A: float = math.inf

    def __post_init__(self):
        if not (self.s_min > 0):
            raise InvalidParameterError(f"s_min must be > 0, got {self.s_min}")
        if int(self.G) < 0:
            raise InvalidParameterError("G must be >= 0")
        if not (self.A > 0):
            raise InvalidParameterError("A must be > 0")
