"""Monte Carlo laboratory for the signed growth-fragmentation carried by
Brownian excursions in the upper half-plane.

Two independent simulation routes are provided and statistically compared:

* path route -- planar excursions pinned at a real endpoint, cut at
  horizontal levels into ranked signed fragments (:mod:`gfex.bridges`,
  :mod:`gfex.levelcut`);
* cell route -- the self-similar cell system driven by the Lamperti
  transform of a spectrally-special Levy process (:mod:`gfex.levy`,
  :mod:`gfex.ssmp`, :mod:`gfex.cells`).

Closed-form identities (cumulant function, martingale means, Green
function, derivative-martingale targets) live in :mod:`gfex.analytics`;
the statistics toolkit in :mod:`gfex.stats`; experiment orchestration and
the acceptance suite in :mod:`gfex.experiments` and :mod:`gfex.cli`.
"""

__version__ = "0.1.0"

from .config import GridSpec, LevyConfig, TruncationSpec

__all__ = ["GridSpec", "LevyConfig", "TruncationSpec", "__version__"]
