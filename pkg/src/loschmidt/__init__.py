"""Semiclassical Loschmidt echo from mean-Hamiltonian trajectories.

Dephasing-representation estimators with a phase-space amplitude, exact
quadratic references and a split-operator quantum oracle.
"""

__version__ = "0.1.0"

from .engine import (  # noqa: E402
    EchoSeries,
    EngineOptions,
    GaussHermite,
    MonteCarlo,
    compare,
    estimate,
    estimate_dr,
    estimate_grid,
    estimate_idr,
    estimate_quadratic_closed,
)
from .hamiltonians import PerturbationPair, make_pair, pair_from_reference  # noqa: E402
from .states import GaussianState, coherent, squeezed  # noqa: E402

__all__ = [
    "EchoSeries", "EngineOptions", "GaussHermite", "MonteCarlo", "compare", "estimate", "estimate_dr",
    "estimate_grid", "estimate_idr", "estimate_quadratic_closed", "PerturbationPair", "make_pair",
    "pair_from_reference", "GaussianState", "coherent", "squeezed",
]
