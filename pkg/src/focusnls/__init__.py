"""Numerical laboratory for strongly confined focusing Bose gases.

The package simulates the rescaled N-body dynamics of bosons under a strong
2D harmonic confinement, extracts reduced density matrices and compares them
with the 1D focusing cubic NLS.
"""

from .basis import FourierGrid1D, Hermite2DBasis, SingleParticleBasis, build_basis
from .errors import *  # noqa: F401,F403
from .potential import GaussianTerm, PotentialSpec, scaled_potential
from .scaling import (
    coupling_report,
    default_omega,
    omega_window,
    scaling_exponents,
    v1,
    v2,
    vE,
)
from .state import ManyBodyState, product_state

__version__ = "0.1.0"

__all__ = [
    "FourierGrid1D",
    "GaussianTerm",
    "Hermite2DBasis",
    "ManyBodyState",
    "PotentialSpec",
    "SingleParticleBasis",
    "build_basis",
    "coupling_report",
    "default_omega",
    "omega_window",
    "product_state",
    "scaled_potential",
    "scaling_exponents",
    "v1",
    "v2",
    "vE",
]
