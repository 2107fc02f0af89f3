"""Numerical toolkit for the discrete nonlinear Schrodinger equation on Z with a
two-bound-state potential: spectral theory, nonlinear bound-state branches,
Fermi golden rule coefficients, time integration and modulation analysis."""

from .lattice import (
    LatticeField,
    LatticeGrid,
    NonlinearityCoefficients,
    Potential,
    apply_H,
    energy,
    inner,
    mass,
    pairing,
)
from .spectral import (
    SpectralData,
    discrete_spectrum,
    distorted_ft,
    limiting_absorption,
    pc_project,
    propagate_linear,
    resolvent_solve,
)

__version__ = "0.1.0"
