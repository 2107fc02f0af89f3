"""Resonance classification of the frequency ladder omega_n, the interaction
profile G and the Fermi golden rule constant Gamma.

Gamma is computed two ways that share no code beyond the lattice operator:
a closed form through the distorted Fourier transform at +-xi_*, and the
imaginary part of the outgoing resolvent pairing obtained by limiting
absorption.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .lattice import LatticeField, LatticeGrid, Potential, as_values
from .spectral import (
    BAND,
    LAPResult,
    SpectralData,
    SpectralError,
    distorted_ft,
    limiting_absorption,
)

EDGE_TOL = 1e-9
XI_GUARD = 1e-3


class BandEdgeError(SpectralError):
    pass


@dataclass(frozen=True)
class ResonanceReport:
    e1: float
    e2: float
    omega_table: dict = field(repr=False)
    classification: str  # "nonresonant" or "resonant"
    N0: Optional[int] = None
    xi_star: Optional[float] = None

    @property
    def resonant(self) -> bool:
        return self.classification == "resonant"

    @property
    def omega_star(self) -> float:
        if not self.resonant:
            raise ValueError("nonresonant configuration has no omega_*")
        return self.omega_table[self.N0]


def omega_n(e1: float, e2: float, n: int) -> float:
    return e1 + n * (e2 - e1)


def classify_resonance(spec: Union[SpectralData, tuple], n_range=range(-10, 11)) -> ResonanceReport:
    """Tabulate omega_n = e1 + n (e2 - e1) and locate the first one inside (0, 4).

    Accepts SpectralData with exactly two eigenvalues, or a pair (e1, e2).
    """
    if isinstance(spec, SpectralData):
        if spec.count != 2:
            raise SpectralError(f"expected exactly two eigenvalues, found {spec.count}")
        e1, e2 = (float(x) for x in spec.eigenvalues)
    else:
        e1, e2 = (float(x) for x in spec)
    if not e1 < e2:
        raise ValueError("need e1 < e2")
    table = {int(n): omega_n(e1, e2, n) for n in n_range}
    for n, w in table.items():
        if abs(w - BAND[0]) < EDGE_TOL or abs(w - BAND[1]) < EDGE_TOL:
            raise BandEdgeError(f"omega_{n} = {w:.12g} sits on a band edge")
    inside = sorted(n for n, w in table.items() if BAND[0] < w < BAND[1])
    if not inside:
        return ResonanceReport(e1, e2, table, "nonresonant")
    N0 = inside[0]
    xi = float(np.arccos(0.5 * (2.0 - table[N0])))
    return ResonanceReport(e1, e2, table, "resonant", N0, xi)


@dataclass(frozen=True, eq=False)
class InteractionProfile:
    grid: LatticeGrid
    G: np.ndarray = field(repr=False)
    N0: int
    construction: str = "leading_pointwise"

    def __post_init__(self):
        g = np.asarray(self.G, dtype=float)
        if g.shape != (self.grid.size,):
            raise ValueError("G does not live on the grid")
        g.setflags(write=False)
        object.__setattr__(self, "G", g)

    def field(self) -> LatticeField:
        return LatticeField(self.grid, self.G)

    def scaled(self, c: float) -> "InteractionProfile":
        return InteractionProfile(self.grid, c * self.G, self.N0, self.construction)

    def decay_report(self, kappa_sum: float) -> dict:
        """Largest |G(n)| e^{kappa_sum |n|} / max|G| (bounded for the pointwise profile)."""
        a = np.abs(self.G)
        m = a.max()
        if m == 0:
            return {"kappa": kappa_sum, "max_weighted_ratio": 0.0}
        n = np.abs(self.grid.sites)
        live = a > 1e-13 * m
        return {"kappa": kappa_sum, "max_weighted_ratio": float(np.max(a[live] * np.exp(kappa_sum * n[live]) / m))}


def leading_G(spec: SpectralData, N0: int, z_weights: Optional[tuple] = None) -> InteractionProfile:
    """Leading coefficient of the resonant monomial in beta(|u|^2) u.

    N0 >= 4: G = phi1^{N0-1} phi2^{N0}. N0 = 2, 3: the |z|-weighted profiles
    generated by the septic term, with z_weights = (|z1|^2, |z2|^2).
    """
    if N0 < 2:
        raise ValueError("N0 must be >= 2")
    p1, p2 = spec.eigenfunctions[0], spec.eigenfunctions[1]
    if N0 >= 4:
        if z_weights is not None:
            warnings.warn("z_weights ignored for N0 >= 4", stacklevel=2)
        return InteractionProfile(spec.grid, p1 ** (N0 - 1) * p2**N0, N0)
    if z_weights is None:
        raise ValueError("z_weights = (|z1|^2, |z2|^2) required for N0 in {2, 3}")
    a, b = (float(x) for x in z_weights)
    if N0 == 3:
        G = 4 * a * p1**4 * p2**3 + 3 * b * p1**2 * p2**5
    else:
        G = 6 * a**2 * p1**5 * p2**2 + 12 * a * b * p1**3 * p2**4 + 3 * b**2 * p1 * p2**6
    return InteractionProfile(spec.grid, G, N0, "leading_pointwise")


def _profile_values(G) -> np.ndarray:
    if isinstance(G, InteractionProfile):
        return G.G
    return np.asarray(as_values(G))


def gamma_closed_form(G, report: ResonanceReport, V: Potential) -> float:
    """Gamma = pi / (2 sin xi_*) (|G_hat(xi_*)|^2 + |G_hat(-xi_*)|^2).

    G_hat is the Parseval-normalized distorted Fourier transform. The constant
    pi/2 follows from the delta-sequence eps / ((2 - 2cos xi - omega)^2 + eps^2)
    -> pi delta(xi - xi_*) / (2 sin xi_*) at each of the two roots +-xi_*;
    for V = 0 and G = delta_0 it reproduces Im R_+(omega) (0, 0) = 1/(2 sin xi_*).
    """
    if not report.resonant:
        raise ValueError("Gamma requires a resonant report")
    xi = report.xi_star
    if xi < XI_GUARD or xi > np.pi - XI_GUARD:
        raise BandEdgeError(f"xi_* = {xi:.3e} too close to a band edge")
    gh = distorted_ft(_profile_values(G), np.array([xi, -xi]), V)
    return float(np.pi / (2 * np.sin(xi)) * np.sum(np.abs(gh) ** 2))


@dataclass(frozen=True)
class GammaOracle:
    gamma: float
    gamma_bra: float  # -Im (G, R_+ G)
    error: float
    ladder: tuple
    imag_samples: tuple
    monotone_positive: bool


def gamma_oracle_details(G, report: ResonanceReport, V: Potential, **lap_kwargs) -> GammaOracle:
    """Gamma = Im (R_+ G, G) by the epsilon ladder, with the mirrored convention."""
    if not report.resonant:
        raise ValueError("Gamma requires a resonant report")
    g = _profile_values(G).astype(complex)
    lap: LAPResult = limiting_absorption(report.omega_star, g, g, V, **lap_kwargs)
    mirrored = limiting_absorption(report.omega_star, g, g, V, resolvent_slot="second", **lap_kwargs)
    ket, bra = lap.value, mirrored.value
    ims = tuple(float(np.imag(s)) for s in lap.values)
    steps = np.diff(ims)
    mono = bool(min(ims) >= 0 and (np.all(steps <= 0) or np.all(steps >= 0)))
    if not mono and np.linalg.norm(g) > 0:
        warnings.warn("epsilon-ladder imaginary parts are not positive and monotone", RuntimeWarning, stacklevel=2)
    return GammaOracle(float(ket.imag), float(-bra.imag), lap.error, lap.ladder, ims, mono)


def gamma_oracle(G, report: ResonanceReport, V: Potential, **lap_kwargs) -> float:
    """Gamma = Im lim_{eps->0} ((H - omega_* - i eps)^{-1} G, G)."""
    return gamma_oracle_details(G, report, V, **lap_kwargs).gamma
