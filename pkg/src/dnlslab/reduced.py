"""The two-mode normal-form system with the remainders dropped:

    i z1' = e1 z1 + A1 z1 + (N0-1) conj(z1)^{N0-2} z2^{N0} (G, eta)
    i z2' = e2 z2 + A2 z2 + N0 z1^{N0-1} conj(z2)^{N0-1} (conj G, conj eta)
    i eta' = H eta + P_c beta(|eta|^2) eta + conj(z1)^{N0-1} z2^{N0} G

with the sesquilinear pairing (f, g) = sum f conj(g). It is Hamiltonian for

    H_red = e1|z1|^2/2 + e2|z2|^2/2 + <H eta, eta>/2 + sum B(|eta|^2)/2
            + Re[conj(z1)^{N0-1} z2^{N0} (G, eta)]

with z' = -i (d/dRe + i d/dIm) H_red and the same rule per site for eta;
``vector_field`` and ``hamiltonian`` are checked against each other by finite
differences in the tests.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import _kernels
from .dynamics import Absorber, build_step_cache
from .lattice import (
    NonlinearityCoefficients,
    Potential,
    apply_H_values,
    as_values,
    beta_eval,
    energy_values,
    norm_lp_sigma,
)
from .modulation import RateFit, envelope_window, fit_rate_series, fit_rates
from .resonance import InteractionProfile
from .spectral import SpectralData, pc_project, resolvent_solve, richardson


def _poly2(table: dict, a: float, b: float) -> float:
    """sum c * a^i * b^j over {(i, j): c}."""
    return float(sum(c * a**i * b**j for (i, j), c in table.items()))


@dataclass(frozen=True, eq=False)
class ReducedConfig:
    e1: float
    e2: float
    N0: int
    G: np.ndarray = field(repr=False)
    potential: Potential = field(repr=False)
    spec: SpectralData = field(repr=False)
    coeffs: NonlinearityCoefficients = field(default_factory=NonlinearityCoefficients)
    A1: dict = field(default_factory=dict)
    A2: dict = field(default_factory=dict)
    include_eta_nonlinearity: bool = True
    drop_remainders: bool = True

    def __post_init__(self):
        if not self.drop_remainders:
            raise ValueError("remainder terms are not modeled")
        g = self.G.G if isinstance(self.G, InteractionProfile) else np.asarray(as_values(self.G))
        g = pc_project(g, self.spec)
        if np.max(np.abs(g.imag)) > 0:
            raise ValueError("G must be real")
        g = np.ascontiguousarray(g.real)
        g.setflags(write=False)
        object.__setattr__(self, "G", g)

    @classmethod
    def from_spectrum(cls, spec: SpectralData, V: Potential, G, N0: int, **kw) -> "ReducedConfig":
        e1, e2 = (float(x) for x in spec.eigenvalues[:2])
        return cls(e1, e2, N0, G, V, spec, **kw)

    @property
    def omega_star(self) -> float:
        return self.e1 + self.N0 * (self.e2 - self.e1)


@dataclass(frozen=True, eq=False)
class ReducedState:
    z1: complex
    z2: complex
    eta: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.array(as_values(self.eta), dtype=complex)
        if not (np.isfinite(self.z1) and np.isfinite(self.z2) and np.all(np.isfinite(e))):
            raise ValueError("non-finite reduced state")
        e.setflags(write=False)
        object.__setattr__(self, "eta", e)
        object.__setattr__(self, "z1", complex(self.z1))
        object.__setattr__(self, "z2", complex(self.z2))


def _X(z1: complex, z2: complex, N0: int) -> complex:
    return np.conj(z1) ** (N0 - 1) * z2**N0


def _coupling(z1, z2, eta, cfg: ReducedConfig):
    """Right-hand sides of the coupling flow (everything but the e_j and H terms)."""
    N0 = cfg.N0
    C = complex(np.dot(cfg.G, np.conj(eta)))  # (G, eta)
    a, b = abs(z1) ** 2, abs(z2) ** 2
    dz1 = -1j * (_poly2(cfg.A1, a, b) * z1 + (N0 - 1) * np.conj(z1) ** (N0 - 2) * z2**N0 * C)
    dz2 = -1j * (_poly2(cfg.A2, a, b) * z2 + N0 * z1 ** (N0 - 1) * np.conj(z2) ** (N0 - 1) * np.conj(C))
    src = _X(z1, z2, N0) * cfg.G
    if cfg.include_eta_nonlinearity:
        src = src + pc_project(beta_eval(np.abs(eta) ** 2, cfg.coeffs) * eta, cfg.spec)
    return dz1, dz2, -1j * src


def vector_field(state: ReducedState, cfg: ReducedConfig) -> tuple[complex, complex, np.ndarray]:
    """(z1', z2', eta') of the full reduced system."""
    dz1, dz2, deta = _coupling(state.z1, state.z2, state.eta, cfg)
    dz1 += -1j * cfg.e1 * state.z1
    dz2 += -1j * cfg.e2 * state.z2
    deta = deta - 1j * apply_H_values(state.eta, cfg.potential.values)
    return dz1, dz2, deta


def hamiltonian(state: ReducedState, cfg: ReducedConfig) -> float:
    """H_red for A1 = A2 = 0 (the A terms are phase corrections without a stated potential)."""
    eta = state.eta
    coeffs = cfg.coeffs if cfg.include_eta_nonlinearity else NonlinearityCoefficients(cubic=0.0)
    h = 0.5 * cfg.e1 * abs(state.z1) ** 2 + 0.5 * cfg.e2 * abs(state.z2) ** 2
    h += energy_values(eta, cfg.potential.values, coeffs)
    h += float(np.real(_X(state.z1, state.z2, cfg.N0) * np.dot(cfg.G, np.conj(eta))))
    return float(h)


def rhs_rates(z1: complex, z2: complex, eta: np.ndarray, cfg: ReducedConfig) -> tuple[float, float]:
    """Exact d|z1|^2/dt and d|z2|^2/dt of the reduced system at a state."""
    C = complex(np.dot(cfg.G, np.conj(eta)))
    im = float(np.imag(_X(z1, z2, cfg.N0) * C))
    return 2 * (cfg.N0 - 1) * im, -2 * cfg.N0 * im


@dataclass(eq=False)
class ReducedSeries:
    times: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    eta_mass: np.ndarray
    eta_weighted_norm: np.ndarray
    rate1: np.ndarray  # instantaneous d|z1|^2/dt from the vector field
    rate2: np.ndarray
    N0: int
    final: Optional[ReducedState] = None
    snapshots: Optional[np.ndarray] = field(default=None, repr=False)
    y_distance: Optional[np.ndarray] = None  # ||eta - Y||_{l^{2,-2}} / ||Y||_{l^{2,-2}}

    @property
    def interaction(self) -> np.ndarray:
        return np.abs(self.z1) ** (self.N0 - 1) * np.abs(self.z2) ** self.N0

    @property
    def almost_conserved(self) -> np.ndarray:
        return self.N0 * np.abs(self.z1) ** 2 + (self.N0 - 1) * np.abs(self.z2) ** 2

    @property
    def total_mass(self) -> np.ndarray:
        return np.abs(self.z1) ** 2 + np.abs(self.z2) ** 2 + self.eta_mass

    def to_csv(self, path: Union[str, Path]) -> None:
        """Same columns as the modulation series export."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "re_z1", "im_z1", "re_z2", "im_z2", "eta_w_norm", "interaction", "almost_conserved"])
            for row in zip(
                self.times, self.z1.real, self.z1.imag, self.z2.real, self.z2.imag,
                self.eta_weighted_norm, self.interaction, self.almost_conserved,
            ):
                w.writerow([repr(float(x)) for x in row])


def _rk4_coupling(z1, z2, eta, h, cfg):
    k1 = _coupling(z1, z2, eta, cfg)
    k2 = _coupling(z1 + 0.5 * h * k1[0], z2 + 0.5 * h * k1[1], eta + 0.5 * h * k1[2], cfg)
    k3 = _coupling(z1 + 0.5 * h * k2[0], z2 + 0.5 * h * k2[1], eta + 0.5 * h * k2[2], cfg)
    k4 = _coupling(z1 + h * k3[0], z2 + h * k3[1], eta + h * k3[2], cfg)
    return (
        z1 + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        z2 + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        eta + h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
    )


def integrate_reduced(
    state0: ReducedState,
    cfg: ReducedConfig,
    dt: float,
    t_max: float,
    record_stride: int = 10,
    absorber: Optional[Absorber] = None,
    store_snapshots: bool = False,
    track_y: bool = False,
) -> ReducedSeries:
    """Strang splitting: exact linear flow (e_j phases and exp(-i dt H) on eta),
    classical RK4 for the coupling flow over the middle full step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    V = cfg.potential
    half = build_step_cache(V, dt / 2, absorber)
    dummy = np.zeros(1)
    z1, z2 = state0.z1, state0.z2
    eta = np.array(state0.eta, dtype=complex)
    ph1, ph2 = np.exp(-0.5j * cfg.e1 * dt), np.exp(-0.5j * cfg.e2 * dt)
    RG = outgoing_resolvent_vector(cfg.omega_star, cfg.G, V) if track_y else None
    grid = V.grid
    cols = {k: [] for k in ("t", "z1", "z2", "m", "w", "r1", "r2", "yd")}
    snaps = []

    def record(t):
        cols["t"].append(t)
        cols["z1"].append(z1)
        cols["z2"].append(z2)
        cols["m"].append(float(np.vdot(eta, eta).real))
        cols["w"].append(norm_lp_sigma(eta, grid, 2, -2))
        r1, r2 = rhs_rates(z1, z2, eta, cfg)
        cols["r1"].append(r1)
        cols["r2"].append(r2)
        if RG is not None:
            Y = -_X(z1, z2, cfg.N0) * RG
            ny = norm_lp_sigma(Y, grid, 2, -2)
            cols["yd"].append(norm_lp_sigma(eta - Y, grid, 2, -2) / ny if ny > 0 else 0.0)
        if store_snapshots:
            snaps.append(eta.copy())

    n_steps = int(round(t_max / dt))
    record(0.0)
    for k in range(1, n_steps + 1):
        # half linear flow; the Taylor-increment kernel with zero beta is exactly the linear step
        eta = _kernels.strang_steps(half.diagonals, half.offsets, eta, dummy, 0.0, 1)
        z1, z2 = z1 * ph1, z2 * ph2
        z1, z2, eta = _rk4_coupling(z1, z2, eta, dt, cfg)
        eta = _kernels.strang_steps(half.diagonals, half.offsets, eta, dummy, 0.0, 1)
        z1, z2 = z1 * ph1, z2 * ph2
        if k % record_stride == 0:
            if not (np.isfinite(z1) and np.isfinite(z2) and np.all(np.isfinite(eta))):
                raise FloatingPointError(f"non-finite reduced state at t = {k * dt:.6g}")
            record(k * dt)
    return ReducedSeries(
        times=np.array(cols["t"]),
        z1=np.array(cols["z1"], dtype=complex),
        z2=np.array(cols["z2"], dtype=complex),
        eta_mass=np.array(cols["m"]),
        eta_weighted_norm=np.array(cols["w"]),
        rate1=np.array(cols["r1"]),
        rate2=np.array(cols["r2"]),
        N0=cfg.N0,
        final=ReducedState(z1, z2, eta),
        snapshots=np.array(snaps) if store_snapshots else None,
        y_distance=np.array(cols["yd"]) if track_y else None,
    )


# ----------------------------------------------------------------------------
# Y ansatz and rate equations


def outgoing_resolvent_vector(
    omega: float, f, V: Potential, eps0: float = 1e-3, order: int = 3, ratio: float = 2.0
) -> np.ndarray:
    """R_+(omega) f by Richardson extrapolation of exact-lattice solves at eps0 / ratio^k."""
    fv = np.asarray(as_values(f), dtype=complex)
    xs = [resolvent_solve(omega, eps0 / ratio**k, fv, V, boundary="transparent").solution for k in range(order + 1)]
    return richardson(xs, ratio)[-1][-1]


def y_ansatz(z1: complex, z2: complex, cfg: ReducedConfig, V: Optional[Potential] = None, **kw) -> np.ndarray:
    """Y = -conj(z1)^{N0-1} z2^{N0} R_+(omega_*) G."""
    V = cfg.potential if V is None else V
    return -_X(z1, z2, cfg.N0) * outgoing_resolvent_vector(cfg.omega_star, cfg.G, V, **kw)


def y_ansatz_residual(z1: complex, z2: complex, cfg: ReducedConfig, epsilon: float) -> float:
    """||i Y_t - H Y - X G|| / ||X G|| in l^{2,-2} along z_j(t) = e^{-i e_j t} z_j(0),
    with Y regularized at epsilon.

    Along these z_j, Y(t) = e^{-i omega_* t} Y(0), so i Y_t = omega_* Y and the
    residual is exactly epsilon X (H - omega_* - i epsilon)^{-1} G; its l^2 norm
    grows like epsilon^{-1/2} with the radiating tail, hence the weight.
    """
    X = _X(z1, z2, cfg.N0)
    if X == 0:
        return 0.0
    x = resolvent_solve(cfg.omega_star, epsilon, cfg.G, cfg.potential, boundary="transparent").solution
    Y = -X * x
    r = cfg.omega_star * Y - apply_H_values(Y, cfg.potential.values) - X * cfg.G
    grid = cfg.potential.grid
    return float(norm_lp_sigma(r, grid, 2, -2) / norm_lp_sigma(X * cfg.G, grid, 2, -2))


def rate_equations_rhs(z1: complex, z2: complex, Gamma: float, N0: int) -> tuple[float, float]:
    """(d|z1|^2/dt, d|z2|^2/dt) = (2 (N0-1) Gamma P, -2 N0 Gamma P), P = |z1|^{2(N0-1)} |z2|^{2 N0}."""
    P = abs(z1) ** (2 * (N0 - 1)) * abs(z2) ** (2 * N0)
    return 2 * (N0 - 1) * Gamma * P, -2 * N0 * Gamma * P


def reduced_rate_fit(series: ReducedSeries, Gamma: float, e1: float, e2: float, t_min: float = 0.0,
                     window: Optional[float] = None, use_rhs: bool = True) -> RateFit:
    """Envelope-averaged rates of a reduced run regressed against P (after ``t_min``).

    With ``use_rhs`` the rates are the exact vector-field values along the
    trajectory; otherwise finite differences of |z_j|^2.
    """
    if window is None:
        window = envelope_window(e1, e2)
    N0 = series.N0
    P = np.abs(series.z1) ** (2 * (N0 - 1)) * np.abs(series.z2) ** (2 * N0)
    if use_rhs:
        return fit_rate_series(series.times, series.rate1, series.rate2, P, Gamma, N0, window, t_min)
    sel = series.times >= t_min
    return fit_rates(series.times[sel], np.abs(series.z1[sel]) ** 2, np.abs(series.z2[sel]) ** 2, P[sel],
                     Gamma, N0, window)
