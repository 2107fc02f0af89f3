"""Modulation coordinates u = phi_1(z_1) + phi_2(z_2) + v and the observables
built on them: FGR transfer rates, the almost-conserved combination
N0|z1|^2 + (N0-1)|z2|^2, equipartition of the dying mode, and orbital
instability of the excited state.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.ndimage import uniform_filter1d

from .bound_states import BoundStateBranch, bound_state_derivatives, bound_state_values
from .dynamics import IntegratorConfig, TrajectoryRecord, run
from .lattice import LatticeField, NonlinearityCoefficients, Potential, as_values, norm_lp_sigma
from .spectral import SpectralData, pc_project


class DecompositionError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    """The run did not settle onto a single bound state; ``report`` holds the measurements."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True, eq=False)
class ModulationState:
    z1: complex
    z2: complex
    eta: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)  # F_{1,R}, F_{1,I}, F_{2,R}, F_{2,I}
    iterations: int = 0

    @property
    def z(self) -> tuple[complex, complex]:
        return self.z1, self.z2


def _rinner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.vdot(b, a)))


def _conditions(u, z, branches):
    phis = [bound_state_values(br, zj) for br, zj in zip(branches, z)]
    v = u - phis[0] - phis[1]
    Ds = [bound_state_derivatives(br, zj) for br, zj in zip(branches, z)]
    F = np.array([_rinner(1j * v, D) for pair in Ds for D in pair])
    return F, v, Ds


def decompose(
    u: Union[LatticeField, np.ndarray],
    branches: Sequence[BoundStateBranch],
    spec: SpectralData,
    tol: float = 1e-14,
    max_iter: int = 40,
) -> ModulationState:
    """Solve <i (u - phi_1(z_1) - phi_2(z_2)), D_{j,A} phi_j(z_j)> = 0 for (z_1, z_2).

    Newton on four real unknowns, seeded with z_j = (u, phi_j). The Jacobian
    keeps the leading block <-i D_{k,B} phi_k, D_{j,A} phi_j>; the omitted
    curvature term is of size |z|^5 ||v|| so the iteration still contracts
    to round-off in a few steps. Returns eta = P_c (u - phi_1 - phi_2).
    """
    uv = np.asarray(as_values(u), dtype=complex)
    b1, b2 = branches
    z = [complex(np.dot(uv, spec.eigenfunctions[0])), complex(np.dot(uv, spec.eigenfunctions[1]))]
    scale = max(np.linalg.norm(uv), 1e-300)
    for it in range(1, max_iter + 1):
        for zj, br in zip(z, branches):
            if abs(zj) ** 2 > br.rho_max:
                raise DecompositionError(f"|z|^2 = {abs(zj) ** 2:.3e} beyond branch range {br.rho_max:.3e}")
        F, v, Ds = _conditions(uv, z, branches)
        if np.max(np.abs(F)) <= tol * scale:
            break
        flat = [D for pair in Ds for D in pair]
        J = np.array([[_rinner(-1j * flat[c], flat[r]) for c in range(4)] for r in range(4)])
        dx = np.linalg.solve(J, -F)
        z = [z[0] + complex(dx[0], dx[1]), z[1] + complex(dx[2], dx[3])]
    else:
        raise DecompositionError("decomposition Newton did not converge")
    F, v, _ = _conditions(uv, z, branches)
    eta = pc_project(v, spec)
    return ModulationState(z[0], z[1], eta, F, it)


def reconstruct(state: ModulationState, branches: Sequence[BoundStateBranch]) -> np.ndarray:
    return bound_state_values(branches[0], state.z1) + bound_state_values(branches[1], state.z2) + state.eta


@dataclass(eq=False)
class ModulationSeries:
    times: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    eta_weighted_norm: np.ndarray
    N0: int
    coupling: Optional[np.ndarray] = None  # (G, eta) per snapshot when tracked with a profile

    def __post_init__(self):
        n = len(self.times)
        for a in (self.z1, self.z2, self.eta_weighted_norm) + (() if self.coupling is None else (self.coupling,)):
            if len(a) != n:
                raise ValueError("series lengths differ")
            if not np.all(np.isfinite(a)):
                raise ValueError("non-finite series entry")

    @property
    def interaction(self) -> np.ndarray:
        """|z1^{N0-1} z2^{N0}|."""
        return np.abs(self.z1) ** (self.N0 - 1) * np.abs(self.z2) ** self.N0

    @property
    def almost_conserved(self) -> np.ndarray:
        return self.N0 * np.abs(self.z1) ** 2 + (self.N0 - 1) * np.abs(self.z2) ** 2

    def rates(self) -> tuple[np.ndarray, np.ndarray]:
        """Finite-difference d|z1|^2/dt and d|z2|^2/dt."""
        if len(self.times) < 2:
            z = np.zeros(len(self.times))
            return z, z
        return np.gradient(np.abs(self.z1) ** 2, self.times), np.gradient(np.abs(self.z2) ** 2, self.times)

    def interaction_integral(self) -> tuple[float, float]:
        """(int_0^T |z1^{N0-1} z2^{N0}|^2 dt, the same over [T/2, T])."""
        f = self.interaction**2
        total = float(np.trapezoid(f, self.times))
        half = self.times >= self.times[-1] / 2
        tail = float(np.trapezoid(f[half], self.times[half])) if half.sum() > 1 else 0.0
        return total, tail

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "re_z1", "im_z1", "re_z2", "im_z2", "eta_w_norm", "interaction", "almost_conserved"])
            for row in zip(
                self.times, self.z1.real, self.z1.imag, self.z2.real, self.z2.imag,
                self.eta_weighted_norm, self.interaction, self.almost_conserved,
            ):
                w.writerow([repr(float(x)) for x in row])


class Tracker:
    """Callback for dynamics.run that decomposes each recorded snapshot."""

    def __init__(self, branches, spec: SpectralData, sigma: float = 2.0, G: Optional[np.ndarray] = None):
        self.branches = branches
        self.spec = spec
        self.sigma = sigma
        self.G = None if G is None else np.asarray(as_values(G))
        self.times, self.z1, self.z2, self.eta_w, self.C = [], [], [], [], []

    def __call__(self, t: float, u: np.ndarray):
        st = decompose(u, self.branches, self.spec)
        self.times.append(t)
        self.z1.append(st.z1)
        self.z2.append(st.z2)
        self.eta_w.append(norm_lp_sigma(st.eta, self.spec.grid, 2, -self.sigma))
        if self.G is not None:
            self.C.append(complex(np.dot(self.G, np.conj(st.eta))))
        return None

    def series(self, N0: int) -> ModulationSeries:
        return ModulationSeries(
            np.array(self.times), np.array(self.z1, dtype=complex), np.array(self.z2, dtype=complex),
            np.array(self.eta_w), N0, None if self.G is None else np.array(self.C, dtype=complex),
        )


def track(
    record: TrajectoryRecord,
    branches: Sequence[BoundStateBranch],
    spec: SpectralData,
    N0: int,
    sigma: float = 2.0,
    G: Optional[np.ndarray] = None,
) -> ModulationSeries:
    """Decompose every stored snapshot of a trajectory."""
    if record.snapshots is None:
        raise ValueError("trajectory was run without stored snapshots; use a Tracker callback")
    tr = Tracker(branches, spec, sigma, G)
    for t, u in zip(record.times, record.snapshots):
        tr(t, u)
    return tr.series(N0)


# ----------------------------------------------------------------------------
# rate fit


def envelope(x: np.ndarray, times: np.ndarray, window: float) -> np.ndarray:
    """Moving average over ``window`` time units (uniform sampling assumed)."""
    dt = float(np.mean(np.diff(times)))
    k = max(1, int(round(window / dt)))
    return uniform_filter1d(np.asarray(x, dtype=float), size=k, mode="nearest")


def envelope_window(e1: float, e2: float, periods: float = 10.0) -> float:
    return periods * 2 * np.pi / (e2 - e1)


@dataclass(frozen=True)
class RateFit:
    slope_z2: float
    slope_z1: float
    predicted_z2: float
    predicted_z1: float
    relative_error_z2: float
    relative_error_z1: float
    balance_residual: float
    samples: int


def fit_rates(times, a1, a2, P, Gamma, N0, window) -> RateFit:
    """Regress envelope d|z_j|^2/dt against envelope P through the origin."""
    s1 = envelope(a1, times, window)
    s2 = envelope(a2, times, window)
    sP = envelope(P, times, window)
    r1 = np.gradient(s1, times)
    r2 = np.gradient(s2, times)
    k = max(1, int(round(window / float(np.mean(np.diff(times))))))
    core = slice(k, len(times) - k)
    Pc, r1c, r2c = sP[core], r1[core], r2[core]
    if Pc.size < 5 or np.max(Pc) <= 0:
        raise ValueError("insufficient dynamic range for a rate fit")
    den = float(np.dot(Pc, Pc))
    a = float(np.dot(Pc, r2c) / den)
    b = float(np.dot(Pc, r1c) / den)
    p2 = -2 * N0 * Gamma
    p1 = 2 * (N0 - 1) * Gamma
    bal = float(np.max(np.abs(N0 * r1c + (N0 - 1) * r2c)) / max(np.max(np.abs(r2c)), 1e-300))
    return RateFit(a, b, p2, p1, abs(a - p2) / abs(p2), abs(b - p1) / abs(p1), bal, int(Pc.size))


def fit_rate_series(times, r1, r2, P, Gamma, N0, window, t_min: float = 0.0) -> RateFit:
    """Regress envelope-averaged rate series (already derivatives) against envelope P."""
    sel = times >= t_min
    t = times[sel]
    r1 = envelope(r1[sel], t, window)
    r2 = envelope(r2[sel], t, window)
    sP = envelope(P[sel], t, window)
    den = float(np.dot(sP, sP))
    if t.size < 5 or den <= 0:
        raise ValueError("insufficient dynamic range for a rate fit")
    a, b = float(np.dot(sP, r2) / den), float(np.dot(sP, r1) / den)
    p2, p1 = -2 * N0 * Gamma, 2 * (N0 - 1) * Gamma
    bal = float(np.max(np.abs(N0 * r1 + (N0 - 1) * r2)) / max(np.max(np.abs(r2)), 1e-300))
    return RateFit(a, b, p2, p1, abs(a - p2) / abs(p2), abs(b - p1) / abs(p1), bal, int(t.size))


def fgr_rate_fit(
    series: ModulationSeries,
    Gamma: float,
    e1: float,
    e2: float,
    window: Optional[float] = None,
    method: str = "finite_difference",
    t_min: float = 0.0,
) -> RateFit:
    """Envelope-averaged FGR rates of a tracked run against -2 N0 Gamma and 2 (N0-1) Gamma.

    ``"finite_difference"`` differentiates the envelopes of |z_j|^2.
    ``"coupling"`` evaluates the leading resonant rate -2 N0 Im(conj(z1)^{N0-1} z2^{N0} (G, eta))
    on the tracked coordinates (requires a series tracked with G); it resolves
    the transfer when the change of |z_j|^2 itself is below the noise floor.
    """
    if window is None:
        window = envelope_window(e1, e2)
    N0 = series.N0
    P = np.abs(series.z1) ** (2 * (N0 - 1)) * np.abs(series.z2) ** (2 * N0)
    if method == "finite_difference":
        sel = series.times >= t_min
        return fit_rates(series.times[sel], np.abs(series.z1[sel]) ** 2, np.abs(series.z2[sel]) ** 2, P[sel],
                         Gamma, N0, window)
    if method == "coupling":
        if series.coupling is None:
            raise ValueError("series was tracked without G")
        im = np.imag(np.conj(series.z1) ** (N0 - 1) * series.z2**N0 * series.coupling)
        return fit_rate_series(series.times, 2 * (N0 - 1) * im, -2 * N0 * im, P, Gamma, N0, window, t_min)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class ConservationFit:
    drift: float
    epsilon: float
    duration: float
    C: float


def almost_conservation_fit(series: ModulationSeries, epsilon: float) -> ConservationFit:
    """Total drift of N0|z1|^2 + (N0-1)|z2|^2 and C = drift / (eps^4 T)."""
    q = series.almost_conserved
    drift = float(np.max(np.abs(q - q[0])))
    T = float(series.times[-1] - series.times[0])
    return ConservationFit(drift, epsilon, T, drift / (epsilon**4 * T))


# ----------------------------------------------------------------------------
# equipartition


@dataclass(frozen=True)
class EquipartitionReport:
    survivor: int
    converged: bool
    dying_tail_max: float
    interaction_tail_fraction: float
    measured_rho_sq: float  # tail mean of |z_j|^2
    measured_rho: float  # tail mean of |z_j|
    predicted: float
    residual_squared_reading: float  # |rho_+^2 - predicted|
    residual_plain_reading: float  # |rho_+ - predicted|
    epsilon: float

    @property
    def scaled_residual(self) -> float:
        return self.residual_squared_reading / self.epsilon**4


def predicted_rho_sq(u0, spec: SpectralData, N0: int, survivor: int) -> float:
    u = np.asarray(as_values(u0), dtype=complex)
    a1 = abs(np.dot(u, spec.eigenfunctions[0])) ** 2
    a2 = abs(np.dot(u, spec.eigenfunctions[1])) ** 2
    if survivor == 1:
        return a1 + (N0 - 1) / N0 * a2
    return N0 / (N0 - 1) * a1 + a2


def equipartition_check(
    series: ModulationSeries,
    u0,
    spec: SpectralData,
    N0: int,
    epsilon: float,
    tail_fraction: float = 0.1,
) -> EquipartitionReport:
    """Compare the surviving mode's tail |z_j|^2 with the equipartition prediction.

    Raises ConvergenceError (with the report attached) when the dying mode has
    not fallen below 1e-3 epsilon or the interaction integral still has a tail.
    """
    n = len(series.times)
    tail = slice(int(np.floor(n * (1 - tail_fraction))), n)
    a1, a2 = np.abs(series.z1), np.abs(series.z2)
    survivor = 1 if a1[tail].mean() >= a2[tail].mean() else 2
    alive, dying = (a1, a2) if survivor == 1 else (a2, a1)
    total, tail_int = series.interaction_integral()
    # an integral below what a dying mode sitting at the threshold would contribute is round-off
    T = float(series.times[-1] - series.times[0])
    floor = (1e-3 * epsilon) ** (2 * N0) * epsilon ** (2 * (N0 - 1)) * T
    frac = tail_int / total if total > floor else 0.0
    dying_max = float(np.max(dying[tail]))
    converged = dying_max < 1e-3 * epsilon and frac < 0.1
    rho_sq = float(np.mean(alive[tail] ** 2))
    rho = float(np.mean(alive[tail]))
    pred = predicted_rho_sq(u0, spec, N0, survivor)
    rep = EquipartitionReport(
        survivor, converged, dying_max, frac, rho_sq, rho, pred, abs(rho_sq - pred), abs(rho - pred), epsilon,
    )
    if not converged:
        raise ConvergenceError(
            f"no convergence by t = {series.times[-1]:.4g}: dying mode {dying_max:.3e} "
            f"(threshold {1e-3 * epsilon:.3e}), interaction tail fraction {frac:.3f}",
            rep,
        )
    return rep


# ----------------------------------------------------------------------------
# instability


@dataclass(frozen=True)
class InstabilityReport:
    z_amp: float
    seed_frac: float
    eps_orbit: float
    exit_time: Optional[float]
    t_max: float
    max_distance: float
    distance_times: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)

    @property
    def exited(self) -> bool:
        return self.exit_time is not None


def orbital_distance(u: np.ndarray, phi: np.ndarray) -> float:
    """inf over theta of ||u - e^{i theta} phi||_2 (attained at theta = arg (u, phi))."""
    c = np.vdot(phi, u)
    ph = c / abs(c) if c != 0 else 1.0
    return float(np.linalg.norm(u - ph * phi))


def instability_witness(
    z_amp: float,
    seed_frac: float,
    config: IntegratorConfig,
    V: Potential,
    coeffs: NonlinearityCoefficients,
    spec: SpectralData,
    branch2: BoundStateBranch,
    eps_orbit: Optional[float] = None,
) -> InstabilityReport:
    """Run from phi_2(z_amp) + seed_frac z_amp phi_1 until the orbital distance exceeds eps_orbit."""
    if eps_orbit is None:
        eps_orbit = z_amp / 2
    phi = bound_state_values(branch2, z_amp)
    u0 = phi + seed_frac * z_amp * spec.eigenfunctions[0]
    ts, ds = [], []

    def watch(t, u):
        d = orbital_distance(u, phi)
        ts.append(t)
        ds.append(d)
        return StopIteration if d > eps_orbit else None

    run(u0, config, V, coeffs, store_snapshots=False, callback=watch)
    exit_time = ts[-1] if ds[-1] > eps_orbit else None
    return InstabilityReport(
        z_amp, seed_frac, eps_orbit, exit_time, config.t_max, float(max(ds)), np.array(ts), np.array(ds),
    )
