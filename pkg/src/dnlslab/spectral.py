"""Spectral data of H = -Delta + V: bound states, the continuous-spectrum
projector, resolvents (including the limiting absorption limit), Jost
solutions, the distorted Fourier transform and the linear propagator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from .lattice import (
    ArrayLike,
    LatticeField,
    LatticeGrid,
    Potential,
    as_values,
    norm_lp_sigma,
)

BAND = (0.0, 4.0)


class SpectralError(ValueError):
    pass


class ResonanceError(SpectralError):
    """Jost Wronskian vanishes: the potential has a (band-edge) resonance."""


class LAPConvergenceError(SpectralError):
    """The epsilon ladder did not extrapolate within tolerance."""


@dataclass(frozen=True, eq=False)
class SpectralData:
    grid: LatticeGrid
    potential: Potential = field(repr=False)
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray = field(repr=False)  # shape (k, 2N+1), real, unit l2 norm
    band: tuple = BAND

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    def band_margin(self) -> float:
        """Distance of the closest eigenvalue to [0, 4] (inf if none)."""
        e = self.eigenvalues
        if e.size == 0:
            return np.inf
        return float(np.min(np.where(e < 0, -e, e - 4.0)))

    def decay_rates(self) -> np.ndarray:
        """kappa_j with phi_j(n) ~ exp(-kappa_j |n|): e = 2 - 2cosh(kappa) below the band,
        e = 2 + 2cosh(kappa) above it."""
        e = self.eigenvalues
        return np.arccosh(np.where(e < 0, 1 - e / 2, e / 2 - 1))

    def residuals(self) -> np.ndarray:
        V = self.potential.values
        out = []
        for e, phi in zip(self.eigenvalues, self.eigenfunctions):
            r = -np.concatenate(([0.0], phi[:-1])) - np.concatenate((phi[1:], [0.0])) + (2 + V - e) * phi
            out.append(np.linalg.norm(r))
        return np.array(out)

    def field(self, j: int) -> LatticeField:
        """Eigenfunction phi_j (1-based, j=1 is the lowest eigenvalue)."""
        return LatticeField(self.grid, self.eigenfunctions[j - 1])


def _refine_eigenpair(d: np.ndarray, off: np.ndarray, e: float, v: np.ndarray, iters: int = 3):
    # inverse iteration with a Rayleigh shift, on the exact tridiagonal
    M = d.size
    for _ in range(iters):
        ab = np.zeros((3, M))
        ab[0, 1:] = off
        ab[1] = d - e
        ab[2, :-1] = off
        ab[1] += 1e-14 * max(1.0, abs(e))
        try:
            w = solve_banded((1, 1), ab, v)
        except np.linalg.LinAlgError:
            break
        v = w / np.linalg.norm(w)
        Hv = d * v
        Hv[:-1] += off * v[1:]
        Hv[1:] += off * v[:-1]
        e = float(v @ Hv)
    return e, v


def discrete_spectrum(V: Potential, margin: float = 1e-8, boundary_sites: int = 10) -> SpectralData:
    """All eigenpairs of the truncated H lying outside [0, 4] by more than ``margin``.

    Eigenfunctions are real, unit-normalized, and sign-fixed so that their
    largest-magnitude entry is positive.
    """
    d, off = V.hamiltonian_diagonals()
    lo = min(-margin, float(np.min(d)) - 4.0)
    hi = max(4.0 + margin, float(np.max(d)) + 4.0)
    vals, vecs = [], []
    for a, b in ((lo - 1.0, -margin), (4.0 + margin, hi + 1.0)):
        w, Q = eigh_tridiagonal(d, off, select="v", select_range=(a, b))
        vals.extend(w)
        vecs.extend(Q.T)
    order = np.argsort(vals)
    evals = np.array([vals[i] for i in order], dtype=float)
    evecs = np.array([vecs[i] for i in order], dtype=float).reshape(len(order), d.size)
    for k in range(len(evals)):
        e, v = _refine_eigenpair(d, off, evals[k], evecs[k])
        v = v * np.sign(v[np.argmax(np.abs(v))])
        evals[k], evecs[k] = e, v
    if len(evals) > 1 and np.min(np.diff(evals)) < 1e-12:
        raise SpectralError("degenerate eigenvalues: outside the simple-eigenvalue setting")
    if len(evals) > 1:
        # re-orthonormalize (tiny corrections after refinement)
        q, _ = np.linalg.qr(evecs.T)
        q = q * np.sign(np.sum(q * evecs.T, axis=0))
        evecs = q.T.copy()
    for k in range(len(evals)):
        edge = np.sum(evecs[k, :boundary_sites] ** 2) + np.sum(evecs[k, -boundary_sites:] ** 2)
        if edge > 1e-10:
            warnings.warn(
                f"eigenfunction {k + 1} (e={evals[k]:.6g}) has mass {edge:.2e} near the grid boundary; "
                "enlarge the grid",
                RuntimeWarning,
                stacklevel=2,
            )
    return SpectralData(V.grid, V, evals, evecs)


def pc_project(u: ArrayLike, spec: SpectralData) -> np.ndarray:
    """P_c u = u - sum_j (u, phi_j) phi_j (removes both real and imaginary parts)."""
    v = np.array(as_values(u), dtype=complex)
    if v.shape != (spec.grid.size,):
        raise ValueError(f"grid mismatch: field {v.shape} vs spectral data {spec.grid.size}")
    P = spec.eigenfunctions
    if P.size:
        v = v - (P @ v) @ P
    return v


# ----------------------------------------------------------------------------
# resolvents


def _decaying_root(z: complex) -> complex:
    """zeta with 2 - zeta - 1/zeta = z and |zeta| < 1 (Im zeta > 0 on the band)."""
    b = 2.0 - z
    s = np.sqrt(b * b - 4.0 + 0j)
    r1, r2 = (b + s) / 2, (b - s) / 2
    a1, a2 = abs(r1), abs(r2)
    if abs(a1 - a2) < 1e-13:
        return r1 if r1.imag > 0 else r2
    return r1 if a1 < a2 else r2


@dataclass(frozen=True, eq=False)
class ResolventSample:
    omega: float
    epsilon: float
    solution: np.ndarray = field(repr=False)
    residual: float
    boundary: str = "dirichlet"


def _resolvent_bands(V: np.ndarray, z: complex, boundary: str) -> np.ndarray:
    M = V.size
    ab = np.zeros((3, M), dtype=complex)
    ab[0, 1:] = -1.0
    ab[2, :-1] = -1.0
    ab[1] = 2.0 + V - z
    if boundary == "transparent":
        zeta = _decaying_root(z)
        ab[1, 0] -= zeta
        ab[1, -1] -= zeta
    elif boundary != "dirichlet":
        raise ValueError(f"unknown boundary {boundary!r}")
    return ab


def _banded_matvec(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    y = ab[1] * x
    y[:-1] += ab[0, 1:] * x[1:]
    y[1:] += ab[2, :-1] * x[:-1]
    return y


def resolvent_solve(
    omega: float,
    epsilon: float,
    f: ArrayLike,
    V: Potential,
    boundary: str = "dirichlet",
) -> ResolventSample:
    """Solve (H - omega - i epsilon) x = f.

    ``boundary="dirichlet"`` solves the truncated system. ``"transparent"``
    closes the grid with the exact decaying (outgoing) exterior solution, so
    the result is the resolvent of the infinite lattice applied to ``f``
    (assumes V and f vanish outside the grid). With ``"transparent"`` and
    ``epsilon == 0`` inside the band this is the outgoing limit R_+(omega) f.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    fv = np.asarray(as_values(f), dtype=complex)
    if fv.shape != (V.grid.size,):
        raise ValueError("grid mismatch between f and V")
    if epsilon == 0 and boundary == "dirichlet" and BAND[0] <= omega <= BAND[1]:
        raise SpectralError("epsilon = 0 with omega in the band: singular system")
    z = omega + 1j * epsilon
    ab = _resolvent_bands(V.values, z, boundary)
    x = solve_banded((1, 1), ab, fv)
    if not np.all(np.isfinite(x)):
        raise SpectralError("singular resolvent system (omega at an eigenvalue?)")
    # one step of iterative refinement keeps the residual at round-off level
    r = fv - _banded_matvec(ab, x)
    x = x + solve_banded((1, 1), ab, r)
    res = np.linalg.norm(_banded_matvec(ab, x) - fv)
    nf = np.linalg.norm(fv)
    if nf > 0 and res > 1e-12 * nf:
        raise SpectralError(f"resolvent residual {res / nf:.2e} exceeds 1e-12 (omega at an eigenvalue?)")
    return ResolventSample(float(omega), float(epsilon), x, float(res), boundary)


def outgoing_resolvent(omega: float, f: ArrayLike, V: Potential) -> np.ndarray:
    """R_+(omega) f = lim_{eps->0+} (H - omega - i eps)^{-1} f on the infinite lattice."""
    return resolvent_solve(omega, 0.0, f, V, boundary="transparent").solution


@dataclass(frozen=True)
class LAPResult:
    value: complex
    error: float
    ladder: tuple
    values: tuple


def richardson(values, ratio: float = 2.0):
    """Richardson table for samples at eps0, eps0/ratio, ...; integer-power error expansion.

    Returns the table as a list of columns; column m eliminates eps^1..eps^m.
    """
    cols = [list(values)]
    for m in range(1, len(values)):
        prev = cols[-1]
        fac = ratio**m
        cols.append([(fac * prev[k + 1] - prev[k]) / (fac - 1) for k in range(len(prev) - 1)])
    return cols


def limiting_absorption(
    omega: float,
    f: ArrayLike,
    g: ArrayLike,
    V: Potential,
    eps0: float = 1e-2,
    order: int = 3,
    ratio: float = 2.0,
    rtol: float = 1e-6,
    boundary: str = "transparent",
    resolvent_slot: str = "first",
) -> LAPResult:
    """lim_{eps->0+} ((H - omega - i eps)^{-1} f, g) by Richardson extrapolation.

    The pairing is sesquilinear, linear in the first slot. Each ladder point
    is an exact infinite-lattice resolvent (``boundary="transparent"``), so
    the only error is the extrapolation error, estimated by the difference
    between the two highest-order extrapolants. ``resolvent_slot="second"``
    returns (g, (H - omega - i eps)^{-1} f) instead.
    """
    if not (BAND[0] < omega < BAND[1]):
        raise ValueError("limiting absorption requires omega in (0, 4)")
    fv = np.asarray(as_values(f), dtype=complex)
    gv = np.asarray(as_values(g), dtype=complex)
    ladder = tuple(eps0 / ratio**k for k in range(order + 1))
    samples = []
    for eps in ladder:
        x = resolvent_solve(omega, eps, fv, V, boundary=boundary).solution
        samples.append(complex(np.vdot(gv, x) if resolvent_slot == "first" else np.vdot(x, gv)))
    cols = richardson(samples, ratio)
    value = cols[-1][-1]
    err = abs(cols[-1][-1] - cols[-2][-1]) if order >= 1 else np.inf
    scale = np.linalg.norm(fv) * np.linalg.norm(gv)
    if err > rtol * abs(value) + 1e-14 * scale:
        raise LAPConvergenceError(
            f"epsilon ladder did not converge: error {err:.3e} vs value {abs(value):.3e}"
        )
    return LAPResult(complex(value), float(err), ladder, tuple(samples))


# ----------------------------------------------------------------------------
# Jost solutions and the distorted Fourier transform


@dataclass(frozen=True, eq=False)
class JostSolution:
    quasi_momentum: float
    side: str  # "plus": ~ e^{+i xi n} as n -> +inf; "minus": ~ e^{-i xi n} as n -> -inf
    values: np.ndarray = field(repr=False)
    wronskian_with_partner: complex


def _jost_arrays(xi: np.ndarray, V: Potential):
    """f_+ and f_- for a vector of quasi-momenta; arrays of shape (len(xi), 2N+1)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    grid = V.grid
    n = grid.sites
    N = grid.half_width
    R = V.support_radius()
    if R >= N:
        raise SpectralError("potential reaches the grid edge; no asymptotic region for Jost seeds")
    lam = 2.0 - 2.0 * np.cos(xi)
    a = 2.0 + V.values[None, :] - lam[:, None]  # (k, M)
    fp = np.exp(1j * np.outer(xi, n))
    fm = np.exp(-1j * np.outer(xi, n))
    iR = grid.index(R)
    for i in range(iR, 0, -1):  # equation at site i gives f(i-1)
        fp[:, i - 1] = a[:, i] * fp[:, i] - fp[:, i + 1]
    iL = grid.index(-R)
    for i in range(iL, grid.size - 1):
        fm[:, i + 1] = a[:, i] * fm[:, i] - fm[:, i - 1]
    return xi, fp, fm


def _wronskian(fp: np.ndarray, fm: np.ndarray) -> np.ndarray:
    """W(n) = f_+(n+1) f_-(n) - f_+(n) f_-(n+1) for every bond n."""
    return fp[..., 1:] * fm[..., :-1] - fp[..., :-1] * fm[..., 1:]


def jost_solutions(xi: float, V: Potential, min_wronskian: float = 1e-8):
    """(f_+, f_-) at quasi-momentum xi in (0, pi) with their Wronskian."""
    if not (0 < xi < np.pi):
        raise ValueError("xi must lie in (0, pi)")
    _, fp, fm = _jost_arrays(np.array([xi]), V)
    W = _wronskian(fp[0], fm[0])
    w = complex(W[V.grid.half_width])
    if abs(w) < min_wronskian:
        raise ResonanceError(f"Jost Wronskian {abs(w):.2e} at xi={xi}: resonance")
    return (
        JostSolution(float(xi), "plus", fp[0], w),
        JostSolution(float(xi), "minus", fm[0], w),
    )


def wronskian_profile(xi: float, V: Potential) -> np.ndarray:
    """Wronskian at every bond of the grid (constant for an exact recursion)."""
    _, fp, fm = _jost_arrays(np.array([xi]), V)
    return _wronskian(fp[0], fm[0])


def check_generic_edges(V: Potential, xis=None, min_wronskian: float = 1e-8) -> np.ndarray:
    """|W(xi)| near xi -> 0+ and xi -> pi-; raises if any value falls below the floor.

    A nonvanishing limit means 0 and 4 are neither resonances nor eigenvalues.
    The free Wronskian 2i sin(xi) itself vanishes at the edges, so |W|/sin(xi)
    is what is bounded away from zero in the generic case.
    """
    if xis is None:
        small = np.array([1e-3, 3e-3, 1e-2, 3e-2, 1e-1])
        xis = np.concatenate((small, np.pi - small[::-1]))
    xis = np.asarray(xis, dtype=float)
    _, fp, fm = _jost_arrays(xis, V)
    W = _wronskian(fp, fm)[:, V.grid.half_width]
    ratio = np.abs(W) / np.abs(np.sin(xis))
    if np.any(np.abs(W) < min_wronskian):
        raise ResonanceError("Jost Wronskian vanishes near a band edge")
    return ratio


def scattering_states(xi, V: Potential, min_wronskian: float = 1e-8) -> np.ndarray:
    """Generalized eigenfunctions psi(n, xi), xi in (-pi, 0) U (0, pi).

    For xi > 0, psi = T(xi) f_+(., xi): unit wave incoming from the left.
    For xi < 0, psi = T(|xi|) f_-(., |xi|): unit wave incoming from the right.
    T(xi) = 2i sin(xi) / W(xi). With this normalization
    sum_n |f(n)|^2 = int_{-pi}^{pi} |f_hat(xi)|^2 dxi for f in Ran P_c.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if np.any(xi == 0) or np.any(np.abs(xi) >= np.pi):
        raise ValueError("xi must lie in (-pi, 0) U (0, pi)")
    k = np.abs(xi)
    _, fp, fm = _jost_arrays(k, V)
    W = _wronskian(fp, fm)[:, V.grid.half_width]
    if np.any(np.abs(W) < min_wronskian):
        raise ResonanceError("Jost Wronskian vanishes")
    T = 2j * np.sin(k) / W
    return T[:, None] * np.where((xi > 0)[:, None], fp, fm)


def distorted_ft(f: ArrayLike, xi, V: Potential):
    """f_hat(xi) = (2 pi)^{-1/2} sum_n f(n) conj(psi(n, xi)).

    Reduces to the ordinary lattice Fourier coefficient when V = 0.
    """
    fv = np.asarray(as_values(f), dtype=complex)
    psi = scattering_states(xi, V)
    out = psi.conj() @ fv / np.sqrt(2 * np.pi)
    return complex(out[0]) if np.ndim(xi) == 0 else out


def parseval_integral(f: ArrayLike, V: Potential, nodes: int = 256) -> float:
    """int_{-pi}^{pi} |f_hat|^2 by Gauss-Legendre on each half of the torus."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    xi = 0.5 * np.pi * (x + 1)  # (0, pi)
    ww = 0.5 * np.pi * w
    fh_p = distorted_ft(f, xi, V)
    fh_m = distorted_ft(f, -xi, V)
    return float(np.sum(ww * (np.abs(fh_p) ** 2 + np.abs(fh_m) ** 2)))


# ----------------------------------------------------------------------------
# linear propagator


class LinearPropagator:
    """e^{-itH} by one dense diagonalization of the truncated H."""

    def __init__(self, V: Potential):
        self.potential = V
        d, off = V.hamiltonian_diagonals()
        self.energies, self.modes = eigh_tridiagonal(d, off)

    @property
    def grid(self) -> LatticeGrid:
        return self.potential.grid

    def __call__(self, u0: ArrayLike, t: float) -> np.ndarray:
        u = np.asarray(as_values(u0), dtype=complex)
        if u.shape != (self.grid.size,):
            raise ValueError("grid mismatch between field and propagator cache")
        if t == 0:
            return u.copy()
        c = self.modes.T @ u
        return self.modes @ (np.exp(-1j * self.energies * t) * c)


_PROPAGATORS: dict = {}


def get_propagator(V: Potential) -> LinearPropagator:
    key = (V.grid, V.values.tobytes())
    prop = _PROPAGATORS.get(key)
    if prop is None:
        if len(_PROPAGATORS) >= 2:
            _PROPAGATORS.pop(next(iter(_PROPAGATORS)))
        prop = _PROPAGATORS[key] = LinearPropagator(V)
    return prop


def propagate_linear(u0: ArrayLike, t: float, V: Potential) -> np.ndarray:
    """e^{-itH} u0 (cached diagonalization per potential and grid)."""
    return get_propagator(V)(u0, t)


# ----------------------------------------------------------------------------
# decay experiments


@dataclass(frozen=True)
class DecayFit:
    kind: str
    slope: float
    times: np.ndarray = field(repr=False)
    norms: np.ndarray = field(repr=False)
    intercept: float = 0.0


def fit_loglog(t: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(np.log(t), np.log(y), 1)
    return float(slope), float(intercept)


def first_resonant_frequency(eigenvalues: np.ndarray, n_range=range(-10, 11)) -> float:
    e1, e2 = eigenvalues[:2]
    om = [e1 + n * (e2 - e1) for n in n_range]
    inside = [w for w in om if BAND[0] < w < BAND[1]]
    if not inside:
        raise SpectralError("no omega_n inside the band")
    return min(inside, key=lambda w: abs(w))


def decay_exponent_experiment(
    kind: str,
    V: Potential,
    t_max: float,
    n_times: int = 16,
    f: Optional[ArrayLike] = None,
    omega: Optional[float] = None,
    sigma: float = 4.0,
    spec: Optional[SpectralData] = None,
) -> DecayFit:
    """Fit the power-law decay exponent of a linear evolution.

    ``"sup_norm_l0"``: ||e^{-itH} P_c delta_0||_{l^inf}.
    ``"weighted_l4"``: ||e^{-itH} R_+(omega) P_c f||_{l^{2,-sigma}}; omega defaults
    to the in-band frequency omega_{N0} of the first two eigenvalues.
    Times are log-spaced on [t_max/10, t_max].
    """
    if n_times < 4:
        raise ValueError("the fit needs at least 4 times")
    grid = V.grid
    if t_max > grid.half_width / 2:
        raise ValueError(f"t_max={t_max} exceeds the boundary reflection time ~{grid.half_width / 2}")
    if spec is None:
        spec = discrete_spectrum(V)
    if f is None:
        f = grid.delta(0).values
    times = np.geomspace(t_max / 10, t_max, n_times)
    prop = get_propagator(V)
    if kind == "sup_norm_l0":
        u0 = pc_project(f, spec)
        norms = np.array([np.max(np.abs(prop(u0, t))) for t in times])
    elif kind == "weighted_l4":
        if omega is None:
            omega = first_resonant_frequency(spec.eigenvalues)
        x = outgoing_resolvent(omega, pc_project(f, spec), V)
        norms = np.array([norm_lp_sigma(prop(x, t), grid, 2, -sigma) for t in times])
    else:
        raise ValueError(f"unknown decay experiment {kind!r}")
    slope, intercept = fit_loglog(times, norms)
    return DecayFit(kind, slope, times, norms, intercept)
