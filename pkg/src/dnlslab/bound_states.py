"""Nonlinear bound states bifurcating from the eigenpairs of H.

For real z = sqrt(rho) the stationary equation
    (H - E) phi(z) + beta(|phi(z)|^2) phi(z) = 0,  phi(z) = z (phi_j + q),
becomes, after dividing by z, a system for q (orthogonal to phi_j) and the
energy shift e~ = E - e_j. It is solved by bordered Newton along a geometric
rho ladder; complex z follows from gauge covariance.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import spsolve

from .lattice import (
    LatticeField,
    LatticeGrid,
    NonlinearityCoefficients,
    Potential,
    apply_H_values,
    beta_eval,
    beta_prime,
)
from .spectral import SpectralData


class BranchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BoundStateBranch:
    mode_index: int
    rho_samples: np.ndarray
    q_profiles: np.ndarray = field(repr=False)  # (K, 2N+1), real
    e_shift: np.ndarray = field(repr=False)
    base_energy: float
    base_profile: np.ndarray = field(repr=False)
    grid: LatticeGrid = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    newton_iterations: tuple = ()
    truncated: str = ""

    def __post_init__(self):
        for a in (self.rho_samples, self.q_profiles, self.e_shift, self.residuals):
            a.setflags(write=False)
        # not-a-knot cubic interpolation in rho (q ~ rho^3 near 0)
        object.__setattr__(self, "_q_spline", CubicSpline(self.rho_samples, self.q_profiles, axis=0))
        object.__setattr__(self, "_e_spline", CubicSpline(self.rho_samples, self.e_shift))

    @property
    def rho_max(self) -> float:
        return float(self.rho_samples[-1])

    def _check(self, rho: float) -> None:
        if rho < 0 or rho > self.rho_max * (1 + 1e-12):
            raise BranchError(f"|z|^2 = {rho:.3e} outside the branch range [0, {self.rho_max:.3e}]")

    def q(self, rho: float) -> np.ndarray:
        self._check(rho)
        return self._q_spline(rho)

    def dq(self, rho: float) -> np.ndarray:
        self._check(rho)
        return self._q_spline(rho, 1)

    def energy(self, rho: float) -> float:
        """E_j(rho) = e_j + e~_j(rho)."""
        self._check(rho)
        return self.base_energy + float(self._e_spline(rho))

    def profile(self, rho: float) -> np.ndarray:
        """phi_j + q_j(rho)."""
        return self.base_profile + self.q(rho)

    def q_norms(self) -> np.ndarray:
        return np.linalg.norm(self.q_profiles, axis=1)

    def scaling_slope(self, z_lo: float = 1e-2, z_hi: float = 1e-1) -> float:
        """Slope of log ||q||_2 against log |z| over samples with |z| in [z_lo, z_hi]."""
        zs = np.sqrt(self.rho_samples)
        sel = (zs >= z_lo * (1 - 1e-9)) & (zs <= z_hi * (1 + 1e-9))
        if sel.sum() < 3:
            raise BranchError("not enough samples in the fit window")
        return float(np.polyfit(np.log(zs[sel]), np.log(self.q_norms()[sel]), 1)[0])

    def decay_report(self, kappa: float) -> dict:
        """Check |q(n)| <= C exp(-kappa |n| / 2) per sample.

        Returns the worst normalized constant C and the same quantity restricted to
        |n| > N/4; a bounded tail ratio means q decays at least at rate kappa/2.
        """
        n = np.abs(self.grid.sites)
        w = np.exp(0.5 * kappa * n)
        worst = 0.0
        tail = 0.0
        for qk in self.q_profiles[1:]:
            m = np.max(np.abs(qk))
            if m == 0:
                continue
            # entries at the round-off floor carry no decay information
            c = np.where(np.abs(qk) > 1e-13 * m, np.abs(qk) * w / m, 0.0)
            worst = max(worst, float(np.max(c)))
            tail = max(tail, float(np.max(c[n > self.grid.half_width // 4])))
        return {"kappa": float(kappa), "max_weighted_ratio": worst, "tail_weighted_ratio": tail}

    def monotone(self) -> bool:
        qn = self.q_norms()
        return bool(np.all(np.diff(qn) >= 0) and np.all(np.diff(np.abs(self.e_shift)) >= 0))

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rho", "e_shift", "q_norm_l2"])
            for r, e, qn in zip(self.rho_samples, self.e_shift, self.q_norms()):
                w.writerow([repr(float(r)), repr(float(e)), repr(float(qn))])


def stationary_residual(phi: np.ndarray, E: float, V: Potential, coeffs: NonlinearityCoefficients) -> float:
    """l2 norm of (H - E) phi + beta(|phi|^2) phi."""
    r = apply_H_values(phi, V.values) - E * phi + beta_eval(np.abs(phi) ** 2, coeffs) * phi
    return float(np.linalg.norm(r))


def _newton_sample(rho, q, et, phi, e, Hs, V, coeffs, tol, max_iter):
    M = phi.size
    for it in range(1, max_iter + 1):
        w = phi + q
        s = rho * w * w
        b = beta_eval(s, coeffs)
        F = Hs @ q - (e + et) * q - et * phi + b * w
        F = np.append(F, phi @ q)
        resid = abs(np.sqrt(rho)) * np.linalg.norm(F[:-1])
        if it > 1 and resid <= tol:
            return q, et, it - 1
        diag = -(e + et) + b + 2 * s * beta_prime(s, coeffs)
        J = Hs + sp.diags(diag)
        border_col = sp.csc_matrix(-w.reshape(-1, 1))
        row = sp.csr_matrix(np.append(phi, 0.0).reshape(1, -1))
        K = sp.vstack([sp.hstack([J, border_col]), row]).tocsc()
        d = spsolve(K, -F)
        q = q + d[:M]
        et = et + d[M]
        if not (np.all(np.isfinite(q)) and np.isfinite(et)):
            break
        if np.max(np.abs(d)) < 1e-17 and resid <= tol * 10:
            return q, et, it
    raise BranchError("Newton did not converge")


def continue_branch(
    j: int,
    rho_max: float,
    n_steps: int,
    V: Potential,
    coeffs: NonlinearityCoefficients,
    spec: SpectralData,
    rho_min: float = 1e-6,
    tol: float = 1e-13,
    max_iter: int = 50,
) -> BoundStateBranch:
    """Continue the bound-state family bifurcating from (e_j, phi_j).

    Samples are rho = 0 followed by ``n_steps`` geometric points on
    [rho_min, rho_max]. Each Newton solve is seeded from the previous sample.
    If Newton fails or E_j reaches the band, the branch is truncated at the
    last accepted sample and the reason is stored in ``truncated``.
    """
    if j not in (1, 2) or j > spec.count:
        raise ValueError(f"mode index {j} not available")
    if not (0 < rho_min < rho_max):
        raise ValueError("need 0 < rho_min < rho_max")
    phi = spec.eigenfunctions[j - 1]
    e = float(spec.eigenvalues[j - 1])
    d, off = V.hamiltonian_diagonals()
    Hs = sp.diags([off, d, off], [-1, 0, 1], format="csr")
    rhos = np.concatenate(([0.0], np.geomspace(rho_min, rho_max, n_steps)))
    qs = [np.zeros_like(phi)]
    ets = [0.0]
    res = [stationary_residual(0 * phi, e, V, coeffs)]
    iters = [0]
    q, et = np.zeros_like(phi), 0.0
    truncated = ""
    for rho in rhos[1:]:
        try:
            q, et, it = _newton_sample(rho, q.copy(), et, phi, e, Hs, V, coeffs, tol, max_iter)
        except (BranchError, RuntimeError) as exc:
            truncated = f"Newton failure at rho={rho:.4e}: {exc}"
            break
        E = e + et
        if 0.0 <= E <= 4.0:
            truncated = f"E_j entered the band at rho={rho:.4e}"
            break
        z = np.sqrt(rho)
        qs.append(q.copy())
        ets.append(et)
        res.append(stationary_residual(z * (phi + q), E, V, coeffs))
        iters.append(it)
    if truncated:
        warnings.warn(f"branch {j} truncated: {truncated}", RuntimeWarning, stacklevel=2)
    if len(qs) < 4:
        raise BranchError(f"branch {j} has fewer than 4 samples ({truncated})")
    br = BoundStateBranch(
        mode_index=j,
        rho_samples=rhos[: len(qs)].copy(),
        q_profiles=np.array(qs),
        e_shift=np.array(ets),
        base_energy=e,
        base_profile=phi.copy(),
        grid=V.grid,
        residuals=np.array(res),
        newton_iterations=tuple(iters),
        truncated=truncated,
    )
    if not br.monotone():
        warnings.warn(f"branch {j}: ||q|| or |e~| not monotone in rho", RuntimeWarning, stacklevel=2)
    return br


def eval_bound_state(branch: BoundStateBranch, z: complex) -> tuple[LatticeField, float]:
    """phi_j(z) = z (phi_j + q_j(|z|^2)) and E_j(|z|^2)."""
    rho = abs(z) ** 2
    vals = complex(z) * branch.profile(rho)
    return LatticeField(branch.grid, vals), branch.energy(rho)


def bound_state_values(branch: BoundStateBranch, z: complex) -> np.ndarray:
    return complex(z) * branch.profile(abs(z) ** 2)


def bound_state_derivatives(branch: BoundStateBranch, z: complex) -> tuple[np.ndarray, np.ndarray]:
    """(d/dRe z, d/dIm z) of phi_j(z) = z (phi_j + q(|z|^2))."""
    z = complex(z)
    rho = abs(z) ** 2
    w = branch.profile(rho)
    dq = branch.dq(rho)
    return w + 2 * z.real * z * dq, 1j * w + 2 * z.imag * z * dq
