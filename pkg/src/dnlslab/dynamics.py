"""Strang split-step integration of i u_t = H u + beta(|u|^2) u.

The nonlinear substep is an exact pointwise phase rotation. The linear
substep applies U = exp(-i dt H) in the form u + K u, where K = U - I is
assembled once per (potential, dt, absorber) by a Taylor series of sparse
banded powers and truncated where its diagonals fall below 1e-20. Applying
the increment K u rather than U u keeps the round-off per step at the size
of K u, which is what holds the mass drift near 1e-13 over 10^5 steps.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .lattice import (
    LatticeField,
    NonlinearityCoefficients,
    Potential,
    as_values,
    energy_values,
    write_field_csv,
)


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Absorber:
    """Complex absorbing potential -i W(n), W ramping quadratically over the outer ``width`` sites."""

    width: int
    strength: float = 0.5

    def profile(self, V: Potential) -> np.ndarray:
        N = V.grid.half_width
        if not (0 < self.width < N / 4):
            raise ValueError("absorber width must lie in (0, N/4)")
        depth = np.abs(V.grid.sites) - (N - self.width)
        return self.strength * np.where(depth > 0, (depth / self.width) ** 2, 0.0)


@dataclass(frozen=True)
class IntegratorConfig:
    t_max: float
    dt: float = 0.005
    scheme: str = "strang_splitstep"
    absorber: Optional[Absorber] = None
    record_stride: int = 200

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_max < 0:
            raise ValueError("t_max must be >= 0")
        if self.scheme != "strang_splitstep":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass(frozen=True, eq=False)
class StepCache:
    """Banded K = exp(-i dt (H - i W)) - I; diagonals[n, i] = K[n, n + offsets[i]]."""

    dt: float
    offsets: np.ndarray = field(repr=False)
    diagonals: np.ndarray = field(repr=False)
    grid_size: int
    key: tuple = field(repr=False)


_CACHES: dict = {}


def build_step_cache(V: Potential, dt: float, absorber: Optional[Absorber] = None, floor: float = 1e-20) -> StepCache:
    key = (V.grid, V.values.tobytes(), float(dt), absorber)
    hit = _CACHES.get(key)
    if hit is not None:
        return hit
    d, off = V.hamiltonian_diagonals()
    diag = d.astype(complex)
    if absorber is not None:
        diag = diag - 1j * absorber.profile(V)
    M = d.size
    H = sp.diags([off, diag, off], [-1, 0, 1], format="csr", dtype=complex)
    P = (-1j * dt) * H
    K = P.copy()
    term = P.copy()
    for k in range(2, 200):
        term = (term @ P) / k
        K = K + term
        if abs(term).max() < 1e-24:
            break
    else:
        raise IntegrationError("Taylor series for the linear step did not converge (dt too large)")
    K = K.tocsr()
    offsets, rows = [], []
    half = 0
    for o in range(1, min(k + 2, M)):
        if max(np.max(np.abs(K.diagonal(o))), np.max(np.abs(K.diagonal(-o)))) >= floor:
            half = o
    for o in range(-half, half + 1):
        dg = K.diagonal(o)
        row = np.zeros(M, dtype=complex)
        if o >= 0:
            row[: M - o] = dg
        else:
            row[-o:] = dg
        offsets.append(o)
        rows.append(row)
    cache = StepCache(float(dt), np.array(offsets, dtype=np.int64), np.ascontiguousarray(np.array(rows).T), M, key)
    if len(_CACHES) > 8:
        _CACHES.pop(next(iter(_CACHES)))
    _CACHES[key] = cache
    return cache


def _beta_vector(coeffs: NonlinearityCoefficients) -> np.ndarray:
    return np.ascontiguousarray(coeffs.beta_coefficients(), dtype=float)


def step(
    u: Union[LatticeField, np.ndarray],
    dt: float,
    V: Potential,
    coeffs: NonlinearityCoefficients,
    cache: Optional[StepCache] = None,
    n_steps: int = 1,
) -> np.ndarray:
    """Advance by ``n_steps`` Strang steps of size dt (negative dt runs backward)."""
    if cache is None:
        cache = build_step_cache(V, dt)
    if cache.dt != dt or cache.grid_size != V.grid.size:
        raise ValueError("step cache does not match dt or grid")
    v = np.array(as_values(u), dtype=complex)
    if v.shape != (cache.grid_size,):
        raise ValueError("field and cache grids differ")
    return _kernels.strang_steps(cache.diagonals, cache.offsets, v, _beta_vector(coeffs), float(dt), int(n_steps))


@dataclass(eq=False)
class TrajectoryRecord:
    times: np.ndarray
    snapshots: Optional[np.ndarray] = field(repr=False)
    mass_series: np.ndarray = field(repr=False)
    energy_series: np.ndarray = field(repr=False)
    absorbed_mass_series: Optional[np.ndarray] = field(default=None, repr=False)
    final: Optional[np.ndarray] = field(default=None, repr=False)
    grid: object = field(default=None, repr=False)
    config: Optional[IntegratorConfig] = None
    wall_time: float = 0.0
    stopped_early: bool = False
    callback_values: list = field(default_factory=list, repr=False)

    def mass_drift(self) -> float:
        return float(np.max(np.abs(self.mass_series - self.mass_series[0])))

    def relative_mass_drift(self) -> float:
        m0 = self.mass_series[0]
        return self.mass_drift() / m0 if m0 > 0 else self.mass_drift()

    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy_series - self.energy_series[0])))

    def export(self, out_dir: Union[str, Path], prefix: str = "snap") -> Path:
        """Per-snapshot CSV files (n, re, im) plus manifest.json with the monitor series."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = []
        if self.snapshots is not None:
            for k, s in enumerate(self.snapshots):
                name = f"{prefix}_{k:05d}.csv"
                write_field_csv(out / name, self.grid, s)
                files.append(name)
        manifest = {
            "schema": 1,
            "times": self.times.tolist(),
            "mass_series": self.mass_series.tolist(),
            "energy_series": self.energy_series.tolist(),
            "absorbed_mass_series": None if self.absorbed_mass_series is None else self.absorbed_mass_series.tolist(),
            "snapshot_files": files,
            "config": None if self.config is None else asdict(self.config),
            "wall_time": self.wall_time,
        }
        path = out / "manifest.json"
        path.write_text(json.dumps(manifest, indent=1))
        return path


def run(
    u0: Union[LatticeField, np.ndarray],
    config: IntegratorConfig,
    V: Potential,
    coeffs: NonlinearityCoefficients,
    store_snapshots: bool = True,
    callback: Optional[Callable[[float, np.ndarray], object]] = None,
) -> TrajectoryRecord:
    """Integrate to t_max, recording monitors every ``record_stride`` steps.

    ``callback(t, u)`` is called at every record point; a return value of
    ``StopIteration`` (the class) ends the run early, any other value is kept in
    ``callback_values``.
    """
    tic = time.perf_counter()
    cache = build_step_cache(V, config.dt, config.absorber)
    beta_c = _beta_vector(coeffs)
    u = np.array(as_values(u0), dtype=complex)
    if u.shape != (V.grid.size,):
        raise ValueError("initial field and potential grids differ")
    n_total = config.n_steps
    times, snaps, masses, energies, cb = [], [], [], [], []
    stopped = False

    def record(t, v):
        nonlocal stopped
        times.append(t)
        masses.append(float(np.vdot(v, v).real))
        energies.append(energy_values(v, V.values, coeffs))
        if store_snapshots:
            snaps.append(v.copy())
        if callback is not None:
            r = callback(t, v)
            if r is StopIteration:
                stopped = True
            else:
                cb.append(r)

    record(0.0, u)
    done = 0
    while done < n_total and not stopped:
        k = min(config.record_stride, n_total - done)
        u = _kernels.strang_steps(cache.diagonals, cache.offsets, u, beta_c, config.dt, k)
        done += k
        if not np.all(np.isfinite(u)):
            raise IntegrationError(f"non-finite field at t = {done * config.dt:.6g}")
        record(done * config.dt, u)
    m = np.array(masses)
    return TrajectoryRecord(
        times=np.array(times),
        snapshots=np.array(snaps) if store_snapshots else None,
        mass_series=m,
        energy_series=np.array(energies),
        absorbed_mass_series=(m[0] - m) if config.absorber is not None else None,
        final=u,
        grid=V.grid,
        config=config,
        wall_time=time.perf_counter() - tic,
        stopped_early=stopped,
        callback_values=cb,
    )


def refinement_ratio(
    u0: Union[LatticeField, np.ndarray],
    V: Potential,
    coeffs: NonlinearityCoefficients,
    dt: float,
    t_final: float,
) -> float:
    """Self-convergence ratio ||u_dt - u_{dt/2}|| / ||u_{dt/2} - u_{dt/4}|| at t_final (4 for a second-order scheme)."""
    finals = []
    for h in (dt, dt / 2, dt / 4):
        n = int(round(t_final / h))
        finals.append(step(u0, h, V, coeffs, build_step_cache(V, h), n_steps=n))
    return float(np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2]))
