"""Truncated integer lattice, fields, the operator H = -Delta + V, and the
conserved quantities of the discrete NLS.

Sites are indexed ``-N..N`` and stored at array positions ``0..2N``; values
outside the window are taken to be zero (Dirichlet truncation of Z).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence, Union

import numpy as np

ArrayLike = Union[np.ndarray, Sequence[complex], "LatticeField"]


@dataclass(frozen=True)
class LatticeGrid:
    half_width: int
    boundary: str = "dirichlet"

    def __post_init__(self):
        if int(self.half_width) != self.half_width or self.half_width < 1:
            raise ValueError(f"half_width must be a positive integer, got {self.half_width!r}")
        if self.boundary != "dirichlet":
            raise ValueError(f"unsupported boundary {self.boundary!r}")

    @property
    def size(self) -> int:
        return 2 * self.half_width + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.half_width, self.half_width + 1)

    def index(self, n: int) -> int:
        """Array position of lattice site ``n``."""
        if abs(n) > self.half_width:
            raise IndexError(f"site {n} outside -{self.half_width}..{self.half_width}")
        return n + self.half_width

    def delta(self, n: int = 0) -> "LatticeField":
        v = np.zeros(self.size, dtype=complex)
        v[self.index(n)] = 1.0
        return LatticeField(self, v)

    def zeros(self) -> "LatticeField":
        return LatticeField(self, np.zeros(self.size, dtype=complex))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Complex amplitude on every site of ``grid``."""

    grid: LatticeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite entries")
        object.__setattr__(self, "values", _frozen(v))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def _other(self, other):
        if isinstance(other, LatticeField):
            _check_grids(self.grid, other.grid)
            return other.values
        return other

    def __add__(self, other):
        return LatticeField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return LatticeField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return LatticeField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return LatticeField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return LatticeField(self.grid, -self.values)

    def __getitem__(self, n: int) -> complex:
        """Value at lattice site ``n`` (not array position)."""
        return complex(self.values[self.grid.index(n)])

    def to_csv(self, path: Union[str, Path]) -> None:
        write_field_csv(path, self.grid, self.values)


@dataclass(frozen=True, eq=False)
class Potential:
    grid: LatticeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if np.iscomplexobj(v):
            if np.any(v.imag != 0):
                raise ValueError("potential must be real")
            v = v.real
        v = v.astype(float)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("potential has non-finite entries")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def zero(cls, grid: LatticeGrid) -> "Potential":
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def point_wells(cls, grid: LatticeGrid, wells: dict[int, float]) -> "Potential":
        """``V(n) = wells[n]`` on the listed sites, zero elsewhere."""
        v = np.zeros(grid.size)
        for n, depth in wells.items():
            v[grid.index(n)] += depth
        return cls(grid, v)

    @classmethod
    def single_site(cls, grid: LatticeGrid, v0: float) -> "Potential":
        return cls.point_wells(grid, {0: -v0})

    @classmethod
    def two_site(cls, grid: LatticeGrid, v0: float, d: int) -> "Potential":
        """Symmetric well ``-v0 (delta_{-d} + delta_{d})``."""
        return cls.point_wells(grid, {-d: -v0, d: -v0})

    def moment(self) -> float:
        """sum (1+|n|)|V(n)| over the grid."""
        return float(np.sum((1 + np.abs(self.grid.sites)) * np.abs(self.values)))

    def outer_max(self) -> float:
        """max |V(n)| for |n| > N/2; large values signal a grid too small for V."""
        outer = np.abs(self.grid.sites) > self.grid.half_width / 2
        return float(np.max(np.abs(self.values[outer]), initial=0.0))

    def support_radius(self, tol: float = 0.0) -> int:
        """Largest |n| with |V(n)| > tol (0 for V == 0)."""
        idx = np.nonzero(np.abs(self.values) > tol)[0]
        if idx.size == 0:
            return 0
        return int(np.max(np.abs(self.grid.sites[idx])))

    def on_grid(self, grid: LatticeGrid) -> "Potential":
        """Zero-pad (or crop) onto another grid centred at the same origin."""
        v = np.zeros(grid.size)
        m = min(grid.half_width, self.grid.half_width)
        v[grid.index(-m): grid.index(m) + 1] = self.values[self.grid.index(-m): self.grid.index(m) + 1]
        cropped = np.abs(self.grid.sites) > m
        if np.any(self.values[cropped] != 0):
            raise ValueError("cropping would discard nonzero potential values")
        return Potential(grid, v)

    def hamiltonian_diagonals(self) -> tuple[np.ndarray, np.ndarray]:
        """(diagonal, off-diagonal) of the tridiagonal matrix of H."""
        return 2.0 + self.values, -np.ones(self.grid.size - 1)


@dataclass(frozen=True)
class NonlinearityCoefficients:
    """beta(s) = s**3 + sum_{j>=4} lam[j] s**j.

    ``lam`` maps the power j (>= 4) to its real coefficient. An empty mapping
    is the pure cubic-in-s case. ``cubic`` is the leading coefficient (1 in
    the model; 0 switches the nonlinearity off for linear reference runs).
    """

    lam: dict = field(default_factory=dict)
    cubic: float = 1.0

    def __post_init__(self):
        clean = {}
        for j, c in dict(self.lam).items():
            j = int(j)
            if j < 4:
                raise ValueError(f"extra powers must be >= 4, got s**{j}")
            if not np.isfinite(c):
                raise ValueError(f"coefficient of s**{j} is not finite")
            clean[j] = float(c)
        object.__setattr__(self, "lam", clean)
        object.__setattr__(self, "cubic", float(self.cubic))

    @property
    def degree(self) -> int:
        return max([3, *self.lam])

    def beta_coefficients(self) -> np.ndarray:
        """Power-series coefficients c[k] of beta(s) = sum c[k] s**k."""
        c = np.zeros(self.degree + 1)
        c[3] = self.cubic
        for j, v in self.lam.items():
            c[j] += v
        return c

    def B_coefficients(self) -> list[Fraction]:
        """Exact coefficients of B(s) = int_0^s beta: s**4/4 + sum lam_j s**(j+1)/(j+1)."""
        out = [Fraction(0)] * (self.degree + 2)
        out[4] = Fraction(self.cubic) / 4
        for j, v in self.lam.items():
            out[j + 1] += Fraction(v) / (j + 1)
        return out


def _check_grids(a: LatticeGrid, b: LatticeGrid) -> None:
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


def as_values(u: ArrayLike) -> np.ndarray:
    if isinstance(u, LatticeField):
        return u.values
    return np.asarray(u)


def _grid_of(*objs) -> LatticeGrid:
    grids = [o.grid for o in objs if hasattr(o, "grid")]
    for g in grids[1:]:
        _check_grids(grids[0], g)
    return grids[0]


def laplacian_values(u: np.ndarray) -> np.ndarray:
    out = -2.0 * u
    out[:-1] += u[1:]
    out[1:] += u[:-1]
    return out


def discrete_laplacian(u: LatticeField) -> LatticeField:
    """(Delta u)(n) = u(n+1) - 2u(n) + u(n-1), zero beyond the grid."""
    return LatticeField(u.grid, laplacian_values(u.values))


def apply_H_values(u: np.ndarray, V: np.ndarray) -> np.ndarray:
    u = np.asarray(u)
    V = np.asarray(V)
    if u.shape != V.shape:
        raise ValueError(f"grid mismatch: field {u.shape} vs potential {V.shape}")
    return -laplacian_values(u) + V * u


def apply_H(u: LatticeField, V: Potential) -> LatticeField:
    _check_grids(u.grid, V.grid)
    return LatticeField(u.grid, apply_H_values(u.values, V.values))


def beta_eval(s, coeffs: NonlinearityCoefficients):
    """beta(s) for s >= 0 (scalar or array)."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("beta is defined for s >= 0")
    return np.polynomial.polynomial.polyval(s_arr, coeffs.beta_coefficients())


def beta_prime(s, coeffs: NonlinearityCoefficients):
    c = coeffs.beta_coefficients()
    return np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), np.polynomial.polynomial.polyder(c))


def B_eval(s, coeffs: NonlinearityCoefficients):
    c = np.array([float(x) for x in coeffs.B_coefficients()])
    return np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), c)


def inner(u: ArrayLike, v: ArrayLike) -> float:
    """Real inner product <u, v> = Re sum u conj(v)."""
    return float(np.real(np.vdot(as_values(v), as_values(u))))


def pairing(f: ArrayLike, g: ArrayLike) -> complex:
    """Sesquilinear pairing (f, g) = sum f conj(g), linear in f."""
    return complex(np.vdot(as_values(g), as_values(f)))


def mass(u: ArrayLike) -> float:
    v = as_values(u)
    return float(np.sum(np.abs(v) ** 2))


def energy(u: LatticeField, V: Potential, coeffs: NonlinearityCoefficients) -> float:
    """E(u) = 1/2 <Hu, u> + 1/2 sum_n B(|u(n)|^2)."""
    _check_grids(u.grid, V.grid)
    return energy_values(u.values, V.values, coeffs)


def energy_values(u: np.ndarray, V: np.ndarray, coeffs: NonlinearityCoefficients) -> float:
    quad = np.real(np.vdot(u, apply_H_values(u, V)))
    return float(0.5 * quad + 0.5 * np.sum(B_eval(np.abs(u) ** 2, coeffs)))


def stagger(u: LatticeField) -> LatticeField:
    """(T u)(n) = (-1)^n u(n)."""
    sign = np.where(u.grid.sites % 2 == 0, 1.0, -1.0)
    return LatticeField(u.grid, sign * u.values)


def norm_lp_sigma(u: ArrayLike, grid: LatticeGrid, p: float = 2.0, sigma: float = 0.0) -> float:
    """||u||_{l^{p,sigma}} with weight <n>^sigma, <n> = (1+n^2)^{1/2}."""
    v = np.abs(as_values(u))
    w = (1.0 + grid.sites.astype(float) ** 2) ** (sigma / 2)
    if np.isinf(p):
        return float(np.max(w * v))
    return float(np.sum((w * v) ** p) ** (1.0 / p))


def norm_exp(u: ArrayLike, grid: LatticeGrid, a: float) -> float:
    """||u||_{l^a_e} = (sum e^{2a|n|} |u(n)|^2)^{1/2}."""
    v = np.abs(as_values(u))
    return float(np.sqrt(np.sum(np.exp(2 * a * np.abs(grid.sites)) * v**2)))


def write_field_csv(path: Union[str, Path], grid: LatticeGrid, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "re", "im"])
        for n, v in zip(grid.sites, values):
            w.writerow([int(n), repr(float(v.real)), repr(float(v.imag))])


def read_field_csv(path: Union[str, Path]) -> LatticeField:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    n = np.array([int(r["n"]) for r in rows])
    N = int(np.max(np.abs(n)))
    grid = LatticeGrid(N)
    if not np.array_equal(n, grid.sites):
        raise ValueError("CSV sites must be the contiguous range -N..N")
    vals = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
    return LatticeField(grid, vals)
