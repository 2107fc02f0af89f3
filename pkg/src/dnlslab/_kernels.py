"""Compiled inner loops for the split-step integrator."""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def _horner(c, s):
    acc = 0.0
    for k in range(c.shape[0] - 1, -1, -1):
        acc = acc * s + c[k]
    return acc


@numba.njit(cache=True)
def banded_increment(DT, offs, u, out):
    """out = u + K u with K[n, n + offs[i]] = DT[n, i] (offsets consecutive)."""
    M = u.shape[0]
    nd = offs.shape[0]
    b = max(-offs[0], offs[nd - 1])
    for n in range(M):
        acc = u[n]
        if b <= n < M - b:
            base = n + offs[0]
            for i in range(nd):
                acc += DT[n, i] * u[base + i]
        else:
            for i in range(nd):
                m = n + offs[i]
                if 0 <= m < M:
                    acc += DT[n, i] * u[m]
        out[n] = acc


@numba.njit(cache=True)
def _unit_phase(th):
    # Taylor branch for small angles: the truncation error th^10/10! is below round-off
    if abs(th) < 1e-2:
        t2 = th * th
        c = 1.0 - t2 / 2 * (1.0 - t2 / 12 * (1.0 - t2 / 30 * (1.0 - t2 / 56)))
        s = th * (1.0 - t2 / 6 * (1.0 - t2 / 20 * (1.0 - t2 / 42 * (1.0 - t2 / 72))))
        return complex(c, s)
    return complex(np.cos(th), np.sin(th))


@numba.njit(cache=True)
def nonlinear_phase(u, beta_c, tau):
    """u(n) <- exp(-i tau beta(|u(n)|^2)) u(n)."""
    for n in range(u.shape[0]):
        s = u[n].real * u[n].real + u[n].imag * u[n].imag
        u[n] = u[n] * _unit_phase(-tau * _horner(beta_c, s))


@numba.njit(cache=True)
def strang_steps(DT, offs, u, beta_c, dt, nsteps):
    """nsteps Strang steps N(dt/2) L(dt) N(dt/2); adjacent half phases are fused."""
    if nsteps <= 0:
        return u
    out = np.empty_like(u)
    nonlinear_phase(u, beta_c, 0.5 * dt)
    for k in range(nsteps):
        banded_increment(DT, offs, u, out)
        u, out = out, u
        if k < nsteps - 1:
            nonlinear_phase(u, beta_c, dt)
    nonlinear_phase(u, beta_c, 0.5 * dt)
    return u
