"""Manufactured solutions for convergence studies.

Each registered solution is a smooth field vanishing on the boundary of the
box. The forcing that makes it an exact solution of the damped Westervelt
equation is derived symbolically once per parameter set and evaluated with
numpy.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import sympy as sp


def _standing(X, t, extent, A):
    S = sp.Integer(1)
    for xr, L in zip(X, extent):
        S = S * sp.sin(sp.pi * xr / L)
    return A * S * (sp.cos(sp.pi * t) + sp.sin(sp.pi * t) / 2)


def _decaying(X, t, extent, A):
    S = sp.Integer(1)
    for xr, L in zip(X, extent):
        S = S * sp.sin(sp.pi * xr / L)
    return A * S * sp.exp(-t) * (1 + t)


MANUFACTURED = {
    "standing-wave": _standing,
    "decaying-mode": _decaying,
}


@dataclass(frozen=True)
class Manufactured:
    u: Callable
    v: Callable
    f: Callable

    def __call__(self, X, t):
        return self.u(*X, t)


def _num(val):
    return sp.nsimplify(val, rational=True) if float(val).is_integer() else sp.Float(val)


@lru_cache(maxsize=32)
def manufactured(name, extent, amplitude, lam, rho, b, delta, k, q) -> Manufactured:
    """Exact field, its time derivative and the matching forcing, as numpy callables ``fn(*X, t)``."""
    dim = len(extent)
    X = sp.symbols("x0:%d" % dim, real=True)
    t = sp.Symbol("t", real=True)
    u = MANUFACTURED[name](X, t, [_num(L) for L in extent], _num(amplitude))
    v = sp.diff(u, t)
    a = sp.diff(v, t)
    lam_, rho_, b_, delta_, k_, q_ = (_num(c) for c in (lam, rho, b, delta, k, q))
    grad_v = [sp.diff(v, xr) for xr in X]
    if q_ == 1:
        damp = b_
    else:
        damp = b_ * ((1 - delta_) + delta_ * sp.Add(*[g**2 for g in grad_v]) ** ((q_ - 1) / 2))
    div_stiff = sum(sp.diff(sp.diff(u, xr) / rho_, xr) for xr in X)
    div_damp = sum(sp.diff(damp * g, xr) for g, xr in zip(grad_v, X))
    f = (1 - 2 * k_ * u) * a / lam_ - div_stiff - div_damp - 2 * k_ / lam_ * v**2
    args = (*X, t)
    return Manufactured(
        u=_vectorize(sp.lambdify(args, u, "numpy")),
        v=_vectorize(sp.lambdify(args, v, "numpy")),
        f=_vectorize(sp.lambdify(args, f, "numpy")),
    )


def _vectorize(fn):
    def call(*args):
        shape = np.broadcast(*args).shape
        return np.broadcast_to(np.asarray(fn(*args), dtype=float), shape).copy()

    return call


def for_scenario(s) -> Manufactured:
    m = s.materials_minus
    return manufactured(
        s.mms, tuple(float(e) for e in s.extent), float(s.initial_u0.amplitude),
        m.lam, m.rho, m.b, m.delta, m.k, float(s.q),
    )


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    n: int
    dt: float
    error: float
    order: float  # NaN on the first level


def convergence_study(s, levels: int) -> list[ConvergenceRow]:
    """L2 error at ``T`` against the manufactured solution under simultaneous (h, dt) halving."""
    from .errors import ValidationError
    from .integrator import simulate

    if s.mms is None:
        raise ValidationError("source.mms: convergence needs a manufactured solution")
    if levels < 2:
        raise ValidationError("levels must be at least 2 to compute an order")
    rows = []
    for lev in range(levels):
        sl = s if lev == 0 else s.refined(2**lev)
        traj = simulate(sl)
        if traj.error is not None:
            raise traj.error
        grid = sl.grid
        exact = for_scenario(sl).u(*grid.mesh(), traj.final.t)
        err = float(np.sqrt(grid.cell_volume * np.sum((traj.final.u - exact) ** 2)))
        order = float("nan") if not rows else float(np.log2(rows[-1].error / err))
        rows.append(ConvergenceRow(lev, sl.grid_n, sl.dt, err, order))
    return rows
