"""Jacobi-preconditioned conjugate gradients for the SPD systems of the time stepper."""
from __future__ import annotations

import numpy as np

from .errors import NonconvergenceError


def _dot(a, b):
    # numpy pairwise summation, not BLAS: fixed reduction order
    return float(np.add.reduce((a * b).ravel()))


def pcg(apply_A, b, diag, x0=None, tol=1e-12, maxiter=None):
    """Solve ``A x = b`` for symmetric positive definite ``A`` given as a callable.

    Stops when ``||r|| <= tol * ||b||``. Returns ``(x, iterations)``; raises
    :class:`NonconvergenceError` when ``maxiter`` is exhausted.
    """
    if maxiter is None:
        maxiter = 10 * b.size
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float, copy=True)
    bnorm = np.sqrt(_dot(b, b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    target = tol * bnorm
    r = b - apply_A(x)
    rnorm = np.sqrt(_dot(r, r))
    if rnorm <= target:
        return x, 0
    z = r / diag
    d = z.copy()
    rz = _dot(r, z)
    for it in range(1, maxiter + 1):
        Ad = apply_A(d)
        dAd = _dot(d, Ad)
        if dAd <= 0.0:
            raise NonconvergenceError("conjugate gradients: operator not positive definite")
        alpha = rz / dAd
        x += alpha * d
        r -= alpha * Ad
        rnorm = np.sqrt(_dot(r, r))
        if rnorm <= target:
            return x, it
        z = r / diag
        rz_new = _dot(r, z)
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise NonconvergenceError(
        f"conjugate gradients did not reach relative residual {tol:g} in {maxiter} iterations "
        f"(reached {rnorm / bnorm:.3e})"
    )
