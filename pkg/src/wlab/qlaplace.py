"""Pointwise q-Laplace vector calculus and sampling checks of the standard q-Laplace inequalities.

Vectors are numpy arrays whose last axis holds the components, so every
function works on a single vector or on a batch.

Inequality ids understood by :func:`check_inequality`:

``2.2``             | P(x) - P(y) | <= q |x - y| (|x| + |y|)^(q-1)
``2.3-as-stated``   | P(x) - P(y) | >= 1/2 |x-y|^2 (|x|+|y|)^(q-1) >= 2^(1-q) |x-y|^(q+1)
``2.3-monotone``    (P(x) - P(y)).(x - y) >= 2^(1-q) |x - y|^(q+1)
``2.4``             (P(x) - P(y)).(x - y) >= 4/(q+1)^2 |F(x) - F(y)|^2
``2.5``             | P(x) - P(y) | <= q (|x|^s + |y|^s) | |x|^s - |y|^s |      (vectors, as printed)
``2.5-scalar``      the same with x, y replaced by the magnitudes |x|, |y|
``2.5-ftransform``  | P(x) - P(y) | <= q (|x|^s + |y|^s) | F(x) - F(y) |
``young-as-stated`` |ab| <= eps |a|^r + (r-1) r^(r/(r-1)) eps^(-1/(1-r)) |b|^(r/(r-1))
``young-standard``  |ab| <= eps |a|^r + (r-1) r^(-r/(r-1)) eps^(-1/(r-1)) |b|^(r/(r-1))

with P(x) = |x|^(q-1) x, F(x) = |x|^((q-1)/2) x and s = (q-1)/2.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

INEQUALITY_IDS = (
    "2.2",
    "2.3-as-stated",
    "2.3-monotone",
    "2.4",
    "2.5",
    "2.5-scalar",
    "2.5-ftransform",
    "young-as-stated",
    "young-standard",
)

# readings that are theorems; the rest are printed variants reported for comparison
MUST_HOLD = ("2.2", "2.3-monotone", "2.4", "2.5-ftransform", "young-standard")

CHUNK = 1 << 16


def _norm(x):
    return np.sqrt(np.sum(np.asarray(x, dtype=float) ** 2, axis=-1))


def _abs_pow(a, e):
    # 0**0 == 1 in numpy, which is the convention needed at q = 1
    return np.power(a, e)


def power_map(x, q):
    """``|x|^(q-1) x``."""
    x = np.asarray(x, dtype=float)
    return _abs_pow(_norm(x), q - 1.0)[..., None] * x


def damping_flux(g, b, delta, q):
    """``b ((1 - delta) + delta |g|^(q-1)) g``; exactly ``b g`` when ``q == 1``."""
    g = np.asarray(g, dtype=float)
    if q == 1:
        return b * g
    coef = b * ((1.0 - delta) + delta * _abs_pow(_norm(g), q - 1.0))
    return coef[..., None] * g


def f_transform(g, q):
    """``|g|^((q-1)/2) g``."""
    g = np.asarray(g, dtype=float)
    return _abs_pow(_norm(g), 0.5 * (q - 1.0))[..., None] * g


def monotonicity_gap(x, y, q):
    """``(P(x) - P(y)) . (x - y)``, nonnegative for every q >= 1."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.sum((power_map(x, q) - power_map(y, q)) * (x - y), axis=-1)


def young_constant(eps, r):
    """Sharp constant in ``|ab| <= eps |a|^r + C |b|^(r/(r-1))``."""
    return (r - 1.0) * r ** (-r / (r - 1.0)) * eps ** (-1.0 / (r - 1.0))


def young_constant_as_printed(eps, r):
    return (r - 1.0) * r ** (r / (r - 1.0)) * eps ** (-1.0 / (1.0 - r))


def evaluate_inequality(ineq_id, x, y, q, eps=None, r=None):
    """Return ``(residual, scale)`` arrays.

    ``residual`` is RHS - LHS for upper bounds and LHS - RHS for lower bounds,
    so a negative value is a violation. ``scale`` is the larger magnitude of
    the two sides, used to make residuals relative. For the two-sided chain
    the worse of the two links is returned.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    q = np.asarray(q, dtype=float)
    nx, ny = _norm(x), _norm(y)
    dxy = _norm(x - y)
    s = 0.5 * (q - 1.0)
    if ineq_id in ("young-as-stated", "young-standard"):
        if eps is None or r is None:
            raise ValidationError("Young's inequality needs eps and r")
        eps = np.asarray(eps, dtype=float)
        r = np.asarray(r, dtype=float)
        const = young_constant(eps, r) if ineq_id == "young-standard" else young_constant_as_printed(eps, r)
        lhs = nx * ny
        rhs = eps * nx**r + const * ny ** (r / (r - 1.0))
        return rhs - lhs, np.maximum(lhs, rhs)
    dP = _norm(power_map(x, q) - power_map(y, q))
    if ineq_id == "2.2":
        rhs = q * dxy * (nx + ny) ** (q - 1.0)
        return rhs - dP, np.maximum(dP, rhs)
    if ineq_id == "2.3-as-stated":
        mid = 0.5 * dxy**2 * (nx + ny) ** (q - 1.0)
        low = 2.0 ** (1.0 - q) * dxy ** (q + 1.0)
        res = np.minimum(dP - mid, mid - low)
        return res, np.maximum(np.maximum(dP, mid), low)
    if ineq_id == "2.3-monotone":
        gap = monotonicity_gap(x, y, q)
        low = 2.0 ** (1.0 - q) * dxy ** (q + 1.0)
        return gap - low, np.maximum(np.abs(gap), low)
    if ineq_id == "2.4":
        gap = monotonicity_gap(x, y, q)
        low = 4.0 / (q + 1.0) ** 2 * _norm(f_transform(x, q) - f_transform(y, q)) ** 2
        return gap - low, np.maximum(np.abs(gap), low)
    if ineq_id in ("2.5", "2.5-scalar"):
        # with magnitudes in place of vectors only the left side changes
        lhs = dP if ineq_id == "2.5" else np.abs(_abs_pow(nx, q) - _abs_pow(ny, q))
        rhs = q * (_abs_pow(nx, s) + _abs_pow(ny, s)) * np.abs(_abs_pow(nx, s) - _abs_pow(ny, s))
        return rhs - lhs, np.maximum(lhs, rhs)
    if ineq_id == "2.5-ftransform":
        rhs = q * (_abs_pow(nx, s) + _abs_pow(ny, s)) * _norm(f_transform(x, q) - f_transform(y, q))
        return rhs - dP, np.maximum(dP, rhs)
    raise ValidationError(f"unknown inequality id {ineq_id!r}")


@dataclass(frozen=True)
class InequalityReport:
    inequality_id: str
    samples: int
    violations: int
    worst_margin: float
    witness: dict = field(default_factory=dict)

    CSV_HEADER = ("inequality_id", "samples", "violations", "worst_margin",
                  "q", "x1", "x2", "x3", "y1", "y2", "y3", "eps", "r")

    def csv_row(self) -> list[str]:
        w = self.witness
        x = list(w.get("x", ())) + [None] * 3
        y = list(w.get("y", ())) + [None] * 3
        cells = [w.get("q")] + x[:3] + y[:3] + [w.get("eps"), w.get("r")]
        return [self.inequality_id, str(self.samples), str(self.violations), repr(float(self.worst_margin))] + [
            "" if c is None else repr(float(c)) for c in cells
        ]


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(InequalityReport.CSV_HEADER)
    for rep in reports:
        wr.writerow(rep.csv_row())
    return buf.getvalue()


def _draw_chunk(seed, index, count, q_range, magnitude_range, dims, eps_range, r_range):
    rng = np.random.default_rng([seed, index])
    d = rng.choice(np.asarray(dims), size=count)
    q = rng.uniform(q_range[0], q_range[1], size=count)
    dirs = []
    for _ in range(2):
        z = rng.standard_normal((count, 3))
        z[:, 1] *= d >= 2
        z[:, 2] *= d >= 3
        nz = _norm(z)
        nz[nz == 0] = 1.0
        dirs.append(z / nz[:, None])
    mx = rng.uniform(magnitude_range[0], magnitude_range[1], size=count)
    my = rng.uniform(magnitude_range[0], magnitude_range[1], size=count)
    eps = rng.uniform(eps_range[0], eps_range[1], size=count)
    r = rng.uniform(r_range[0], r_range[1], size=count)
    return d, q, dirs[0] * mx[:, None], dirs[1] * my[:, None], eps, r


def _validate_ranges(samples, q_range, magnitude_range, dims, eps_range, r_range):
    if samples < 1:
        raise ValidationError("samples must be at least 1")
    if not (1.0 <= q_range[0] <= q_range[1] and np.isfinite(q_range[1])):
        raise ValidationError("q range must lie in [1, inf) with q_min <= q_max")
    if not (0.0 <= magnitude_range[0] <= magnitude_range[1] and magnitude_range[1] > 0):
        raise ValidationError("magnitude range must be nonnegative with a positive upper end")
    if not dims or any(d not in (1, 2, 3) for d in dims):
        raise ValidationError("dimensions must be drawn from {1, 2, 3}")
    if not (0 < eps_range[0] <= eps_range[1]):
        raise ValidationError("eps range must be positive")
    if not (1 < r_range[0] <= r_range[1]):
        raise ValidationError("r range must lie in (1, inf)")


def check_inequality(
    ineq_id,
    rng_seed=42,
    samples=10**6,
    q_range=(1.0, 5.0),
    magnitude_range=(0.0, 10.0),
    dims=(1, 2, 3),
    eps_range=(1e-3, 10.0),
    r_range=(1.1, 5.0),
    rel_tol=1e-12,
    threads=1,
) -> InequalityReport:
    """Sample ``samples`` random points and count violations of one inequality.

    Draws come in fixed chunks, each from a generator seeded with
    ``(rng_seed, chunk_index)``, so the report does not depend on ``threads``.
    A sample violates when its residual is below ``-rel_tol`` times the
    larger side. ``worst_margin`` is the smallest relative residual seen.
    """
    if ineq_id not in INEQUALITY_IDS:
        raise ValidationError(f"unknown inequality id {ineq_id!r}")
    _validate_ranges(samples, q_range, magnitude_range, dims, eps_range, r_range)
    n_chunks = -(-samples // CHUNK)

    def run(ci):
        count = min(CHUNK, samples - ci * CHUNK)
        d, q, x, y, eps, r = _draw_chunk(rng_seed, ci, count, q_range, magnitude_range, dims, eps_range, r_range)
        res, scale = evaluate_inequality(ineq_id, x, y, q, eps, r)
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(scale > 0, res / np.where(scale > 0, scale, 1.0), 0.0)
        viol = int(np.count_nonzero(rel < -rel_tol))
        k = int(np.argmin(rel))
        wit = {"q": float(q[k]), "x": tuple(float(t) for t in x[k, : d[k]]), "y": tuple(float(t) for t in y[k, : d[k]])}
        if ineq_id.startswith("young"):
            wit.update(eps=float(eps[k]), r=float(r[k]))
        return viol, float(rel[k]), wit

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, range(n_chunks)))
    else:
        results = [run(ci) for ci in range(n_chunks)]
    violations = sum(v for v, _, _ in results)
    worst, witness = results[0][1], results[0][2]
    for _, m, w in results[1:]:
        if m < worst:
            worst, witness = m, w
    return InequalityReport(ineq_id, samples, violations, worst, witness)
