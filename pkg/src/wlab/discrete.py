"""Grid calculus on uniform cell-centered grids.

Cell-centered values (``u``, ``v``) live in arrays of shape ``grid.shape``.
Face-centered values along axis ``r`` live in arrays with ``n + 1`` entries
along ``r`` and ``n`` along the other axes; face ``j`` separates cells
``j - 1`` and ``j``, faces ``0`` and ``n`` lie on the outer boundary.

Boundary handling is selected with ``bc``:

* ``"dirichlet"`` - homogeneous Dirichlet via odd ghost cells (ghost = -u);
* ``"neumann"``   - boundary faces carry prescribed flux; gradients there are
  one-sided copies of the adjacent interior face;
* ``None``        - no boundary information (treated like ``"neumann"`` for
  gradients, boundary faces excluded from norms).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError

BOUNDARY_CONDITIONS = ("dirichlet", "neumann")


@dataclass(frozen=True)
class Grid:
    dim: int
    extent: tuple[float, ...]
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValidationError(f"grid dimension must be 1, 2 or 3, got {self.dim}")
        if len(self.extent) != self.dim:
            raise ValidationError("extent must have one entry per axis")
        if self.n < 2:
            raise ValidationError("grid needs at least 2 cells per axis")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(float(L) / self.n for L in self.extent)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def centers(self, axis: int) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h[axis]

    def mesh(self) -> list[np.ndarray]:
        """Cell-center coordinates, one array of ``grid.shape`` per axis."""
        return list(np.meshgrid(*[self.centers(r) for r in range(self.dim)], indexing="ij"))

    def face_shape(self, axis: int) -> tuple[int, ...]:
        s = list(self.shape)
        s[axis] += 1
        return tuple(s)

    def face_centers(self, axis: int) -> list[np.ndarray]:
        axes = []
        for r in range(self.dim):
            if r == axis:
                axes.append(np.arange(self.n + 1) * self.h[r])
            else:
                axes.append(self.centers(r))
        return list(np.meshgrid(*axes, indexing="ij"))


def _check_bc(bc):
    if bc is not None and bc not in BOUNDARY_CONDITIONS:
        raise ValidationError(f"unknown boundary condition {bc!r}")


def _sl(dim, axis, s):
    idx = [slice(None)] * dim
    idx[axis] = s
    return tuple(idx)


def ghost_pad(u: np.ndarray, bc) -> np.ndarray:
    """Pad by one ghost layer per side: odd reflection for Dirichlet, even otherwise."""
    p = np.pad(u, 1, mode="edge")
    if bc == "dirichlet":
        for r in range(u.ndim):
            p[_sl(u.ndim, r, 0)] = -p[_sl(u.ndim, r, 1)]
            p[_sl(u.ndim, r, -1)] = -p[_sl(u.ndim, r, -2)]
    return p


def _interior_others(dim, axis):
    """Slices of a padded array keeping the padding only along ``axis``."""
    return tuple(slice(None) if r == axis else slice(1, -1) for r in range(dim))


def gradient(u: np.ndarray, grid: Grid, bc="dirichlet") -> list[np.ndarray]:
    """Normal gradient on the faces of every axis.

    Interior faces get ``(u_right - u_left) / h``. Dirichlet boundary faces use
    the ghost value, Neumann (and ``None``) boundary faces repeat the adjacent
    interior face, i.e. a one-sided difference.
    """
    _check_bc(bc)
    p = ghost_pad(u, bc)
    out = []
    for r in range(grid.dim):
        g = np.diff(p[_interior_others(grid.dim, r)], axis=r) / grid.h[r]
        if bc != "dirichlet":
            g[_sl(grid.dim, r, 0)] = g[_sl(grid.dim, r, 1)]
            g[_sl(grid.dim, r, -1)] = g[_sl(grid.dim, r, -2)]
        out.append(g)
    return out


def face_weights(grid: Grid, axis: int, bc="dirichlet") -> np.ndarray:
    """Control-volume weight (face area times cell-center distance) per face.

    Dirichlet boundary faces get half a cell, Neumann/unknown boundary faces 0.
    """
    w = np.full(grid.face_shape(axis), grid.cell_volume)
    half = 0.5 * grid.cell_volume if bc == "dirichlet" else 0.0
    w[_sl(grid.dim, axis, 0)] = half
    w[_sl(grid.dim, axis, -1)] = half
    return w


def harmonic_faces(cell_coef: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """Face coefficient: harmonic mean where neighbours differ, the common value otherwise.

    Boundary faces take the adjacent cell value.
    """
    a = cell_coef[_sl(grid.dim, axis, slice(None, -1))]
    b = cell_coef[_sl(grid.dim, axis, slice(1, None))]
    with np.errstate(divide="ignore", invalid="ignore"):
        hm = 2.0 * a * b / (a + b)
    inner = np.where(a == b, a, hm)
    first = cell_coef[_sl(grid.dim, axis, slice(0, 1))]
    last = cell_coef[_sl(grid.dim, axis, slice(-1, None))]
    return np.concatenate([first, inner, last], axis=axis)


def div_flux(coef_face: Sequence[np.ndarray], grad_face: Sequence[np.ndarray], grid: Grid) -> np.ndarray:
    """Cell divergence of the face flux ``coef * grad``: sum over axes of (F_right - F_left) / h."""
    out = np.zeros(grid.shape)
    for r in range(grid.dim):
        c = np.asarray(coef_face[r], dtype=float)
        if np.any(c <= 0):
            raise ValidationError("face coefficients must be positive")
        F = c * grad_face[r]
        out += np.diff(F, axis=r) / grid.h[r]
    return out


def apply_face_operator(x: np.ndarray, coef_face, grid: Grid, bc="dirichlet") -> np.ndarray:
    """Volume-scaled ``-div(coef grad x)``, symmetric positive semidefinite.

    Neumann boundary faces contribute nothing here; their prescribed flux is
    a right-hand-side term.
    """
    g = gradient(x, grid, bc)
    out = np.zeros(grid.shape)
    for r in range(grid.dim):
        F = coef_face[r] * g[r]
        if bc != "dirichlet":
            F = F.copy()
            F[_sl(grid.dim, r, 0)] = 0.0
            F[_sl(grid.dim, r, -1)] = 0.0
        out -= np.diff(F, axis=r) / grid.h[r]
    return out * grid.cell_volume


def face_operator_diagonal(coef_face, grid: Grid, bc="dirichlet") -> np.ndarray:
    d = np.zeros(grid.shape)
    V = grid.cell_volume
    for r in range(grid.dim):
        c = np.array(coef_face[r], dtype=float)
        bfac = 2.0 if bc == "dirichlet" else 0.0
        c[_sl(grid.dim, r, 0)] *= bfac
        c[_sl(grid.dim, r, -1)] *= bfac
        d += (c[_sl(grid.dim, r, slice(None, -1))] + c[_sl(grid.dim, r, slice(1, None))]) * V / grid.h[r] ** 2
    return d


def face_energy(x: np.ndarray, coef_face, grid: Grid, bc="dirichlet") -> float:
    """``sum_f w_f c_f g_f^2``, equal to ``x . apply_face_operator(x)`` up to rounding."""
    g = gradient(x, grid, bc)
    return float(sum(np.sum(face_weights(grid, r, bc) * coef_face[r] * g[r] ** 2) for r in range(grid.dim)))


def face_gradient_magnitude(v: np.ndarray, grid: Grid, bc="dirichlet") -> list[np.ndarray]:
    """|grad v| on faces: normal component plus tangential components averaged from the two adjacent cells."""
    normal = gradient(v, grid, bc)
    if grid.dim == 1:
        return [np.abs(normal[0])]
    p = ghost_pad(v, bc)
    out = []
    for r in range(grid.dim):
        sq = normal[r] ** 2
        for s in range(grid.dim):
            if s == r:
                continue
            lo = [slice(1, -1)] * grid.dim
            hi = [slice(1, -1)] * grid.dim
            lo[r] = hi[r] = slice(None)
            lo[s] = slice(0, -2)
            hi[s] = slice(2, None)
            ds = (p[tuple(hi)] - p[tuple(lo)]) / (2.0 * grid.h[s])
            dface = 0.5 * (ds[_sl(grid.dim, r, slice(None, -1))] + ds[_sl(grid.dim, r, slice(1, None))])
            sq = sq + dface**2
        out.append(np.sqrt(sq))
    return out


def cell_gradient(u: np.ndarray, grid: Grid, bc=None) -> np.ndarray:
    """Cell-centered gradient, shape ``(dim, *grid.shape)``.

    With ``bc=None`` one-sided differences are used at the outer cells
    (exact for linear functions); otherwise the average of the two adjacent
    face gradients.
    """
    if bc is None:
        if grid.dim == 1:
            return np.array([np.gradient(u, grid.h[0], edge_order=1)])
        return np.array(np.gradient(u, *grid.h, edge_order=1))
    g = gradient(u, grid, bc)
    return np.array(
        [0.5 * (g[r][_sl(grid.dim, r, slice(None, -1))] + g[r][_sl(grid.dim, r, slice(1, None))]) for r in range(grid.dim)]
    )


def shift(u: np.ndarray, axis: int, l: int, fill=np.nan) -> np.ndarray:
    """``out[x] = u[x + l e_axis]``, ``fill`` where the shifted index leaves the grid."""
    out = np.full(u.shape, fill, dtype=float)
    n = u.shape[axis]
    if abs(l) >= n:
        return out
    if l >= 0:
        out[_sl(u.ndim, axis, slice(0, n - l))] = u[_sl(u.ndim, axis, slice(l, n))]
    else:
        out[_sl(u.ndim, axis, slice(-l, n))] = u[_sl(u.ndim, axis, slice(0, n + l))]
    return out


def difference_quotient(u: np.ndarray, grid: Grid, axis: int, l: int) -> np.ndarray:
    """``(u(x + l h e_axis) - u(x)) / (l h)`` on cells where both points exist, NaN elsewhere."""
    l = int(l)
    if l == 0:
        raise ValidationError("shift l must be a nonzero whole number of cells")
    if abs(l) >= grid.n:
        raise ValidationError(f"shift {l} exceeds the grid ({grid.n} cells)")
    return (shift(u, axis, l) - u) / (l * grid.h[axis])


def ibp_residual(u: np.ndarray, phi: np.ndarray, grid: Grid, axis: int, l: int) -> float:
    """``h^d sum u D^l phi + h^d sum D^{-l} u phi``; zero up to rounding for admissible ``phi``."""
    l = int(l)
    if l == 0 or abs(l) >= grid.n:
        raise ValidationError(f"invalid shift {l}")
    m = abs(l)
    for r in range(grid.dim):
        edge = np.concatenate(
            [phi[_sl(grid.dim, r, slice(0, m))].ravel(), phi[_sl(grid.dim, r, slice(grid.n - m, None))].ravel()]
        )
        if np.any(edge != 0):
            raise ValidationError(f"phi must vanish within {m} cells of the boundary")
    Dphi = (shift(phi, axis, l, fill=0.0) - phi) / (l * grid.h[axis])
    Du = (shift(u, axis, -l, fill=0.0) - u) / (-l * grid.h[axis])
    V = grid.cell_volume
    return float(V * np.sum(u * Dphi) + V * np.sum(Du * phi))


# -- windows -----------------------------------------------------------------


@dataclass(frozen=True)
class Window:
    """Boolean cell mask standing in for a compactly contained subset V."""

    mask: np.ndarray = field(repr=False)
    margin: int = 0

    def __post_init__(self):
        self.mask.setflags(write=False)

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.mask))


def full_window(grid: Grid) -> Window:
    return Window(np.ones(grid.shape, dtype=bool), 0)


def box_window(grid: Grid, lo: Sequence[float], hi: Sequence[float]) -> Window:
    """Cells whose centers lie in the open box ``(lo, hi)``."""
    X = grid.mesh()
    mask = np.ones(grid.shape, dtype=bool)
    for r in range(grid.dim):
        mask &= (X[r] > lo[r]) & (X[r] < hi[r])
    if not mask.any():
        raise ValidationError("window is empty")
    # margin: cells strictly between the box and the outer boundary
    margin = grid.n
    for r in range(grid.dim):
        idx = np.nonzero(np.any(mask, axis=tuple(s for s in range(grid.dim) if s != r)))[0]
        margin = min(margin, int(idx[0]), int(grid.n - 1 - idx[-1]))
    return Window(mask, margin)


def chebyshev_distance(seed: np.ndarray, limit: int) -> np.ndarray:
    """Chessboard distance (in cells) to the nearest ``seed`` cell, capped at ``limit``."""
    dist = np.full(seed.shape, limit, dtype=int)
    reached = seed.copy()
    dist[reached] = 0
    for k in range(1, limit):
        grown = reached.copy()
        for r in range(seed.ndim):
            grown |= shift(reached.astype(float), r, 1, fill=0.0).astype(bool)
            grown |= shift(reached.astype(float), r, -1, fill=0.0).astype(bool)
        if seed.ndim > 1:
            # diagonal steps
            for s1 in (1, -1):
                for s2 in (1, -1):
                    t = shift(shift(reached.astype(float), 0, s1, fill=0.0), 1, s2, fill=0.0).astype(bool)
                    grown |= t
        new = grown & ~reached
        dist[new] = k
        reached = grown
        if reached.all():
            break
    return dist


def barrier_cells(labels: np.ndarray) -> np.ndarray:
    """Cells adjacent to the outer boundary or to a face between differently labelled cells."""
    seed = np.zeros(labels.shape, dtype=bool)
    for r in range(labels.ndim):
        seed[_sl(labels.ndim, r, 0)] = True
        seed[_sl(labels.ndim, r, -1)] = True
        diff = labels[_sl(labels.ndim, r, slice(1, None))] != labels[_sl(labels.ndim, r, slice(None, -1))]
        seed[_sl(labels.ndim, r, slice(1, None))] |= diff
        seed[_sl(labels.ndim, r, slice(None, -1))] |= diff
    return seed


def margin_window(labels: np.ndarray, margin: int, region=None) -> Window:
    """Cells with at least ``margin`` whole cells between them and every interface/boundary face.

    ``labels`` is any per-cell array of region tags; ``region`` restricts to one tag.
    """
    if margin < 0:
        raise ValidationError("margin must be nonnegative")
    dist = chebyshev_distance(barrier_cells(labels), margin + 1)
    mask = dist >= margin
    if region is not None:
        mask &= labels == region
    if not mask.any():
        raise ValidationError(f"window with margin {margin} is empty")
    return Window(mask, margin)


# -- norms -------------------------------------------------------------------

NORM_KINDS = ("L2", "Lp", "H1-semi", "H2-semi")


def _second_differences(u, grid, mask):
    """Squared Hessian entries at cells whose stencil lies in ``mask``; returns (sum of squares per cell, valid cells)."""
    total = np.zeros(grid.shape)
    valid = mask.copy()
    for r in range(grid.dim):
        up, dn = shift(u, r, 1), shift(u, r, -1)
        d2 = (up - 2 * u + dn) / grid.h[r] ** 2
        valid &= shift(mask.astype(float), r, 1, fill=0).astype(bool)
        valid &= shift(mask.astype(float), r, -1, fill=0).astype(bool)
        total = total + np.nan_to_num(d2) ** 2
    for r in range(grid.dim):
        for s in range(r + 1, grid.dim):
            corners = 0.0
            for sr in (1, -1):
                for ss in (1, -1):
                    valid &= shift(shift(mask.astype(float), r, sr, fill=0), s, ss, fill=0).astype(bool)
                    corners = corners + sr * ss * shift(shift(u, r, sr), s, ss)
            dxy = corners / (4 * grid.h[r] * grid.h[s])
            total = total + 2 * np.nan_to_num(dxy) ** 2
    return total, valid


def norm(u: np.ndarray, grid: Grid, kind="L2", window: Window | None = None, p: float = 2.0, bc=None) -> float:
    """Discrete norms as cell sums scaled by the cell volume.

    ``H1-semi`` sums squared face gradients over faces between window cells
    (plus half-weight Dirichlet boundary faces for the full window when
    ``bc="dirichlet"``). ``H2-semi`` uses second central differences at cells
    whose whole stencil lies inside the window.
    """
    mask = full_window(grid).mask if window is None else window.mask
    if not mask.any():
        raise ValidationError("window is empty")
    V = grid.cell_volume
    if kind == "L2":
        return float(np.sqrt(V * np.sum(u[mask] ** 2)))
    if kind == "Lp":
        if p < 1:
            raise ValidationError("Lp needs p >= 1")
        return float((V * np.sum(np.abs(u[mask]) ** p)) ** (1.0 / p))
    if kind == "H1-semi":
        g = gradient(u, grid, bc or "neumann")
        total = 0.0
        for r in range(grid.dim):
            w = np.zeros(grid.face_shape(r))
            both = mask[_sl(grid.dim, r, slice(None, -1))] & mask[_sl(grid.dim, r, slice(1, None))]
            w[_sl(grid.dim, r, slice(1, -1))] = np.where(both, V, 0.0)
            if window is None and bc == "dirichlet":
                w[_sl(grid.dim, r, 0)] = 0.5 * V
                w[_sl(grid.dim, r, -1)] = 0.5 * V
            total += np.sum(w * g[r] ** 2)
        return float(np.sqrt(total))
    if kind == "H2-semi":
        sq, valid = _second_differences(u, grid, mask)
        if not valid.any():
            raise ValidationError("window too small for second differences")
        return float(np.sqrt(V * np.sum(sq[valid])))
    raise ValidationError(f"unknown norm kind {kind!r}")


@dataclass(frozen=True)
class Lemma21Row:
    shift: int
    dq_norm: float
    grad_norm: float
    ratio: float


def lemma21_check(u: np.ndarray, grid: Grid, window: Window, p: float, shifts: Sequence[int]) -> list[Lemma21Row]:
    """Ratios ``||D^l u||_{Lp(window)} / ||grad u||_{Lp(domain)}`` for each shift ``l``.

    ``D^l u`` is the vector of difference quotients along every axis.
    """
    grad = cell_gradient(u, grid, bc=None)
    gmag = np.sqrt(np.sum(grad**2, axis=0))
    gnorm = norm(gmag, grid, "Lp", None, p=p)
    rows = []
    for l in shifts:
        comps = np.array([difference_quotient(u, grid, r, l) for r in range(grid.dim)])
        mag = np.sqrt(np.sum(comps**2, axis=0))
        if np.isnan(mag[window.mask]).any():
            raise ValidationError(f"shift {l} reaches outside the grid from the window")
        dn = norm(mag, grid, "Lp", window, p=p)
        rows.append(Lemma21Row(int(l), dn, gnorm, dn / gnorm if gnorm > 0 else float("nan")))
    return rows
