"""Refinement-study diagnostics for interior and piecewise H^2 regularity.

The quantities here are discrete stand-ins for Sobolev norms: difference
quotients of the gradient on windows kept away from interfaces and the outer
boundary, second differences that either straddle the interface or stay on
one side of it, the transmission-flux mismatch and a Hoelder exponent fit.
Boundedness "as the shift goes to zero" is judged by relative variation
across shifts and refinement levels.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import discrete as dops
from .discrete import Grid, Window
from .errors import ValidationError
from .model import MaterialField, Scenario
from .qlaplace import f_transform

REGIONS = {1: "plus", -1: "minus"}


# -- interior difference-quotient scan ---------------------------------------


@dataclass(frozen=True)
class ScanRow:
    region: str
    shift: int
    margin: int
    window_cells: int
    dq_grad_u_sup: float  # sup_t ||D^l grad u||_{L2(V)}
    dq_grad_v_int: float  # int_0^T ||D^l grad v||^2_{L2(V)} dt
    dq_F_int: float  # int_0^T ||D^l F||^2_{L2(V)} dt
    grad_v_sup: float  # sup over snapshots and all cells of |grad v|


def _dq_grad_sq(G: np.ndarray, grid: Grid, mask: np.ndarray, l: int) -> float:
    """``sum_r ||D_r^l G||^2_{L2(mask)}`` for a vector field ``G`` of shape (dim, ...)."""
    total = 0.0
    for r in range(grid.dim):
        for c in range(G.shape[0]):
            dq = dops.difference_quotient(G[c], grid, r, l)[mask]
            if np.isnan(dq).any():
                raise ValidationError(f"shift {l} leaves the grid from the window")
            total += float(np.sum(dq * dq))
    return total * grid.cell_volume


def _time_weights(traj) -> list[float]:
    """Right-endpoint rectangle weights for the snapshot sequence (the initial snapshot gets 0)."""
    ts = [st.t for st in traj.snapshots]
    return [0.0] + [ts[i] - ts[i - 1] for i in range(1, len(ts))]


def region_windows(mat: MaterialField, margin: int) -> dict[str, Window]:
    """Margin windows per region present in the material field."""
    labels = mat.labels
    out = {}
    for lab, name in REGIONS.items():
        if not np.any(labels == lab):
            continue
        out[name] = dops.margin_window(labels, margin, region=lab)
    return out


def interior_h2_scan(traj, margin: int, shifts: Sequence[int], threads: int = 1) -> list[ScanRow]:
    """Difference quotients of ``grad u``, ``grad v`` and ``F`` on each region's margin window.

    One row per (region, shift). Raises :class:`ValidationError` when the
    margin is smaller than the largest shift or a window is empty. Snapshots
    may be scanned by ``threads`` workers; results are merged in snapshot
    order, so they do not depend on the worker count.
    """
    shifts = [int(l) for l in shifts]
    if not shifts or any(l == 0 for l in shifts):
        raise ValidationError("shifts must be nonzero whole numbers of cells")
    if margin < max(abs(l) for l in shifts):
        raise ValidationError(f"margin {margin} is smaller than the largest shift {max(abs(l) for l in shifts)}")
    mat = traj.material
    grid = mat.grid
    q = traj.scenario.q
    bc = traj.scenario.bc
    windows = region_windows(mat, margin)

    def scan(st):
        gu = dops.cell_gradient(st.u, grid, bc)
        gv = dops.cell_gradient(st.v, grid, bc)
        F = np.moveaxis(f_transform(np.moveaxis(gv, 0, -1), q), -1, 0)
        vals = {
            (name, l): tuple(_dq_grad_sq(G, grid, win.mask, l) for G in (gu, gv, F))
            for name, win in windows.items() for l in shifts
        }
        return vals, float(np.sqrt(np.max(np.sum(gv**2, axis=0))))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            per_snap = list(ex.map(scan, traj.snapshots))
    else:
        per_snap = [scan(st) for st in traj.snapshots]
    weights = _time_weights(traj)
    gv_sup = max(g for _, g in per_snap)
    rows = []
    for name, win in windows.items():
        for l in shifts:
            sup_u = 0.0
            int_v = int_F = 0.0
            for w, (vals, _) in zip(weights, per_snap):
                su, sv, sF = vals[(name, l)]
                sup_u = max(sup_u, math.sqrt(su))
                int_v += w * sv
                int_F += w * sF
            rows.append(ScanRow(name, l, margin, win.size, sup_u, int_v, int_F, gv_sup))
    return rows


# -- piecewise vs global second differences ----------------------------------


def _one_sided_hessian_sq(u: np.ndarray, grid: Grid, labels: np.ndarray, region: int):
    """Squared Hessian entries per cell of ``region`` using only that region's cells.

    Centered stencils are used where they stay in the region, one-sided ones
    where they would cross into the other region. Stencils leaving the grid
    are dropped exactly as in the global norm, so with a single region both
    agree. Returns (sum of squares per cell, valid mask).
    """
    inside = labels == region
    total = np.zeros(grid.shape)
    valid = inside.copy()
    ins = inside.astype(float)

    def member(*offsets):
        m = ins
        for axis, l in offsets:
            m = dops.shift(m, axis, l, fill=-1.0)
        return m

    def val(*offsets):
        x = u
        for axis, l in offsets:
            x = dops.shift(x, axis, l)
        return x

    for r in range(grid.dim):
        h2 = grid.h[r] ** 2
        up, dn = member((r, 1)), member((r, -1))
        in_grid = (up >= 0) & (dn >= 0)
        centered = (up == 1) & (dn == 1)
        fwd = (up == 1) & (member((r, 2)) == 1)
        bwd = (dn == 1) & (member((r, -2)) == 1)
        d2c = (val((r, 1)) - 2 * u + val((r, -1))) / h2
        d2f = (u - 2 * val((r, 1)) + val((r, 2))) / h2
        d2b = (u - 2 * val((r, -1)) + val((r, -2))) / h2
        d2 = np.where(centered, d2c, np.where(dn == 0, np.where(fwd, d2f, np.nan), np.where(bwd, d2b, np.nan)))
        valid &= in_grid & np.isfinite(d2)
        total = total + np.nan_to_num(d2) ** 2
    for r in range(grid.dim):
        for s in range(r + 1, grid.dim):
            hh = grid.h[r] * grid.h[s]
            corners = [(a, b) for a in (1, -1) for b in (1, -1)]
            in_grid = np.ones(grid.shape, dtype=bool)
            all_in = np.ones(grid.shape, dtype=bool)
            for a, b in corners:
                m = member((r, a), (s, b))
                in_grid &= m >= 0
                all_in &= m == 1
            centered = sum(a * b * val((r, a), (s, b)) for a, b in corners) / (4 * hh)
            dxy = np.where(all_in, centered, np.nan)
            # first-order corner stencil toward the first quadrant that stays in the region
            for a, b in corners:
                ok = (member((r, a)) == 1) & (member((s, b)) == 1) & (member((r, a), (s, b)) == 1)
                corner = a * b * (val((r, a), (s, b)) - val((r, a)) - val((s, b)) + u) / hh
                dxy = np.where(np.isnan(dxy) & ok, corner, dxy)
            valid &= in_grid & np.isfinite(dxy)
            total = total + 2 * np.nan_to_num(dxy) ** 2
    return total, valid


def piecewise_h2_seminorm(u: np.ndarray, grid: Grid, labels: np.ndarray) -> tuple[dict, float]:
    """Squared H^2 seminorms of one field: per region (one-sided at the interface) and global (straddling)."""
    V = grid.cell_volume
    per = {}
    for lab, name in REGIONS.items():
        if not np.any(labels == lab):
            continue
        sq, valid = _one_sided_hessian_sq(u, grid, labels, lab)
        per[name] = float(V * np.sum(sq[valid]))
    sq, valid = dops._second_differences(u, grid, np.ones(grid.shape, dtype=bool))
    return per, float(V * np.sum(sq[valid]))


@dataclass(frozen=True)
class PiecewiseH2:
    """Squared space-time seminorms ``sup_t |u|^2_{H2} + int_0^T |v|^2_{H2} dt``."""

    per_side: dict
    global_straddling: float


def piecewise_h2_norm(traj) -> PiecewiseH2:
    mat = traj.material
    grid = mat.grid
    labels = mat.labels
    weights = _time_weights(traj)
    per_u: dict = {}
    per_v: dict = {}
    glob_u = glob_v = 0.0
    for w, st in zip(weights, traj.snapshots):
        pu, gu = piecewise_h2_seminorm(st.u, grid, labels)
        for name, val in pu.items():
            per_u[name] = max(per_u.get(name, 0.0), val)
        glob_u = max(glob_u, gu)
        if w > 0:
            pv, gv = piecewise_h2_seminorm(st.v, grid, labels)
            for name, val in pv.items():
                per_v[name] = per_v.get(name, 0.0) + w * val
            glob_v += w * gv
    per = {name: per_u[name] + per_v.get(name, 0.0) for name in per_u}
    return PiecewiseH2(per, glob_u + glob_v)


# -- transmission flux mismatch ----------------------------------------------


def flux_jump_residual(state, mat: MaterialField, q: float) -> float:
    """Largest mismatch of the total normal flux across interface faces.

    Each side's flux ``(1/rho) du/dn + b((1-delta) + delta|grad v|^(q-1)) dv/dn``
    uses a first-order one-sided gradient from that side's own two cells next
    to the face and that side's coefficients. Faces without two cells on each
    side are skipped. Zero without interface faces.
    """
    grid = mat.grid
    worst = 0.0
    for axis, idx in mat.interface_faces:
        j = idx[axis]
        if j < 2 or j > grid.n - 2:
            continue
        fluxes = []
        for a, b_ in ((j - 2, j - 1), (j + 1, j)):
            ia = list(idx)
            ib = list(idx)
            ia[axis], ib[axis] = a, b_
            ia, ib = tuple(ia), tuple(ib)
            sgn = 1.0 if a < b_ else -1.0
            du = sgn * (state.u[ib] - state.u[ia]) / grid.h[axis]
            dv = sgn * (state.v[ib] - state.v[ia]) / grid.h[axis]
            gmag = abs(dv)
            if grid.dim > 1:
                # tangential parts from the adjacent cell's centered differences
                cg = dops.cell_gradient(state.v, grid, None)
                tang = [cg[s][ib] for s in range(grid.dim) if s != axis]
                gmag = math.sqrt(dv * dv + sum(t * t for t in tang))
            lam_b, rho, bb, dd = mat.lam[ib], mat.rho[ib], mat.b[ib], mat.delta[ib]
            damp = bb if q == 1 else bb * ((1.0 - dd) + dd * gmag ** (q - 1.0))
            fluxes.append(du / rho + damp * dv)
        worst = max(worst, abs(fluxes[0] - fluxes[1]))
    return float(worst)


# -- Hoelder exponent --------------------------------------------------------


@dataclass(frozen=True)
class HolderFit:
    alpha: float
    residual: float
    separations: int
    degenerate: bool = False


def holder_exponent_estimate(u: np.ndarray, grid: Grid, window: Optional[Window] = None) -> HolderFit:
    """Slope of ``log max_{|x-y|=s} |u(x)-u(y)|`` against ``log s`` for dyadic ``s = h, 2h, 4h, ...``.

    Pairs are taken along the grid axes with both cells in the window.
    Separations go up to a quarter of the window's extent. A field with no
    variation is reported as ``alpha = 1`` with ``degenerate`` set.
    """
    mask = dops.full_window(grid).mask if window is None else window.mask
    if np.count_nonzero(mask) < 16:
        raise ValidationError("Hoelder fit needs a window of at least 16 cells")
    extent = 0
    for r in range(grid.dim):
        idx = np.nonzero(np.any(mask, axis=tuple(s for s in range(grid.dim) if s != r)))[0]
        extent = max(extent, int(idx[-1] - idx[0] + 1))
    logs, logd = [], []
    seps = 0
    l = 1
    while l <= extent // 4:
        seps += 1
        best = 0.0
        for r in range(grid.dim):
            both = mask & dops.shift(mask.astype(float), r, l, fill=0.0).astype(bool)
            if both.any():
                diff = np.abs(dops.shift(u, r, l) - u)[both]
                best = max(best, float(diff.max()))
        if best > 0:
            logs.append(math.log(l * min(grid.h)))
            logd.append(math.log(best))
        l *= 2
    if seps < 3:
        raise ValidationError(f"only {seps} dyadic separations fit in the window (need 3)")
    if not logs:
        return HolderFit(1.0, 0.0, seps, degenerate=True)
    if len(logs) < 3:
        raise ValidationError("fewer than 3 separations with nonzero differences")
    x = np.array(logs)
    y = np.array(logd)
    slope, icpt = np.polyfit(x, y, 1)
    res = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return HolderFit(float(np.clip(slope, 0.0, 1.0)), res, len(logs))


# -- refinement study --------------------------------------------------------


@dataclass(frozen=True)
class Thresholds:
    boundedness: float = 0.2  # max relative variation (max - min) / max
    flux_decay: tuple = (1.5, 3.0)
    global_growth: float = 2.0


@dataclass(frozen=True)
class RegularityRow:
    level: int
    h: float
    shift: int
    margin: int
    region: str
    dq_grad_u_sup: float
    dq_grad_v_int: float
    dq_F_int: float
    h2_interior: float  # one-sided-up-to-interface squared seminorm of this region
    h2_global: float
    flux_jump: float
    holder_alpha: float
    grad_v_sup: float

    CSV_COLUMNS = ("level", "h", "shift", "margin", "region", "dq_grad_u_sup", "dq_grad_v_int", "dq_F_int",
                   "h2_piecewise", "h2_global", "flux_jump", "holder_alpha", "grad_v_sup")


@dataclass
class RegularityReport:
    scan_id: str
    rows: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)  # diagnostic -> (passed, detail)

    @property
    def passed(self) -> bool:
        gating = ("interior_boundedness", "piecewise_boundedness", "flux_decay")
        return all(self.verdicts[k][0] for k in gating if k in self.verdicts)

    def level_values(self, attr, region=None) -> list[float]:
        """One value per level (first row of each level matching ``region``)."""
        out = {}
        for row in self.rows:
            if region is not None and row.region != region:
                continue
            out.setdefault(row.level, getattr(row, attr))
        return [out[k] for k in sorted(out)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(RegularityRow.CSV_COLUMNS)
        for row in self.rows:
            vals = [getattr(row, "h2_interior" if c == "h2_piecewise" else c) for c in RegularityRow.CSV_COLUMNS]
            wr.writerow([repr(float(v)) if isinstance(v, float) else str(v) for v in vals])
        return buf.getvalue()

    def summary(self) -> str:
        parts = [f"{name}={'pass' if ok else 'fail'}({detail})" for name, (ok, detail) in self.verdicts.items()]
        return f"{self.scan_id}: " + " ".join(parts)


def relative_variation(values) -> float:
    values = [float(v) for v in values]
    top = max(abs(v) for v in values)
    return 0.0 if top == 0 else (max(values) - min(values)) / top


def growth_ratios(values) -> list[float]:
    return [values[i + 1] / values[i] if values[i] != 0 else math.inf for i in range(len(values) - 1)]


def regularity_study(s: Scenario, levels: int, margin: int, shifts: Sequence[int],
                     thresholds: Thresholds = Thresholds(), simulate=None, threads: int = 1) -> RegularityReport:
    """Run ``s`` at ``levels`` factor-2 refinements and evaluate every diagnostic.

    ``margin`` and ``shifts`` are in cells of the coarsest grid; the margin is
    scaled with the refinement so the physical window stays fixed, while
    shifts stay in cells (they probe the limit ``l h -> 0``).
    """
    if levels < 1:
        raise ValidationError("levels must be at least 1")
    if simulate is None:
        from .integrator import simulate
    if margin * 2 >= s.grid_n:
        raise ValidationError(f"margin {margin} is too large for a {s.grid_n}-cell grid")
    if not shifts or any(int(l) == 0 for l in shifts):
        raise ValidationError("shifts must be nonzero whole numbers of cells")
    if margin < max(abs(int(l)) for l in shifts):
        raise ValidationError(f"margin {margin} is smaller than the largest shift")
    report = RegularityReport(s.name or "scenario")
    flux = []
    for lev in range(levels):
        sl = s if lev == 0 else replace(s, grid_n=s.grid_n * 2**lev, dt=s.dt / 2**lev,
                                        snapshot_stride=s.snapshot_stride * 2**lev)
        traj = simulate(sl)
        if traj.error is not None:
            raise traj.error
        m = margin * 2**lev
        scan = interior_h2_scan(traj, m, shifts, threads)
        pw = piecewise_h2_norm(traj)
        fj = flux_jump_residual(traj.final, traj.material, sl.q)
        flux.append(fj)
        grid = traj.material.grid
        for row in scan:
            win = region_windows(traj.material, m)[row.region]
            try:
                alpha = holder_exponent_estimate(traj.final.u, grid, win).alpha
            except ValidationError:
                alpha = math.nan
            report.rows.append(RegularityRow(
                lev, grid.h[0], row.shift, m, row.region, row.dq_grad_u_sup, row.dq_grad_v_int, row.dq_F_int,
                pw.per_side[row.region], pw.global_straddling, fj, alpha, row.grad_v_sup,
            ))
    _judge(report, thresholds, coupled=bool(s.has_lens))
    return report


def _judge(report: RegularityReport, th: Thresholds, coupled: bool):
    regions = sorted({r.region for r in report.rows})
    worst = 0.0
    for reg in regions:
        for col in ("dq_grad_u_sup", "dq_grad_v_int"):
            vals = [getattr(r, col) for r in report.rows if r.region == reg]
            worst = max(worst, relative_variation(vals))
    report.verdicts["interior_boundedness"] = (worst < th.boundedness, f"variation {worst:.3g}")
    worst = max(relative_variation(report.level_values("h2_interior", reg)) for reg in regions)
    report.verdicts["piecewise_boundedness"] = (worst < th.boundedness, f"variation {worst:.3g}")
    glob = report.level_values("h2_global")
    ratios = growth_ratios(glob)
    if ratios:
        ok = min(ratios) >= th.global_growth
        report.verdicts["global_growth"] = (ok, "ratios " + "/".join(f"{x:.3g}" for x in ratios))
    if coupled:
        fr = growth_ratios(report.level_values("flux_jump"))
        fr = [1.0 / x if x not in (0, math.inf) else math.inf for x in fr]
        ok = bool(fr) and all(th.flux_decay[0] <= x <= th.flux_decay[1] for x in fr)
        report.verdicts["flux_decay"] = (ok, "factors " + "/".join(f"{x:.3g}" for x in fr))
