"""Implicit-midpoint time stepping for the damped Westervelt system.

Unknowns are cell averages of the pressure ``u`` and its rate ``v``. One step
solves

    (1/lam)(1 - 2k u_h)(v1 - v0)/dt = div((1/rho) grad u_h)
                                      + div(b((1-delta) + delta|grad v_h|^(q-1)) grad v_h)
                                      + (2k/lam) v_h^2 + f(t_h)

with ``u1 = u0 + dt v_h`` and ``w_h = (w0 + w1)/2``. The mass factor, the
damping coefficient and the quadratic source are frozen at the previous
Picard iterate, so every inner system is symmetric positive definite and is
handed to Jacobi-preconditioned CG.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import discrete as dops
from .errors import DegeneracyError, NonconvergenceError, StepError
from .linalg import pcg
from .model import (
    MaterialField,
    Scenario,
    SolverConfig,
    build_material_field,
    neumann_value,
    profile_values,
    validate_scenario,
)
from .errors import ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WaveState:
    t: float
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class StepMonitor:
    step: int
    t: float
    picard_iters: int
    linear_iters: int
    min_mass_factor: float
    energy: float
    dissipation_increment: float
    source_increment: float
    balance_residual: float = 0.0
    u_sup: float = 0.0
    grad_v_l2: float = 0.0
    grad_v_lq_pow: float = 0.0  # ||grad v||_{L^{q+1}}^{q+1} at the end of the step
    accel_l2sq: float = 0.0  # ||(v1 - v0)/dt||^2
    m_bar_running: float = 0.0
    M_bar_running: float = 0.0
    accel_running: float = 0.0

    CSV_COLUMNS = ("step", "t", "picard_iters", "min_mass_factor", "energy", "dissipation_increment",
                   "balance_residual", "m_bar_running", "M_bar_running")


@dataclass
class Trajectory:
    scenario: Scenario
    material: MaterialField
    snapshots: list = field(default_factory=list)
    snapshot_steps: list = field(default_factory=list)
    monitors: list = field(default_factory=list)
    initial_energy: float = 0.0
    error: Optional[StepError] = None

    @property
    def completed(self) -> bool:
        return self.error is None

    @property
    def final(self) -> WaveState:
        return self.snapshots[-1]


class Discretization:
    """Operators of one scenario on its grid; built once per run."""

    def __init__(self, mat: MaterialField, q: float, bc: str = "dirichlet",
                 source: Optional[Callable] = None, boundary_flux: Optional[Callable] = None):
        self.mat = mat
        self.grid = mat.grid
        self.q = float(q)
        self.bc = bc
        self.source = source
        self.boundary_flux = boundary_flux
        self.V = self.grid.cell_volume
        self.inv_lam = 1.0 / mat.lam
        self.stiff = [dops.harmonic_faces(1.0 / mat.rho, self.grid, r) for r in range(self.grid.dim)]
        self.stiff_diag = dops.face_operator_diagonal(self.stiff, self.grid, bc)
        self._sides = [
            (_face_sides(mat.b, r), _face_sides(mat.delta, r)) for r in range(self.grid.dim)
        ]
        self.boundary_area = np.zeros(self.grid.shape)
        for r in range(self.grid.dim):
            area = self.V / self.grid.h[r]
            lo = [slice(None)] * self.grid.dim
            lo[r] = 0
            self.boundary_area[tuple(lo)] += area
            lo[r] = -1
            self.boundary_area[tuple(lo)] += area

    def A(self, x):
        return dops.apply_face_operator(x, self.stiff, self.grid, self.bc)

    def damping_faces(self, v, weight=1.0):
        """Frozen damping coefficient per face, harmonic mean across material jumps.

        ``weight`` scales the ``|grad v|^(q-1)`` part; the stabilized Picard
        operator uses ``(q + 1) / 2``.
        """
        G = dops.face_gradient_magnitude(v, self.grid, self.bc)
        out = []
        for r in range(self.grid.dim):
            (bL, bR), (dL, dR) = self._sides[r]
            if self.q == 1.0:
                sL, sR = bL, bR
            else:
                Gq = weight * np.power(G[r], self.q - 1.0)
                sL = bL * ((1.0 - dL) + dL * Gq)
                sR = bR * ((1.0 - dR) + dR * Gq)
            with np.errstate(invalid="ignore", divide="ignore"):
                hm = 2.0 * sL * sR / (sL + sR)
            out.append(np.where(sL == sR, sL, hm))
        return out

    def energy(self, u, v):
        """``1/2 sum V (1/lam)(1 - 2ku) v^2 + 1/2 sum_f w_f (1/rho)_f |grad u|_f^2``."""
        kin = 0.5 * self.V * np.sum(self.inv_lam * (1.0 - 2.0 * self.mat.k * u) * v * v)
        return float(kin + 0.5 * dops.face_energy(u, self.stiff, self.grid, self.bc))

    def neumann_vector(self, t):
        if self.bc != "neumann" or self.boundary_flux is None:
            return None
        g = self.boundary_flux(t)
        return g * self.boundary_area if g != 0 else None

    def source_values(self, t):
        return None if self.source is None else self.source(t)


def _face_sides(cell, axis):
    """Per-face values of a cell array from the left and the right neighbour (boundary faces repeat their cell)."""
    n = cell.shape[axis]
    idx_l = np.concatenate([[0], np.arange(n)])
    idx_r = np.concatenate([np.arange(n), [n - 1]])
    return np.take(cell, idx_l, axis=axis), np.take(cell, idx_r, axis=axis)


def _dot(a, b):
    return float(np.add.reduce((a * b).ravel()))


def _vec_norm(a):
    return np.sqrt(_dot(a, a))


def step(state: WaveState, mat: MaterialField, q: float, dt: float, cfg: SolverConfig = SolverConfig(),
         *, disc: Optional[Discretization] = None, bc: str = "dirichlet", prev: Optional[StepMonitor] = None,
         step_index: int = 1):
    """Advance one implicit-midpoint step. Returns ``(new_state, monitor)``.

    Raises :class:`DegeneracyError` if ``min(1 - 2k u_h)`` reaches the floor at
    any Picard iterate and :class:`NonconvergenceError` when an iteration cap
    is hit.
    """
    if disc is None:
        disc = Discretization(mat, q, bc)
    grid, V = disc.grid, disc.V
    u0, v0 = state.u, state.v
    th = state.t + 0.5 * dt
    f = disc.source_values(th)
    N = disc.neumann_vector(th)
    Au0 = disc.A(u0)
    Av0 = disc.A(v0)
    maxlin = cfg.linear_max_iters or 10 * v0.size
    k = mat.k
    stabilize = cfg.picard_stabilization and q != 1.0
    x = v0.copy()
    lin_total = 0
    converged = False
    for it in range(1, cfg.picard_max_iters + 1):
        vh = 0.5 * (v0 + x)
        uh = u0 + 0.5 * dt * vh
        m = 1.0 - 2.0 * k * uh
        mmin = float(m.min())
        if mmin <= cfg.degeneracy_floor:
            raise DegeneracyError(
                f"mass factor 1-2ku fell to {mmin:.4g} (floor {cfg.degeneracy_floor})", value=mmin
            )
        sigma = disc.damping_faces(vh)
        mass = V * disc.inv_lam * m
        src = 2.0 * k * disc.inv_lam * vh * vh
        if f is not None:
            src = src + f
        rhs = mass * v0 - dt * Au0 - 0.25 * dt * dt * Av0 + dt * V * src
        if N is not None:
            rhs = rhs + dt * N
        if stabilize:
            # B_L x = B_L x_prev - B(v0 + x_prev) + ... ; the extra terms cancel at the fixed point
            sigma_op = disc.damping_faces(vh, weight=0.5 * (q + 1.0))
            rhs = rhs - 0.5 * dt * dops.apply_face_operator(v0 + x, sigma, grid, disc.bc) \
                + 0.5 * dt * dops.apply_face_operator(x, sigma_op, grid, disc.bc)
        else:
            sigma_op = sigma
            rhs = rhs - 0.5 * dt * dops.apply_face_operator(v0, sigma, grid, disc.bc)

        def K(y, mass=mass, sigma_op=sigma_op):
            return mass * y + 0.25 * dt * dt * disc.A(y) + 0.5 * dt * dops.apply_face_operator(y, sigma_op, grid, disc.bc)

        diag = mass + 0.25 * dt * dt * disc.stiff_diag + 0.5 * dt * dops.face_operator_diagonal(sigma_op, grid, disc.bc)
        try:
            x_new, li = pcg(K, rhs, diag, x0=x, tol=cfg.linear_tol, maxiter=maxlin)
        except NonconvergenceError as exc:
            raise NonconvergenceError(str(exc)) from exc
        lin_total += li
        upd = _vec_norm(x_new - x)
        x = x_new
        if upd <= cfg.picard_tol * _vec_norm(x):
            converged = True
            break
    if not converged:
        raise NonconvergenceError(f"Picard iteration did not converge in {cfg.picard_max_iters} iterations")

    v1 = x
    vh = 0.5 * (v0 + v1)
    u1 = u0 + dt * vh
    m_final = 1.0 - 2.0 * k * (0.5 * (u0 + u1))
    min_mass = float(m_final.min())
    if min_mass <= cfg.degeneracy_floor:
        raise DegeneracyError(f"mass factor 1-2ku fell to {min_mass:.4g}", value=min_mass)

    # energy bookkeeping with the coefficients of the last solve
    g = dops.gradient(vh, grid, disc.bc)
    D = dt * sum(float(np.sum(dops.face_weights(grid, r, disc.bc) * sigma[r] * g[r] ** 2)) for r in range(grid.dim))
    m0 = 1.0 - 2.0 * k * u0
    m1 = 1.0 - 2.0 * k * u1
    cross = 0.5 * V * _dot(disc.inv_lam, (m1 - m) * v1 * v1 - (m0 - m) * v0 * v0)
    S = dt * V * _dot(src, vh) + cross
    if N is not None:
        S += dt * _dot(N, vh)
    E1 = disc.energy(u1, v1)

    grad_v = dops.cell_gradient(v1, grid, disc.bc)
    gmag = np.sqrt(np.sum(grad_v**2, axis=0))
    gl2 = float(np.sqrt(V * np.sum(gmag**2)))
    glq = float(V * np.sum(gmag ** (q + 1.0)))
    acc = float(V * np.sum(((v1 - v0) / dt) ** 2))
    prev_m = prev.m_bar_running if prev else 0.0
    prev_M = prev.M_bar_running ** (q + 1.0) if prev else 0.0
    prev_a = prev.accel_running if prev else 0.0
    mon = StepMonitor(
        step=step_index,
        t=state.t + dt,
        picard_iters=it,
        linear_iters=lin_total,
        min_mass_factor=min_mass,
        energy=E1,
        dissipation_increment=D,
        source_increment=S,
        u_sup=float(np.max(np.abs(u1))),
        grad_v_l2=gl2,
        grad_v_lq_pow=glq,
        accel_l2sq=acc,
        m_bar_running=max(prev_m, gl2),
        M_bar_running=(prev_M + dt * glq) ** (1.0 / (q + 1.0)),
        accel_running=prev_a + dt * acc,
    )
    return WaveState(state.t + dt, u1, v1), mon


def discretization_for(s: Scenario, mat: Optional[MaterialField] = None) -> Discretization:
    mat = mat if mat is not None else build_material_field(s)
    source = None
    if s.mms is not None:
        from .mms import for_scenario

        mf = for_scenario(s)
        X = s.grid.mesh()
        source = lambda t: mf.f(*X, t)  # noqa: E731
    flux = None
    if s.bc == "neumann":
        flux = lambda t: neumann_value(s.neumann, s, t)  # noqa: E731
    return Discretization(mat, s.q, s.bc, source=source, boundary_flux=flux)


def initial_state(s: Scenario) -> WaveState:
    if s.mms is not None:
        from .mms import for_scenario

        mf = for_scenario(s)
        X = s.grid.mesh()
        return WaveState(0.0, mf.u(*X, 0.0), mf.v(*X, 0.0))
    return WaveState(0.0, profile_values(s.initial_u0, s, "u0"), profile_values(s.initial_u1, s, "u1"))


def simulate(s: Scenario, *, max_steps: Optional[int] = None) -> Trajectory:
    """Run a scenario to ``T``. Step failures end the run; the partial trajectory carries the error."""
    problems = validate_scenario(s)
    if problems:
        raise ValidationError("; ".join(str(p) for p in problems))
    mat = build_material_field(s)
    disc = discretization_for(s, mat)
    state = initial_state(s)
    E0 = disc.energy(state.u, state.v)
    traj = Trajectory(s, mat, [state], [0], [], E0)
    n = s.n_steps if max_steps is None else min(s.n_steps, max_steps)
    prev = None
    cum = 0.0
    for i in range(1, n + 1):
        try:
            state, mon = step(state, mat, s.q, s.dt, s.solver, disc=disc, prev=prev, step_index=i)
        except StepError as exc:
            exc.step_index = i
            exc.t = state.t
            traj.error = exc
            log.info("step %d at t=%g failed: %s", i, state.t, exc)
            break
        cum += mon.dissipation_increment - mon.source_increment
        mon = replace(mon, t=i * s.dt, balance_residual=mon.energy + cum - E0)
        state = WaveState(i * s.dt, state.u, state.v)
        traj.monitors.append(mon)
        prev = mon
        if i % s.snapshot_stride == 0 or i == n:
            traj.snapshots.append(state)
            traj.snapshot_steps.append(i)
    return traj


@dataclass(frozen=True)
class EnergyRow:
    step: int
    t: float
    energy: float
    dissipation: float
    source: float
    cumulative_dissipation: float
    cumulative_source: float
    residual: float

    CSV_COLUMNS = ("step", "t", "energy", "dissipation", "source", "cumulative_dissipation",
                   "cumulative_source", "residual")


def energy_balance_report(traj: Trajectory, mat: Optional[MaterialField] = None, q: Optional[float] = None):
    """Per-step table of ``E(t_n) + sum D - E(0) - sum S``.

    Row 0 is the initial state. ``mat`` and ``q`` default to the trajectory's own.
    """
    E0 = traj.initial_energy
    rows = [EnergyRow(0, 0.0, E0, 0.0, 0.0, 0.0, 0.0, 0.0)]
    cD = cS = 0.0
    for mon in traj.monitors:
        cD += mon.dissipation_increment
        cS += mon.source_increment
        rows.append(EnergyRow(mon.step, mon.t, mon.energy, mon.dissipation_increment, mon.source_increment,
                              cD, cS, mon.energy + cD - E0 - cS))
    return rows


@dataclass(frozen=True)
class WSetNorms:
    m_bar: float
    M_bar: float
    a0_surrogate: float


def wset_norms(traj: Trajectory, q: Optional[float] = None) -> WSetNorms:
    """Observed well-posedness norms and the sup-norm stand-in for the degeneracy bound ``a0``.

    ``m_bar`` is the largest ``||grad v||_{L2}`` seen, ``M_bar`` the
    space-time ``L^{q+1}`` norm of ``grad v`` and ``a0 = 2 max|k| max|u|``.
    Per-step monitor values are used where available so that snapshot
    strides do not hide extremes.
    """
    s = traj.scenario
    q = s.q if q is None else q
    grid = traj.material.grid
    V = grid.cell_volume
    m_bar = 0.0
    u_sup = 0.0
    for st in traj.snapshots:
        gv = dops.cell_gradient(st.v, grid, s.bc)
        m_bar = max(m_bar, float(np.sqrt(V * np.sum(gv**2))))
        u_sup = max(u_sup, float(np.max(np.abs(st.u))))
    for mon in traj.monitors:
        m_bar = max(m_bar, mon.grad_v_l2)
        u_sup = max(u_sup, mon.u_sup)
    if traj.monitors:
        M_bar = sum(s.dt * mon.grad_v_lq_pow for mon in traj.monitors) ** (1.0 / (q + 1.0))
    else:
        M_bar = 0.0
    a0 = 2.0 * float(np.max(np.abs(traj.material.k))) * u_sup
    return WSetNorms(m_bar, M_bar, a0)
