"""Scenarios, materials and the standing assumptions on them.

Coefficients follow the coupled weak form: ``1/lambda`` weighs the
acceleration, ``1/rho`` the stiffness, ``b`` and ``delta`` the damping and
``k`` the nonlinearity. A single-medium problem with sound speed ``c`` is the
special case ``lambda = rho c^2`` with identical lens and fluid materials.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .discrete import Grid
from .errors import ValidationError

PROFILES = ("zero", "gaussian-bump", "sine-mode", "traveling-pulse")
NEUMANN_PROFILES = ("zero", "gaussian-bump", "sine-mode")


@dataclass(frozen=True)
class MaterialParams:
    lam: float
    rho: float
    b: float
    delta: float
    k: float = 0.0

    @classmethod
    def from_sound_speed(cls, c, rho=1.0, b=0.1, delta=0.5, k=0.0):
        return cls(lam=rho * c * c, rho=rho, b=b, delta=delta, k=k)

    def violations(self, prefix="materials"):
        out = []
        for name in ("lam", "rho", "b"):
            val = getattr(self, name)
            key = "lambda" if name == "lam" else name
            if not (math.isfinite(val) and val > 0):
                out.append(Violation(f"{prefix}.{key}", f"{key} must be positive and finite, got {val}"))
        if not (0.0 < self.delta < 1.0):
            out.append(Violation(f"{prefix}.delta", f"delta must lie in open interval (0,1), got {self.delta}"))
        if not math.isfinite(self.k):
            out.append(Violation(f"{prefix}.k", "k must be finite"))
        return out


@dataclass(frozen=True)
class SolverConfig:
    picard_tol: float = 1e-12
    picard_max_iters: int = 50
    linear_tol: float = 1e-12
    linear_max_iters: Optional[int] = None  # None: 10 x number of unknowns
    degeneracy_floor: float = 0.1
    picard_stabilization: bool = True

    def violations(self):
        out = []
        for name in ("picard_tol", "linear_tol", "degeneracy_floor"):
            val = getattr(self, name)
            if not (0.0 < val < 1.0):
                out.append(Violation(f"solver.{name}", f"{name} must lie in (0,1), got {val}"))
        if self.picard_max_iters < 1:
            out.append(Violation("solver.picard_max_iters", "picard_max_iters must be >= 1"))
        if self.linear_max_iters is not None and self.linear_max_iters < 1:
            out.append(Violation("solver.linear_max_iters", "linear_max_iters must be >= 1"))
        return out


@dataclass(frozen=True)
class Profile:
    """Named analytic profile from the fixed catalog, scaled by ``amplitude``."""

    name: str = "zero"
    amplitude: float = 0.0


@dataclass(frozen=True)
class Scenario:
    dimension: int = 1
    extent: tuple = (1.0,)
    lens_min: Optional[tuple] = None
    lens_max: Optional[tuple] = None
    materials_plus: MaterialParams = field(default_factory=lambda: MaterialParams(1.0, 1.0, 0.1, 0.5))
    materials_minus: MaterialParams = field(default_factory=lambda: MaterialParams(1.0, 1.0, 0.1, 0.5))
    q: float = 2.0
    bc: str = "dirichlet"
    neumann: Profile = field(default_factory=Profile)
    mms: Optional[str] = None
    initial_u0: Profile = field(default_factory=Profile)
    initial_u1: Profile = field(default_factory=Profile)
    grid_n: int = 32
    dt: float = 0.01
    T: float = 0.1
    solver: SolverConfig = field(default_factory=SolverConfig)
    snapshot_stride: int = 1
    name: str = ""

    @property
    def has_lens(self) -> bool:
        return self.lens_min is not None and self.lens_max is not None

    @property
    def grid(self) -> Grid:
        return Grid(self.dimension, tuple(float(e) for e in self.extent), int(self.grid_n))

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def refined(self, factor: int = 2) -> "Scenario":
        """Same physics with ``grid_n`` multiplied and ``dt`` divided by ``factor``."""
        return replace(self, grid_n=self.grid_n * factor, dt=self.dt / factor)


@dataclass(frozen=True)
class Violation:
    field: str
    message: str

    def __str__(self):
        return f"{self.field}: {self.message}"


def derive_k(B_over_A, rho, c):
    """Nonlinearity coefficient ``k = (1 + B/(2A)) / (rho c^2)`` in 1/Pa."""
    if not rho > 0:
        raise ValidationError(f"rho must be positive, got {rho}")
    if not c > 0:
        raise ValidationError(f"c must be positive, got {c}")
    return (1.0 + 0.5 * B_over_A) / (rho * c * c)


def validate_scenario(s: Scenario) -> list[Violation]:
    """Check every scenario and material invariant; an empty list means valid."""
    from .mms import MANUFACTURED  # local import: mms depends on this module

    out: list[Violation] = []
    d = s.dimension
    if d not in (1, 2):
        out.append(Violation("domain.dim", f"dimension must be 1 or 2, got {d}"))
        return out
    if len(s.extent) != d or any(not (e > 0 and math.isfinite(e)) for e in s.extent):
        out.append(Violation("domain.extent", "extent needs one positive length per axis"))
    if not s.q >= 1:
        out.append(Violation("physics.q", f"q >= 1 fails (q={s.q})"))
    linear_mms = s.mms is not None and s.materials_plus.k == 0 and s.materials_minus.k == 0
    # the q > d-1 embedding only guards against degeneracy; linear verification runs are exempt
    if not s.q > d - 1 and not linear_mms:
        out.append(Violation("physics.q", f"q > d-1 fails (needs q>{d - 1})"))
    if s.materials_plus != s.materials_minus:
        out += s.materials_plus.violations("materials.plus")
    out += s.materials_minus.violations("materials.minus")
    if (s.lens_min is None) != (s.lens_max is None):
        out.append(Violation("lens", "lens.min and lens.max must be given together"))
    elif s.has_lens:
        if len(s.lens_min) != d or len(s.lens_max) != d:
            out.append(Violation("lens", "lens bounds need one entry per axis"))
        elif len(s.extent) == d:
            for r in range(d):
                lo, hi = s.lens_min[r], s.lens_max[r]
                if not (0.0 < lo < hi < s.extent[r]):
                    out.append(Violation("lens", f"lens must lie strictly inside the domain on axis {r}"))
    if s.grid_n < 4:
        out.append(Violation("grid.n", f"grid.n must be >= 4, got {s.grid_n}"))
    if not s.dt > 0:
        out.append(Violation("time.dt", "dt must be positive"))
    elif not s.T >= s.dt:
        out.append(Violation("time.T", "T must be at least dt"))
    elif abs(s.T / s.dt - round(s.T / s.dt)) > 1e-9 * max(1.0, s.T / s.dt):
        out.append(Violation("time.T", "T must be a whole number of time steps"))
    if s.bc not in ("dirichlet", "neumann"):
        out.append(Violation("bc.type", f"bc.type must be dirichlet or neumann, got {s.bc!r}"))
    if s.neumann.name not in NEUMANN_PROFILES:
        out.append(Violation("bc.neumann_profile", f"unknown boundary profile {s.neumann.name!r}"))
    elif s.bc == "dirichlet" and s.neumann.name != "zero" and s.neumann.amplitude != 0:
        out.append(Violation("bc.neumann_profile", "boundary data given with Dirichlet conditions"))
    for key, prof in (("initial.u0_profile", s.initial_u0), ("initial.u1_profile", s.initial_u1)):
        if prof.name not in PROFILES:
            out.append(Violation(key, f"unknown profile {prof.name!r}"))
        if not math.isfinite(prof.amplitude):
            out.append(Violation(key.replace("profile", "amplitude"), "amplitude must be finite"))
    if s.mms is not None:
        if s.mms not in MANUFACTURED:
            out.append(Violation("source.mms", f"no manufactured solution named {s.mms!r}"))
        if s.has_lens and s.materials_plus != s.materials_minus:
            out.append(Violation("source.mms", "manufactured solutions need identical lens and fluid materials"))
        if s.bc != "dirichlet":
            out.append(Violation("source.mms", "manufactured solutions are registered for Dirichlet conditions only"))
    if s.snapshot_stride < 1:
        out.append(Violation("output.snapshot_stride", "snapshot_stride must be >= 1"))
    out += s.solver.violations()
    return out


# -- material field ----------------------------------------------------------


@dataclass(frozen=True)
class MaterialField:
    """Per-cell coefficients rasterized from a scenario.

    ``plus`` marks lens cells. ``interface_faces`` lists ``(axis, index)``
    pairs where ``index`` is the face index tuple in that axis' face array.
    """

    grid: Grid
    plus: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    delta: np.ndarray = field(repr=False)
    k: np.ndarray = field(repr=False)
    interface_faces: tuple = ()

    def __post_init__(self):
        for name in ("plus", "lam", "rho", "b", "delta", "k"):
            getattr(self, name).setflags(write=False)

    @property
    def labels(self) -> np.ndarray:
        """+1 on lens cells, -1 on fluid cells."""
        return np.where(self.plus, 1, -1)

    def interface_mask(self, axis: int) -> np.ndarray:
        """Boolean face array marking interface faces along ``axis``."""
        m = np.zeros(self.grid.face_shape(axis), dtype=bool)
        for ax, idx in self.interface_faces:
            if ax == axis:
                m[idx] = True
        return m


def lens_mask(s: Scenario) -> np.ndarray:
    g = s.grid
    if not s.has_lens:
        return np.zeros(g.shape, dtype=bool)
    X = g.mesh()
    m = np.ones(g.shape, dtype=bool)
    for r in range(g.dim):
        m &= (X[r] > s.lens_min[r]) & (X[r] < s.lens_max[r])
    return m


def build_material_field(s: Scenario) -> MaterialField:
    g = s.grid
    plus = lens_mask(s)
    vals = {}
    for name in ("lam", "rho", "b", "delta", "k"):
        vals[name] = np.where(plus, getattr(s.materials_plus, name), getattr(s.materials_minus, name)).astype(float)
    faces = []
    for r in range(g.dim):
        lo = [slice(None)] * g.dim
        hi = [slice(None)] * g.dim
        lo[r] = slice(None, -1)
        hi[r] = slice(1, None)
        differ = plus[tuple(lo)] != plus[tuple(hi)]
        for idx in zip(*np.nonzero(differ)):
            face = list(int(i) for i in idx)
            face[r] += 1  # face j sits between cells j-1 and j
            faces.append((r, tuple(face)))
    return MaterialField(g, plus, interface_faces=tuple(faces), **vals)


# -- profile catalog ---------------------------------------------------------


def _width(s: Scenario) -> float:
    return 0.1 * min(s.extent)


def profile_values(prof: Profile, s: Scenario, which="u0") -> np.ndarray:
    """Evaluate an initial-data profile at cell centers.

    ``traveling-pulse`` is a plane Gaussian moving in +x at the fluid sound
    speed; as ``u1`` it gives the matching velocity.
    """
    g = s.grid
    X = g.mesh()
    A = prof.amplitude
    if prof.name == "zero" or A == 0:
        return np.zeros(g.shape)
    if prof.name == "sine-mode":
        out = np.ones(g.shape)
        for r in range(g.dim):
            out = out * np.sin(np.pi * X[r] / s.extent[r])
        return A * out
    w = _width(s)
    if prof.name == "gaussian-bump":
        r2 = sum((X[r] - 0.5 * s.extent[r]) ** 2 for r in range(g.dim))
        return A * np.exp(-r2 / (2 * w * w))
    if prof.name == "traveling-pulse":
        x0 = 0.3 * s.extent[0]
        pulse = np.exp(-((X[0] - x0) ** 2) / (2 * w * w))
        if which == "u1":
            m = s.materials_minus
            c = math.sqrt(m.lam / m.rho)
            return A * c * (X[0] - x0) / (w * w) * pulse
        return A * pulse
    raise ValidationError(f"unknown profile {prof.name!r}")


def neumann_value(prof: Profile, s: Scenario, t: float) -> float:
    """Spatially uniform outward boundary flux ``g(t)``."""
    A = prof.amplitude
    if prof.name == "zero" or A == 0:
        return 0.0
    if prof.name == "sine-mode":
        return A * math.sin(2 * math.pi * t / s.T)
    if prof.name == "gaussian-bump":
        t0, tau = 0.25 * s.T, s.T / 16.0
        return A * math.exp(-((t - t0) ** 2) / (2 * tau * tau))
    raise ValidationError(f"unknown boundary profile {prof.name!r}")
