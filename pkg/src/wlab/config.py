"""Flat key-value scenario configuration and the shipped scenario gallery.

Configurations are TOML files. Sections and dotted keys are interchangeable,
so ``[materials.plus]`` followed by ``rho = 10`` is the same as the flat key
``materials.plus.rho = 10``. Unknown keys are rejected.
"""
from __future__ import annotations

import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ValidationError
from .model import MaterialParams, Profile, Scenario, SolverConfig

MATERIAL_KEYS = ("lambda", "rho", "b", "delta", "k")

KEYS = (
    "domain.dim", "domain.extent", "lens.min", "lens.max",
    *(f"materials.{side}.{k}" for side in ("plus", "minus") for k in MATERIAL_KEYS),
    "physics.q", "grid.n", "time.dt", "time.T",
    "bc.type", "bc.neumann_profile", "bc.neumann_amplitude",
    "initial.u0_profile", "initial.u0_amplitude", "initial.u1_profile", "initial.u1_amplitude",
    "source.mms",
    "solver.picard_tol", "solver.picard_max_iters", "solver.linear_tol", "solver.degeneracy_floor",
    "output.snapshot_stride",
)

REQUIRED = ("domain.dim", "physics.q", "grid.n", "time.dt", "time.T",
            *(f"materials.minus.{k}" for k in ("lambda", "rho", "b", "delta")))


def flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for key, val in tree.items():
        full = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(flatten(val, full + "."))
        else:
            out[full] = val
    return out


def parse_text(text: str) -> dict:
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config is not valid TOML: {exc}") from exc
    flat = flatten(tree)
    unknown = sorted(set(flat) - set(KEYS))
    if unknown:
        raise ValidationError("unknown config keys: " + ", ".join(unknown))
    return flat


def canonical_text(flat: dict) -> str:
    """One ``key=value`` line per key, sorted, values JSON-encoded."""
    return "".join(f"{k}={json.dumps(flat[k], sort_keys=True)}\n" for k in sorted(flat))


def scenario_hash(flat: dict) -> str:
    return hashlib.sha256(canonical_text(flat).encode()).hexdigest()


def _num(flat, key, default=None, kind=float):
    if key not in flat:
        if default is None:
            raise ValidationError(f"{key}: missing required key")
        return default
    val = flat[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ValidationError(f"{key}: expected a number, got {val!r}")
    if kind is int:
        if float(val) != int(val):
            raise ValidationError(f"{key}: expected a whole number, got {val!r}")
        return int(val)
    return float(val)


def _vec(flat, key, dim):
    val = flat[key]
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        val = [val] * dim
    if not isinstance(val, list) or not all(isinstance(v, (int, float)) for v in val):
        raise ValidationError(f"{key}: expected a number or a list of numbers")
    return tuple(float(v) for v in val)


def _str(flat, key, default):
    val = flat.get(key, default)
    if not isinstance(val, str):
        raise ValidationError(f"{key}: expected a string, got {val!r}")
    return val


def _material(flat, side, fallback: Optional[MaterialParams]):
    vals = {}
    for k in MATERIAL_KEYS:
        key = f"materials.{side}.{k}"
        if key in flat:
            vals[k] = _num(flat, key)
        elif fallback is not None:
            vals[k] = getattr(fallback, "lam" if k == "lambda" else k)
        elif k == "k":
            vals[k] = 0.0
        else:
            raise ValidationError(f"{key}: missing required key")
    return MaterialParams(vals["lambda"], vals["rho"], vals["b"], vals["delta"], vals["k"])


def scenario_from_flat(flat: dict, name: str = "") -> Scenario:
    """Build a :class:`Scenario`; missing lens-material keys fall back to the fluid values."""
    for key in REQUIRED:
        if key not in flat:
            raise ValidationError(f"{key}: missing required key")
    dim = _num(flat, "domain.dim", kind=int)
    if dim not in (1, 2):
        raise ValidationError(f"domain.dim: dimension must be 1 or 2, got {dim}")
    extent = _vec(flat, "domain.extent", dim) if "domain.extent" in flat else (1.0,) * dim
    lens_min = _vec(flat, "lens.min", dim) if "lens.min" in flat else None
    lens_max = _vec(flat, "lens.max", dim) if "lens.max" in flat else None
    minus = _material(flat, "minus", None)
    plus = _material(flat, "plus", minus)
    mms = flat.get("source.mms")
    if mms is not None and not isinstance(mms, str):
        raise ValidationError("source.mms: expected a name")
    if mms in ("", "none"):
        mms = None
    defaults = SolverConfig()
    solver = SolverConfig(
        picard_tol=_num(flat, "solver.picard_tol", defaults.picard_tol),
        picard_max_iters=_num(flat, "solver.picard_max_iters", defaults.picard_max_iters, int),
        linear_tol=_num(flat, "solver.linear_tol", defaults.linear_tol),
        degeneracy_floor=_num(flat, "solver.degeneracy_floor", defaults.degeneracy_floor),
    )
    T = _num(flat, "time.T")
    return Scenario(
        dimension=dim,
        extent=extent,
        lens_min=lens_min,
        lens_max=lens_max,
        materials_plus=plus,
        materials_minus=minus,
        q=_num(flat, "physics.q"),
        bc=_str(flat, "bc.type", "dirichlet"),
        neumann=Profile(_str(flat, "bc.neumann_profile", "zero"), _num(flat, "bc.neumann_amplitude", 0.0)),
        mms=mms,
        initial_u0=Profile(_str(flat, "initial.u0_profile", "zero"), _num(flat, "initial.u0_amplitude", 0.0)),
        initial_u1=Profile(_str(flat, "initial.u1_profile", "zero"), _num(flat, "initial.u1_amplitude", 0.0)),
        grid_n=_num(flat, "grid.n", kind=int),
        dt=_num(flat, "time.dt"),
        T=T if math.isfinite(T) else math.nan,
        solver=solver,
        snapshot_stride=_num(flat, "output.snapshot_stride", 1, int),
        name=name,
    )


class LoadedConfig:
    def __init__(self, flat: dict, name: str, source: str):
        self.flat = flat
        self.name = name
        self.source = source
        self.hash = scenario_hash(flat)

    def scenario(self) -> Scenario:
        return scenario_from_flat(self.flat, self.name)


def load(ref: str | Path) -> LoadedConfig:
    """Read a config file, or a gallery scenario when ``ref`` names one and no such file exists."""
    path = Path(ref)
    if path.is_file():
        try:
            text = path.read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read {path}: {exc}") from exc
        return LoadedConfig(parse_text(text), path.stem, str(path))
    name = str(ref)
    if name in GALLERY:
        return LoadedConfig(parse_text(GALLERY[name]), name, f"gallery:{name}")
    raise ValidationError(f"no config file or gallery scenario named {name!r}")


# -- gallery -------------------------------------------------------------------
# Material values are illustrative, not measured data.

GALLERY: dict[str, str] = {
    "linear-1d": """\
domain.dim = 1
domain.extent = [1.0]
materials.minus = { lambda = 1.0, rho = 1.0, b = 0.05, delta = 0.5, k = 0.0 }
physics.q = 1.0
grid.n = 64
time.dt = 0.0078125
time.T = 0.5
initial.u0_profile = "sine-mode"
initial.u0_amplitude = 1.0
""",
    "nonlinear-1d": """\
domain.dim = 1
domain.extent = [1.0]
materials.minus = { lambda = 1.0, rho = 1.0, b = 0.05, delta = 0.5, k = 1.0 }
physics.q = 3.0
grid.n = 64
time.dt = 0.0078125
time.T = 0.5
initial.u0_profile = "sine-mode"
initial.u0_amplitude = 0.03
initial.u1_profile = "sine-mode"
initial.u1_amplitude = 0.1
""",
    "coupled-1d-rho10": """\
# lens ten times denser and stiffer than the fluid, equal sound speed
domain.dim = 1
domain.extent = [1.0]
lens.min = [0.3]
lens.max = [0.7]
materials.plus = { lambda = 10.0, rho = 10.0, b = 0.02, delta = 0.5, k = 0.1 }
materials.minus = { lambda = 1.0, rho = 1.0, b = 0.02, delta = 0.5, k = 0.1 }
physics.q = 2.0
grid.n = 64
time.dt = 0.0078125
time.T = 1.0
initial.u0_profile = "sine-mode"
initial.u0_amplitude = 0.1
output.snapshot_stride = 4
""",
    "coupled-2d-lens": """\
# silicone-like lens in a water-like fluid, scaled to unit size
domain.dim = 2
domain.extent = [1.0, 1.0]
lens.min = [0.35, 0.35]
lens.max = [0.65, 0.65]
materials.plus = { lambda = 2.0, rho = 1.1, b = 0.05, delta = 0.5, k = 0.05 }
materials.minus = { lambda = 2.25, rho = 1.0, b = 0.05, delta = 0.5, k = 0.05 }
physics.q = 2.0
grid.n = 32
time.dt = 0.015625
time.T = 0.25
initial.u0_profile = "gaussian-bump"
initial.u0_amplitude = 0.2
""",
    "degenerate-blowup": """\
# large data: 1 - 2ku is driven below the degeneracy floor
domain.dim = 1
domain.extent = [1.0]
materials.minus = { lambda = 1.0, rho = 1.0, b = 0.05, delta = 0.5, k = 1.0 }
physics.q = 2.0
grid.n = 64
time.dt = 0.0078125
time.T = 0.5
initial.u0_profile = "sine-mode"
initial.u0_amplitude = 0.3
initial.u1_profile = "sine-mode"
initial.u1_amplitude = 3.0
""",
    "mms-linear": """\
domain.dim = 1
domain.extent = [1.0]
materials.minus = { lambda = 1.0, rho = 1.0, b = 0.1, delta = 0.5, k = 0.0 }
physics.q = 1.0
grid.n = 32
time.dt = 0.03125
time.T = 0.5
initial.u0_amplitude = 0.5
source.mms = "standing-wave"
""",
    "mms-linear-2d": """\
domain.dim = 2
domain.extent = [1.0, 1.0]
materials.minus = { lambda = 1.0, rho = 1.0, b = 0.1, delta = 0.5, k = 0.0 }
physics.q = 1.0
grid.n = 16
time.dt = 0.0625
time.T = 0.5
initial.u0_amplitude = 0.5
source.mms = "standing-wave"
""",
    "mms-nonlinear": """\
domain.dim = 1
domain.extent = [1.0]
materials.minus = { lambda = 1.0, rho = 1.0, b = 0.1, delta = 0.5, k = 0.5 }
physics.q = 3.0
grid.n = 32
time.dt = 0.03125
time.T = 0.5
initial.u0_amplitude = 0.5
source.mms = "standing-wave"
""",
}


def gallery_names() -> list[str]:
    return list(GALLERY)
