import math
from dataclasses import replace

import numpy as np
import pytest

from wlab.errors import ValidationError
from wlab.model import (
    MaterialParams,
    Profile,
    Scenario,
    build_material_field,
    derive_k,
    validate_scenario,
)

FLUID = MaterialParams(1.0, 1.0, 0.1, 0.5, 0.0)


def base(**kw):
    return Scenario(**{"dimension": 1, "extent": (1.0,), "q": 2.0, "grid_n": 16, "dt": 0.01, "T": 0.1,
                       "materials_plus": FLUID, "materials_minus": FLUID, **kw})


# derive_k


@pytest.mark.parametrize("ba, rho, c, expected", [
    (0.0, 1.0, 1.0, 1.0),
    (5.0, 1000.0, 1500.0, 3.5 / 2.25e9),
    (2.0, 1.0, 2.0, 0.5),
])
def test_derive_k(ba, rho, c, expected):
    assert derive_k(ba, rho, c) == pytest.approx(expected, rel=1e-15)


def test_derive_k_water_value():
    assert derive_k(5.0, 1000.0, 1500.0) == pytest.approx(1.5556e-9, rel=1e-4)


@pytest.mark.parametrize("rho, c", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
def test_derive_k_rejects_nonpositive(rho, c):
    with pytest.raises(ValidationError):
        derive_k(1.0, rho, c)


# validate_scenario


def test_valid_1d_q2():
    assert validate_scenario(base()) == []


def test_2d_q1_violation_message():
    s = base(dimension=2, extent=(1.0, 1.0), q=1.0)
    v = validate_scenario(s)
    assert len(v) == 1
    assert v[0].field == "physics.q"
    assert v[0].message == "q > d-1 fails (needs q>1)"


def test_delta_one_violation():
    s = base(materials_minus=replace(FLUID, delta=1.0))
    v = validate_scenario(s)
    assert [x.field for x in v] == ["materials.minus.delta"]
    assert "delta must lie in open interval (0,1)" in v[0].message


LENS_MAT = MaterialParams(2.0, 3.0, 0.2, 0.5, 0.1)

# each invariant broken on its own; the expected field is the only one reported
SINGLE_VIOLATIONS = [
    (dict(q=0.5), "physics.q"),
    (dict(dimension=2, extent=(1.0, 1.0), q=1.0), "physics.q"),
    (dict(dimension=3, extent=(1.0, 1.0, 1.0)), "domain.dim"),
    (dict(extent=(-1.0,)), "domain.extent"),
    (dict(materials_minus=replace(FLUID, lam=0.0)), "materials.minus.lambda"),
    (dict(materials_minus=replace(FLUID, rho=-1.0)), "materials.minus.rho"),
    (dict(materials_minus=replace(FLUID, b=0.0)), "materials.minus.b"),
    (dict(materials_minus=replace(FLUID, delta=0.0)), "materials.minus.delta"),
    (dict(materials_minus=replace(FLUID, k=math.inf)), "materials.minus.k"),
    (dict(materials_plus=replace(LENS_MAT, delta=1.5), lens_min=(0.4,), lens_max=(0.6,)), "materials.plus.delta"),
    (dict(lens_min=(0.0,), lens_max=(0.6,)), "lens"),
    (dict(lens_min=(0.4,), lens_max=(1.2,)), "lens"),
    (dict(lens_min=(0.4,)), "lens"),
    (dict(grid_n=3), "grid.n"),
    (dict(dt=0.0), "time.dt"),
    (dict(T=0.005), "time.T"),
    (dict(bc="periodic"), "bc.type"),
    (dict(initial_u0=Profile("square-wave", 1.0)), "initial.u0_profile"),
    (dict(mms="no-such-solution"), "source.mms"),
    (dict(snapshot_stride=0), "output.snapshot_stride"),
]


@pytest.mark.parametrize("change, field", SINGLE_VIOLATIONS)
def test_each_invariant_alone(change, field):
    v = validate_scenario(base(**change))
    assert [x.field for x in v] == [field], v


def test_negative_k_is_valid():
    assert validate_scenario(base(materials_minus=replace(FLUID, k=-3.0))) == []


def test_linear_mms_in_2d_with_q1_is_admitted():
    s = base(dimension=2, extent=(1.0, 1.0), q=1.0, mms="standing-wave")
    assert validate_scenario(s) == []
    # with nonlinearity switched on the embedding condition applies again
    nl = replace(FLUID, k=0.1)
    s = base(dimension=2, extent=(1.0, 1.0), q=1.0, mms="standing-wave", materials_plus=nl, materials_minus=nl)
    assert [x.field for x in validate_scenario(s)] == ["physics.q"]


def test_refined_halves_dt():
    s = base().refined(2)
    assert s.grid_n == 32 and s.dt == 0.005 and s.n_steps == 20


# build_material_field


def test_empty_lens_uniform():
    mat = build_material_field(base())
    assert not mat.plus.any()
    assert mat.interface_faces == ()
    assert np.all(mat.rho == 1.0)


def test_1d_lens_cells():
    s = base(grid_n=10, lens_min=(0.4,), lens_max=(0.6,), materials_plus=LENS_MAT)
    mat = build_material_field(s)
    assert list(np.nonzero(mat.plus)[0]) == [4, 5]
    assert len(mat.interface_faces) == 2
    assert sorted(f[1][0] for f in mat.interface_faces) == [4, 6]


def test_2d_central_block_has_8_faces():
    s = base(dimension=2, extent=(1.0, 1.0), grid_n=8, lens_min=(0.4, 0.4), lens_max=(0.6, 0.6),
             materials_plus=LENS_MAT)
    mat = build_material_field(s)
    assert mat.plus.sum() == 4
    assert len(mat.interface_faces) == 8


def test_interface_faces_are_exactly_label_changes():
    s = base(dimension=2, extent=(2.0, 1.0), grid_n=12, lens_min=(0.5, 0.2), lens_max=(1.3, 0.9),
             materials_plus=LENS_MAT)
    mat = build_material_field(s)
    for r in range(2):
        mask = mat.interface_mask(r)
        lo = [slice(None)] * 2
        hi = [slice(None)] * 2
        lo[r], hi[r] = slice(None, -1), slice(1, None)
        differ = mat.plus[tuple(lo)] != mat.plus[tuple(hi)]
        inner = [slice(None)] * 2
        inner[r] = slice(1, -1)
        assert np.array_equal(mask[tuple(inner)], differ)
        assert not mask[tuple(slice(0, 1) if a == r else slice(None) for a in range(2))].any()


def test_cell_values_are_unsmoothed_and_deterministic():
    s = base(grid_n=20, lens_min=(0.25,), lens_max=(0.55,), materials_plus=LENS_MAT)
    a = build_material_field(s)
    b = build_material_field(s)
    for name in ("lam", "rho", "b", "delta", "k"):
        vals = getattr(a, name)
        assert np.array_equal(vals, getattr(b, name))
        assert set(np.unique(vals)) <= {getattr(LENS_MAT, name), getattr(FLUID, name)}
        assert np.all(vals[a.plus] == getattr(LENS_MAT, name))
    assert a.interface_faces == b.interface_faces


def test_material_arrays_are_read_only():
    mat = build_material_field(base())
    with pytest.raises(ValueError):
        mat.rho[0] = 5.0
