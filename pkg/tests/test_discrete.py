import math

import numpy as np
import pytest

from wlab import discrete as d
from wlab.discrete import Grid
from wlab.errors import ValidationError


def grid1(n=16, L=1.0):
    return Grid(1, (L,), n)


# gradient


def test_gradient_constant_is_zero_away_from_dirichlet_faces():
    g = grid1()
    u = np.full(g.shape, 3.0)
    assert np.all(d.gradient(u, g, "neumann")[0] == 0.0)
    assert np.all(d.gradient(u, g, "dirichlet")[0][1:-1] == 0.0)


def test_gradient_linear_exact():
    g = grid1(10)
    (x,) = g.mesh()
    gr = d.gradient(2.0 * x + 1.0, g, "neumann")[0]
    assert np.allclose(gr[1:-1], 2.0, rtol=0, atol=1e-13)


def test_gradient_x_squared_at_half():
    g = Grid(1, (1.0,), 4)
    (x,) = g.mesh()
    assert np.allclose(x, [0.125, 0.375, 0.625, 0.875])
    gr = d.gradient(x**2, g, "neumann")[0]
    assert gr[2] == pytest.approx(1.0, abs=1e-15)


def test_dirichlet_ghost_boundary_face():
    g = grid1(4)
    u = np.array([1.0, 2.0, 3.0, 4.0])
    gr = d.gradient(u, g, "dirichlet")[0]
    # ghost = -u, face gradient (u - (-u)) / h
    assert gr[0] == pytest.approx(2.0 / 0.25) and gr[-1] == pytest.approx(-8.0 / 0.25)


def test_unknown_bc():
    with pytest.raises(ValidationError):
        d.gradient(np.zeros(4), grid1(4), "robin")


# div_flux and the harmonic interface


def test_div_flux_uniform_linear_zero():
    g = grid1(12)
    (x,) = g.mesh()
    coef = [np.full(g.face_shape(0), 2.5)]
    div = d.div_flux(coef, d.gradient(3 * x - 1, g, "neumann"), g)
    assert np.allclose(div[1:-1], 0.0, atol=1e-12)


def test_div_flux_single_cell_zero_gradient():
    g = grid1(4)
    zero = [np.zeros(g.face_shape(0))]
    assert np.all(d.div_flux([np.ones(g.face_shape(0))], zero, g) == 0.0)


def test_div_flux_rejects_nonpositive():
    g = grid1(4)
    coef = [np.ones(g.face_shape(0))]
    coef[0][2] = 0.0
    with pytest.raises(ValidationError):
        d.div_flux(coef, [np.ones(g.face_shape(0))], g)


def test_div_flux_uniform_is_laplacian_stencil_2d():
    g = Grid(2, (1.0, 2.0), 8)
    rng = np.random.default_rng(1)
    u = rng.standard_normal(g.shape)
    c = 1.7
    coef = [np.full(g.face_shape(r), c) for r in range(2)]
    div = d.div_flux(coef, d.gradient(u, g, "dirichlet"), g)
    hx, hy = g.h
    lap = (u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / hx**2 + (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / hy**2
    assert np.allclose(div[1:-1, 1:-1], c * lap, rtol=1e-12, atol=1e-9)


def _steady_two_coefficient(n):
    """-div(c grad u) = 0 on (0,1), c = 1 | 4, u(0) = 0, u(1) = 1."""
    g = grid1(n)
    c_cell = np.where(g.mesh()[0] < 0.5, 1.0, 4.0)
    coef = [d.harmonic_faces(c_cell, g, 0)]
    A = np.column_stack([d.apply_face_operator(e, coef, g, "dirichlet") for e in np.eye(n)])
    b = np.zeros(n)
    # lifting of u(1) = 1 through the ghost value 2 - u_n
    b[-1] = g.cell_volume * coef[0][-1] * 2.0 / g.h[0] ** 2
    return g, c_cell, coef, np.linalg.solve(A, b)


def test_two_coefficient_steady_is_piecewise_linear():
    g, _, coef, u = _steady_two_coefficient(20)
    (x,) = g.mesh()
    exact = np.where(x < 0.5, 1.6 * x, 0.8 + 0.4 * (x - 0.5))
    assert np.allclose(u, exact, rtol=0, atol=1e-13)
    slopes = np.diff(u) / g.h[0]
    assert slopes[2] / slopes[-3] == pytest.approx(4.0, rel=1e-12)


def test_two_coefficient_flux_continuous_at_interface():
    g, _, coef, u = _steady_two_coefficient(32)
    flux = coef[0] * d.gradient(u, g, "dirichlet")[0]
    j = 16  # face at x = 0.5
    assert flux[j - 1] == pytest.approx(flux[j], rel=1e-13)
    assert flux[j] == pytest.approx(flux[j + 1], rel=1e-13)
    # the last face sees the homogeneous ghost, not the lifted value
    assert np.allclose(flux[:-1], 1.6, rtol=1e-12)


def test_harmonic_faces_keeps_equal_values():
    g = grid1(6)
    c = np.array([2.0, 2.0, 2.0, 8.0, 8.0, 8.0])
    f = d.harmonic_faces(c, g, 0)
    assert list(f) == [2.0, 2.0, 2.0, 3.2, 8.0, 8.0, 8.0]


def test_operator_energy_matches_quadratic_form():
    g = Grid(2, (1.0, 1.0), 9)
    rng = np.random.default_rng(5)
    x = rng.standard_normal(g.shape)
    coef = [rng.uniform(0.5, 2.0, g.face_shape(r)) for r in range(2)]
    for bc in ("dirichlet", "neumann"):
        assert float(np.sum(x * d.apply_face_operator(x, coef, g, bc))) == pytest.approx(
            d.face_energy(x, coef, g, bc), rel=1e-12)


def test_operator_diagonal():
    g = Grid(2, (1.0, 1.5), 5)
    rng = np.random.default_rng(2)
    coef = [rng.uniform(0.5, 2.0, g.face_shape(r)) for r in range(2)]
    for bc in ("dirichlet", "neumann"):
        diag = d.face_operator_diagonal(coef, g, bc)
        for idx in [(0, 0), (2, 3), (4, 4)]:
            e = np.zeros(g.shape)
            e[idx] = 1.0
            assert d.apply_face_operator(e, coef, g, bc)[idx] == pytest.approx(diag[idx], rel=1e-12)


# difference quotients


def test_dq_constant_and_linear():
    g = grid1(20)
    (x,) = g.mesh()
    for l in (1, 3, -2):
        assert np.allclose(np.nan_to_num(d.difference_quotient(np.full(g.shape, 4.0), g, 0, l)), 0.0)
        dq = d.difference_quotient(5.0 * x - 2.0, g, 0, l)
        assert np.allclose(dq[np.isfinite(dq)], 5.0, rtol=1e-12)
        assert np.count_nonzero(np.isnan(dq)) == abs(l)


def test_dq_sine_example():
    # l h = 0.1 at x = 0.2: cells of width 0.05 centered on 0.2 need an offset grid
    g = Grid(1, (1.0,), 20)
    x = np.arange(20) * 0.05  # sample u at the left edges so that x = 0.2 is cell 4
    dq = d.difference_quotient(np.sin(np.pi * x), g, 0, 2)
    assert dq[4] == pytest.approx((math.sin(0.3 * math.pi) - math.sin(0.2 * math.pi)) / 0.1, rel=1e-12)
    assert dq[4] == pytest.approx(2.2123, abs=5e-5)


def test_dq_errors():
    g = grid1(8)
    with pytest.raises(ValidationError):
        d.difference_quotient(np.zeros(8), g, 0, 0)
    with pytest.raises(ValidationError):
        d.difference_quotient(np.zeros(8), g, 0, 8)


# summation by parts


def _phi(g, m, rng):
    phi = rng.standard_normal(g.shape)
    for r in range(g.dim):
        idx = [slice(None)] * g.dim
        idx[r] = slice(0, m)
        phi[tuple(idx)] = 0.0
        idx[r] = slice(g.n - m, None)
        phi[tuple(idx)] = 0.0
    return phi


def test_ibp_zero_phi():
    g = grid1(16)
    assert d.ibp_residual(np.arange(16.0), np.zeros(16), g, 0, 2) == 0.0


def test_ibp_random_1d():
    rng = np.random.default_rng(9)
    g = grid1(64)
    u = rng.standard_normal(64)
    phi = _phi(g, 2, rng)
    res = d.ibp_residual(u, phi, g, 0, 2)
    assert abs(res) <= 1e-13 * np.linalg.norm(u) * np.linalg.norm(phi)


def test_ibp_constant_u():
    rng = np.random.default_rng(4)
    g = Grid(2, (1.0, 1.0), 12)
    phi = _phi(g, 3, rng)
    assert abs(d.ibp_residual(np.full(g.shape, 2.0), phi, g, 1, -3)) <= 1e-13 * np.linalg.norm(phi)


def test_ibp_support_violation():
    g = grid1(16)
    phi = np.zeros(16)
    phi[1] = 1.0
    with pytest.raises(ValidationError):
        d.ibp_residual(np.ones(16), phi, g, 0, 2)


# windows


def test_margin_window_distance():
    labels = -np.ones(20, dtype=int)
    labels[8:12] = 1
    w = d.margin_window(labels, 2, region=-1)
    # barrier cells: 0, 19, 7, 12 (next to the interface), window keeps distance >= 2
    assert list(np.nonzero(w.mask)[0]) == [2, 3, 4, 5, 14, 15, 16, 17]
    w = d.margin_window(labels, 1, region=1)
    assert list(np.nonzero(w.mask)[0]) == [9, 10]
    with pytest.raises(ValidationError):
        d.margin_window(labels, 2, region=1)


def test_box_window():
    g = grid1(10)
    w = d.box_window(g, (0.25,), (0.75,))
    assert list(np.nonzero(w.mask)[0]) == [3, 4, 5, 6]
    assert w.margin == 3
    with pytest.raises(ValidationError):
        d.box_window(g, (0.41,), (0.44,))


# norms


@pytest.mark.parametrize("kind", d.NORM_KINDS)
def test_norm_of_zero(kind):
    g = Grid(2, (1.0, 1.0), 8)
    assert d.norm(np.zeros(g.shape), g, kind, p=3.0) == 0.0


def test_l2_of_x():
    errs = []
    for n in (16, 32):
        g = grid1(n)
        errs.append(abs(d.norm(g.mesh()[0], g, "L2") - 1 / math.sqrt(3)))
    assert errs[1] < errs[0] / 3.5 and errs[0] < 1e-3


def test_h1_of_sine():
    errs = []
    for n in (32, 64):
        g = grid1(n)
        u = np.sin(np.pi * g.mesh()[0])
        errs.append(abs(d.norm(u, g, "H1-semi", bc="dirichlet") - math.pi / math.sqrt(2)))
    assert errs[0] < 5e-3 and errs[1] < errs[0] / 3.5


def test_h2_of_sine_window_shrinks():
    g = grid1(200)
    (x,) = g.mesh()
    u = np.sin(np.pi * x)
    w = d.box_window(g, (0.25,), (0.75,))
    exact = math.pi**2 * math.sqrt(0.25 + 1 / (2 * math.pi))
    assert d.norm(u, g, "H2-semi", w) == pytest.approx(exact, rel=2e-2)


def test_empty_window_rejected():
    g = grid1(8)
    with pytest.raises(ValidationError):
        d.norm(np.ones(8), g, "L2", d.Window(np.zeros(8, dtype=bool)))


# difference-quotient to gradient ratios


def test_lemma21_linear():
    g = grid1(40)
    u = 3.0 * g.mesh()[0]
    w = d.box_window(g, (0.25,), (0.75,))
    rows = d.lemma21_check(u, g, w, 2.0, [1, 2, 4])
    for r in rows:
        assert r.ratio == pytest.approx(math.sqrt(0.5), rel=1e-12)


def test_lemma21_sine():
    g = grid1(128)
    u = np.sin(np.pi * g.mesh()[0])
    w = d.box_window(g, (0.25,), (0.75,))
    for r in d.lemma21_check(u, g, w, 2.0, [1, 2, 4, 8]):
        assert r.ratio <= 1.02


def test_lemma21_kink_bounded():
    ratios = []
    for n in (64, 128, 256):
        g = grid1(n)
        (x,) = g.mesh()
        u = np.abs(x - 0.5 + 1e-3)
        w = d.box_window(g, (0.25,), (0.75,))
        ratios += [r.ratio for r in d.lemma21_check(u, g, w, 2.0, [1, 2, 4])]
    # |D^l u| = 1 away from the kink, so the ratio stays at the measure ratio
    assert max(ratios) <= math.sqrt(0.5) * 1.01
    assert min(ratios) >= math.sqrt(0.5) * 0.9


def test_lemma21_shift_too_large():
    g = grid1(16)
    w = d.box_window(g, (0.3,), (0.7,))
    with pytest.raises(ValidationError):
        d.lemma21_check(np.ones(16), g, w, 2.0, [8])
