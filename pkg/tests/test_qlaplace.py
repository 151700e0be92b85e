import numpy as np
import pytest

from wlab.errors import ValidationError
from wlab.qlaplace import (
    INEQUALITY_IDS,
    MUST_HOLD,
    InequalityReport,
    check_inequality,
    damping_flux,
    evaluate_inequality,
    f_transform,
    monotonicity_gap,
    reports_to_csv,
    young_constant,
)


def test_damping_flux_zero_gradient():
    for q in (1.0, 1.5, 3.0):
        assert np.array_equal(damping_flux(np.zeros(2), 2.0, 0.3, q), np.zeros(2))


def test_damping_flux_q1_collapses_to_b():
    assert np.array_equal(damping_flux([3.0, 4.0], 2.0, 0.5, 1.0), [6.0, 8.0])


def test_damping_flux_q3():
    assert np.allclose(damping_flux([1.0, 0.0], 2.0, 0.5, 3.0), [2.0, 0.0], rtol=0, atol=1e-15)
    assert np.allclose(damping_flux([2.0, 0.0], 2.0, 0.5, 3.0), [10.0, 0.0], rtol=0, atol=1e-14)


def test_f_transform_examples():
    g = np.array([0.3, -1.2, 2.0])
    assert np.array_equal(f_transform(g, 1.0), g)
    assert np.allclose(f_transform([2.0, 0.0], 3.0), [4.0, 0.0])
    assert np.allclose(f_transform([0.0, 3.0], 5.0), [0.0, 27.0])


def test_monotonicity_gap_examples():
    assert monotonicity_gap([1.0, 2.0], [1.0, 2.0], 2.5) == 0.0
    assert monotonicity_gap([3.0, 0.0], [-1.0, 0.0], 1.0) == pytest.approx(16.0)
    x, y = np.array([1.0, 0.0]), np.zeros(2)
    assert monotonicity_gap(x, y, 3.0) == pytest.approx(1.0)
    lower = 4.0 / 16.0 * np.sum((f_transform(x, 3.0) - f_transform(y, 3.0)) ** 2)
    assert lower == pytest.approx(0.25)
    assert 2.0 ** (1 - 3.0) * 1.0 ** 4 == pytest.approx(0.25)


def test_monotonicity_gap_batched():
    x = np.array([[1.0, 0.0], [3.0, 0.0]])
    y = np.array([[0.0, 0.0], [-1.0, 0.0]])
    assert np.allclose(monotonicity_gap(x, y, np.array([3.0, 1.0])), [1.0, 16.0])


def test_23_as_stated_counterexample():
    res, _ = evaluate_inequality("2.3-as-stated", [3.0, 0.0], [-1.0, 0.0], 1.0)
    # |P(x) - P(y)| = 4 against the middle term 8; both links of the chain fail
    assert res == pytest.approx(min(4.0 - 8.0, 8.0 - 16.0))


def test_23_monotone_same_point_holds():
    res, _ = evaluate_inequality("2.3-monotone", [3.0, 0.0], [-1.0, 0.0], 1.0)
    assert res == pytest.approx(16.0 - 16.0) and res >= 0


def test_young_standard_example():
    res, _ = evaluate_inequality("young-standard", [2.0], [3.0], 2.0, eps=1.0, r=2.0)
    assert res == pytest.approx(6.25 - 6.0)
    assert young_constant(1.0, 2.0) == pytest.approx(0.25)


def test_young_as_printed_fails_at_r2():
    # at r = 2 the printed constant is 4 eps instead of 1/(4 eps), too small once eps < 1/4
    res, _ = evaluate_inequality("young-as-stated", [2.0], [1.0], 2.0, eps=0.1, r=2.0)
    assert res == pytest.approx(0.1 * 4 + 0.4 * 1 - 2.0)
    res, _ = evaluate_inequality("young-standard", [2.0], [1.0], 2.0, eps=0.1, r=2.0)
    assert res >= 0


def test_25_vector_reading_fails_for_equal_norm_vectors():
    res, _ = evaluate_inequality("2.5", [1.0, 0.0], [0.0, 1.0], 2.0)
    assert res < 0
    res, _ = evaluate_inequality("2.5-ftransform", [1.0, 0.0], [0.0, 1.0], 2.0)
    assert res >= 0


def test_24_equal_points_only():
    # x = y gives residual exactly 0 on every sample
    rng = np.random.default_rng(0)
    x = rng.uniform(-10, 10, size=(1000, 3))
    q = rng.uniform(1, 5, size=1000)
    res, _ = evaluate_inequality("2.4", x, x, q)
    assert np.all(res == 0.0)


def test_unknown_id():
    with pytest.raises(ValidationError):
        check_inequality("2.7", samples=10)
    with pytest.raises(ValidationError):
        evaluate_inequality("2.7", [1.0], [1.0], 2.0)


@pytest.mark.parametrize("kw", [
    dict(samples=0),
    dict(q_range=(0.5, 2.0)),
    dict(q_range=(3.0, 2.0)),
    dict(magnitude_range=(0.0, 0.0)),
    dict(dims=(4,)),
    dict(r_range=(1.0, 2.0)),
])
def test_invalid_ranges(kw):
    with pytest.raises(ValidationError):
        check_inequality("2.2", **kw)


def test_must_hold_zero_violations_small():
    for ineq in MUST_HOLD:
        rep = check_inequality(ineq, rng_seed=7, samples=20000)
        assert rep.violations == 0, rep
        assert rep.samples == 20000
        assert np.isfinite(rep.worst_margin)


def test_as_stated_variants_violated():
    for ineq in ("2.3-as-stated", "2.5", "2.5-scalar", "young-as-stated"):
        rep = check_inequality(ineq, rng_seed=7, samples=20000)
        assert 0 < rep.violations <= rep.samples
        assert rep.worst_margin < 0


def test_thread_count_invariance():
    a = check_inequality("2.3-as-stated", rng_seed=3, samples=200000, threads=1)
    b = check_inequality("2.3-as-stated", rng_seed=3, samples=200000, threads=4)
    assert a == b


def test_witness_reproduces_margin():
    rep = check_inequality("2.5", rng_seed=11, samples=5000)
    w = rep.witness
    res, scale = evaluate_inequality("2.5", w["x"], w["y"], w["q"])
    assert res / scale == pytest.approx(rep.worst_margin, rel=1e-12)


def test_csv_rows():
    reps = [check_inequality(i, samples=100) for i in INEQUALITY_IDS]
    text = reports_to_csv(reps)
    lines = text.split("\n")
    assert lines[0] == ",".join(InequalityReport.CSV_HEADER)
    assert len(lines) == len(INEQUALITY_IDS) + 2 and lines[-1] == ""
    assert "\r" not in text
    young = [l for l in lines if l.startswith("young-standard")][0].split(",")
    assert young[-1] != "" and young[-2] != ""
