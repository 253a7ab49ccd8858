import numpy as np
import pytest

from finslerlab.core import UsageError
from finslerlab.flatness import (
    HAMEL_NOTE,
    db_matrix,
    hamel_report,
    hamel_residual,
    indicatrix_translation_check,
    minkowski_check,
    minkowski_criteria,
    param_report,
    param_residual,
    randers_reduction_residual,
    randers_report,
)
from finslerlab.metrics import MetricSpec, sample_domain

from conftest import ts

FLAT = ["euclidean", "minkowski_p4", "randers_const", "randers_closed", "klein", "funk"]


@pytest.mark.parametrize("name", FLAT)
def test_hamel_vanishes_on_flat_metrics(zoo2, name):
    rep = hamel_report(zoo2[name], sample_domain(zoo2[name], 100, 0))
    assert rep.aggregate_sup < 1e-8 and rep.verdict == "pass"


def test_hamel_probe_riemannian(zoo2):
    # F = sqrt(y1^2 + (1 + x1^2) y2^2); at x=(0.5,0), y=(0,1) the residual is (-1/sqrt(5), 0)
    r = hamel_residual(zoo2["riemannian_pert"], ts((0.5, 0), (0, 1)))
    np.testing.assert_allclose(r, [-1 / np.sqrt(5), 0.0], atol=1e-14)


def test_fail_report_says_these_coordinates(zoo2):
    rep = hamel_report(zoo2["riemannian_pert"], sample_domain(zoo2["riemannian_pert"], 20, 0))
    assert rep.verdict == "fail"
    assert "THESE coordinates" in rep.note and rep.note == HAMEL_NOTE


def test_param_residual(zoo2):
    assert np.all(param_residual(zoo2["minkowski_p4"], ts((0.2, 0.1), (1, -2))) == 0)
    for name in ("klein", "funk"):
        rep = param_report(zoo2[name], sample_domain(zoo2[name], 30, 2))
        assert rep.aggregate_sup > 1e-3, name


def test_param_residual_klein_frozen(zoo2):
    # frozen from the finite-difference oracle
    r = param_residual(zoo2["klein"], ts((0.3, 0.0), (1, 0)))
    from finslerlab.jets import fd_jet
    j = fd_jet(zoo2["klein"], ts((0.3, 0.0), (1, 0)), 2)
    ref = j.d2E_dxdy.T @ np.array([1.0, 0]) - 0.5 * j.d2E_dxdy @ np.array([1.0, 0])
    np.testing.assert_allclose(r, ref, rtol=1e-6, atol=1e-9)
    assert abs(r[0]) > 1e-2


def test_randers_closed_and_open(zoo2):
    s = ts((0.3, -0.4), (0.6, 0.8))
    closed = randers_reduction_residual(zoo2["randers_closed"], s)
    assert closed.identity_residual < 1e-8
    assert closed.closedness_defect == 0.0
    assert np.max(np.abs(closed.hamel_F)) < 1e-12 and np.max(np.abs(closed.hamel_alpha)) < 1e-12
    open_ = randers_reduction_residual(zoo2["randers_open"], s)
    assert open_.identity_residual < 1e-8
    assert open_.closedness_defect == pytest.approx(0.1, abs=1e-12)
    # db for b = 0.1 x2 dx1: D[i, s] = d_i b_s - d_s b_i -> D[1, 0] = 0.1, D[0, 1] = -0.1
    np.testing.assert_allclose(open_.db_contraction, [-0.1 * 0.8, 0.1 * 0.6], atol=1e-15)
    np.testing.assert_allclose(open_.hamel_F, -open_.db_contraction, atol=1e-12)


def test_randers_zero_b():
    spec = MetricSpec(2, "randers", {"b": [[], []]})
    r = randers_reduction_residual(spec, ts((0.1, 0.2), (1, 0)))
    assert r.identity_residual == 0 and r.closedness_defect == 0


def test_randers_requires_randers(zoo2):
    with pytest.raises(UsageError):
        randers_report(zoo2["klein"], sample_domain(zoo2["klein"], 3, 0))


def test_db_matrix_antisymmetric(zoo2):
    D = db_matrix(zoo2["randers_open"].parts["b"], np.random.default_rng(0).normal(size=(5, 2)))
    np.testing.assert_array_equal(D, -np.swapaxes(D, 1, 2))


def test_randers_report_meta(zoo2):
    rep = randers_report(zoo2["randers_open"], sample_domain(zoo2["randers_open"], 25, 1))
    assert rep.passed and rep.meta["closedness_defect_sup"] == pytest.approx(0.1)
    assert rep.meta["one_form_closed"] is False


@pytest.mark.parametrize("name, verdict", [
    ("euclidean", "pass"), ("minkowski_p4", "pass"), ("randers_const", "pass"),
    ("riemannian_pert", "fail"), ("randers_closed", "fail"), ("randers_open", "fail"),
])
def test_minkowski_check(zoo2, name, verdict):
    v = minkowski_check(zoo2[name], sample_domain(zoo2[name], 50, 3))
    assert v.verdict == verdict and v.agree


def test_minkowski_check_rejects_bounded(zoo2):
    with pytest.raises(UsageError):
        minkowski_check(zoo2["klein"], sample_domain(zoo2["klein"], 3, 0))
    v = minkowski_criteria(zoo2["funk"], sample_domain(zoo2["funk"], 30, 0))
    assert v.verdict == "fail" and v.agree


def test_indicatrix(zoo2):
    assert indicatrix_translation_check(zoo2["minkowski_p4"], (0, 0), (3, -1)) == 0.0
    assert indicatrix_translation_check(zoo2["funk"], (0.2, 0.1), (0.2, 0.1)) == 0.0
    # Klein: F(q,(1,0)) = 1 / (1 - 0.25) while F(0, y) = |y|
    assert indicatrix_translation_check(zoo2["klein"], (0, 0), (0.5, 0)) == pytest.approx(1 / 3, rel=1e-12)
