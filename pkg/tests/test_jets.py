import itertools

import numpy as np
import pytest

from finslerlab.core import EvaluationError
from finslerlab.jets import fd_jet, jet_at, jet_batch, jet_deviation
from finslerlab.metrics import sample_domain

from conftest import ts


def test_euclidean_jet_closed_form(zoo2):
    j = jet_at(zoo2["euclidean"], ts((0, 0), (1, 0)), 2)
    np.testing.assert_allclose(j.dF_dy, [1, 0])
    np.testing.assert_allclose(j.d2F_dydy, [[0, 0], [0, 1]], atol=1e-15)
    for name in ("dF_dx", "d2F_dxdy", "d2F_dxdx"):
        assert np.all(getattr(j, name) == 0)


def test_quartic_gradient(zoo2):
    # dF/dy_i = y_i^3 / F^3 with F = 2^(1/4) at y = (1, 1)
    j = jet_at(zoo2["minkowski_p4"], ts((0, 0), (1, 1)), 1)
    np.testing.assert_allclose(j.dF_dy, [2 ** -0.75] * 2, rtol=1e-14)


def test_euclidean_matches_finite_differences_tightly(zoo2):
    s = ts((0.3, -0.2), (0.6, 0.8))
    dev = jet_deviation(jet_at(zoo2["euclidean"], s, 2), fd_jet(zoo2["euclidean"], s, 2))
    assert max(dev.values()) < 1e-10


@pytest.mark.parametrize("name", ["klein", "randers_open", "funk", "riemannian_pert"])
def test_order3_matches_finite_differences(zoo2, name):
    for s in sample_domain(zoo2[name], 5, 11):
        dev = jet_deviation(jet_at(zoo2[name], s, 3), fd_jet(zoo2[name], s, 3))
        assert dev[1] < 1e-6 and dev[2] < 1e-6 and dev[3] < 1e-5, dev


def test_klein_third_derivative_symmetric(zoo2):
    T = jet_at(zoo2["klein"], ts((0, 0), (1, 0)), 3).d3F_dydydy
    for p in itertools.permutations(range(3)):
        np.testing.assert_allclose(T, np.transpose(T, p), atol=1e-12)


def test_batch_equals_single(zoo2):
    m = zoo2["randers_closed"]
    S = sample_domain(m, 6, 2)
    B = jet_batch(m, [s.base.coords for s in S], [s.dir for s in S], 2)
    for k, s in enumerate(S):
        one = jet_at(m, s, 2)
        np.testing.assert_allclose(B.take(k).d2E_dxdy, one.d2E_dxdy, rtol=1e-13, atol=1e-15)


def test_nonfinite_is_an_evaluation_error():
    def bad(x, y):
        return (y[0] * y[0] + y[1] * y[1]) ** 0.5 / (x[0] - x[0])

    with pytest.raises(EvaluationError):
        jet_batch(bad, [[0.0, 0.0]], [[1.0, 0.0]], 1)
