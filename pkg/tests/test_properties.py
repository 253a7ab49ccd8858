import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from finslerlab.core import TangentSample, euler_identity_check, validate_homogeneity
from finslerlab.flatness import hamel_batch, randers_reduction_residual
from finslerlab.jets import jet_at
from finslerlab.metrics import MetricSpec, build_metric, zoo
from finslerlab.poly import PolyMap, Polynomial
from finslerlab.transforms import CoordinateChange, eval_terms

ZOO = zoo(2)
small = st.floats(-0.5, 0.5, allow_nan=False)
direction = st.tuples(st.floats(-1, 1), st.floats(-1, 1)).filter(lambda v: np.hypot(*v) > 0.1)
metric_name = st.sampled_from(sorted(ZOO))


@settings(max_examples=60, deadline=None)
@given(name=metric_name, x=st.tuples(small, small), y=direction, lam=st.floats(0.1, 10))
def test_homogeneity_and_euler(name, x, y, lam):
    m = ZOO[name]
    s = TangentSample.of(x, y)
    assert validate_homogeneity(m, s, lam)
    res = euler_identity_check(jet_at(m, s, 2), s)
    assert np.all(res < 1e-9 * max(1.0, np.hypot(*y)))


@settings(max_examples=40, deadline=None)
@given(c=st.lists(st.floats(-0.15, 0.15), min_size=4, max_size=4), x=st.tuples(small, small), y=direction)
def test_randers_identity_random_forms(c, x, y):
    b = [[[[0, 1], c[0]], [[1, 1], c[1]]], [[[0, 0], c[2]], [[2, 0], c[3]]]]
    spec = MetricSpec(2, "randers", {"b": b}, {"kind": "all", "sample_radius": 0.5, "center": [0.0, 0.0]})
    r = randers_reduction_residual(spec, TangentSample.of(x, y))
    assert r.identity_residual < 1e-8
    # closedness defect: |d_1 b_2 - d_2 b_1| = |2 c3 x1 - c0 - c1 x1|
    assert np.isclose(r.closedness_defect, abs(2 * c[3] * x[0] - c[0] - c[1] * x[0]), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(name=st.sampled_from(["euclidean", "minkowski_p4", "klein", "funk", "randers_closed"]),
       A=st.lists(st.floats(-0.4, 0.4), min_size=4, max_size=4), x=st.tuples(small, small), y=direction)
def test_affine_changes_preserve_rectilinearity(name, A, x, y):
    A = np.eye(2) + np.reshape(A, (2, 2))
    assume(abs(np.linalg.det(A)) > 0.2)
    ch = CoordinateChange(PolyMap.affine(0.5 * A, [0.05, -0.05]))
    t = eval_terms(ZOO[name], ch, TangentSample.of(np.array(x) * 0.8, y))
    assert np.max(np.abs(t.term_full)) < 1e-8 and np.max(np.abs(t.term_B)) == 0


@settings(max_examples=40, deadline=None)
@given(name=metric_name, c=st.lists(st.floats(-0.3, 0.3), min_size=4, max_size=4),
       x=st.tuples(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3)), y=direction)
def test_terms_identity_random_changes(name, c, x, y):
    ch = CoordinateChange(PolyMap((
        Polynomial.from_json([[[1, 0], 1.0], [[0, 2], c[0]], [[1, 1], c[1]]], 2),
        Polynomial.from_json([[[0, 1], 1.0], [[2, 0], c[2]], [[0, 3], c[3]]], 2),
    )))
    J = ch.jacobian(np.array(x))
    assume(abs(np.linalg.det(J)) > 0.1)
    assume(ZOO[name].in_domain(ch.apply(np.array(x))))
    assert eval_terms(ZOO[name], ch, TangentSample.of(x, y)).identity_residual < 1e-7


@settings(max_examples=30, deadline=None)
@given(x=st.tuples(small, small), y=direction)
def test_hamel_scale_invariance(x, y):
    # residuals are evaluated on unit directions, so scaling y changes nothing
    for name in ("riemannian_pert", "randers_open"):
        a = hamel_batch(ZOO[name], [x], [y])
        b = hamel_batch(ZOO[name], [x], [np.array(y) * 7.0])
        np.testing.assert_allclose(a, b, atol=1e-13)
