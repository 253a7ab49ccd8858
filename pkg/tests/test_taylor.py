from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finslerlab import taylor
from finslerlab.taylor import taylor_space


def _vars(n, order, point):
    sp = taylor_space(n, order)
    return sp, [sp.variable(k, v) for k, v in enumerate(point)]


def coeff(t, *vars_):
    return float(t.c[t.space.mono_index(vars_)])


def test_product_and_derivatives():
    sp, (x, y) = _vars(2, 3, (0.7, -1.3))
    f = x * x * y + 3.0 * y
    # f = x^2 y + 3y; df/dx = 2xy, d2f/dxdy = 2x, d3f/dx dx dy = 2
    assert coeff(f) == pytest.approx(0.49 * -1.3 - 3.9)
    assert coeff(f, 0) == pytest.approx(2 * 0.7 * -1.3)
    # stored coefficients are Taylor coefficients: derivative / multi-index factorial
    assert coeff(f, 0, 1) == pytest.approx(2 * 0.7)
    assert coeff(f, 0, 0, 1) == pytest.approx(1.0)


def test_elementary_functions_match_closed_forms():
    sp, (x,) = _vars(1, 3, (0.4,))
    for t, ref in [
        (taylor.exp(x), [np.exp(0.4)] * 4),
        (taylor.log(x), [np.log(0.4), 1 / 0.4, -1 / 0.16, 2 / 0.064]),
        (taylor.sqrt(x), [0.4 ** 0.5, 0.5 * 0.4 ** -0.5, -0.25 * 0.4 ** -1.5, 0.375 * 0.4 ** -2.5]),
        (1.0 / x, [2.5, -1 / 0.16, 2 / 0.064, -6 / 0.4 ** 4]),
    ]:
        derivs = [coeff(t, *([0] * k)) * factorial(k) for k in range(4)]
        np.testing.assert_allclose(derivs, ref, rtol=1e-12)


def test_generic_functions_dispatch_on_floats():
    assert taylor.sqrt(4.0) == 2.0
    assert taylor.exp(0.0) == 1.0
    np.testing.assert_allclose(taylor.power(np.array([8.0]), 1 / 3), [2.0])


def test_batched_constant_addition_broadcasts():
    sp = taylor_space(2, 2)
    x = sp.variable(0, np.array([1.0, 2.0, 3.0]))
    out = x + np.array([10.0, 20.0, 30.0])
    np.testing.assert_allclose(taylor.value_of(out), [11.0, 22.0, 33.0])


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.2, 3.0), b=st.floats(-2.0, 2.0), p=st.floats(-2.5, 2.5))
def test_power_chain_rule(a, b, p):
    sp, (x, y) = _vars(2, 2, (a, b))
    t = taylor.power(x * x + y * y + 1.0, p)
    g = a * a + b * b + 1.0
    assert coeff(t) == pytest.approx(g ** p, rel=1e-12)
    assert coeff(t, 0) == pytest.approx(p * g ** (p - 1) * 2 * a, rel=1e-10, abs=1e-12)
    # d2/dxdy = p (p-1) g^(p-2) 4ab
    assert coeff(t, 0, 1) == pytest.approx(p * (p - 1) * g ** (p - 2) * 4 * a * b, rel=1e-9, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(-2, 2), k=st.integers(0, 6))
def test_integer_power_matches_repeated_product(a, b, k):
    sp, (x, y) = _vars(2, 3, (a, b))
    z = x + 2.0 * y
    prod = 0.0 * z + 1.0
    for _ in range(k):
        prod = prod * z
    np.testing.assert_allclose((z ** k).c, prod.c, rtol=1e-12, atol=1e-12)
