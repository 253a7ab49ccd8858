import json

import numpy as np
import pytest

from finslerlab.core import (
    DomainError,
    ResidualReport,
    TangentSample,
    UsageError,
    chunked_map,
    euler_identity_check,
    validate_homogeneity,
)
from finslerlab.jets import jet_at
from finslerlab.metrics import sample_domain

from conftest import ts


def euclid(x, y):
    return sum(v * v for v in y) ** 0.5


def quartic(x, y):
    return sum(v ** 4 for v in y) ** 0.25


def energy(x, y):
    return sum(v * v for v in y)


@pytest.mark.parametrize("f, lam, expected", [(euclid, 2.0, True), (quartic, 3.0, True), (energy, 2.0, False)])
def test_homogeneity(f, lam, expected):
    assert validate_homogeneity(f, ts((0.1, 0.4), (0.3, -0.7)), lam) is expected


def test_homogeneity_rejects_nonpositive_factor():
    with pytest.raises(UsageError):
        validate_homogeneity(euclid, ts((0, 0), (1, 0)), -1.0)


@pytest.mark.parametrize("y", [(0.0, 0.0), (1e-12, 0.0)])
def test_zero_direction_is_a_domain_error(y):
    with pytest.raises(DomainError):
        ts((0.0, 0.0), y)


def test_mismatched_dimension():
    with pytest.raises(DomainError):
        ts((0.0, 0.0), (1.0, 0.0, 0.0))


def test_euler_identities_euclidean_exact(zoo2):
    s = ts((0, 0), (1, 0))
    np.testing.assert_array_equal(euler_identity_check(jet_at(zoo2["euclidean"], s, 2), s), np.zeros(4))


def test_euler_identities_klein_and_randers(zoo2):
    for name, s in [("klein", ts((0.3, 0.0), (0.0, 1.0))), ("randers_open", ts((0.4, -0.2), (0.3, 0.8)))]:
        assert np.all(euler_identity_check(jet_at(zoo2[name], s, 2), s) < 1e-9)


def test_report_serialisation_is_stable(zoo2):
    samples = sample_domain(zoo2["euclidean"], 5, 3)
    R = np.arange(10.0).reshape(5, 2) * 1e-9
    from finslerlab.core import samples_to_arrays
    X, Y = samples_to_arrays(samples)
    rep = ResidualReport.from_arrays("demo", X, Y, R, 1e-8, "note")
    assert rep.aggregate_sup == pytest.approx(9e-9)
    assert rep.verdict == "pass"
    a = rep.to_json({"seed": 3})
    assert a == rep.to_json({"seed": 3})
    doc = json.loads(a)
    assert doc["config"] == {"seed": 3} and doc["sample_count"] == 5
    lines = rep.to_csv().splitlines()
    assert lines[0] == "x1,x2,y1,y2,r1,r2,sup"
    assert len(lines) == 6
    rep2 = ResidualReport.from_arrays("demo", X, Y, R * 10, 1e-8)
    assert rep2.verdict == "fail" and not rep2.passed


def test_chunked_map_order_stable():
    X = np.arange(300.0).reshape(150, 2)
    f = lambda a, b: a[:, :1] * 2 + b[:, :1]
    serial = chunked_map(f, X, X, jobs=1, chunk=7)
    threaded = chunked_map(f, X, X, jobs=4, chunk=7)
    np.testing.assert_array_equal(serial, threaded)
    np.testing.assert_array_equal(serial[:, 0], 3 * X[:, 0])
