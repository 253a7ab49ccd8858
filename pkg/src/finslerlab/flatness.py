"""Rectilinearity residuals: Hamel equations, the parameter-preserving
condition, the Randers reduction and Minkowski detection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    RESIDUAL_TOL,
    BasePoint,
    ResidualReport,
    TangentSample,
    UsageError,
    chunked_map,
    samples_to_arrays,
    unit_rows,
)
from .jets import jet_batch
from .metrics import Metric, MetricSpec, build_metric

HAMEL_NOTE = (
    "Hamel residual in the given chart. 'fail' means the metric is not rectilinear "
    "in THESE coordinates; it may still be projectively flat in another chart "
    "(the Hamel system is not tensorial). Verdicts are sampled evidence only."
)


def hamel_batch(m, X, Y) -> np.ndarray:
    """r_i = sum_k (d2F/dx^k dy^i - d2F/dx^i dy^k) y^k for rows of unit directions."""
    Y = unit_rows(np.asarray(Y, dtype=float))
    j = jet_batch(m, X, Y, 2)
    return np.einsum("bki,bk->bi", j.d2F_dxdy, Y) - np.einsum("bik,bk->bi", j.d2F_dxdy, Y)


def param_batch(m, X, Y) -> np.ndarray:
    """p_i = sum_k d2E/dx^k dy^i y^k - 1/2 sum_k d2E/dx^i dy^k y^k with E = F**2."""
    Y = unit_rows(np.asarray(Y, dtype=float))
    j = jet_batch(m, X, Y, 2)
    return np.einsum("bki,bk->bi", j.d2E_dxdy, Y) - 0.5 * np.einsum("bik,bk->bi", j.d2E_dxdy, Y)


def hamel_residual(m, s: TangentSample) -> np.ndarray:
    return hamel_batch(m, [s.base.coords], [s.dir])[0]


def param_residual(m, s: TangentSample) -> np.ndarray:
    return param_batch(m, [s.base.coords], [s.dir])[0]


def hamel_report(m, samples, tol: float = RESIDUAL_TOL, jobs: int = 1) -> ResidualReport:
    X, Y = samples_to_arrays(samples)
    Y = unit_rows(Y)
    R = chunked_map(lambda a, b: hamel_batch(m, a, b), X, Y, jobs)
    return ResidualReport.from_arrays("hamel", X, Y, R, tol, HAMEL_NOTE)


def param_report(m, samples, tol: float = RESIDUAL_TOL, jobs: int = 1) -> ResidualReport:
    X, Y = samples_to_arrays(samples)
    Y = unit_rows(Y)
    R = chunked_map(lambda a, b: param_batch(m, a, b), X, Y, jobs)
    note = ("Parameter-preserving residual (F**2 form) in the given chart; "
            "'pass' on R^n is sampled evidence of a Minkowski space.")
    return ResidualReport.from_arrays("param", X, Y, R, tol, note)


@dataclass(frozen=True)
class RandersReduction:
    identity_residual: float  # sup |Hamel(F) - Hamel(alpha) + db.y|
    closedness_defect: float  # sup |db_is| at the sample base point
    hamel_F: np.ndarray
    hamel_alpha: np.ndarray
    db_contraction: np.ndarray


def _randers_metric(spec_or_metric) -> Metric:
    m = spec_or_metric if isinstance(spec_or_metric, Metric) else build_metric(spec_or_metric)
    if m.family != "randers":
        raise UsageError(f"randers reduction needs a randers metric, got family {m.family!r}")
    return m


def db_matrix(b, X) -> np.ndarray:
    """D[..., i, s] = db_s/dx^i - db_i/dx^s for polynomial 1-form components ``b``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1]
    cols = [X[:, k] for k in range(n)]
    dB = np.empty((len(X), n, n))  # dB[:, i, s] = d b_s / d x^i
    for s in range(n):
        for i in range(n):
            dB[:, i, s] = np.broadcast_to(b[s].derivative(i)(cols), (len(X),))
    return dB - np.swapaxes(dB, 1, 2)


def randers_reduction_batch(m, X, Y) -> tuple:
    m = _randers_metric(m)
    X = np.asarray(X, dtype=float)
    Y = unit_rows(np.asarray(Y, dtype=float))
    hF = hamel_batch(m, X, Y)
    hA = hamel_batch(m.parts["alpha"], X, Y)
    D = db_matrix(m.parts["b"], X)
    contraction = np.einsum("bis,bs->bi", D, Y)
    identity = hF - hA + contraction
    closed = np.max(np.abs(D), axis=(1, 2))
    return identity, closed, hF, hA, contraction


def randers_reduction_residual(spec, s: TangentSample) -> RandersReduction:
    """Check Hamel(F) = Hamel(alpha) - (db_s/dx^i - db_i/dx^s) y^s for F = alpha + b.

    The identity is algebraic and holds for every Randers metric; the
    closedness defect separately measures whether b is closed.
    """
    identity, closed, hF, hA, c = randers_reduction_batch(spec, [s.base.coords], [s.dir])
    return RandersReduction(float(np.max(np.abs(identity[0]))), float(closed[0]), hF[0], hA[0], c[0])


def randers_report(m, samples, tol: float = RESIDUAL_TOL) -> ResidualReport:
    m = _randers_metric(m)
    X, Y = samples_to_arrays(samples)
    Y = unit_rows(Y)
    identity, closed, hF, hA, _ = randers_reduction_batch(m, X, Y)
    meta = {
        "closedness_defect_sup": float(np.max(closed)),
        "hamel_F_sup": float(np.max(np.abs(hF))),
        "hamel_alpha_sup": float(np.max(np.abs(hA))),
        "one_form_closed": bool(np.max(closed) <= tol),
    }
    note = ("Randers reduction identity residual (algebraic; must vanish for every Randers metric). "
            "When the 1-form is closed, Hamel(F) equals Hamel(alpha).")
    return ResidualReport.from_arrays("randers_identity", X, Y, identity, tol, note, meta)


@dataclass(frozen=True)
class MinkowskiVerdict:
    dF_dx_sup: float
    param_sup: float
    tol: float

    @property
    def x_independent(self) -> bool:
        return self.dF_dx_sup <= self.tol

    @property
    def param_preserving(self) -> bool:
        return self.param_sup <= self.tol

    @property
    def agree(self) -> bool:
        return self.x_independent == self.param_preserving

    @property
    def verdict(self) -> str:
        return "pass" if self.x_independent and self.param_preserving else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def minkowski_criteria(m, samples, tol: float = RESIDUAL_TOL) -> MinkowskiVerdict:
    """Both Minkowski criteria (dF/dx = 0 and the F**2 parameter condition), no domain check."""
    X, Y = samples_to_arrays(samples)
    Y = unit_rows(Y)
    j = jet_batch(m, X, Y, 2)
    P = np.einsum("bki,bk->bi", j.d2E_dxdy, Y) - 0.5 * np.einsum("bik,bk->bi", j.d2E_dxdy, Y)
    return MinkowskiVerdict(float(np.max(np.abs(j.dF_dx))), float(np.max(np.abs(P))), tol)


def minkowski_check(m, samples, tol: float = RESIDUAL_TOL) -> MinkowskiVerdict:
    """Minkowski detection for a metric on all of R^n."""
    if m.bounded:
        raise UsageError(f"minkowski_check needs a metric on all of R^n; {m.family!r} lives on a bounded domain")
    return minkowski_criteria(m, samples, tol)


def indicatrix_translation_check(m, p, q, count: int = 256, seed: int = 0) -> float:
    """max over unit directions y of |F(p, y) - F(q, y)| / F(p, y)."""
    p = np.asarray(p.coords if isinstance(p, BasePoint) else p, dtype=float)
    q = np.asarray(q.coords if isinstance(q, BasePoint) else q, dtype=float)
    n = len(p)
    if hasattr(m, "in_domain") and not (m.in_domain(p) and m.in_domain(q)):
        raise UsageError("indicatrix check: both points must lie in the metric's domain")
    if n == 2:
        t = 2 * np.pi * (np.arange(count) + 0.5 * (seed % 2)) / count
        Y = np.stack([np.cos(t), np.sin(t)], axis=1)
    else:
        g = np.random.default_rng(seed).standard_normal((count, n))
        Y = g / np.linalg.norm(g, axis=1, keepdims=True)
    Fp = m.value(np.broadcast_to(p, Y.shape), Y)
    Fq = m.value(np.broadcast_to(q, Y.shape), Y)
    return float(np.max(np.abs(Fp - Fq) / Fp))
