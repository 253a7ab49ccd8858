"""Infinitesimal geodesic maps: the Killing-type residual for a vector field
and a flow-based oracle that checks whether the flow bends geodesics."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .core import (
    RESIDUAL_TOL,
    RegularityError,
    ResidualReport,
    SpecError,
    TangentSample,
    samples_to_arrays,
    unit_rows,
)
from .geodesics import integrate_batch, make_trace, straightness_of
from .jets import jet_batch
from .poly import PolyMap
from .regularity import RANK_TAU

MAX_FIELD_DEGREE = 4
KILLING_TOL = 1e-6
FLOW_TOL = 1e-5


@dataclass(frozen=True)
class VectorFieldSpec:
    field: PolyMap
    max_degree: int = MAX_FIELD_DEGREE

    def __post_init__(self):
        if self.field.degree > self.max_degree:
            raise SpecError(f"components: vector field degree {self.field.degree} exceeds {self.max_degree}")

    @classmethod
    def from_json(cls, doc, max_degree: int = MAX_FIELD_DEGREE) -> "VectorFieldSpec":
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text())
        return cls(PolyMap.from_json(doc, "field"), max_degree)

    def to_json(self) -> dict:
        return self.field.to_json()

    @property
    def dimension(self) -> int:
        return self.field.dimension

    def values(self, X) -> np.ndarray:
        return self.field.apply_array(X)

    def first(self, X) -> np.ndarray:
        """``DX[..., s, r] = dX^s/du^r``."""
        return self.field.jacobian_array(X)

    def second(self, X) -> np.ndarray:
        """``D2X[..., s, m, r] = d^2 X^s / du^m du^r``."""
        return self.field.hessian_array(X)


def as_field(X) -> VectorFieldSpec:
    return X if isinstance(X, VectorFieldSpec) else VectorFieldSpec(X)


@dataclass(frozen=True)
class SprayGauge:
    C: np.ndarray
    kernel_component: float
    rhs_dot_y: float
    solve_residual: float


def _gauge_from_jet(j, Y, tau=RANK_TAU):
    """Minimal-norm solutions of F_yy C = F_x - sum_k F_{x^k y} y^k for a batched jet."""
    H = j.d2F_dydy
    rhs = j.dF_dx - np.einsum("bki,bk->bi", j.d2F_dxdy, Y)
    sv = np.linalg.svd(H, compute_uv=False)
    n = H.shape[-1]
    ref = np.maximum(sv[:, :1], np.abs(j.F)[:, None])
    if np.any(np.sum(sv > tau * ref, axis=1) < n - 1):
        raise RegularityError("y-Hessian of F has rank below n - 1; the spray gauge is undetermined")
    C = np.einsum("bij,bj->bi", np.linalg.pinv(H, rcond=1e-10, hermitian=True), rhs)
    return C, rhs


def spray_gauge(m, s: TangentSample) -> SprayGauge:
    s = s.normalized()
    y = s.y
    j = jet_batch(m, [s.base.coords], [s.dir], 2)
    C, rhs = _gauge_from_jet(j, y[None])
    C, rhs = C[0], rhs[0]
    H = j.d2F_dydy[0]
    return SprayGauge(C, float(C @ y), float(rhs @ y), float(np.linalg.norm(H @ C - rhs)))


def killing_batch(m, X, Xs, Ys, gauge_shift: float = 0.0) -> np.ndarray:
    """Killing-type residual of the field ``X`` at each unit-normalized sample row.

    ``gauge_shift`` replaces C by C + gauge_shift * y (for sensitivity checks).
    """
    X = as_field(X)
    Xs = np.asarray(Xs, dtype=float)
    Y = unit_rows(np.asarray(Ys, dtype=float))
    j = jet_batch(m, Xs, Y, 3)
    C, _ = _gauge_from_jet(j, Y)
    C = C + gauge_shift * Y
    V = X.values(Xs)  # X^s
    DX = X.first(Xs)  # [s, r]
    D2X = X.second(Xs)  # [s, m, r]
    Fxx = j.d2F_dxdx
    Fxy = j.d2F_dxdy  # [k, i] = d2F/dx^k dy^i
    Fyy = j.d2F_dydy
    Fxxy = j.d3F_dxdxdy  # [s, k, i]
    Fxyy = j.d3F_dxdydy  # [s, k, i] = d3F/dx^s dy^k dy^i
    Fyyy = j.d3F_dydydy

    bracket1 = Fxx - np.einsum("bski,bk->bsi", Fxxy, Y) - np.einsum("bski,bk->bsi", Fxyy, C)
    t1 = np.einsum("bsi,bs->bi", bracket1, V)

    # [(F_{y^s x^i} - F_{y^i x^s}) - (F_{y^s x^k y^i} y^k + F_{y^s y^k y^i} C^k)] y^r - F_{y^s y^i} C^r
    skew = np.swapaxes(Fxy, 1, 2) - Fxy  # [s, i]: d2F/dx^i dy^s - d2F/dx^s dy^i
    third = np.einsum("bksi,bk->bsi", Fxyy, Y) + np.einsum("bski,bk->bsi", Fyyy, C)
    coef_y = skew - third
    Xy = np.einsum("bsr,br->bs", DX, Y)  # (dX^s/du^r) y^r
    XC = np.einsum("bsr,br->bs", DX, C)
    t2 = np.einsum("bsi,bs->bi", coef_y, Xy) - np.einsum("bsi,bs->bi", Fyy, XC)

    X2 = np.einsum("bsmr,bm,br->bs", D2X, Y, Y)
    t3 = -np.einsum("bsi,bs->bi", Fyy, X2)
    return t1 + t2 + t3


def killing_residual(m, X, s: TangentSample) -> np.ndarray:
    return killing_batch(m, X, [s.base.coords], [s.dir])[0]


def killing_report(m, X, samples, tol: float = KILLING_TOL) -> ResidualReport:
    Xs, Ys = samples_to_arrays(samples)
    Ys = unit_rows(Ys)
    R = killing_batch(m, X, Xs, Ys)
    note = ("Killing-type residual for infinitesimal geodesic maps; 'pass' means the flow of the field "
            "maps geodesics to geodesics as point sets (sampled evidence).")
    return ResidualReport.from_arrays("killing", Xs, Ys, R, tol, note)


def killing_gauge_sensitivity(m, X, samples, shift: float = 1.0) -> float:
    """sup |residual(C + shift*y) - residual(C)| over the samples."""
    Xs, Ys = samples_to_arrays(samples)
    a = killing_batch(m, X, Xs, Ys)
    b = killing_batch(m, X, Xs, Ys, gauge_shift=shift)
    return float(np.max(np.abs(a - b)))


@dataclass(frozen=True)
class FlowOracleResult:
    defect: float  # max distance of the advected curve from the re-integrated geodesic / chord
    image_straightness: float
    truncated: bool

    @property
    def passed(self) -> bool:
        return (not self.truncated) and self.defect <= FLOW_TOL


def advect(X, P, V, epsilon: float, substeps: int = 32):
    """Push points P (and tangent vectors V at them) along the flow of X for time epsilon (RK4)."""
    X = as_field(X)
    P = np.array(P, dtype=float)
    V = np.array(V, dtype=float)
    h = epsilon / substeps

    def rhs(p, v):
        return X.values(p), np.einsum("bsr,br->bs", X.first(p), v)

    for _ in range(substeps):
        k1 = rhs(P, V)
        k2 = rhs(P + 0.5 * h * k1[0], V + 0.5 * h * k1[1])
        k3 = rhs(P + 0.5 * h * k2[0], V + 0.5 * h * k2[1])
        k4 = rhs(P + h * k3[0], V + h * k3[1])
        P = P + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        V = V + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return P, V


def _hermite(p0, p1, v0, v1, h, tau):
    t2, t3 = tau * tau, tau * tau * tau
    return ((2 * t3 - 3 * t2 + 1) * p0 + (t3 - 2 * t2 + tau) * h * v0
            + (-2 * t3 + 3 * t2) * p1 + (t3 - t2) * h * v1)


def _distance_to_curve(q, times, P, V):
    """Distance from q to the C^1 cubic-Hermite interpolant of a geodesic trace."""
    k = int(np.argmin(np.linalg.norm(P - q, axis=1)))
    best = float(np.linalg.norm(P[k] - q))
    for a in (k - 1, k):
        if a < 0 or a + 1 >= len(P):
            continue
        h = times[a + 1] - times[a]
        res = minimize_scalar(
            lambda tau: float(np.sum((_hermite(P[a], P[a + 1], V[a], V[a + 1], h, tau) - q) ** 2)),
            bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12},
        )
        best = min(best, float(np.sqrt(max(res.fun, 0.0))))
    return best


def flow_oracle(m, X, s0: TangentSample, epsilon: float, T: float = 1.0, steps: int = 64,
                substeps: int = 32) -> FlowOracleResult:
    """Advect a geodesic by the flow of X and measure how far the image is from a geodesic.

    The image's initial point and velocity start a fresh geodesic; the defect is
    the largest distance of the advected nodes from it, relative to the image
    chord.  The straightness of the image is reported alongside (meaningful in
    rectilinear charts).
    """
    times, P, W, last = integrate_batch(m, [s0.base.coords], [s0.dir], T, steps)
    trace = make_trace(m, times, P[0], W[0], int(last[0]), steps)
    if trace.truncated:
        return FlowOracleResult(float("nan"), float("nan"), True)
    Q, Wq = advect(X, trace.points, trace.velocities, epsilon, substeps)
    if not np.all(m.in_domain(Q)):
        return FlowOracleResult(float("nan"), float("nan"), True)
    mid = 0.5 * (Q[1:] + Q[:-1])
    length = float(np.sum(m.value(mid, np.diff(Q, axis=0))))
    speed = float(m.value(Q[0], Wq[0]))
    T2 = 1.25 * length / speed
    t2, P2, W2, last2 = integrate_batch(m, Q[:1], Wq[:1], T2, 2 * steps)
    k = int(last2[0]) + 1
    chord = float(np.linalg.norm(Q[-1] - Q[0]))
    dist = max(_distance_to_curve(q, t2[:k], P2[0, :k], W2[0, :k]) for q in Q)
    return FlowOracleResult(dist / chord, straightness_of(Q), False)
