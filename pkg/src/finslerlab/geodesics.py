"""Geodesics from the Euler-Lagrange equations of F**2, with straightness and
affine-parametrization diagnostics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DomainError,
    EvaluationError,
    MeasurementError,
    RegularityError,
    TangentSample,
    UsageError,
)
from .jets import jet_batch

COND_MAX = 1e12


@dataclass(frozen=True)
class SprayAcceleration:
    gamma_dd: np.ndarray
    solve_residual: float


def accel_batch(m, X, V) -> np.ndarray:
    """Solve (1/2 E_yy) a = 1/2 E_x - 1/2 sum_k E_{x^k y^i} v^k for each row."""
    j = jet_batch(m, X, V, 2)
    g = 0.5 * (j.d2E_dydy + np.swapaxes(j.d2E_dydy, -1, -2))
    rhs = j.dE_dx - np.einsum("bki,bk->bi", j.d2E_dxdy, np.asarray(V, dtype=float))
    eig = np.linalg.eigvalsh(g)
    if np.any(eig[:, 0] <= 0) or np.any(eig[:, -1] > COND_MAX * eig[:, 0]):
        raise RegularityError("fundamental tensor is singular or indefinite along the geodesic")
    return np.linalg.solve(g, rhs[..., None])[..., 0]


def el_acceleration(m, s: TangentSample) -> SprayAcceleration:
    """Geodesic acceleration from the F**2 Euler-Lagrange system at ``s``."""
    j = jet_batch(m, [s.base.coords], [s.dir], 2).take(0)
    y = s.y
    H = j.d2E_dydy
    rhs = j.dE_dx - j.d2E_dxdy.T @ y
    eig = np.linalg.eigvalsh(0.5 * (H + H.T))
    if eig[0] <= 0 or eig[-1] > COND_MAX * eig[0]:
        raise RegularityError(f"fundamental tensor not positive definite at {s}")
    a = np.linalg.solve(H, rhs)
    res = float(np.linalg.norm(H @ a - rhs))
    return SprayAcceleration(a, res)


def eul2_acceleration(m, s: TangentSample) -> np.ndarray:
    """Acceleration from the degenerate F-based system, gauge-fixed by constant speed.

    Minimal-norm least-squares solution of F_yy a = F_x - sum_k F_{x^k y} y^k,
    plus the multiple of y that makes d/dt F(gamma, gamma') vanish.
    """
    j = jet_batch(m, [s.base.coords], [s.dir], 2).take(0)
    y = s.y
    rhs = j.dF_dx - j.d2F_dxdy.T @ y
    c = np.linalg.lstsq(j.d2F_dydy, rhs, rcond=1e-10)[0]
    lam = (-(j.dF_dx @ y) - j.dF_dy @ c) / j.F
    return c + lam * y


@dataclass
class GeodesicTrace:
    times: np.ndarray
    points: np.ndarray  # (N, n)
    velocities: np.ndarray  # (N, n)
    speeds: np.ndarray
    truncated: bool = False
    message: str = ""
    straightness: float = field(init=False)
    affine_defect: float = field(init=False)
    speed_drift: float = field(init=False)

    def __post_init__(self):
        ok = len(self.times) >= 3
        self.straightness = straightness_of(self) if ok else float("nan")
        self.affine_defect = affine_defect_of(self) if ok else float("nan")
        self.speed_drift = float(np.max(np.abs(self.speeds - self.speeds[0])) / self.speeds[0])

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def base_points(self) -> list:
        from .core import BasePoint
        return [BasePoint(tuple(p)) for p in self.points]

    def to_csv(self, footer: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.dimension
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)] + ["F"])
        for t, p, v, f in zip(self.times, self.points, self.velocities, self.speeds):
            w.writerow([repr(float(t))] + [repr(float(a)) for a in p] + [repr(float(a)) for a in v] + [repr(float(f))])
        if footer:
            buf.write(f"# straightness={self.straightness!r}\n")
            buf.write(f"# affine_defect={self.affine_defect!r}\n")
            buf.write(f"# speed_drift={self.speed_drift!r}\n")
            buf.write(f"# truncated={str(self.truncated).lower()}\n")
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "nodes": int(len(self.times)),
            "straightness": self.straightness,
            "affine_defect": self.affine_defect,
            "speed_drift": self.speed_drift,
            "truncated": self.truncated,
            "message": self.message,
            "endpoint": self.points[-1].tolist(),
        }


def _as_arrays(trace_or_points, times=None):
    if isinstance(trace_or_points, GeodesicTrace):
        return trace_or_points.times, trace_or_points.points
    P = np.asarray(trace_or_points, dtype=float)
    t = np.arange(len(P), dtype=float) if times is None else np.asarray(times, dtype=float)
    return t, P


def straightness_of(trace, times=None) -> float:
    """Max distance of the nodes from the endpoint chord, divided by the chord length."""
    _, P = _as_arrays(trace, times)
    if len(P) < 3:
        raise MeasurementError("straightness needs at least 3 nodes")
    chord = P[-1] - P[0]
    L = np.linalg.norm(chord)
    if L <= 1e-14 * max(1.0, np.max(np.abs(P))):
        raise MeasurementError("degenerate chord: trace endpoints coincide")
    u = chord / L
    rel = P - P[0]
    perp = rel - np.outer(rel @ u, u)
    return float(np.max(np.linalg.norm(perp, axis=1)) / L)


def affine_defect_of(trace, times=None) -> float:
    """Max second divided difference of the nodes, scaled by duration**2 / chord length.

    Zero for affinely parametrized straight segments t*a + b.
    """
    t, P = _as_arrays(trace, times)
    if len(P) < 3:
        raise MeasurementError("affine defect needs at least 3 nodes")
    L = np.linalg.norm(P[-1] - P[0])
    if L <= 1e-14 * max(1.0, np.max(np.abs(P))):
        raise MeasurementError("degenerate chord: trace endpoints coincide")
    dt = np.diff(t)
    slopes = np.diff(P, axis=0) / dt[:, None]
    acc = 2.0 * np.diff(slopes, axis=0) / (t[2:] - t[:-2])[:, None]
    return float(np.max(np.linalg.norm(acc, axis=1)) * (t[-1] - t[0]) ** 2 / L)


def integrate_batch(m, X0, V0, T: float, steps: int):
    """Classical RK4 for several geodesics at once.

    Returns ``(times, points, velocities, last_index)`` where trajectories that
    leave the domain stop at ``last_index`` (inclusive).
    """
    if steps < 16:
        raise UsageError("steps must be >= 16")
    if not T > 0:
        raise UsageError("T must be positive")
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    V0 = np.atleast_2d(np.asarray(V0, dtype=float))
    B, n = X0.shape
    h = T / steps
    times = np.linspace(0.0, T, steps + 1)
    P = np.full((B, steps + 1, n), np.nan)
    W = np.full((B, steps + 1, n), np.nan)
    P[:, 0], W[:, 0] = X0, V0
    last = np.zeros(B, dtype=int)
    active = np.ones(B, dtype=bool)
    inside = m.in_domain if hasattr(m, "in_domain") else (lambda Z: np.ones(len(Z), dtype=bool))
    for k in range(steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        x, v = P[idx, k], W[idx, k]
        ok = np.ones(idx.size, dtype=bool)

        def acc(xs, vs):
            good = inside(xs) & ok
            a = np.zeros_like(xs)
            if np.any(good):
                try:
                    a[good] = accel_batch(m, xs[good], vs[good])
                except (DomainError, EvaluationError):
                    good[:] = False
            ok[:] &= good
            return a

        k1x, k1v = v, acc(x, v)
        k2x, k2v = v + 0.5 * h * k1v, acc(x + 0.5 * h * k1x, v + 0.5 * h * k1v)
        k3x, k3v = v + 0.5 * h * k2v, acc(x + 0.5 * h * k2x, v + 0.5 * h * k2v)
        k4x, k4v = v + h * k3v, acc(x + h * k3x, v + h * k3v)
        xn = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        vn = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        ok &= inside(xn)
        good = idx[ok]
        P[good, k + 1] = xn[ok]
        W[good, k + 1] = vn[ok]
        last[good] = k + 1
        active[idx[~ok]] = False
    return times, P, W, last


def integrate_geodesic(m, s0: TangentSample, T: float, steps: int) -> GeodesicTrace:
    """Fixed-step RK4 integration of the geodesic with initial data ``s0``.

    A trajectory leaving the validity domain is returned truncated with
    ``truncated=True``.
    """
    times, P, W, last = integrate_batch(m, [s0.base.coords], [s0.dir], T, steps)
    return make_trace(m, times, P[0], W[0], int(last[0]), steps)


def make_trace(m, times, P, W, last, steps) -> GeodesicTrace:
    k = last + 1
    speeds = m.value(P[:k], W[:k])
    truncated = last < steps
    msg = f"left the validity domain after {last} of {steps} steps" if truncated else ""
    return GeodesicTrace(times[:k].copy(), P[:k].copy(), W[:k].copy(), np.asarray(speeds, dtype=float).copy(),
                         truncated, msg)


def integrate_many(m, X0, V0, T: float, steps: int) -> list:
    times, P, W, last = integrate_batch(m, X0, V0, T, steps)
    return [make_trace(m, times, P[b], W[b], int(last[b]), steps) for b in range(len(P))]
