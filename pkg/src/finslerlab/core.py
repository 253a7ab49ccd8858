"""Value types shared across the package: samples, jets and residual reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

EPSILON_MIN = 1e-8
RESIDUAL_TOL = 1e-8
ORACLE_TOL = 1e-6


class FinslerError(Exception):
    """Base class for all errors raised by finslerlab."""


class DomainError(FinslerError):
    """A sample lies outside a metric's validity domain or on the zero section."""


class EvaluationError(FinslerError):
    """A metric evaluation produced a non-finite value."""


class SpecError(FinslerError):
    """A MetricSpec / CoordinateChange / VectorFieldSpec document is invalid."""


class UsageError(FinslerError):
    """An operation was called outside its preconditions."""


class RegularityError(FinslerError):
    """A Hessian that must be (reduced) non-degenerate is not."""


class TransformError(FinslerError):
    """A coordinate change is (numerically) singular."""


class MeasurementError(FinslerError):
    """A trace diagnostic is undefined (e.g. a degenerate chord)."""


@dataclass(frozen=True)
class BasePoint:
    coords: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in self.coords)
        if len(c) < 2:
            raise DomainError("base point needs dimension n >= 2")
        if not all(np.isfinite(c)):
            raise DomainError(f"base point has non-finite coordinates {c}")
        object.__setattr__(self, "coords", c)

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.array(self.coords)


@dataclass(frozen=True)
class TangentSample:
    """A point of the slit tangent bundle: base coordinates x and fiber coordinates y."""

    base: BasePoint
    dir: tuple
    epsilon_min: float = EPSILON_MIN

    def __post_init__(self):
        if not isinstance(self.base, BasePoint):
            object.__setattr__(self, "base", BasePoint(self.base))
        d = tuple(float(v) for v in self.dir)
        if len(d) != self.base.dimension:
            raise DomainError(f"direction has length {len(d)}, expected {self.base.dimension}")
        if not all(np.isfinite(d)):
            raise DomainError(f"direction has non-finite entries {d}")
        if float(np.linalg.norm(d)) <= self.epsilon_min:
            raise DomainError(f"direction {d} is (numerically) zero; Finsler functions live on the slit bundle")
        object.__setattr__(self, "dir", d)

    @classmethod
    def of(cls, x, y) -> "TangentSample":
        return cls(BasePoint(tuple(x)), tuple(y))

    @property
    def x(self) -> np.ndarray:
        return np.array(self.base.coords)

    @property
    def y(self) -> np.ndarray:
        return np.array(self.dir)

    @property
    def dimension(self) -> int:
        return self.base.dimension

    def normalized(self) -> "TangentSample":
        y = self.y
        return TangentSample(self.base, tuple(y / np.linalg.norm(y)), self.epsilon_min)

    def scaled(self, lam: float) -> "TangentSample":
        return TangentSample(self.base, tuple(lam * self.y), self.epsilon_min)


def samples_to_arrays(samples) -> tuple:
    X = np.array([s.base.coords for s in samples], dtype=float)
    Y = np.array([s.dir for s in samples], dtype=float)
    return X, Y


def unit_rows(Y: np.ndarray) -> np.ndarray:
    return Y / np.linalg.norm(Y, axis=-1, keepdims=True)


@dataclass(frozen=True)
class Jet:
    """Partial derivatives of F and E = F**2 at one tangent sample.

    Index order for mixed arrays is x first, then y:
    ``d2F_dxdy[k, i] = d^2F / dx^k dy^i`` and
    ``d3F_dxdydy[s, k, i] = d^3F / dx^s dy^k dy^i``.
    Fields above the requested order are ``None``.  Jets produced by the batched
    routines carry an extra leading sample axis on every array.
    """

    order: int
    F: np.ndarray
    dF_dx: np.ndarray
    dF_dy: np.ndarray
    d2F_dxdy: Optional[np.ndarray] = None
    d2F_dydy: Optional[np.ndarray] = None
    d2F_dxdx: Optional[np.ndarray] = None
    d3F_dxdxdy: Optional[np.ndarray] = None
    d3F_dxdydy: Optional[np.ndarray] = None
    d3F_dydydy: Optional[np.ndarray] = None
    E: Optional[np.ndarray] = None
    dE_dx: Optional[np.ndarray] = None
    dE_dy: Optional[np.ndarray] = None
    d2E_dxdy: Optional[np.ndarray] = None
    d2E_dydy: Optional[np.ndarray] = None
    d2E_dxdx: Optional[np.ndarray] = None

    FIELDS_BY_ORDER = {
        0: ("F", "E"),
        1: ("dF_dx", "dF_dy", "dE_dx", "dE_dy"),
        2: ("d2F_dxdy", "d2F_dydy", "d2F_dxdx", "d2E_dxdy", "d2E_dydy", "d2E_dxdx"),
        3: ("d3F_dxdxdy", "d3F_dxdydy", "d3F_dydydy"),
    }

    def populated(self, name: str) -> bool:
        return getattr(self, name) is not None

    def take(self, i: int) -> "Jet":
        """The i-th jet of a batched jet."""
        kw = {}
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            kw[name] = v if name == "order" or v is None else v[i]
        return Jet(**kw)


def validate_homogeneity(f: Callable, s: TangentSample, lam: float, tol: float = RESIDUAL_TOL) -> bool:
    """True iff F(x, lam*y) agrees with lam*F(x, y) to ``tol * (1 + lam) * F(x, y)``."""
    if not lam > 0:
        raise UsageError(f"homogeneity factor must be positive, got {lam}")
    if not isinstance(s, TangentSample):
        raise DomainError("expected a TangentSample")
    x = list(s.base.coords)
    y = list(s.dir)
    base = float(f(x, y))
    scaled = float(f(x, [lam * v for v in y]))
    return abs(scaled - lam * base) <= tol * (1.0 + lam) * abs(base)


def euler_identity_check(jet: Jet, s: TangentSample) -> np.ndarray:
    """Residuals of the homogeneity (Euler) identities a valid jet must satisfy.

    Returns ``[|dF_dy.y - F|, |d2F_dydy.y|, |d2F_dxdy.y - dF_dx|, |dE_dx - d2E_dxdy.y / 2|]``
    (sup norms); entries whose inputs are absent are ``nan``.
    """
    y = s.y
    out = np.full(4, np.nan)
    out[0] = abs(float(jet.dF_dy @ y - jet.F))
    if jet.d2F_dydy is not None:
        out[1] = np.max(np.abs(jet.d2F_dydy @ y))
    if jet.d2F_dxdy is not None:
        out[2] = np.max(np.abs(jet.d2F_dxdy @ y - jet.dF_dx))
    if jet.d2E_dxdy is not None:
        out[3] = np.max(np.abs(jet.dE_dx - 0.5 * (jet.d2E_dxdy @ y)))
    return out


@dataclass
class ResidualReport:
    name: str
    samples: list  # of (TangentSample, residual ndarray, sup_norm)
    tol_used: float
    note: str = ""
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_arrays(cls, name, X, Y, R, tol, note="", meta=None) -> "ResidualReport":
        R = np.asarray(R, dtype=float)
        if R.ndim == 1:
            R = R[:, None]
        samples = [
            (TangentSample.of(x, y), r.copy(), float(np.max(np.abs(r))))
            for x, y, r in zip(np.asarray(X), np.asarray(Y), R)
        ]
        return cls(name, samples, float(tol), note, dict(meta or {}))

    @property
    def sups(self) -> np.ndarray:
        return np.array([s[2] for s in self.samples])

    @property
    def aggregate_sup(self) -> float:
        return float(self.sups.max()) if self.samples else 0.0

    @property
    def aggregate_mean(self) -> float:
        return float(self.sups.mean()) if self.samples else 0.0

    @property
    def verdict(self) -> str:
        return "pass" if self.aggregate_sup <= self.tol_used else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self, config: Optional[dict] = None) -> dict:
        d = {
            "name": self.name,
            "verdict": self.verdict,
            "aggregate_sup": self.aggregate_sup,
            "aggregate_mean": self.aggregate_mean,
            "tol_used": self.tol_used,
            "sample_count": len(self.samples),
            "note": self.note,
            "meta": self.meta,
            "samples": [
                {"x": list(s.base.coords), "y": list(s.dir), "residual": r.tolist(), "sup_norm": sup}
                for s, r, sup in self.samples
            ],
        }
        if config is not None:
            d["config"] = config
        return d

    def to_json(self, config: Optional[dict] = None) -> str:
        return json.dumps(self.to_dict(config), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if not self.samples:
            w.writerow(["sup"])
            return buf.getvalue()
        n = self.samples[0][0].dimension
        k = len(self.samples[0][1])
        w.writerow([f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)]
                   + [f"r{i + 1}" for i in range(k)] + ["sup"])
        for s, r, sup in self.samples:
            w.writerow([repr(v) for v in s.base.coords] + [repr(v) for v in s.dir]
                       + [repr(float(v)) for v in r] + [repr(sup)])
        return buf.getvalue()


def chunked_map(fn, X: np.ndarray, Y: np.ndarray, jobs: int = 1, chunk: int = 64) -> np.ndarray:
    """Apply a batched ``fn(X, Y) -> array`` over row chunks, optionally on threads.

    Output row order always matches the input order.
    """
    n = len(X)
    if n == 0:
        return np.empty((0,))
    bounds = [(i, min(i + chunk, n)) for i in range(0, n, chunk)]
    if jobs is None or jobs <= 1 or len(bounds) == 1:
        parts = [fn(X[a:b], Y[a:b]) for a, b in bounds]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda ab: fn(X[ab[0]:ab[1]], Y[ab[0]:ab[1]]), bounds))
    return np.concatenate(parts, axis=0)
