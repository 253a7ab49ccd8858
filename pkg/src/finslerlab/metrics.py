"""The metric zoo: declarative specs, closed-form evaluators, domain sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .core import BasePoint, SpecError, TangentSample
from .poly import PolyMap, Polynomial
from .taylor import power, sqrt

FAMILIES = ("euclidean", "riemannian", "minkowski_pnorm", "randers", "funk", "klein", "pullback")
BALL_FAMILIES = ("funk", "klein")
R_MAX = 0.8
SPEC_FIELDS = {"dimension", "family", "params", "domain"}
PROBE_COUNT = 256


@dataclass(frozen=True)
class MetricSpec:
    dimension: int
    family: str
    params: dict = field(default_factory=dict)
    domain: Optional[dict] = None

    def __post_init__(self):
        if not isinstance(self.dimension, int) or isinstance(self.dimension, bool) or self.dimension < 2:
            raise SpecError(f"dimension: must be an integer >= 2, got {self.dimension!r}")
        if self.family not in FAMILIES:
            raise SpecError(f"family: unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if not isinstance(self.params, dict):
            raise SpecError("params: must be an object")
        if self.domain is None:
            object.__setattr__(self, "domain", default_domain(self.family, self.dimension))
        _check_domain(self.domain, self.dimension)

    @classmethod
    def from_json(cls, doc) -> "MetricSpec":
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text())
        if not isinstance(doc, dict):
            raise SpecError("metric spec: expected a JSON object")
        missing = SPEC_FIELDS - set(doc) - {"domain"}
        if missing:
            raise SpecError(f"{sorted(missing)[0]}: required field missing")
        extra = set(doc) - SPEC_FIELDS
        if extra:
            raise SpecError(f"{sorted(extra)[0]}: unknown field (allowed: {sorted(SPEC_FIELDS)})")
        return cls(doc["dimension"], doc["family"], doc["params"], doc.get("domain"))

    def to_json(self) -> dict:
        return {"dimension": self.dimension, "family": self.family, "params": self.params, "domain": self.domain}


def default_domain(family: str, n: int) -> dict:
    if family in BALL_FAMILIES:
        return {"kind": "ball", "radius": 1.0, "r_max": R_MAX, "center": [0.0] * n}
    return {"kind": "all", "sample_radius": 1.0, "center": [0.0] * n}


def _check_domain(domain, n):
    if not isinstance(domain, dict) or domain.get("kind") not in ("ball", "all"):
        raise SpecError("domain.kind: must be 'ball' or 'all'")
    center = domain.get("center", [0.0] * n)
    if not isinstance(center, list) or len(center) != n:
        raise SpecError(f"domain.center: expected {n} numbers")
    if domain["kind"] == "ball":
        r, rm = domain.get("radius"), domain.get("r_max", R_MAX)
        if not isinstance(r, (int, float)) or r <= 0:
            raise SpecError("domain.radius: must be positive")
        if not isinstance(rm, (int, float)) or not 0 < rm < r:
            raise SpecError("domain.r_max: must lie in (0, radius)")
    else:
        sr = domain.get("sample_radius", 1.0)
        if not isinstance(sr, (int, float)) or sr <= 0:
            raise SpecError("domain.sample_radius: must be positive")


def _dot(a, b):
    total = a[0] * b[0]
    for u, v in zip(a[1:], b[1:]):
        total = total + u * v
    return total


@dataclass(frozen=True)
class Metric:
    """A built Finsler function: ``metric(x, y)`` evaluates F generically."""

    spec: MetricSpec
    eval: Callable
    parts: dict = field(default_factory=dict, compare=False)

    def __call__(self, x, y):
        return self.eval(x, y)

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def family(self) -> str:
        return self.spec.family

    @property
    def bounded(self) -> bool:
        if self.spec.domain["kind"] == "ball":
            return True
        base = self.parts.get("base")
        return bool(base is not None and base.bounded)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.spec.domain.get("center", [0.0] * self.dimension), dtype=float)

    @property
    def x_independent(self) -> bool:
        return bool(self.parts.get("x_independent", False))

    def in_domain(self, X) -> np.ndarray:
        """Open validity domain test for points of shape ``(..., n)``."""
        X = np.asarray(X, dtype=float)
        d = self.spec.domain
        ok = np.all(np.isfinite(X), axis=-1)
        if d["kind"] == "ball":
            ok &= np.linalg.norm(X - self.center, axis=-1) < d["radius"]
        if "change" in self.parts:
            Z = self.parts["change"].apply_array(X)
            ok &= self.parts["base"].in_domain(Z)
        return ok

    def in_sample_region(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        d = self.spec.domain
        r = d["r_max"] if d["kind"] == "ball" else d.get("sample_radius", 1.0)
        ok = np.linalg.norm(X - self.center, axis=-1) <= r
        if "change" in self.parts:
            ok &= self.parts["base"].in_sample_region(self.parts["change"].apply_array(X))
        return ok

    def value(self, X, Y) -> np.ndarray:
        """Float evaluation for arrays of points and directions, shape ``(..., n)``."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        n = self.dimension
        out = self.eval([X[..., i] for i in range(n)], [Y[..., i] for i in range(n)])
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast_shapes(X.shape[:-1], Y.shape[:-1]))


def _poly_matrix(data, n, where):
    if not isinstance(data, list) or len(data) != n or any(not isinstance(r, list) or len(r) != n for r in data):
        raise SpecError(f"{where}: expected an {n}x{n} array of polynomials")
    return [[Polynomial.from_json(data[i][j], n, f"{where}[{i}][{j}]") for j in range(n)] for i in range(n)]


def _poly_vector(data, n, where):
    if not isinstance(data, list) or len(data) != n:
        raise SpecError(f"{where}: expected {n} polynomials")
    return [Polynomial.from_json(data[i], n, f"{where}[{i}]") for i in range(n)]


def _quadratic_form(g):
    n = len(g)

    def alpha(x, y):
        total = None
        for i in range(n):
            for j in range(n):
                if not g[i][j].terms:
                    continue
                term = g[i][j](x) * y[i] * y[j]
                total = term if total is None else total + term
        return sqrt(total)

    return alpha


def _g_arrays(g, X):
    n = len(g)
    cols = [X[:, k] for k in range(n)]
    G = np.empty((X.shape[0], n, n))
    for i in range(n):
        for j in range(n):
            G[:, i, j] = g[i][j](cols)
    return G


def _probe_points(spec, count=PROBE_COUNT, seed=0):
    rng = np.random.default_rng(seed)
    n = spec.dimension
    d = spec.domain
    r = d["r_max"] if d["kind"] == "ball" else d.get("sample_radius", 1.0)
    center = np.asarray(d.get("center", [0.0] * n), dtype=float)
    return np.vstack([center, center + _ball(rng, count, n, r)])


def _ball(rng, count, n, r):
    g = rng.standard_normal((count, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (r * rng.random((count, 1)) ** (1.0 / n))


def _sphere(rng, count, n):
    g = rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def build_metric(spec: MetricSpec) -> Metric:
    """Build the closed-form evaluator for ``spec``, validating its invariants."""
    n = spec.dimension
    p = spec.params
    fam = spec.family

    if fam == "euclidean":
        def F(x, y):
            return sqrt(_dot(y, y))
        return Metric(spec, F, {"x_independent": True})

    if fam == "minkowski_pnorm":
        q = p.get("p")
        if not isinstance(q, (int, float)) or isinstance(q, bool) or q < 2:
            raise SpecError("params.p: minkowski_pnorm requires p >= 2")
        even = float(q).is_integer() and int(q) % 2 == 0

        def F(x, y):
            total = None
            for v in y:
                term = v ** int(q) if even else power(v * v, q / 2.0)
                total = term if total is None else total + term
            return power(total, 1.0 / q)
        return Metric(spec, F, {"x_independent": True, "p": float(q)})

    if fam in ("riemannian", "randers"):
        if fam == "riemannian" and "g" not in p:
            raise SpecError("params.g: required for riemannian")
        if "g" in p:
            g = _poly_matrix(p["g"], n, "params.g")
        else:
            g = [[Polynomial.constant(n, 1.0 if i == j else 0.0) for j in range(n)] for i in range(n)]
        for i in range(n):
            for j in range(i):
                if g[i][j] != g[j][i]:
                    raise SpecError(f"params.g[{i}][{j}]: coefficient field must be symmetric")
        probes = _probe_points(spec)
        G = _g_arrays(g, probes)
        if np.min(np.linalg.eigvalsh(G)) <= 0:
            raise SpecError("params.g: not positive definite at probe points")
        alpha = _quadratic_form(g)
        const_g = all(g[i][j].degree == 0 for i in range(n) for j in range(n))
        if fam == "riemannian":
            return Metric(spec, alpha, {"g": g, "x_independent": const_g})

        if "b" not in p:
            raise SpecError("params.b: required for randers")
        b = _poly_vector(p["b"], n, "params.b")
        cols = [probes[:, k] for k in range(n)]
        B = np.stack([np.broadcast_to(bi(cols), probes.shape[:1]) for bi in b], axis=-1)
        bnorm = np.sqrt(np.einsum("pi,pij,pj->p", B, np.linalg.inv(G), B))
        if np.max(bnorm) >= 1.0:
            raise SpecError(f"params.b: randers condition |b|_alpha < 1 violated (sup {np.max(bnorm):.4g})")
        alpha_spec = MetricSpec(n, "riemannian", {"g": [[g[i][j].to_json() for j in range(n)] for i in range(n)]},
                                spec.domain)
        alpha_metric = Metric(alpha_spec, alpha, {"g": g, "x_independent": const_g})

        def F(x, y):
            beta = None
            for bi, yi in zip(b, y):
                if not bi.terms:
                    continue
                term = bi(x) * yi
                beta = term if beta is None else beta + term
            a = alpha(x, y)
            return a if beta is None else a + beta
        const_b = all(bi.degree == 0 for bi in b)
        return Metric(spec, F, {"g": g, "b": b, "alpha": alpha_metric, "x_independent": const_g and const_b})

    if fam in BALL_FAMILIES:
        if spec.domain["kind"] != "ball" or spec.domain["radius"] != 1.0 or any(spec.domain.get("center", [0.0])):
            raise SpecError(f"domain: {fam} is defined on the open unit ball centred at the origin")
        funk = fam == "funk"

        def F(x, y):
            xx = _dot(x, x)
            xy = _dot(x, y)
            yy = _dot(y, y)
            w = 1.0 - xx
            root = sqrt(w * yy + xy * xy)
            return (root + xy) / w if funk else root / w
        return Metric(spec, F, {"x_independent": False})

    if fam == "pullback":
        if "base" not in p or "change" not in p:
            raise SpecError("params: pullback requires 'base' and 'change'")
        base = build_metric(MetricSpec.from_json(p["base"]))
        change = PolyMap.from_json(p["change"], "params.change")
        if change.dimension != n or base.dimension != n:
            raise SpecError("params.change: dimension mismatch with the pullback spec")
        return pullback(base, change, spec)

    raise SpecError(f"family: unsupported {fam!r}")  # pragma: no cover


def pullback(base: Metric, change: PolyMap, spec: Optional[MetricSpec] = None, domain: Optional[dict] = None) -> Metric:
    """The metric ``F_base(phi(x), Dphi(x) y)`` in the chart of ``change``'s source."""
    n = base.dimension
    if spec is None:
        spec = MetricSpec(n, "pullback", {"base": base.spec.to_json(), "change": change.to_json()},
                          domain or {"kind": "all", "sample_radius": 0.5, "center": [0.0] * n})

    def F(x, y):
        J = change.jacobian(x)
        ybar = []
        for l in range(n):
            acc = None
            for k in range(n):
                if not change.jac_polys[l][k].terms:
                    continue
                term = J[l][k] * y[k]
                acc = term if acc is None else acc + term
            ybar.append(acc if acc is not None else 0.0 * y[0])
        return base.eval(change(x), ybar)

    affine = change.degree <= 1
    return Metric(spec, F, {"base": base, "change": change, "x_independent": affine and base.x_independent})


def sample_domain(metric, count: int, seed: int) -> list:
    """Reproducible samples: x uniform in the sampling region, y uniform on the unit sphere."""
    if count < 1:
        raise SpecError("count: must be >= 1")
    m = metric if isinstance(metric, Metric) else build_metric(metric)
    X, Y = sample_arrays(m, count, seed)
    return [TangentSample(BasePoint(tuple(x)), tuple(y)) for x, y in zip(X, Y)]


def sample_arrays(m: Metric, count: int, seed: int) -> tuple:
    rng = np.random.default_rng(seed)
    n = m.dimension
    d = m.spec.domain
    r = d["r_max"] if d["kind"] == "ball" else d.get("sample_radius", 1.0)
    chunks = []
    got = 0
    for _ in range(1000):
        X = m.center + _ball(rng, count, n, r)
        X = X[m.in_sample_region(X) & m.in_domain(X)]
        chunks.append(X)
        got += len(X)
        if got >= count:
            break
    else:
        raise SpecError("domain: could not draw samples inside the validity domain")
    X = np.vstack(chunks)[:count]
    Y = _sphere(rng, count, n)
    return X, Y


def load_metric(path) -> Metric:
    return build_metric(MetricSpec.from_json(path))


def poly_doc(n: int, terms: dict) -> list:
    """Helper: ``{(e1, e2): c}`` -> JSON polynomial list."""
    return [[list(e), float(c)] for e, c in terms.items()]


def zoo(n: int = 2) -> dict:
    """The reference collection of metrics used by the test and acceptance suites."""
    one = [[0] * n, 1.0]

    def eye():
        return [[[one] if i == j else [] for j in range(n)] for i in range(n)]

    g_pert = eye()
    g_pert[1][1] = [one, [[2] + [0] * (n - 1), 1.0]]
    e1 = [1] + [0] * (n - 1)
    e2 = [0, 1] + [0] * (n - 2)
    b_const = [[[[0] * n, 0.3]]] + [[] for _ in range(n - 1)]
    b_closed = [[[e2, 0.1]], [[e1, 0.1]]] + [[] for _ in range(n - 2)]
    b_open = [[[e2, 0.1]]] + [[] for _ in range(n - 1)]
    specs = {
        "euclidean": MetricSpec(n, "euclidean"),
        "minkowski_p4": MetricSpec(n, "minkowski_pnorm", {"p": 4}),
        "riemannian_pert": MetricSpec(n, "riemannian", {"g": g_pert}),
        "randers_const": MetricSpec(n, "randers", {"b": b_const}),
        "randers_closed": MetricSpec(n, "randers", {"b": b_closed}),
        "randers_open": MetricSpec(n, "randers", {"b": b_open}),
        "funk": MetricSpec(n, "funk"),
        "klein": MetricSpec(n, "klein"),
    }
    return {k: build_metric(s) for k, s in specs.items()}
