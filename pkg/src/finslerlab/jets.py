"""Jets of F and F**2: exact (truncated Taylor) and finite-difference oracle."""

from __future__ import annotations

from functools import lru_cache
from itertools import product

import numpy as np

from .core import EPSILON_MIN, DomainError, EvaluationError, Jet, TangentSample, UsageError
from .taylor import taylor_space

EPS = np.finfo(float).eps


@lru_cache(maxsize=None)
def _field_index(n: int, order: int) -> dict:
    """Monomial indices (into the Taylor coefficient array) for every jet field."""
    sp = taylor_space(2 * n, order)
    X = list(range(n))
    Y = [n + i for i in range(n)]
    idx = {
        "F": np.array(sp.mono_index([])),
        "dF_dx": np.array([sp.mono_index([i]) for i in X]),
        "dF_dy": np.array([sp.mono_index([i]) for i in Y]),
    }
    if order >= 2:
        idx["d2F_dxdy"] = np.array([[sp.mono_index([k, i]) for i in Y] for k in X])
        idx["d2F_dydy"] = np.array([[sp.mono_index([k, i]) for i in Y] for k in Y])
        idx["d2F_dxdx"] = np.array([[sp.mono_index([k, i]) for i in X] for k in X])
    if order >= 3:
        idx["d3F_dxdxdy"] = np.array([[[sp.mono_index([s, k, i]) for i in Y] for k in X] for s in X])
        idx["d3F_dxdydy"] = np.array([[[sp.mono_index([s, k, i]) for i in Y] for k in Y] for s in X])
        idx["d3F_dydydy"] = np.array([[[sp.mono_index([s, k, i]) for i in Y] for k in Y] for s in Y])
    return idx


def _check_inputs(f, X, Y):
    if Y.shape != X.shape or X.ndim != 2:
        raise UsageError("points and directions must both have shape (count, n)")
    if np.any(np.linalg.norm(Y, axis=1) <= EPSILON_MIN):
        raise DomainError("zero direction: jets are defined on the slit tangent bundle only")
    in_domain = getattr(f, "in_domain", None)
    if in_domain is not None:
        bad = ~in_domain(X)
        if np.any(bad):
            raise DomainError(f"sample base point {X[np.argmax(bad)].tolist()} outside the metric's validity domain")


def jet_batch(f, X, Y, order: int = 2) -> Jet:
    """Exact jets for a batch of samples; every field gets a leading sample axis.

    A single evaluation of ``f`` on Taylor numbers seeded in all 2n
    coordinates yields every mixed partial up to ``order`` at once.
    """
    if order not in (1, 2, 3):
        raise UsageError(f"jet order must be 1, 2 or 3, got {order}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    _check_inputs(f, X, Y)
    n = X.shape[1]
    sp = taylor_space(2 * n, order)
    xs = [sp.variable(i, X[:, i]) for i in range(n)]
    ys = [sp.variable(n + i, Y[:, i]) for i in range(n)]
    with np.errstate(all="ignore"):
        Fv = f(xs, ys)
        if not hasattr(Fv, "c"):
            Fv = sp.variable(0, np.zeros(len(X))) * 0.0 + Fv
        Ev = Fv * Fv
    if not np.all(np.isfinite(Fv.c)):
        raise EvaluationError("metric evaluation produced non-finite derivatives")
    idx = _field_index(n, order)
    fact = sp.factorial

    def pull(c, name):
        i = idx[name]
        arr = c[i] * fact[i][..., None]
        return np.moveaxis(arr, -1, 0)

    kw = {name: pull(Fv.c, name) for name in idx}
    kw["E"] = pull(Ev.c, "F")
    kw["dE_dx"] = pull(Ev.c, "dF_dx")
    kw["dE_dy"] = pull(Ev.c, "dF_dy")
    if order >= 2:
        kw["d2E_dxdy"] = pull(Ev.c, "d2F_dxdy")
        kw["d2E_dydy"] = pull(Ev.c, "d2F_dydy")
        kw["d2E_dxdx"] = pull(Ev.c, "d2F_dxdx")
    return Jet(order=order, **kw)


def jet_at(f, s: TangentSample, order: int = 2) -> Jet:
    """Exact jet of ``f`` (a Metric or generic evaluator) at one tangent sample."""
    return jet_batch(f, [s.base.coords], [s.dir], order).take(0)


# 1D fourth-order central stencils: (offsets, weights) for derivative orders 0..3
_STENCILS = {
    0: (np.array([0.0]), np.array([1.0])),
    1: (np.array([-2.0, -1.0, 1.0, 2.0]), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0),
    2: (np.array([-2.0, -1.0, 0.0, 1.0, 2.0]), np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0),
    3: (np.array([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]), np.array([1.0, -8.0, 13.0, -13.0, 8.0, -1.0]) / 8.0),
}


def fd_step(total_order: int, coord: float) -> float:
    """Step for a derivative of the given total order, relative to max(1, |coord|)."""
    return EPS ** (1.0 / (total_order + 4)) * max(1.0, abs(coord))


def _multi_indices(n: int, order: int) -> dict:
    """Every jet field entry keyed by its multiset of variables (0..n-1 = x, n.. = y)."""
    idx = _field_index(n, order)
    sp = taylor_space(2 * n, order)
    keys = {}
    for name, arr in idx.items():
        for flat in np.unique(arr):
            keys[int(flat)] = sp.monomials[int(flat)]
    return keys


def fd_jet(f, s: TangentSample, order: int = 2) -> Jet:
    """Central-difference oracle for :func:`jet_at` (fourth-order stencils, O(h^4)).

    Mixed partials use tensor products of the 1D stencils; all stencil points
    are evaluated in one vectorized call of ``f`` on float arrays.
    """
    if order not in (1, 2, 3):
        raise UsageError(f"jet order must be 1, 2 or 3, got {order}")
    x0 = np.asarray(s.base.coords, dtype=float)
    y0 = np.asarray(s.dir, dtype=float)
    _check_inputs(f, x0[None], y0[None])
    n = len(x0)
    z0 = np.concatenate([x0, y0])
    monos = _multi_indices(n, order)

    points, weights, owners = [], [], []
    for flat, alpha in monos.items():
        k = sum(alpha)
        axes = [v for v in range(2 * n) if alpha[v]]
        h = np.array([fd_step(k, z0[v]) for v in range(2 * n)])
        grids = [_STENCILS[alpha[v]] for v in axes]
        scale = np.prod([h[v] ** alpha[v] for v in axes]) if axes else 1.0
        for combo in product(*[range(len(g[0])) for g in grids]):
            z = z0.copy()
            w = 1.0
            for v, g, j in zip(axes, grids, combo):
                z[v] += g[0][j] * h[v]
                w *= g[1][j]
            points.append(z)
            weights.append(w / scale)
            owners.append(flat)
    P = np.array(points)
    in_domain = getattr(f, "in_domain", None)
    if in_domain is not None and not np.all(in_domain(P[:, :n])):
        raise DomainError("finite-difference stencil leaves the metric's validity domain")
    Fp = np.asarray(f([P[:, i] for i in range(n)], [P[:, n + i] for i in range(n)]), dtype=float)
    Fp = np.broadcast_to(Fp, (len(P),))
    if not np.all(np.isfinite(Fp)):
        raise EvaluationError("metric evaluation produced non-finite values on the stencil")
    W = np.array(weights)
    owners = np.array(owners)
    size = taylor_space(2 * n, order).size
    dF = np.zeros(size)
    dE = np.zeros(size)
    np.add.at(dF, owners, W * Fp)
    np.add.at(dE, owners, W * Fp * Fp)

    idx = _field_index(n, order)
    kw = {name: dF[i] for name, i in idx.items()}
    kw["E"] = dE[idx["F"]]
    kw["dE_dx"] = dE[idx["dF_dx"]]
    kw["dE_dy"] = dE[idx["dF_dy"]]
    if order >= 2:
        kw["d2E_dxdy"] = dE[idx["d2F_dxdy"]]
        kw["d2E_dydy"] = dE[idx["d2F_dydy"]]
        kw["d2E_dxdx"] = dE[idx["d2F_dxdx"]]
    return Jet(order=order, **kw)


def jet_deviation(a: Jet, b: Jet) -> dict:
    """Sup-norm relative deviation of ``b`` from ``a``, grouped by derivative order.

    Each group's deviation is max|a - b| over its fields divided by the largest
    magnitude among the same fields of ``a``.
    """
    out = {}
    for k, names in Jet.FIELDS_BY_ORDER.items():
        names = [nm for nm in names if a.populated(nm) and b.populated(nm)]
        if not names:
            continue
        diff = max(float(np.max(np.abs(np.asarray(getattr(a, nm)) - getattr(b, nm)))) for nm in names)
        scale = max(float(np.max(np.abs(getattr(a, nm)))) for nm in names)
        out[k] = diff / max(scale, 1e-12)
    return out
