"""Coordinate changes: the (A)+(B) decomposition of the Hamel residual,
affine-change tests and a least-squares search for rectilinear charts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    RESIDUAL_TOL,
    DomainError,
    EvaluationError,
    RegularityError,
    SpecError,
    TangentSample,
    TransformError,
    UsageError,
    samples_to_arrays,
    unit_rows,
)
from .flatness import hamel_batch
from .jets import jet_batch
from .metrics import Metric, pullback
from .poly import PolyMap, Polynomial, monomial_basis, shifted_monomial

DET_MIN = 1e-6


@dataclass(frozen=True)
class CoordinateChange:
    """A polynomial chart map u -> ubar with derived Jacobian and Hessian."""

    forward: PolyMap
    inverse: Optional[PolyMap] = None

    @property
    def dimension(self) -> int:
        return self.forward.dimension

    @classmethod
    def from_json(cls, doc) -> "CoordinateChange":
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text())
        if not isinstance(doc, dict):
            raise SpecError("change: expected a JSON object")
        extra = set(doc) - {"dimension", "components", "inverse"}
        if extra:
            raise SpecError(f"{sorted(extra)[0]}: unknown field in coordinate change")
        fwd = PolyMap.from_json({"dimension": doc.get("dimension"), "components": doc.get("components")}, "change")
        inv = PolyMap.from_json(doc["inverse"], "change.inverse") if doc.get("inverse") is not None else None
        return cls(fwd, inv)

    def to_json(self) -> dict:
        d = self.forward.to_json()
        if self.inverse is not None:
            d["inverse"] = self.inverse.to_json()
        return d

    def __call__(self, x):
        return self.forward(x)

    def apply(self, X) -> np.ndarray:
        return self.forward.apply_array(X)

    def jacobian(self, X) -> np.ndarray:
        return self.forward.jacobian_array(X)

    def hessian(self, X) -> np.ndarray:
        return self.forward.hessian_array(X)

    def check_invertible(self, X) -> float:
        """Smallest |det Jacobian| over the points; raises below the threshold."""
        dets = np.abs(np.linalg.det(self.jacobian(np.atleast_2d(X))))
        worst = float(np.min(dets))
        if worst <= DET_MIN:
            raise TransformError(f"coordinate change Jacobian nearly singular (min |det| = {worst:.3g})")
        return worst


def as_change(c) -> CoordinateChange:
    return c if isinstance(c, CoordinateChange) else CoordinateChange(c)


def pullback_by(m: Metric, change, domain: Optional[dict] = None) -> Metric:
    return pullback(m, as_change(change).forward, domain=domain)


@dataclass(frozen=True)
class TermAB:
    term_full: np.ndarray
    term_A: np.ndarray
    term_B: np.ndarray

    @property
    def identity_residual(self) -> float:
        return float(np.max(np.abs(self.term_full - self.term_A - self.term_B)))


def eval_terms(m: Metric, change, s: TangentSample) -> TermAB:
    """Split the Hamel residual of the pulled-back metric into the (A) and (B) terms.

    ``m`` lives in the target chart ubar; ``s`` is a sample in the source chart u.
    (A) contracts the target-chart Hamel bracket with Jacobians, (B) carries the
    second derivatives of the change.
    """
    change = as_change(change)
    s = s.normalized()
    x, y = s.x, s.y
    change.check_invertible(x)
    J = change.jacobian(x)
    H = change.hessian(x)  # H[l, s, k]
    xbar = change.apply(x)
    ybar = J @ y
    if not m.in_domain(xbar):
        raise DomainError(f"transformed point {xbar.tolist()} outside the metric's domain")
    jm = jet_batch(m, xbar[None], ybar[None], 2).take(0)
    D = jm.d2F_dxdy
    Hb = jm.d2F_dydy
    term_A = np.einsum("ml,m,li->i", D - D.T, ybar, J)
    term_B = (np.einsum("rl,lsk,ri,s,k->i", Hb, H, J, y, y)
              - np.einsum("rl,lik,rs,s,k->i", Hb, H, J, y, y))
    full = hamel_batch(pullback_by(m, change), x[None], y[None])[0]
    return TermAB(full, term_A, term_B)


@dataclass(frozen=True)
class AffinePreservationResult:
    affine: bool
    rectilinear: bool
    hessian_sup: float
    pullback_hamel_sup: float

    @property
    def agree(self) -> bool:
        return self.affine == self.rectilinear


def affine_preservation_test(m: Metric, change, samples, tol: float = RESIDUAL_TOL) -> AffinePreservationResult:
    """Compare 'the change is affine' with 'the pulled-back metric stays rectilinear'.

    ``samples`` live in the source chart of the change.
    """
    change = as_change(change)
    X, Y = samples_to_arrays(samples)
    Y = unit_rows(Y)
    change.check_invertible(X)
    Xbar = change.apply(X)
    Ybar = np.einsum("blk,bk->bl", change.jacobian(X), Y)
    pre = float(np.max(np.abs(hamel_batch(m, Xbar, Ybar))))
    if pre > tol:
        raise UsageError(f"metric is not rectilinear in its own chart at the samples (Hamel sup {pre:.3g})")
    hess_sup = float(np.max(np.abs(change.hessian(X))))
    pulled = float(np.max(np.abs(hamel_batch(pullback_by(m, change), X, Y))))
    return AffinePreservationResult(hess_sup <= tol, pulled <= tol, hess_sup, pulled)


@dataclass
class SearchResult:
    change: CoordinateChange
    achieved_residual: float
    initial_residual: float
    iterations: int
    converged: bool
    budget_exhausted: bool
    history: list = field(default_factory=list)

    @property
    def flag(self) -> str:
        if self.converged:
            return "converged"
        return "budget-exhausted" if self.budget_exhausted else "stalled"


class _SearchFamily:
    """chi(w) = w + sum_l sum_alpha c[l, alpha] (w - center)^alpha e_l, 2 <= |alpha| <= degree."""

    def __init__(self, n, degree, center):
        self.n = n
        self.basis = monomial_basis(n, range(2, degree + 1))
        self.shifted = [shifted_monomial(a, center) for a in self.basis]
        self.size = n * len(self.basis)

    def change(self, c) -> CoordinateChange:
        c = np.asarray(c, dtype=float).reshape(self.n, len(self.basis))
        comps = []
        for l in range(self.n):
            p = Polynomial.monomial([1 if k == l else 0 for k in range(self.n)])
            for coef, mono in zip(c[l], self.shifted):
                if coef:
                    p = p + mono.scale(coef)
            comps.append(p)
        return CoordinateChange(PolyMap(tuple(comps)))


def rectilinear_search(m: Metric, degree: int, samples, iters: int = 200, tol: float = 1e-10,
                       mu0: float = 1e-3) -> SearchResult:
    """Levenberg-Marquardt search for a polynomial chart in which ``m`` is rectilinear.

    The returned change maps the new chart into ``m``'s chart, i.e. the metric
    pulled back by it should satisfy the Hamel system.  Its linear part at the
    domain centre is the identity and its constant term vanishes.  No
    convergence guarantee: the best iterate is returned with a flag, and a
    failure is inconclusive about projective flatness.
    """
    if degree not in (2, 3):
        raise UsageError("degree must be 2 or 3")
    n = m.dimension
    fam = _SearchFamily(n, degree, m.center)
    X, Y = samples_to_arrays(samples)
    Y = unit_rows(Y)
    if len(X) < 10 * fam.size:
        raise UsageError(f"need at least {10 * fam.size} samples for {fam.size} free coefficients, got {len(X)}")

    def residual(c):
        ch = fam.change(c)
        ch.check_invertible(X)
        if not np.all(m.in_domain(ch.apply(X))):
            raise DomainError("candidate change leaves the metric's domain")
        r = hamel_batch(pullback_by(m, ch), X, Y).ravel()
        if not np.all(np.isfinite(r)):
            raise EvaluationError("non-finite residual")
        return r

    c = np.zeros(fam.size)
    r = residual(c)
    initial = float(np.max(np.abs(r)))
    best_c, best_sup = c.copy(), initial
    history = [initial]
    mu = mu0
    it = 0
    errors = (DomainError, EvaluationError, TransformError, RegularityError)
    while best_sup > tol and it < iters:
        it += 1
        Jm = np.empty((r.size, fam.size))
        for k in range(fam.size):
            step = 1e-7 * max(1.0, abs(c[k]))
            cp = c.copy()
            cp[k] += step
            try:
                Jm[:, k] = (residual(cp) - r) / step
            except errors:
                cp[k] -= 2 * step
                Jm[:, k] = (r - residual(cp)) / step
        g = Jm.T @ r
        A = Jm.T @ Jm
        cost = 0.5 * r @ r
        accepted = False
        while mu < 1e12:
            try:
                delta = np.linalg.solve(A + mu * np.diag(np.diag(A) + 1e-12), -g)
                r_new = residual(c + delta)
            except (np.linalg.LinAlgError,) + errors:
                mu *= 10.0  # degenerate or out-of-domain step: damp harder
                continue
            if 0.5 * r_new @ r_new < cost:
                c, r = c + delta, r_new
                mu = max(mu / 3.0, 1e-12)
                accepted = True
                break
            mu *= 4.0
        sup = float(np.max(np.abs(r)))
        history.append(sup)
        if sup < best_sup:
            best_c, best_sup = c.copy(), sup
        if not accepted or np.linalg.norm(g) == 0.0:
            break
    converged = best_sup <= tol
    return SearchResult(fam.change(best_c), best_sup, initial, it, converged,
                        (not converged) and it >= iters, history)


def compose_affine(change, A, b) -> CoordinateChange:
    """chi o (w -> A w + b) as a polynomial change."""
    change = as_change(change)
    A = np.asarray(A, dtype=float)
    n = change.dimension
    lin = PolyMap.affine(A, b).components
    comps = [_substitute(p, lin) for p in change.forward.components]
    return CoordinateChange(PolyMap(tuple(comps)))


def _substitute(p: Polynomial, inner) -> Polynomial:
    from .poly import _poly_mul

    n = p.nvars
    total = Polynomial(n, ())
    for e, c in p.terms:
        term = Polynomial.constant(n, c)
        for v, k in enumerate(e):
            for _ in range(k):
                term = _poly_mul(term, inner[v])
        total = total + term
    return total
