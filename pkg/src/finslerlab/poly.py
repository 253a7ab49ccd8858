"""Multivariate polynomials with explicit coefficient lists.

The JSON form of a polynomial is a list of ``[exponent-multi-index, coefficient]``
pairs, e.g. ``[[[0, 0], 1.0], [[2, 0], 1.0]]`` for ``1 + u1**2``.  An empty list
is the zero polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .core import SpecError


@dataclass(frozen=True)
class Polynomial:
    nvars: int
    terms: tuple = ()  # ((exponents, coeff), ...) with exponents a tuple of ints

    @classmethod
    def from_json(cls, data, nvars: int, where: str = "polynomial") -> "Polynomial":
        if isinstance(data, (int, float)):
            data = [[[0] * nvars, float(data)]]
        if not isinstance(data, list):
            raise SpecError(f"{where}: expected a list of [exponents, coefficient] pairs")
        merged: dict = {}
        for k, item in enumerate(data):
            try:
                exps, coeff = item
                exps = tuple(int(e) for e in exps)
                coeff = float(coeff)
            except (TypeError, ValueError):
                raise SpecError(f"{where}[{k}]: expected [exponent-multi-index, coefficient]") from None
            if len(exps) != nvars or any(e < 0 for e in exps):
                raise SpecError(f"{where}[{k}]: exponent multi-index must have {nvars} non-negative entries")
            merged[exps] = merged.get(exps, 0.0) + coeff
        return cls(nvars, tuple(sorted((e, c) for e, c in merged.items() if c != 0.0)))

    def to_json(self) -> list:
        return [[list(e), float(c)] for e, c in self.terms]

    @classmethod
    def constant(cls, nvars: int, value: float) -> "Polynomial":
        return cls(nvars, (((0,) * nvars, float(value)),) if value else ())

    @classmethod
    def monomial(cls, exps, coeff: float = 1.0) -> "Polynomial":
        return cls(len(exps), ((tuple(exps), float(coeff)),))

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=0)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        merged = dict(self.terms)
        for e, c in other.terms:
            merged[e] = merged.get(e, 0.0) + c
        return Polynomial(self.nvars, tuple(sorted((e, c) for e, c in merged.items() if c != 0.0)))

    def scale(self, s: float) -> "Polynomial":
        return Polynomial(self.nvars, tuple((e, c * s) for e, c in self.terms if c * s != 0.0))

    def derivative(self, var: int) -> "Polynomial":
        out = []
        for e, c in self.terms:
            if e[var] == 0:
                continue
            d = list(e)
            d[var] -= 1
            out.append((tuple(d), c * e[var]))
        return Polynomial(self.nvars, tuple(sorted(out)))

    def __call__(self, x):
        """Evaluate at ``x`` (a sequence of floats, arrays or Taylor numbers)."""
        if not self.terms:
            return 0.0 * x[0]
        powers: dict = {}

        def pw(v, k):
            key = (v, k)
            if key not in powers:
                powers[key] = x[v] if k == 1 else pw(v, k - 1) * x[v]
            return powers[key]

        total = None
        for e, c in self.terms:
            term = None
            for v, k in enumerate(e):
                if k:
                    term = pw(v, k) if term is None else term * pw(v, k)
            term = c if term is None else term * c
            total = term if total is None else total + term
        return total


@dataclass(frozen=True)
class PolyMap:
    """A polynomial map R^n -> R^n with cached first and second derivatives.

    Used both as a coordinate change and as a vector field.
    """

    components: tuple  # of Polynomial
    jac_polys: tuple = field(init=False, repr=False, compare=False)
    hess_polys: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.components)
        if any(p.nvars != n for p in self.components):
            raise SpecError("polynomial map: every component must use exactly n variables")
        jac = tuple(tuple(p.derivative(k) for k in range(n)) for p in self.components)
        hess = tuple(tuple(tuple(jac[l][k].derivative(s) for k in range(n)) for s in range(n)) for l in range(n))
        object.__setattr__(self, "jac_polys", jac)
        object.__setattr__(self, "hess_polys", hess)

    @property
    def dimension(self) -> int:
        return len(self.components)

    @property
    def degree(self) -> int:
        return max(p.degree for p in self.components)

    @classmethod
    def from_json(cls, doc, where: str = "map") -> "PolyMap":
        if not isinstance(doc, dict) or "dimension" not in doc or "components" not in doc:
            raise SpecError(f"{where}: expected an object with 'dimension' and 'components'")
        n = doc["dimension"]
        if not isinstance(n, int) or n < 2:
            raise SpecError(f"{where}.dimension: must be an integer >= 2")
        comps = doc["components"]
        if not isinstance(comps, list) or len(comps) != n:
            raise SpecError(f"{where}.components: expected {n} polynomials")
        return cls(tuple(Polynomial.from_json(c, n, f"{where}.components[{i}]") for i, c in enumerate(comps)))

    def to_json(self) -> dict:
        return {"dimension": self.dimension, "components": [p.to_json() for p in self.components]}

    @classmethod
    def identity(cls, n: int) -> "PolyMap":
        return cls(tuple(Polynomial.monomial([1 if j == i else 0 for j in range(n)]) for i in range(n)))

    @classmethod
    def affine(cls, A, c) -> "PolyMap":
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        comps = []
        for i in range(n):
            p = Polynomial.constant(n, c[i])
            for j in range(n):
                p = p + Polynomial.monomial([1 if k == j else 0 for k in range(n)], A[i, j])
            comps.append(p)
        return cls(tuple(comps))

    def __call__(self, x) -> list:
        return [p(x) for p in self.components]

    def jacobian(self, x) -> list:
        """``J[l][k] = d phi^l / d u^k`` as nested lists (generic scalars)."""
        return [[p(x) for p in row] for row in self.jac_polys]

    def jacobian_array(self, x) -> np.ndarray:
        """Float Jacobian(s) with shape ``(..., n, n)`` for points ``x`` of shape ``(..., n)``."""
        x = np.asarray(x, dtype=float)
        cols = [x[..., k] for k in range(self.dimension)]
        J = np.empty(x.shape[:-1] + (self.dimension, self.dimension))
        for l, row in enumerate(self.jac_polys):
            for k, p in enumerate(row):
                J[..., l, k] = p(cols)
        return J

    def hessian_array(self, x) -> np.ndarray:
        """``H[..., l, s, k] = d^2 phi^l / du^s du^k``."""
        x = np.asarray(x, dtype=float)
        cols = [x[..., k] for k in range(self.dimension)]
        n = self.dimension
        H = np.empty(x.shape[:-1] + (n, n, n))
        for l in range(n):
            for s in range(n):
                for k in range(n):
                    H[..., l, s, k] = self.hess_polys[l][s][k](cols)
        return H

    def apply_array(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        cols = [x[..., k] for k in range(self.dimension)]
        return np.stack([np.broadcast_to(p(cols), x.shape[:-1]) for p in self.components], axis=-1)


def monomial_basis(n: int, degrees) -> list:
    """Exponent tuples of all monomials in ``n`` variables with total degree in ``degrees``."""
    out = []
    for d in degrees:
        for combo in combinations_with_replacement(range(n), d):
            e = [0] * n
            for v in combo:
                e[v] += 1
            out.append(tuple(e))
    return out


def shifted_monomial(exps, center) -> Polynomial:
    """Expand prod (u_v - center_v)^e_v into a Polynomial."""
    n = len(exps)
    result = Polynomial.constant(n, 1.0)
    for v, e in enumerate(exps):
        factor = Polynomial.monomial([1 if k == v else 0 for k in range(n)]) + Polynomial.constant(n, -center[v])
        for _ in range(e):
            result = _poly_mul(result, factor)
    return result


def _poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    merged: dict = {}
    for ea, ca in a.terms:
        for eb, cb in b.terms:
            e = tuple(p + q for p, q in zip(ea, eb))
            merged[e] = merged.get(e, 0.0) + ca * cb
    return Polynomial(a.nvars, tuple(sorted((e, c) for e, c in merged.items() if c != 0.0)))
