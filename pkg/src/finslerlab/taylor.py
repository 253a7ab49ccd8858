"""Truncated multivariate Taylor arithmetic.

A :class:`TaylorScalar` carries all Taylor coefficients of a function of ``m``
seeded variables up to total degree ``order``.  The coefficient array has
shape ``(M, *batch)`` where ``M`` is the number of monomials, so a single
evaluation of a metric propagates exact partial derivatives for a whole batch
of tangent samples at once.

Evaluators written against :func:`sqrt`, :func:`power`, :func:`exp` and
:func:`log` below (instead of ``numpy`` directly) work unchanged on floats,
float arrays and Taylor numbers.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement
from math import factorial

import numpy as np


class TaylorSpace:
    """Monomial bookkeeping for ``nvars`` variables truncated at ``order``."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        monos = []
        for deg in range(order + 1):
            for combo in combinations_with_replacement(range(nvars), deg):
                alpha = [0] * nvars
                for v in combo:
                    alpha[v] += 1
                monos.append(tuple(alpha))
        self.monomials = monos
        self.index = {a: i for i, a in enumerate(monos)}
        self.size = len(monos)
        self.degree = np.array([sum(a) for a in monos])
        # alpha! so that d^alpha f = alpha! * c_alpha
        self.factorial = np.array(
            [float(np.prod([factorial(e) for e in a])) for a in monos]
        )

        triples = []
        for i, a in enumerate(monos):
            for j, b in enumerate(monos):
                if self.degree[i] + self.degree[j] > order:
                    continue
                k = self.index[tuple(p + q for p, q in zip(a, b))]
                triples.append((k, i, j))
        triples.sort()
        t = np.array(triples)
        self._prod_k = t[:, 0]
        self._prod_i = t[:, 1]
        self._prod_j = t[:, 2]
        # every output monomial has at least the pair (0, k)
        self._prod_starts = np.searchsorted(self._prod_k, np.arange(self.size))

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        prod = a[self._prod_i] * b[self._prod_j]
        return np.add.reduceat(prod, self._prod_starts, axis=0)

    def variable(self, k: int, value) -> "TaylorScalar":
        value = np.asarray(value, dtype=float)
        c = np.zeros((self.size,) + value.shape)
        c[0] = value
        c[self.index[tuple(1 if v == k else 0 for v in range(self.nvars))]] = 1.0
        return TaylorScalar(self, c)

    def mono_index(self, variables) -> int:
        """Index of the monomial prod(x_v for v in variables)."""
        alpha = [0] * self.nvars
        for v in variables:
            alpha[v] += 1
        return self.index[tuple(alpha)]


@lru_cache(maxsize=None)
def taylor_space(nvars: int, order: int) -> TaylorSpace:
    return TaylorSpace(nvars, order)


class TaylorScalar:
    """A truncated Taylor expansion; supports + - * / ** and the module functions."""

    __array_priority__ = 1000  # keep ndarray.__mul__ from broadcasting over us

    __slots__ = ("space", "c")

    def __init__(self, space: TaylorSpace, coeffs: np.ndarray):
        self.space = space
        self.c = coeffs

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, TaylorScalar):
            return other.c
        other = np.asarray(other, dtype=float)
        c = np.zeros((self.space.size,) + np.broadcast_shapes(other.shape, self.c.shape[1:]))
        c[0] = other
        return c

    def __add__(self, other):
        if isinstance(other, TaylorScalar):
            return TaylorScalar(self.space, self.c + other.c)
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.c.shape[1:], other.shape)
        c = np.broadcast_to(self.c, (self.space.size,) + shape).copy()
        c[0] += other
        return TaylorScalar(self.space, c)

    __radd__ = __add__

    def __neg__(self):
        return TaylorScalar(self.space, -self.c)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TaylorScalar):
            return TaylorScalar(self.space, self.space.mul(self.c, other.c))
        return TaylorScalar(self.space, self.c * np.asarray(other, dtype=float))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TaylorScalar):
            return self * other.reciprocal()
        return TaylorScalar(self.space, self.c / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            result = None
            base = self
            n = int(p)
            while n:
                if n & 1:
                    result = base if result is None else result * base
                n >>= 1
                if n:
                    base = base * base
            if result is None:
                return TaylorScalar(self.space, self._coerce(1.0))
            return result
        return self.power(float(p))

    def compose(self, derivs) -> "TaylorScalar":
        """Apply a univariate f given ``derivs[k] = f^(k)(value)`` for k <= order."""
        order = self.space.order
        h = self.c.copy()
        h[0] = 0.0
        # Horner in the nilpotent part h
        acc = self._coerce(derivs[order] / factorial(order))
        for k in range(order - 1, -1, -1):
            acc = self.space.mul(acc, h)
            acc[0] = acc[0] + derivs[k] / factorial(k)
        return TaylorScalar(self.space, acc)

    def reciprocal(self):
        a = self.value
        return self.compose([(-1.0) ** k * factorial(k) * a ** (-k - 1.0) for k in range(self.space.order + 1)])

    def power(self, p: float):
        a = self.value
        derivs = []
        coef = 1.0
        for k in range(self.space.order + 1):
            derivs.append(coef * a ** (p - k))
            coef *= p - k
        return self.compose(derivs)

    def sqrt(self):
        return self.power(0.5)

    def exp(self):
        e = np.exp(self.value)
        return self.compose([e] * (self.space.order + 1))

    def log(self):
        a = self.value
        derivs = [np.log(a)] + [
            (-1.0) ** (k - 1) * factorial(k - 1) * a ** (-float(k)) for k in range(1, self.space.order + 1)
        ]
        return self.compose(derivs)

    def __repr__(self):
        return f"TaylorScalar(value={self.value!r}, order={self.space.order})"


def sqrt(z):
    if isinstance(z, TaylorScalar):
        return z.sqrt()
    return np.sqrt(z)


def power(z, p):
    if isinstance(z, TaylorScalar):
        return z ** p
    return np.power(z, p)


def exp(z):
    if isinstance(z, TaylorScalar):
        return z.exp()
    return np.exp(z)


def log(z):
    if isinstance(z, TaylorScalar):
        return z.log()
    return np.log(z)


def value_of(z):
    """Plain (float or array) value of a scalar that may be a Taylor number."""
    return z.value if isinstance(z, TaylorScalar) else z
