"""Truncated bivariate Taylor polynomials (jets), batched over points.

A jet of order K stores the coefficients ``c[a, b] = d^{a+b} f / dx^a dy^b / (a! b!)``
for ``a + b <= K`` in graded order: degree d occupies the slots
``d(d+1)/2 .. d(d+1)/2 + d`` with the y-power increasing.  Because of the
graded layout a jet of order K is a prefix of any higher-order jet of the
same function, which the assembly code relies on.

Every coefficient is an array over a batch of evaluation points, so one jet
carries the Taylor data for all quadrature points of a mesh at once.
"""

from __future__ import annotations

import functools
import math

import numpy as np

K_MAX = 8


class DomainError(ValueError):
    """Raised when an integrand is evaluated outside its domain."""


def n_coeffs(order: int) -> int:
    return (order + 1) * (order + 2) // 2


def index(a: int, b: int) -> int:
    d = a + b
    return d * (d + 1) // 2 + b


@functools.lru_cache(maxsize=None)
def _mul_table(order: int):
    out, left, right = [], [], []
    for d in range(order + 1):
        for b in range(d + 1):
            a = d - b
            for a1 in range(a + 1):
                for b1 in range(b + 1):
                    out.append(index(a, b))
                    left.append(index(a1, b1))
                    right.append(index(a - a1, b - b1))
    out = np.array(out)
    starts = np.flatnonzero(np.r_[True, out[1:] != out[:-1]])
    return np.array(left), np.array(right), starts


@functools.lru_cache(maxsize=None)
def _exponents(order: int):
    a = np.empty(n_coeffs(order), dtype=int)
    b = np.empty_like(a)
    for d in range(order + 1):
        for j in range(d + 1):
            a[index(d - j, j)] = d - j
            b[index(d - j, j)] = j
    return a, b


class Jet2:
    """Truncated Taylor expansion in (x, y) of a batch of functions."""

    __slots__ = ("order", "c")

    def __init__(self, order: int, coeffs):
        if not 0 <= order <= K_MAX:
            raise ValueError(f"jet order {order} outside 0..{K_MAX}")
        c = np.asarray(coeffs, dtype=float)
        if c.shape[0] != n_coeffs(order):
            raise ValueError("coefficient count does not match the order")
        self.order = order
        self.c = c

    @classmethod
    def constant(cls, value, order: int):
        value = np.asarray(value, dtype=float)
        c = np.zeros((n_coeffs(order),) + value.shape)
        c[0] = value
        return cls(order, c)

    @classmethod
    def variable(cls, value, axis: int, order: int):
        """Seed jet for the coordinate ``x`` (axis 0) or ``y`` (axis 1)."""
        jet = cls.constant(value, order)
        if order >= 1:
            jet.c[1 + axis] = 1.0
        return jet

    @property
    def value(self):
        return self.c[0]

    def coeff(self, a: int, b: int):
        return self.c[index(a, b)]

    def partial(self, a: int, b: int):
        """The mixed partial derivative d^{a+b} f / dx^a dy^b."""
        return math.factorial(a) * math.factorial(b) * self.c[index(a, b)]

    def truncate(self, order: int) -> "Jet2":
        return Jet2(order, self.c[: n_coeffs(order)])

    def _coerce(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            if other.order != self.order:
                raise ValueError("jet orders differ")
            return other
        return Jet2.constant(np.broadcast_to(other, self.c.shape[1:]), self.order)

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.order, self.c + self._coerce(other).c)
        c = self.c.copy()
        c[0] = c[0] + other
        return Jet2(self.order, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(self.order, -self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet2):
            return jet_mul(self, other)
        return jet_scale(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet2):
            raise TypeError("jet division is not supported")
        return jet_scale(self, 1.0 / other)

    def __pow__(self, n: int):
        return jet_powi(self, n)

    def __repr__(self):
        return f"Jet2(order={self.order}, batch={self.c.shape[1:]})"


def jet_add(a: Jet2, b) -> Jet2:
    return a + b


def jet_scale(a: Jet2, s) -> Jet2:
    return Jet2(a.order, a.c * s)


def jet_mul(a: Jet2, b: Jet2) -> Jet2:
    """Truncated Cauchy product."""
    if a.order != b.order:
        raise ValueError("jet orders differ")
    left, right, starts = _mul_table(a.order)
    prod = a.c[left] * b.c[right]
    return Jet2(a.order, np.add.reduceat(prod, starts, axis=0))


def jet_powi(a: Jet2, n: int) -> Jet2:
    if n < 0:
        raise ValueError("negative integer powers are not supported")
    result = Jet2.constant(np.ones(a.c.shape[1:]), a.order)
    base = a
    while n:
        if n & 1:
            result = jet_mul(result, base)
        n >>= 1
        if n:
            base = jet_mul(base, base)
    return result


def jet_sqrt(a: Jet2, floor: float = 1e-30) -> Jet2:
    """Square root via the coefficient recurrence ``s * s = a``.

    ``s_al = (a_al - sum_{0 < be < al} s_be s_{al-be}) / (2 s_0)`` processed
    in graded order.
    """
    a0 = a.c[0]
    if np.any(~(a0 > floor)):
        raise DomainError("sqrt of a non-positive value")
    order = a.order
    s = np.zeros_like(a.c)
    s[0] = np.sqrt(a0)
    two_s0 = 2.0 * s[0]
    for d in range(1, order + 1):
        for b in range(d + 1):
            al = d - b
            acc = a.c[index(al, b)].copy()
            for a1 in range(al + 1):
                for b1 in range(b + 1):
                    if (a1, b1) == (0, 0) or (a1, b1) == (al, b):
                        continue
                    acc -= s[index(a1, b1)] * s[index(al - a1, b - b1)]
            s[index(al, b)] = acc / two_s0
    return Jet2(order, s)


def _linear_form_product(vectors):
    """Coefficients of prod_i (v_i,x X + v_i,y Y); entry a multiplies X^a Y^(m-a)."""
    if not vectors:
        return [np.ones(())]
    e = [np.ones_like(vectors[0][..., 0])]
    for v in vectors:
        vx, vy = v[..., 0], v[..., 1]
        m = len(e)
        new = [None] * (m + 1)
        for a in range(m + 1):
            # a counts X factors; previous degree m-1 list indexed the same way
            term = 0.0
            if a >= 1:
                term = term + e[a - 1] * vx
            if a <= m - 1:
                term = term + e[a] * vy
            new[a] = term
        e = new
    return e


def directional_derivative(jet: Jet2, vectors) -> np.ndarray:
    """Symmetric contraction ``grad^m f [v_1, ..., v_m]``.

    ``vectors`` is a sequence of arrays of shape ``batch + (2,)`` (or plain
    2-vectors, broadcast against the batch).
    """
    m = len(vectors)
    if m > jet.order:
        raise ValueError(f"contraction of order {m} needs a jet of order >= {m}")
    if m == 0:
        return jet.c[0]
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    e = _linear_form_product(vecs)
    out = 0.0
    for a in range(m + 1):
        b = m - a
        out = out + e[a] * (math.factorial(a) * math.factorial(b)) * jet.c[index(a, b)]
    return out


def jet_gradient_contraction(jet: Jet2, vectors) -> np.ndarray:
    """``grad^{m+1} f [v_1, ..., v_m, .]`` as an array of shape ``batch + (2,)``."""
    ex = np.array([1.0, 0.0])
    ey = np.array([0.0, 1.0])
    gx = directional_derivative(jet, list(vectors) + [ex])
    gy = directional_derivative(jet, list(vectors) + [ey])
    gx, gy = np.broadcast_arrays(gx, gy)
    return np.stack([gx, gy], axis=-1)
