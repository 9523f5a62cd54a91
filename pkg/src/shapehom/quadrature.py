"""Symmetric quadrature rules on triangles and Gauss rules on edges."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points and weights normalised to sum to one.

    Integrals over a triangle T are ``|T| * sum_q w_q g(x_q)``.
    """

    bary: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def n_points(self) -> int:
        return len(self.weights)


def _orbit3(w, a, b):
    return [(w, (a, b, b)), (w, (b, a, b)), (w, (b, b, a))]


def _orbit6(w, a, b, c):
    return [(w, p) for p in ((a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a))]


def _rule(entries, degree):
    # tabulated to 15 digits; renormalise so weights and coordinates sum to one
    w = np.array([e[0] for e in entries])
    p = np.array([e[1] for e in entries])
    return QuadratureRule(p / p.sum(1, keepdims=True), w / w.sum(), degree)


# Dunavant (1985) rules
_RULES = {
    1: _rule([(1.0, (1 / 3, 1 / 3, 1 / 3))], 1),
    2: _rule(_orbit3(1 / 3, 2 / 3, 1 / 6), 2),
    4: _rule(
        _orbit3(0.223381589678011, 0.108103018168070, 0.445948490915965)
        + _orbit3(0.109951743655322, 0.816847572980459, 0.091576213509771),
        4,
    ),
    6: _rule(
        _orbit3(0.116786275726379, 0.501426509658179, 0.249286745170910)
        + _orbit3(0.050844906370207, 0.873821971016996, 0.063089014491502)
        + _orbit6(0.082851075618374, 0.053145049844817, 0.310352451033784, 0.636502499121399),
        6,
    ),
}


def triangle_rule(degree: int = 6) -> QuadratureRule:
    """Smallest tabulated rule exact for polynomials of the given degree."""
    for d in sorted(_RULES):
        if d >= degree:
            return _RULES[d]
    raise ValueError(f"no triangle rule of degree {degree}")


def gauss_legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w
