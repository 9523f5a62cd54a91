"""Truncated univariate Taylor series with array coefficients.

A series is an array ``c`` of shape ``(n + 1, ...)`` standing for
``sum_k c[k] t^k``.  Used to differentiate the boundary frame (tangents and
lumped weights) along a polynomial path of boundary vertices.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = len(a)
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for k in range(n):
        for j in range(k + 1):
            out[k] += a[j] * b[k - j]
    return out


def sqrt(a: np.ndarray) -> np.ndarray:
    s = np.zeros_like(a)
    s[0] = np.sqrt(a[0])
    for k in range(1, len(a)):
        acc = a[k].copy()
        for j in range(1, k):
            acc -= s[j] * s[k - j]
        s[k] = acc / (2.0 * s[0])
    return s


def recip(a: np.ndarray) -> np.ndarray:
    r = np.zeros_like(a)
    r[0] = 1.0 / a[0]
    for k in range(1, len(a)):
        acc = np.zeros_like(a[0])
        for j in range(1, k + 1):
            acc += a[j] * r[k - j]
        r[k] = -acc * r[0]
    return r


def dot2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Series of the pointwise dot product of 2-vector series (last axis 2)."""
    return mul(a[..., 0], b[..., 0]) + mul(a[..., 1], b[..., 1])


def weighted_tangent_series(x: np.ndarray) -> np.ndarray:
    """Series of ``omega_k tau_k`` for a closed boundary polygon.

    ``x`` has shape (n + 1, N_bdy, 2): Taylor coefficients of the boundary
    vertex positions.  ``tau_k`` is the normalised sum of the unit tangents of
    the edges meeting at vertex k and ``omega_k`` half their summed length,
    matching the vertex frames and lumped weights of the mesh module.
    """
    e = np.roll(x, -1, axis=1) - x
    L = sqrt(dot2(e, e))
    u = mul(e, recip(L)[..., None])
    s = u + np.roll(u, 1, axis=1)
    tau = mul(s, recip(sqrt(dot2(s, s)))[..., None])
    omega = 0.5 * (L + np.roll(L, 1, axis=1))
    return mul(omega[..., None], tau)


def _colors(nb: int) -> np.ndarray:
    """Vertex colouring with cyclic distance >= 3 inside each colour."""
    col = np.arange(nb) % 3
    tail = nb % 3
    if tail:
        col[nb - tail:] = 3 + np.arange(tail)
    return col


def frame_jacobian(x0: np.ndarray, xi: np.ndarray) -> sp.csr_matrix:
    """Jacobian of ``x -> B(x) xi`` for the lumped constraint, (2 N_bdy)^2.

    Column ``2j + c`` is the derivative with respect to coordinate c of
    boundary vertex j.  Vertex k only depends on k - 1, k, k + 1, so a few
    coloured directional derivatives recover the whole matrix.
    """
    nb = len(x0)
    col = _colors(nb)
    rows, cols, vals = [], [], []
    k = np.arange(nb)
    for color in np.unique(col):
        members = np.flatnonzero(col == color)
        owner = np.full(nb, -1)
        for j in members:
            owner[[(j - 1) % nb, j, (j + 1) % nb]] = j
        for c in range(2):
            x = np.zeros((2, nb, 2))
            x[0] = x0
            x[1, members, c] = 1.0
            d = weighted_tangent_series(x)[1] * xi[:, None]
            hit = owner >= 0
            for cp in range(2):
                rows.append(2 * k[hit] + cp)
                cols.append(2 * owner[hit] + c)
                vals.append(d[hit, cp])
    J = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(2 * nb, 2 * nb))
    return J.tocsr()
