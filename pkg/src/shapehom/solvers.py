"""Sparse direct solves for the extension and the KKT saddle-point systems.

Both systems go through SuperLU (``scipy.sparse.linalg.splu``) with a fixed
column ordering, so repeated solves are reproducible bit for bit.  Every
solve recomputes its residual and raises instead of returning a bad answer.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


class Factorization:
    """LU factorisation of a square sparse matrix, reusable across right-hand sides."""

    def __init__(self, A, rtol: float = 1e-10, symmetric: bool = False):
        self.A = sp.csc_matrix(A)
        if self.A.shape[0] != self.A.shape[1]:
            raise SolverError("matrix is not square")
        self.rtol = rtol
        self.n_solves = 0
        self._amax = abs(self.A).max() if self.A.nnz else 0.0
        try:
            if symmetric:
                self._lu = spla.splu(self.A, permc_spec="MMD_AT_PLUS_A",
                                     options={"SymmetricMode": True})
            else:
                self._lu = spla.splu(self.A, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc

    @property
    def shape(self):
        return self.A.shape

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        x = self._lu.solve(b)
        self.n_solves += 1
        if not np.all(np.isfinite(x)):
            raise SolverError("non-finite solution")
        r = np.linalg.norm(self.A @ x - b)
        bound = self.rtol * (np.linalg.norm(b) + self._amax * np.linalg.norm(x))
        if r > bound:
            raise SolverError(f"residual {r:.3e} exceeds {bound:.3e}")
        return x


def solve_spd(A, b) -> np.ndarray:
    """Solve a symmetric positive definite system."""
    return Factorization(A, rtol=1e-10, symmetric=True).solve(b)


class SaddleSystem:
    """Factorised KKT matrix ``[[A, B], [B^T, 0]]``.

    ``solve(rhs_top, rhs_bottom)`` returns ``(V, xi)``.  One instance serves
    the Newton step and all path-derivative systems at the same state.
    """

    def __init__(self, A, B, rtol: float = 1e-9):
        A = sp.csr_matrix(A)
        B = sp.csr_matrix(B)
        if A.shape[0] != B.shape[0]:
            raise SolverError("A and B row counts differ")
        self.n = A.shape[0]
        self.m = B.shape[1]
        K = sp.bmat([[A, B], [B.T, None]], format="csc")
        self.fact = Factorization(K, rtol=rtol)

    @property
    def n_solves(self) -> int:
        return self.fact.n_solves

    def solve(self, rhs_top, rhs_bottom=None):
        rhs = np.zeros(self.n + self.m)
        rhs[: self.n] = rhs_top
        if rhs_bottom is not None:
            rhs[self.n:] = rhs_bottom
        x = self.fact.solve(rhs)
        return x[: self.n], x[self.n:]


def solve_saddle(A, B, rhs):
    """Solve ``A V + B xi = rhs[:n]``, ``B^T V = rhs[n:]``."""
    rhs = np.asarray(rhs, dtype=float)
    system = SaddleSystem(A, B)
    return system.solve(rhs[: system.n], rhs[system.n:])
