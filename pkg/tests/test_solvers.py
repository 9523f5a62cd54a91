import numpy as np
import pytest
import scipy.sparse as sp

from shapehom.solvers import Factorization, SaddleSystem, SolverError, solve_saddle, solve_spd


def test_spd_identity_and_2x2(rng):
    b = rng.standard_normal(5)
    assert np.allclose(solve_spd(sp.identity(5, format="csc"), b), b)
    x = solve_spd(sp.csc_matrix([[2.0, 1.0], [1.0, 2.0]]), np.array([3.0, 3.0]))
    assert np.allclose(x, [1, 1])


def test_spd_random_residual(rng):
    M = rng.standard_normal((200, 200))
    A = sp.csc_matrix(M.T @ M + np.eye(200))
    b = rng.standard_normal(200)
    x = solve_spd(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * (np.linalg.norm(b) + abs(A).max() * np.linalg.norm(x))


def test_saddle_hand_solution():
    A = sp.identity(3)
    B = sp.csr_matrix(np.array([[1.0], [0.0], [0.0]]))
    V, xi = solve_saddle(A, B, np.array([1.0, 1.0, 1.0, 0.0]))
    assert np.allclose(V, [0, 1, 1]) and np.allclose(xi, [1])


def test_saddle_homogeneous_and_recheck(rng):
    n, m = 12, 4
    M = rng.standard_normal((n, n))
    A = sp.csr_matrix(M + M.T + 10 * np.eye(n))
    B = sp.csr_matrix(rng.standard_normal((n, m)))
    S = SaddleSystem(A, B)
    V, xi = S.solve(np.zeros(n))
    assert np.all(V == 0) and np.all(xi == 0)
    g = rng.standard_normal(n)
    V, xi = S.solve(-g)
    assert np.allclose(A @ V + B @ xi, -g, atol=1e-9)
    assert np.allclose(B.T @ V, 0, atol=1e-9)


def test_factorization_reuse_is_bitwise(rng):
    M = rng.standard_normal((30, 30))
    A = sp.csc_matrix(M + 30 * np.eye(30))
    b = rng.standard_normal(30)
    F = Factorization(A)
    x1 = F.solve(b)
    F.solve(rng.standard_normal(30))
    assert np.array_equal(F.solve(b), x1)
    assert np.array_equal(Factorization(A).solve(b), x1)


def test_singular_raises():
    A = sp.csc_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SolverError):
        Factorization(A).solve(np.array([1.0, 0.0]))
