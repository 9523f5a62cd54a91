"""Convex shape homotopy ``H(Omega, t) = t J_F(Omega) + (1 - t) J_G(Omega)``.

The state is a :class:`TriangleMesh`.  Path derivatives are boundary fields
obtained by differentiating the discrete optimality system of the Newton
corrector along the path; before they enter higher-order right-hand sides
they are extended into the interior with the same elasticity extension that
moves the mesh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import fem, series
from .homotopy import (CorrectorResult, DerivativeContext, HomotopyProblem, HomotopyResult,
                       ToleranceRamp, run)
from .integrands import Integrand, max_gradient_norm
from .mesh import TriangleMesh, boundary_frames, boundary_l2_norm, boundary_weights, deform, is_tangled
from .newton import NewtonConfig, newton_solve
from .solvers import Factorization, SaddleSystem


def scale(objective, w: float) -> tuple:
    return tuple((w * c, f) for c, f in fem.as_objective(objective))


def convex_objective(target, start, t: float) -> tuple:
    """Weights ``t`` on the target and ``1 - t`` on the start functional."""
    return scale(start, 1.0 - t) + scale(target, t)


def difference_objective(target, start) -> tuple:
    return scale(target, 1.0) + scale(start, -1.0)


class ShapeDerivativeContext(DerivativeContext):
    """Factorised path-derivative system and multilinear forms at an accepted (mesh, t).

    ``mode="kkt"`` solves the corrector's KKT system ``[[A, B], [B^T, 0]]``
    for every derivative, treating the frame ``B`` as fixed and ignoring the
    interior part of the extended fields in the unknown's term.

    ``mode="consistent"`` (default) differentiates the discrete optimality
    system ``g(x, t) + B(x) xi = 0`` exactly along the polynomial predictor
    path: the unknown couples to the full-mesh Hessian through the extension
    equations, and the derivatives of the vertex frames enter through the
    frame Jacobian and a Taylor-series right-hand side.  Its derivatives make
    the order-q predictor accurate to order q + 1 in the discrete setting.
    """

    def __init__(self, problem: "ShapeHomotopy", mesh: TriangleMesh, t: float,
                 mode: str = "consistent"):
        super().__init__()
        if mode not in ("consistent", "kkt"):
            raise ValueError(f"unknown derivative mode {mode!r}")
        if mode == "consistent" and problem.newton.consistent_btau:
            raise ValueError("the consistent derivative system needs the lumped constraint")
        self.problem = problem
        self.mesh = mesh
        self.t = t
        self.mode = mode
        self.E = problem.objective(t)
        self.D = difference_objective(problem.target, problem.start)
        B = fem.assemble_btau(mesh, problem.newton.consistent_btau)
        nb = mesh.n_boundary
        if mode == "kkt":
            self.system = SaddleSystem(fem.assemble_hessian(mesh, self.E), B)
            return
        loop = mesh.boundary_loop
        self.bd = np.stack([2 * loop, 2 * loop + 1], axis=1).ravel()
        is_b = np.zeros(2 * mesh.n_vertices, dtype=bool)
        is_b[self.bd] = True
        self.idf = np.flatnonzero(~is_b)
        H = fem.assemble_hessian(mesh, self.E, full=True).tocsr()
        K = fem.assemble_elasticity(mesh, problem.newton.mu, problem.newton.lam).tocsr()
        g = fem.assemble_gradient(mesh, self.E)
        tau, _ = boundary_frames(mesh)
        om = boundary_weights(mesh)
        # multiplier of the (nearly) stationary state: least-squares fit of g = -B xi
        self.xi0 = -(g.reshape(-1, 2) * tau).sum(1) / om
        self.x0 = mesh.vertices[loop]
        C = series.frame_jacobian(self.x0, self.xi0)
        bd, idf = self.bd, self.idf
        M = sp.bmat([[H[bd][:, bd] + C, H[bd][:, idf], B],
                     [K[idf][:, bd], K[idf][:, idf], None],
                     [B.T, None, None]], format="csc")
        self.n_b, self.n_i = len(bd), len(idf)
        self.fact = Factorization(M, rtol=1e-9)
        self.xis = []
        self._full = {}

    def _frame_known(self, n: int) -> np.ndarray:
        """n-th derivative of ``B(x(t)) xi(t)`` with the order-n unknowns set to zero."""
        nb = self.mesh.n_boundary
        xc = np.zeros((n + 1, nb, 2))
        xc[0] = self.x0
        xic = np.zeros((n + 1, nb))
        xic[0] = self.xi0
        for i in range(1, n):
            xc[i] = self.derivs[i - 1].reshape(-1, 2) / math.factorial(i)
            xic[i] = self.xis[i - 1] / math.factorial(i)
        bt = series.weighted_tangent_series(xc)
        s = series.mul(bt, xic[..., None])
        return math.factorial(n) * s[n].ravel()

    def solve(self, rhs):
        if self.mode == "kkt":
            V, _ = self.system.solve(-rhs)
            return V
        n = len(self.derivs) + 1
        total = np.zeros(self.n_b + self.n_i + self.mesh.n_boundary)
        total[: self.n_b] = -(rhs + self._frame_known(n))
        sol = self.fact.solve(total)
        xb = sol[: self.n_b]
        full = np.zeros(2 * self.mesh.n_vertices)
        full[self.bd] = xb
        full[self.idf] = sol[self.n_b: self.n_b + self.n_i]
        self.xis.append(sol[self.n_b + self.n_i:])
        self._full[id(xb)] = full
        return xb

    def chain_E(self, blocks):
        return fem.assemble_kth_rhs(self.mesh, self.E, blocks)

    def chain_D(self, blocks):
        return fem.assemble_kth_rhs(self.mesh, self.D, blocks)

    def lift(self, d):
        if self.mode == "consistent":
            return self._full[id(d)]
        return self.problem.extend(self.mesh, d)

    def hand_coded_rhs(self, n: int):
        """Right-hand sides for n = 1, 2, 3 written out term by term."""
        L = self.lifted
        E, D, m = self.E, self.D, self.mesh
        k = fem.assemble_kth_rhs
        if n == 1:
            return k(m, D, [])
        if n == 2:
            return k(m, E, [L[0], L[0]]) + 2 * k(m, D, [L[0]])
        if n == 3:
            return (k(m, E, [L[0], L[0], L[0]]) + 3 * k(m, E, [L[0], L[1]])
                    + 3 * k(m, D, [L[0], L[0]]) + 3 * k(m, D, [L[1]]))
        raise ValueError("hand-coded forms exist for n <= 3 only")


@dataclass
class ShapeHomotopy(HomotopyProblem):
    """Homotopy from the start functional (minimised by the initial mesh) to the target.

    ``target`` and ``start`` are integrands or weighted integrand lists.
    With the consistent (edge integral) constraint the derivatives always use
    the ``"kkt"`` system, since the frame series covers the lumped one only.
    """

    target: object
    start: object
    newton: NewtonConfig = NewtonConfig(iter_max=10)
    derivative_mode: str = "consistent"

    def objective(self, t: float) -> tuple:
        return convex_objective(self.target, self.start, t)

    def extend(self, mesh: TriangleMesh, bfield):
        return fem.extend(mesh, bfield, self.newton.mu, self.newton.lam)

    def correct(self, state, t, tol):
        mesh, rep = newton_solve(state, self.objective(t), replace(self.newton, tol=tol))
        return CorrectorResult(mesh, rep.converged, rep.iterations,
                               rep.residual, rep.reason)

    def derivative_context(self, state, t):
        mode = "kkt" if self.newton.consistent_btau else self.derivative_mode
        return ShapeDerivativeContext(self, state, t, mode)

    def predictor_field(self, mesh: TriangleMesh, terms):
        """Weighted boundary sum and its single extension."""
        total = np.zeros(2 * mesh.n_boundary)
        for d, w in terms:
            total = total + w * d
        return total, self.extend(mesh, total)

    def apply_predictor(self, state, terms):
        if not terms or all(w == 0 for _, w in terms):
            return state
        _, vol = self.predictor_field(state, terms)
        new = deform(state, vol)
        return None if is_tangled(new) else new

    def derivative_norm(self, state, d):
        return boundary_l2_norm(state, d)


def boundary_distance(a: TriangleMesh, b: TriangleMesh) -> float:
    """Boundary L2 norm (on ``a``) of the vertex displacement from ``a`` to ``b``."""
    d = (b.vertices[b.boundary_loop] - a.vertices[a.boundary_loop]).ravel()
    return boundary_l2_norm(a, d)


def levelset_error(mesh: TriangleMesh, f: Integrand) -> tuple[float, float]:
    """(max |f| over boundary vertices, 2 h max |grad f|)."""
    x = mesh.vertices[mesh.boundary_loop]
    return float(np.max(np.abs(f(x)))), 2.0 * mesh.h_max * max_gradient_norm(f, x)


def start_matches_mesh(mesh: TriangleMesh, f_start: Integrand) -> bool:
    err, bound = levelset_error(mesh, f_start)
    return err <= bound


def solve_shape_homotopy(mesh: TriangleMesh, target, start, q, strategy,
                         ramp: ToleranceRamp = ToleranceRamp(),
                         newton: NewtonConfig = NewtonConfig(iter_max=10),
                         on_accept=None, accept_hook=None, t_end: float = 1.0) -> HomotopyResult:
    problem = ShapeHomotopy(target, start, newton)
    return run(problem, mesh, q, strategy, ramp, on_accept=on_accept,
               accept_hook=accept_hook, t_end=t_end)


def shape_predictor_errors(problem: ShapeHomotopy, mesh: TriangleMesh, t: float, q: int,
                           dts, tight_tol: float = 1e-13, iter_max: int = 30) -> np.ndarray:
    """Boundary distance between the order-q prediction and its tight correction."""
    ctx = problem.derivative_context(mesh, t)
    derivs = ctx.derivatives(q)
    tight = replace(problem.newton, tol=tight_tol, iter_max=iter_max)
    out = []
    for dt in dts:
        terms = [(d, dt ** i / math.factorial(i)) for i, d in enumerate(derivs, start=1)]
        pred = problem.apply_predictor(mesh, terms)
        ref, rep = newton_solve(pred, problem.objective(t + dt), tight)
        if not rep.converged and not (rep.residuals and min(rep.residuals) < 1e-11):
            raise RuntimeError(f"tight corrector failed at t={t + dt}: {rep.reason}")
        out.append(boundary_distance(pred, ref))
    return np.array(out)
