"""Shape-Newton corrector without regularization, plus baseline methods.

Each unregularized iteration solves the KKT system

    [ A    B ] [V ]   [-g]
    [ B^T  0 ] [xi] = [ 0]

with ``A`` the shape Hessian and ``g`` the shape gradient on the boundary
hat-function basis, and ``B`` the tangential constraint.  The constraint
removes the tangential kernel of the Hessian; interior deformations are
removed by the basis itself.  ``V`` is then extended into the interior by
linear elasticity and the mesh moved by the extension.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import fem
from .jets import DomainError
from .mesh import TriangleMesh, boundary_l2_norm, deform, is_tangled
from .solvers import Factorization, SaddleSystem, SolverError

METHODS = ("unregularized", "h1", "tangential", "gradient")


@dataclass(frozen=True)
class NewtonConfig:
    """Corrector settings.

    ``tol`` bounds the boundary L2 norm of the last update.  The regularized
    baselines use ``delta_h1a`` (gradient part), ``delta_h1b`` (mass part) and
    ``delta_tan``; the gradient baseline uses the Armijo parameters.
    """

    method: str = "unregularized"
    tol: float = 1e-10
    iter_max: int = 50
    divergence_factor: float = 10.0
    consistent_btau: bool = False
    mu: float = 1.0
    lam: float = 0.0
    delta_h1a: float = 0.5
    delta_h1b: float = 0.5
    delta_tan: float = 250.0
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 40
    max_move: float = 0.1   # initial gradient step moves vertices at most max_move * h

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.iter_max < 1:
            raise ValueError("iter_max must be >= 1")
        if not self.divergence_factor > 1:
            raise ValueError("divergence_factor must exceed 1")


@dataclass
class NewtonReport:
    """Outcome of one corrector run.

    ``residuals`` holds the update norms and ``normal_residuals`` the
    l2 norm of the gradient tested with the vertex normals, one entry per
    iteration (both evaluated on the mesh the iteration started from).
    """

    converged: bool = False
    iterations: int = 0
    reason: str | None = None
    residuals: list = field(default_factory=list)
    normal_residuals: list = field(default_factory=list)
    times: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    final_normal_residual: float = math.nan

    @property
    def residual(self) -> float:
        return self.residuals[-1] if self.residuals else 0.0


def normal_residual(mesh: TriangleMesh, objective, gradient: np.ndarray | None = None) -> np.ndarray:
    """Gradient tested with the vertex normal at each boundary vertex."""
    g = fem.assemble_gradient(mesh, objective) if gradient is None else gradient
    return fem.normal_operator(mesh) @ g


def newton_matrix(mesh: TriangleMesh, objective, cfg: NewtonConfig):
    """Assembled system for one iteration: (A, B or None, g)."""
    g = fem.assemble_gradient(mesh, objective)
    A = fem.assemble_hessian(mesh, objective)
    if cfg.method == "unregularized":
        return A, fem.assemble_btau(mesh, cfg.consistent_btau), g
    if cfg.method == "h1":
        return A + fem.assemble_h1(mesh, cfg.delta_h1a, cfg.delta_h1b), None, g
    if cfg.method == "tangential":
        return A + cfg.delta_tan * fem.tangential_mass(mesh), None, g
    raise ValueError(cfg.method)


def newton_step(mesh: TriangleMesh, objective, cfg: NewtonConfig):
    """Boundary update V and the gradient it was computed from."""
    A, B, g = newton_matrix(mesh, objective, cfg)
    if B is None:
        V = Factorization(A, rtol=1e-9).solve(-g)
    else:
        V, _ = SaddleSystem(A, B).solve(-g)
    return V, g


def rigid_modes(mesh: TriangleMesh) -> np.ndarray:
    """Translations and the infinitesimal rotation as volume fields, shape (2N, 3)."""
    x, y = mesh.vertices.T
    R = np.zeros((2 * mesh.n_vertices, 3))
    R[0::2, 0] = 1.0
    R[1::2, 1] = 1.0
    R[0::2, 2], R[1::2, 2] = -y, x
    return R


def gradient_direction(mesh: TriangleMesh, g_full: np.ndarray, mu: float = 1.0,
                       lam: float = 0.0) -> np.ndarray:
    """Solve ``b(V, W) = -dJ(W)`` for all volume fields W.

    ``b`` is the elasticity form on fields L2-orthogonal to the rigid motions
    and the L2 product on the rigid motions, which is the elasticity form
    made positive definite without changing it anywhere else.  Since the
    rigid motions span the kernel of the elasticity matrix ``K``, one saddle
    solve ``K V_p + M R c = -g``, ``R^T M V_p = 0`` gives ``V = V_p + R c``.
    """
    K = fem.assemble_elasticity(mesh, mu, lam)
    R = rigid_modes(mesh)
    MR = fem.assemble_mass(mesh) @ R
    Vp, c = SaddleSystem(K, MR).solve(-g_full)
    return Vp + R @ c


def _gradient_step(mesh, objective, cfg):
    """Descent direction from the elasticity form and an Armijo step."""
    g_full = fem.assemble_gradient(mesh, objective, full=True)
    V = gradient_direction(mesh, g_full, cfg.mu, cfg.lam)
    slope = float(g_full @ V)
    J0 = fem.evaluate_objective(mesh, objective)
    vmax = float(np.max(np.linalg.norm(V.reshape(-1, 2), axis=1)))
    s = 1.0 if vmax == 0 else min(1.0, cfg.max_move * mesh.h_max / vmax)
    for _ in range(cfg.max_backtracks):
        trial = deform(mesh, s * V)
        if not is_tangled(trial):
            J1 = fem.evaluate_objective(trial, objective)
            if J1 <= J0 + cfg.armijo_c * s * slope:
                return s * V, g_full, trial
        s *= cfg.backtrack
    return None, g_full, None


def newton_solve(mesh: TriangleMesh, objective, cfg: NewtonConfig = NewtonConfig(),
                 callback=None) -> tuple[TriangleMesh, NewtonReport]:
    """Run the selected method until the update norm drops below ``cfg.tol``.

    Returns the last valid mesh and a report.  ``callback(j, mesh, report)``
    is invoked after every iteration.
    """
    report = NewtonReport()
    if math.isinf(cfg.tol):
        report.converged = True
        return mesh, report
    first = None
    t0 = time.perf_counter()
    for j in range(cfg.iter_max):
        try:
            if cfg.method == "gradient":
                Vfull, g_full, trial = _gradient_step(mesh, objective, cfg)
                g = g_full.reshape(-1, 2)[mesh.boundary_loop].ravel()
                if Vfull is None:
                    report.reason = "line_search"
                    break
                V = Vfull.reshape(-1, 2)[mesh.boundary_loop].ravel()
            else:
                V, g = newton_step(mesh, objective, cfg)
                trial = None
        except SolverError:
            report.reason = "solver"
            break
        except DomainError:
            report.reason = "domain"
            break
        rnorm = boundary_l2_norm(mesh, V)
        report.iterations = j + 1
        report.residuals.append(rnorm)
        report.normal_residuals.append(float(np.linalg.norm(normal_residual(mesh, objective, g))))
        report.objective.append(fem.evaluate_objective(mesh, objective))
        report.times.append(time.perf_counter() - t0)
        if not math.isfinite(rnorm):
            report.reason = "divergence"
            break
        if first is None:
            first = rnorm
        elif rnorm > cfg.divergence_factor * first:
            report.reason = "divergence"
            break
        if trial is None:
            trial = deform(mesh, fem.extend(mesh, V, cfg.mu, cfg.lam))
        if is_tangled(trial):
            report.reason = "mesh_tangled"
            break
        mesh = trial
        if callback is not None:
            callback(j, mesh, report)
        if rnorm < cfg.tol:
            report.converged = True
            break
    else:
        report.reason = "iter_max"
    try:
        report.final_normal_residual = float(np.linalg.norm(normal_residual(mesh, objective)))
    except DomainError:
        pass
    return mesh, report


def with_tol(cfg: NewtonConfig, tol: float) -> NewtonConfig:
    return replace(cfg, tol=tol)
