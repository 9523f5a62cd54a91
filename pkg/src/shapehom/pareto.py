"""Pareto front of three level-set functionals traced along weight homotopies.

For a fixed ``delta`` the weights ``(w1, w2, w3)`` on ``(J_1, J_2, J_3)`` move
linearly around the triangle

    12: (1-2d, d, d) -> (d, 1-2d, d)
    23: (d, 1-2d, d) -> (d, d, 1-2d)
    31: (d, d, 1-2d) -> (1-2d, d, d)

and every accepted homotopy value gives one point of the front.  Each branch
starts from the end mesh of the previous one; branch 12 is bootstrapped from
the initial disk by a homotopy from its level-set functional.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fem
from .homotopy import Agile, HomotopyTrace, ToleranceRamp, run
from .integrands import Integrand, disk_levelset, pareto_objectives
from .mesh import TriangleMesh, boundary_l2_norm, boundary_weights, generate_disk, write_mesh
from .newton import NewtonConfig, newton_step
from .shape_homotopy import ShapeHomotopy

BRANCHES = (12, 23, 31)
FRONT_COLUMNS = ("branch", "delta", "t", "J1", "J2", "J3", "residual", "mesh_file")


class ParetoError(RuntimeError):
    pass


@dataclass(frozen=True)
class ParetoSpec:
    objectives: tuple = field(default_factory=pareto_objectives)
    deltas: tuple = (0.0, 0.1, 0.2, 0.3)
    q: int = 2
    strategy: object = Agile(alpha=0.1)
    d_max: float = 0.5
    tol: float = 1e-10
    disk_radius: float = 2.5
    newton: NewtonConfig = NewtonConfig(iter_max=10)

    def __post_init__(self):
        if len(self.objectives) != 3:
            raise ValueError("exactly three objectives are supported")
        for d in self.deltas:
            if not 0.0 <= d <= 1.0 / 3.0 + 1e-15:
                raise ValueError(f"delta {d} outside [0, 1/3]")
        if not self.d_max > 0:
            raise ValueError("d_max must be positive")


@dataclass
class ParetoPoint:
    branch: int
    delta: float
    t: float
    J: tuple
    residual: float
    mesh: TriangleMesh | None = None
    mesh_file: str = ""


@dataclass
class BranchRun:
    branch: int
    delta: float
    trace: HomotopyTrace
    points: list


def branch_endpoints(branch: int, delta: float) -> tuple[tuple, tuple]:
    """Weight triples at t = 0 and t = 1."""
    a, b = 1.0 - 2.0 * delta, delta
    corners = {1: (a, b, b), 2: (b, a, b), 3: (b, b, a)}
    i, j = divmod(branch, 10)
    return corners[i], corners[j]


def combined_weights(branch: int, delta: float, t: float) -> np.ndarray:
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}")
    w0, w1 = (np.array(w) for w in branch_endpoints(branch, delta))
    w = (1.0 - t) * w0 + t * w1
    assert np.all(w >= -1e-15) and abs(w.sum() - 1.0) < 1e-14
    return w


def combined_integrand(objectives, branch: int, delta: float, t: float) -> tuple:
    """Weighted integrand list for the branch homotopy at ``t``."""
    return tuple((float(w), f) for w, f in zip(combined_weights(branch, delta, t), objectives))


def weighted(objectives, weights) -> tuple:
    return tuple((float(w), f) for w, f in zip(weights, objectives))


def objective_vector(mesh: TriangleMesh, objectives) -> np.ndarray:
    return np.array([fem.evaluate_objective(mesh, f) for f in objectives])


def stationarity_residual(mesh: TriangleMesh, objective, newton: NewtonConfig = NewtonConfig()) -> float:
    """Boundary L2 norm of one fresh Newton update, the corrector's criterion."""
    V, _ = newton_step(mesh, objective, newton)
    return boundary_l2_norm(mesh, V)


def residual_bound(mesh: TriangleMesh, tol: float = 1e-10) -> float:
    return tol * (1.0 + mesh.perimeter)


def mesh_tolerance(mesh: TriangleMesh, objectives) -> float:
    """Objective-space resolution of the polygonal boundary.

    Each boundary edge deviates from a smooth arc through its end points by a
    sliver of width ``w = kappa L^2 / 8`` (``kappa`` the discrete curvature).
    Integrating ``f_i`` over such slivers changes ``J_i`` by at most
    ``sum |f_i| w L + sum |grad f_i| w^2 L / 2``; the Euclidean norm of these
    bounds over the objectives is returned.
    """
    loop = mesh.boundary_loop
    x = mesh.vertices[loop]
    L = mesh.boundary_edge_lengths
    e = np.roll(x, -1, axis=0) - x
    ang = np.arctan2(e[:, 1], e[:, 0])
    turn = np.abs(np.angle(np.exp(1j * (ang - np.roll(ang, 1)))))
    kappa = turn / boundary_weights(mesh)
    k_edge = 0.5 * (kappa + np.roll(kappa, -1))
    w = k_edge * L ** 2 / 8.0
    mid = 0.5 * (x + np.roll(x, -1, axis=0))
    bounds = []
    for f in objectives:
        fv = np.abs(f(mid))
        gv = np.linalg.norm(f.gradient(mid), axis=-1)
        bounds.append(float(np.sum(fv * w * L + 0.5 * gv * w ** 2 * L)))
    return float(np.linalg.norm(bounds))


def bootstrap(mesh: TriangleMesh, spec: ParetoSpec, delta: float, start: Integrand | None = None):
    """Solve the branch-12 start problem from the initial disk."""
    if start is None:
        start = disk_levelset(spec.disk_radius)
    w0, _ = branch_endpoints(12, delta)
    problem = ShapeHomotopy(weighted(spec.objectives, w0), start, spec.newton)
    res = run(problem, mesh, spec.q, spec.strategy)
    if not res.success:
        raise ParetoError(f"bootstrap failed for delta={delta}: {res.reason}")
    return res


def trace_branch(mesh: TriangleMesh, spec: ParetoSpec, branch: int, delta: float,
                 include_start: bool = False) -> tuple[TriangleMesh, BranchRun]:
    """Follow one branch from ``mesh`` (already stationary at t = 0).

    The t = 0 point is emitted only when ``include_start`` is set, since
    later branches start at the previous branch's end point.  A branch whose
    end weights coincide is t-independent: it emits its start point and
    takes no steps.
    """
    w0, w1 = branch_endpoints(branch, delta)
    J0 = objective_vector(mesh, spec.objectives)
    start = ParetoPoint(branch, delta, 0.0, tuple(J0), math.nan, mesh)
    if np.allclose(w0, w1, rtol=0, atol=1e-15):
        return mesh, BranchRun(branch, delta, HomotopyTrace(), [start])
    problem = ShapeHomotopy(weighted(spec.objectives, w1), weighted(spec.objectives, w0), spec.newton)
    points = [start] if include_start else []
    last = {"J": J0}

    def spacing(prev, new, t):
        J = objective_vector(new, spec.objectives)
        if np.linalg.norm(J - last["J"]) > spec.d_max:
            return False
        last["J"] = J
        return True

    def on_accept(k, t, state, rec):
        points.append(ParetoPoint(branch, delta, t, tuple(last["J"]), math.nan, state))

    ramp = ToleranceRamp(spec.tol, spec.tol)
    res = run(problem, mesh, spec.q, spec.strategy, ramp, correct_initial=False,
              accept_hook=spacing, on_accept=on_accept)
    if not res.success:
        raise ParetoError(f"branch {branch} failed for delta={delta}: {res.reason}")
    return res.state, BranchRun(branch, delta, res.trace, points)


def trace_delta(mesh: TriangleMesh, spec: ParetoSpec, delta: float) -> tuple[list, list]:
    """All three branches for one delta.  Returns (points, branch runs)."""
    boot = bootstrap(mesh, spec, delta)
    state = boot.state
    runs = []
    for branch in BRANCHES:
        state, br = trace_branch(state, spec, branch, delta, include_start=branch == 12)
        runs.append(br)
    points = []
    for br in runs:
        for p in br.points:
            obj = combined_integrand(spec.objectives, p.branch, p.delta, p.t)
            p.residual = stationarity_residual(p.mesh, obj, spec.newton)
            points.append(p)
    return points, runs


def _bare(mesh: TriangleMesh) -> TriangleMesh:
    """Copy without cached factorisations, so it can cross process boundaries."""
    return TriangleMesh(mesh.vertices, mesh.triangles, mesh.boundary_loop)


def _worker(args):
    mesh, spec, delta, bare = args
    points, runs = trace_delta(mesh, spec, delta)
    if bare:
        for p in points:
            p.mesh = _bare(p.mesh)
        for r in runs:
            for p in r.points:
                p.mesh = _bare(p.mesh)
    return points, runs


def trace_front(spec: ParetoSpec, mesh: TriangleMesh | None = None, out_dir=None,
                workers: int | None = None) -> tuple[list, list]:
    """Trace every branch for every delta.

    Independent deltas run in separate processes when ``workers > 1``
    (default from ``SHAPEHOM_THREADS``, else 1).  With ``out_dir`` every
    emitted point's mesh is written there.
    """
    if mesh is None:
        mesh = generate_disk(spec.disk_radius, spec.disk_radius / 10)
    if workers is None:
        workers = int(os.environ.get("SHAPEHOM_THREADS", "1"))
    parallel = workers > 1 and len(spec.deltas) > 1
    jobs = [(mesh, spec, d, parallel) for d in sorted(spec.deltas)]
    if parallel:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            results = list(ex.map(_worker, jobs))
    else:
        results = [_worker(j) for j in jobs]
    points = [p for pts, _ in results for p in pts]
    runs = [r for _, rs in results for r in rs]
    points = sort_points(points)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for p in points:
            name = f"front_d{p.delta:.4f}_b{p.branch}_t{p.t:.10f}.mesh"
            write_mesh(p.mesh, out / name)
            p.mesh_file = name
    return points, runs


def sort_points(points) -> list:
    order = {b: i for i, b in enumerate(BRANCHES)}
    return sorted(points, key=lambda p: (p.delta, order[p.branch], p.t))


def front_csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRONT_COLUMNS)
    for p in sort_points(points):
        w.writerow([p.branch, repr(float(p.delta)), repr(float(p.t)),
                    *(repr(float(j)) for j in p.J), repr(float(p.residual)), p.mesh_file])
    return buf.getvalue()


def export_front(points, path) -> None:
    Path(path).write_text(front_csv(points))
