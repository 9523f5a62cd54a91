"""Finite-element assembly of shape derivatives, constraint and extension operators.

An *objective* is a sequence of ``(weight, Integrand)`` pairs standing for
``J(Omega) = sum_i w_i int_Omega f_i dx``.  A single ``Integrand`` is accepted
as shorthand for ``[(1.0, f)]``.

The k-th shape derivative of ``J`` in directions ``V_1 .. V_k`` is

    int_Omega  sum_{S, |S^c| <= 2}  grad^{|S|} f [V_S] * c(S^c) dx

with ``c({}) = 1``, ``c({i}) = div V_i`` and ``c({i, j}) = D2(DV_i, DV_j)``,
where ``D2(A, B) = a11 b22 + a22 b11 - a12 b21 - a21 b12``.  For piecewise
linear fields every term is a polynomial integrand evaluated with a symmetric
triangle rule.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .integrands import Integrand
from .jets import Jet2, directional_derivative, jet_gradient_contraction
from .mesh import TriangleMesh, boundary_frames, boundary_weights
from .quadrature import QuadratureRule, gauss_legendre_01, triangle_rule
from .solvers import Factorization

QUAD_DEGREE = 6


def as_objective(objective) -> tuple:
    if isinstance(objective, Integrand):
        return ((1.0, objective),)
    return tuple((float(w), f) for w, f in objective)


@dataclass(frozen=True)
class ElementGeometry:
    """Per-element data for a subset of triangles."""

    elements: np.ndarray      # (ne,) triangle indices
    conn: np.ndarray          # (ne, 3) vertex indices
    areas: np.ndarray         # (ne,)
    grads: np.ndarray         # (ne, 3, 2) gradients of the hat functions
    qpoints: np.ndarray       # (ne, nq, 2)
    rule: QuadratureRule


def element_geometry(mesh: TriangleMesh, which: str = "all", degree: int = QUAD_DEGREE) -> ElementGeometry:
    key = ("geom", which, degree)
    if key in mesh.cache:
        return mesh.cache[key]
    if which == "all":
        elements = np.arange(len(mesh.triangles))
    elif which == "layer":
        elements = mesh.boundary_layer
    else:
        raise ValueError(which)
    conn = mesh.triangles[elements]
    p = mesh.vertices[conn]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns are edges
    inv = np.linalg.inv(jac)
    grads = np.empty((len(elements), 3, 2))
    grads[:, 1] = inv[:, 0]
    grads[:, 2] = inv[:, 1]
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    rule = triangle_rule(degree)
    qpoints = np.einsum("qa,eac->eqc", rule.bary, p)
    geom = ElementGeometry(elements, conn, mesh.signed_areas[elements], grads, qpoints, rule)
    mesh.cache[key] = geom
    return geom


def _single_jet(mesh, f: Integrand, geom: ElementGeometry, which, order: int) -> Jet2:
    key = ("jet", f, which, geom.rule.degree)
    cached = mesh.cache.get(key)
    if cached is not None and cached.order >= order:
        return cached.truncate(order) if cached.order > order else cached
    jet = f.jet(geom.qpoints, order)
    mesh.cache[key] = jet
    return jet


def objective_jet(mesh: TriangleMesh, objective, order: int, which: str = "all",
                  degree: int = QUAD_DEGREE) -> Jet2:
    """Jet of the weighted integrand at the quadrature points, shape (ncoef, ne, nq)."""
    geom = element_geometry(mesh, which, degree)
    total = None
    for w, f in as_objective(objective):
        if w == 0.0 or f.kind == "zero":
            continue
        j = _single_jet(mesh, f, geom, which, order)
        total = j * w if total is None else total + j * w
    if total is None:
        total = Jet2.constant(np.zeros(geom.qpoints.shape[:2]), order)
    return total


def _field_data(geom: ElementGeometry, field: np.ndarray):
    """Values at quadrature points (ne, nq, 2) and element gradients (ne, 2, 2)."""
    W = np.asarray(field, dtype=float).reshape(-1, 2)
    loc = W[geom.conn]                                   # (ne, 3, 2)
    vals = np.einsum("qa,eac->eqc", geom.rule.bary, loc)
    grad = np.einsum("eac,ead->ecd", loc, geom.grads)    # grad[e, c, d] = d W_c / d x_d
    return vals, grad


def _D2(A, B):
    return (A[:, 0, 0] * B[:, 1, 1] + A[:, 1, 1] * B[:, 0, 0]
            - A[:, 0, 1] * B[:, 1, 0] - A[:, 1, 0] * B[:, 0, 1])


def _cof(A):
    out = np.empty_like(A)
    out[:, 0, 0] = A[:, 1, 1]
    out[:, 0, 1] = -A[:, 1, 0]
    out[:, 1, 0] = -A[:, 0, 1]
    out[:, 1, 1] = A[:, 0, 0]
    return out


def _integrate(geom: ElementGeometry, values) -> float:
    values = np.broadcast_to(values, geom.qpoints.shape[:2])
    return float(np.dot(geom.areas, values @ geom.rule.weights))


def evaluate_objective(mesh: TriangleMesh, objective, degree: int = QUAD_DEGREE) -> float:
    """``J(Omega) = sum_i w_i int_Omega f_i``."""
    geom = element_geometry(mesh, "all", degree)
    return _integrate(geom, objective_jet(mesh, objective, 0, "all", degree).value)


def shape_derivative_k(mesh: TriangleMesh, objective, fields, degree: int = QUAD_DEGREE) -> float:
    """The k-th shape derivative ``d^k J [V_1, .., V_k]`` for volume fields ``V_i``."""
    k = len(fields)
    if k == 0:
        return evaluate_objective(mesh, objective, degree)
    geom = element_geometry(mesh, "all", degree)
    jet = objective_jet(mesh, objective, k, "all", degree)
    data = [_field_data(geom, V) for V in fields]
    vals = [d[0] for d in data]
    grads = [d[1] for d in data]
    total = 0.0
    idx = range(k)
    for r in range(0, min(k, 2) + 1):
        for T in itertools.combinations(idx, r):
            S = [i for i in idx if i not in T]
            dd = directional_derivative(jet, [vals[i] for i in S])
            if r == 0:
                c = 1.0
            elif r == 1:
                g = grads[T[0]]
                c = (g[:, 0, 0] + g[:, 1, 1])[:, None]
            else:
                c = _D2(grads[T[0]], grads[T[1]])[:, None]
            total += _integrate(geom, dd * c)
    return total


def _scatter_vector(mesh, geom, a, P, boundary_only: bool):
    """Assemble ``int a . Phi + P : D Phi`` for all hat-function fields Phi.

    ``a`` has shape (ne, nq, 2), ``P`` (ne, nq, 2, 2).
    """
    w = geom.rule.weights
    bary = geom.rule.bary
    # sum_q w_q a_c(q) phi_a(q)  -> (ne, 3, 2)
    term_a = np.einsum("q,qa,eqc->eac", w, bary, a)
    Pbar = np.einsum("q,eqcd->ecd", w, P)
    term_p = np.einsum("ecd,ead->eac", Pbar, geom.grads)
    loc = (term_a + term_p) * geom.areas[:, None, None]
    out = np.zeros((mesh.n_vertices, 2))
    np.add.at(out, geom.conn, loc)
    if boundary_only:
        return out[mesh.boundary_loop].ravel()
    return out.ravel()


def assemble_kth_rhs(mesh: TriangleMesh, objective, fields, full: bool = False,
                     degree: int = QUAD_DEGREE) -> np.ndarray:
    """The vector ``Phi -> d^k J [V_1, .., V_{k-1}, Phi]`` over hat-function fields.

    ``fields`` holds the k-1 fixed volume fields.  By default only boundary
    dofs are returned (length 2 N_bdy), integrating over the boundary layer
    only; ``full=True`` returns all 2 N dofs.
    """
    which = "all" if full else "layer"
    geom = element_geometry(mesh, which, degree)
    m = len(fields)
    k = m + 1
    jet = objective_jet(mesh, objective, k, which, degree)
    data = [_field_data(geom, V) for V in fields]
    vals = [d[0] for d in data]
    grads = [d[1] for d in data]
    ne, nq = geom.qpoints.shape[:2]
    idx = range(m)

    # a(x) = sum_{T subset, |T|<=2} c(T) grad^{|S|+1} f [W_S, .]
    a = np.zeros((ne, nq, 2))
    for r in range(0, min(m, 2) + 1):
        for T in itertools.combinations(idx, r):
            S = [i for i in idx if i not in T]
            g = jet_gradient_contraction(jet, [vals[i] for i in S])
            if r == 0:
                a += g
            elif r == 1:
                gr = grads[T[0]]
                a += g * (gr[:, 0, 0] + gr[:, 1, 1])[:, None, None]
            else:
                a += g * _D2(grads[T[0]], grads[T[1]])[:, None, None]

    # P = b I + sum_j grad^{m-1} f [W without j] cof(D W_j)
    b = np.broadcast_to(directional_derivative(jet, vals), (ne, nq))
    P = np.zeros((ne, nq, 2, 2))
    P[..., 0, 0] = b
    P[..., 1, 1] = b
    for j in idx:
        rest = [vals[i] for i in idx if i != j]
        s = np.broadcast_to(directional_derivative(jet, rest), (ne, nq))
        P += s[..., None, None] * _cof(grads[j])[:, None]
    return _scatter_vector(mesh, geom, a, P, boundary_only=not full)


def assemble_gradient(mesh: TriangleMesh, objective, full: bool = False,
                      degree: int = QUAD_DEGREE) -> np.ndarray:
    """First shape derivative against hat-function fields."""
    return assemble_kth_rhs(mesh, objective, [], full=full, degree=degree)


def _dof_map(mesh, boundary_only: bool):
    """Vertex-component -> global dof (or -1 when dropped)."""
    if boundary_only:
        vmap = mesh.boundary_index
        n = mesh.n_boundary
    else:
        vmap = np.arange(mesh.n_vertices)
        n = mesh.n_vertices
    return vmap, 2 * n


def _assemble_local(mesh, geom, loc, boundary_only: bool):
    """Scatter local (ne, 6, 6) blocks, local index 2a+c."""
    vmap, n = _dof_map(mesh, boundary_only)
    v = vmap[geom.conn]                                    # (ne, 3)
    dof = np.stack([2 * v, 2 * v + 1], axis=2).reshape(len(v), 6)
    dof[np.repeat(v < 0, 2, axis=1)] = -1
    rows = np.repeat(dof, 6, axis=1).ravel()
    cols = np.tile(dof, (1, 6)).ravel()
    data = loc.reshape(len(v), 36).ravel()
    keep = (rows >= 0) & (cols >= 0)
    A = sp.coo_matrix((data[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def assemble_hessian(mesh: TriangleMesh, objective, full: bool = False,
                     degree: int = QUAD_DEGREE) -> sp.csr_matrix:
    """Second shape derivative ``d^2 J [Phi_i, Phi_j]`` as a symmetric sparse matrix."""
    which = "all" if full else "layer"
    geom = element_geometry(mesh, which, degree)
    jet = objective_jet(mesh, objective, 2, which, degree)
    w = geom.rule.weights
    bary = geom.rule.bary
    G = geom.grads
    f0 = jet.value
    f1 = np.stack([jet.partial(1, 0), jet.partial(0, 1)], axis=-1)          # (ne, nq, 2)
    f2 = np.empty(f0.shape + (2, 2))
    f2[..., 0, 0] = jet.partial(2, 0)
    f2[..., 0, 1] = f2[..., 1, 0] = jet.partial(1, 1)
    f2[..., 1, 1] = jet.partial(0, 2)

    t1 = np.einsum("q,eqcd,qa,qb->eacbd", w, f2, bary, bary)
    fd_phib = np.einsum("q,eqd,qb->ebd", w, f1, bary)
    t2 = np.einsum("ebd,eac->eacbd", fd_phib, G)
    t3 = np.einsum("eac,ebd->eacbd", fd_phib, G)
    fbar = f0 @ w
    t4 = fbar[:, None, None, None, None] * (
        np.einsum("eac,ebd->eacbd", G, G) - np.einsum("ead,ebc->eacbd", G, G))
    loc = (t1 + t2 + t3 + t4) * geom.areas[:, None, None, None, None]
    A = _assemble_local(mesh, geom, loc.reshape(-1, 6, 6), boundary_only=not full)
    return ((A + A.T) * 0.5).tocsr()


def assemble_btau(mesh: TriangleMesh, consistent: bool = False) -> sp.csr_matrix:
    """Tangential constraint operator ``B``, shape (2 N_bdy, N_bdy).

    ``B^T V = 0`` asks the boundary field ``V`` to have no tangential part.
    The lumped form uses ``B[2k+c, k] = omega_k tau_k,c`` with the lumped
    boundary mass ``omega``; the consistent form integrates
    ``int phi_i phi_j tau_c ds`` with a linearly interpolated tangent.
    """
    tau, _ = boundary_frames(mesh)
    nb = mesh.n_boundary
    if not consistent:
        om = boundary_weights(mesh)
        rows = np.arange(2 * nb)
        cols = np.repeat(np.arange(nb), 2)
        data = (om[:, None] * tau).ravel()
        return sp.csr_matrix((data, (rows, cols)), shape=(2 * nb, nb))
    s, ws = gauss_legendre_01(3)
    le = mesh.boundary_edge_lengths
    i = np.arange(nb)
    j = (i + 1) % nb
    rows, cols, data = [], [], []
    for sq, wq in zip(s, ws):
        phi = (1.0 - sq, sq)
        t = (1.0 - sq) * tau[i] + sq * tau[j]
        for a, va in ((0, i), (1, j)):
            for b, vb in ((0, i), (1, j)):
                for c in range(2):
                    rows.append(2 * va + c)
                    cols.append(vb)
                    data.append(le * wq * phi[a] * phi[b] * t[:, c])
    B = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(2 * nb, nb))
    return B.tocsr()


def normal_operator(mesh: TriangleMesh) -> sp.csr_matrix:
    """Map a boundary field to its nodal normal components, shape (N_bdy, 2 N_bdy)."""
    _, n = boundary_frames(mesh)
    nb = mesh.n_boundary
    rows = np.repeat(np.arange(nb), 2)
    cols = np.arange(2 * nb)
    return sp.csr_matrix((n.ravel(), (rows, cols)), shape=(nb, 2 * nb))


def _p1_blocks(geom):
    """Local vector stiffness and mass blocks, (ne, 6, 6) each."""
    G = geom.grads
    A = geom.areas
    eye = np.eye(2)
    lap = np.einsum("eak,ebk->eab", G, G)
    stiff = np.einsum("eab,cd->eacbd", lap, eye) * A[:, None, None, None, None]
    m = (np.ones((3, 3)) + np.eye(3)) / 12.0
    mass = np.einsum("ab,cd,e->eacbd", m, eye, A)
    return stiff.reshape(-1, 6, 6), mass.reshape(-1, 6, 6)


def assemble_elasticity(mesh: TriangleMesh, mu: float = 1.0, lam: float = 0.0) -> sp.csr_matrix:
    """Linear elasticity stiffness on all 2N dofs."""
    key = ("elasticity", mu, lam)
    if key in mesh.cache:
        return mesh.cache[key]
    geom = element_geometry(mesh, "all")
    G = geom.grads
    eye = np.eye(2)
    loc = (mu * (np.einsum("cd,eak,ebk->eacbd", eye, G, G)
                 + np.einsum("ead,ebc->eacbd", G, G))
           + lam * np.einsum("eac,ebd->eacbd", G, G))
    loc = loc * geom.areas[:, None, None, None, None]
    K = _assemble_local(mesh, geom, loc.reshape(-1, 6, 6), boundary_only=False)
    K = ((K + K.T) * 0.5).tocsr()
    mesh.cache[key] = K
    return K


def assemble_mass(mesh: TriangleMesh, boundary_only: bool = False) -> sp.csr_matrix:
    """Vector P1 mass matrix over the domain (rows restricted to boundary dofs if asked)."""
    geom = element_geometry(mesh, "all")
    _, mass = _p1_blocks(geom)
    return _assemble_local(mesh, geom, mass, boundary_only)


def assemble_h1(mesh: TriangleMesh, delta_a: float, delta_b: float,
                boundary_only: bool = True) -> sp.csr_matrix:
    """``delta_a * vector Laplacian + delta_b * mass``."""
    geom = element_geometry(mesh, "all")
    stiff, mass = _p1_blocks(geom)
    return _assemble_local(mesh, geom, delta_a * stiff + delta_b * mass, boundary_only)


def tangential_mass(mesh: TriangleMesh, lumped: bool = False) -> sp.csr_matrix:
    """Boundary mass of the tangential component ``int (V.tau)(W.tau) ds``, (2 N_bdy)^2.

    The default integrates exactly along each edge with the edge's own unit
    tangent.  ``lumped=True`` uses the vertex frames and the lumped boundary
    mass instead, which acts on vertex-tangential components only.
    """
    nb = mesh.n_boundary
    if lumped:
        tau, _ = boundary_frames(mesh)
        om = boundary_weights(mesh)
        blocks = om[:, None, None] * np.einsum("kc,kd->kcd", tau, tau)
        return sp.block_diag(list(blocks), format="csr")
    p = mesh.vertices[mesh.boundary_loop]
    e = np.roll(p, -1, axis=0) - p
    le = mesh.boundary_edge_lengths
    t = e / le[:, None]
    tt = np.einsum("kc,kd->kcd", t, t)
    i = np.arange(nb)
    j = (i + 1) % nb
    rows, cols, data = [], [], []
    for va, vb, m in ((i, i, 1 / 3), (j, j, 1 / 3), (i, j, 1 / 6), (j, i, 1 / 6)):
        for c in range(2):
            for d in range(2):
                rows.append(2 * va + c)
                cols.append(2 * vb + d)
                data.append(le * m * tt[:, c, d])
    M = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(2 * nb, 2 * nb)).tocsr()
    return ((M + M.T) * 0.5).tocsr()


class Extension:
    """Harmonic-type extension of boundary fields by linear elasticity.

    The interior block of the stiffness matrix is factorised once per mesh.
    """

    def __init__(self, mesh: TriangleMesh, mu: float = 1.0, lam: float = 0.0):
        self.mesh = mesh
        K = assemble_elasticity(mesh, mu, lam).tocsr()
        is_b = mesh.boundary_index >= 0
        dof_b = np.repeat(is_b, 2)
        self.bdofs = np.flatnonzero(dof_b)
        self.idofs = np.flatnonzero(~dof_b)
        # boundary dofs in boundary_loop order
        self.bdofs_loop = np.stack([2 * mesh.boundary_loop, 2 * mesh.boundary_loop + 1], 1).ravel()
        self.K_ib = K[self.idofs][:, self.bdofs_loop]
        self.fact = Factorization(K[self.idofs][:, self.idofs], symmetric=True) if len(self.idofs) else None

    def __call__(self, bfield: np.ndarray) -> np.ndarray:
        bfield = np.asarray(bfield, dtype=float)
        out = np.zeros(2 * self.mesh.n_vertices)
        out[self.bdofs_loop] = bfield
        if self.fact is not None:
            out[self.idofs] = self.fact.solve(-(self.K_ib @ bfield))
        return out


def extension(mesh: TriangleMesh, mu: float = 1.0, lam: float = 0.0) -> Extension:
    key = ("extension", mu, lam)
    if key not in mesh.cache:
        mesh.cache[key] = Extension(mesh, mu, lam)
    return mesh.cache[key]


def extend(mesh: TriangleMesh, bfield: np.ndarray, mu: float = 1.0, lam: float = 0.0) -> np.ndarray:
    """Extend a boundary field (length 2 N_bdy) to a volume field (length 2N)."""
    return extension(mesh, mu, lam)(bfield)


def sparse_triplets(A) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(rows, cols, values)`` of a sparse matrix in canonical CSR order."""
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    coo = A.tocoo()
    return coo.row.copy(), coo.col.copy(), coo.data.copy()
