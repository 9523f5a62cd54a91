"""Triangle meshes: disk generation, boundary frames, deformation and IO.

Vector fields are stored as flat arrays with interleaved components, i.e.
``field.reshape(-1, 2)[k]`` is the vector attached to the k-th node.  Boundary
fields have one entry per boundary vertex in ``boundary_loop`` order, volume
fields one entry per mesh vertex.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Conforming triangle mesh with a single closed CCW boundary loop.

    Parameters
    ----------
    vertices : (N, 2) float array
    triangles : (N_T, 3) int array, counter-clockwise
    boundary_loop : (N_bdy,) int array of vertex indices, counter-clockwise
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loop: np.ndarray
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        b = np.ascontiguousarray(self.boundary_loop, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise MeshError("vertices must have shape (N, 2)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must have shape (N_T, 3)")
        for a in (v, t, b):
            a.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "boundary_loop", b)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary_loop)

    @property
    def boundary_edges(self) -> np.ndarray:
        b = self.boundary_loop
        return np.column_stack([b, np.roll(b, -1)])

    @functools.cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @functools.cached_property
    def area(self) -> float:
        return float(self.signed_areas.sum())

    @functools.cached_property
    def boundary_edge_lengths(self) -> np.ndarray:
        e = self.boundary_edges
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    @functools.cached_property
    def perimeter(self) -> float:
        return float(self.boundary_edge_lengths.sum())

    @functools.cached_property
    def boundary_index(self) -> np.ndarray:
        """Map vertex index -> position in boundary_loop, -1 for interior vertices."""
        idx = np.full(self.n_vertices, -1, dtype=np.int64)
        idx[self.boundary_loop] = np.arange(self.n_boundary)
        return idx

    @functools.cached_property
    def boundary_layer(self) -> np.ndarray:
        """Indices of triangles with at least one boundary vertex."""
        return np.flatnonzero((self.boundary_index[self.triangles] >= 0).any(axis=1))

    @functools.cached_property
    def h_max(self) -> float:
        p = self.vertices[self.triangles]
        lens = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
        return float(lens.max())

    def validate(self) -> None:
        """Raise MeshError if the mesh violates the structural invariants."""
        if np.any(self.signed_areas <= 0):
            raise MeshError("mesh has non-positive triangle areas")
        edges = np.sort(
            np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]],
                            self.triangles[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        if counts.max() > 2:
            raise MeshError("non-manifold edge")
        free = {tuple(e) for e in uniq[counts == 1]}
        loop = {tuple(sorted(e)) for e in self.boundary_edges.tolist()}
        if free != loop:
            raise MeshError("boundary_loop does not match the free edges of the mesh")
        if len(set(self.boundary_loop.tolist())) != self.n_boundary:
            raise MeshError("boundary_loop visits a vertex twice")
        # CCW loop <=> positive enclosed polygon area
        if polygon_area(self.vertices[self.boundary_loop]) <= 0:
            raise MeshError("boundary_loop is not counter-clockwise")


def polygon_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _ring_band(inner: np.ndarray, outer: np.ndarray, pts: np.ndarray) -> list:
    """Triangulate the annular band between two concentric rings.

    Both rings start at angle 0.  Each step advances along one ring, picking
    the shorter of the two candidate diagonals (ties advance the outer ring).
    """
    n_in, n_out = len(inner), len(outer)
    tris = []
    i = o = 0
    while i < n_in or o < n_out:
        if i >= n_in:
            take_outer = True
        elif o >= n_out:
            take_outer = False
        else:
            d_out = np.linalg.norm(pts[inner[i % n_in]] - pts[outer[(o + 1) % n_out]])
            d_in = np.linalg.norm(pts[outer[o % n_out]] - pts[inner[(i + 1) % n_in]])
            take_outer = d_out <= d_in * (1 + 1e-12)
        if take_outer:
            tris.append((inner[i % n_in], outer[o % n_out], outer[(o + 1) % n_out]))
            o += 1
        else:
            tris.append((inner[i % n_in], outer[o % n_out], inner[(i + 1) % n_in]))
            i += 1
    return tris


def generate_disk(radius: float, target_h: float, center=(0.0, 0.0)) -> TriangleMesh:
    """Ring mesh of the disk ``B_radius(center)``.

    Ring ``j`` (j = 1..M, M = ceil(radius / target_h)) carries ``6 j``
    vertices, so boundary vertices come first in the numbering and lie
    exactly on the circle.  The construction is deterministic.
    """
    if not (radius > 0 and 0 < target_h < radius):
        raise MeshError(f"invalid disk parameters radius={radius}, target_h={target_h}")
    m = math.ceil(radius / target_h - 1e-12)
    cx, cy = center
    rings = []
    start = 0
    pts = []
    # outermost ring first so the boundary occupies indices 0..N_bdy-1
    for j in range(m, 0, -1):
        n = 6 * j
        ang = 2 * math.pi * np.arange(n) / n
        r = radius * j / m
        pts.append(np.column_stack([cx + r * np.cos(ang), cy + r * np.sin(ang)]))
        rings.append(np.arange(start, start + n))
        start += n
    pts.append(np.array([[cx, cy]]))
    centre = start
    verts = np.vstack(pts)
    # exact radius on the boundary circle
    b = rings[0]
    d = verts[b] - (cx, cy)
    verts[b] = (cx, cy) + radius * d / np.linalg.norm(d, axis=1)[:, None]

    tris = []
    inner_first = rings[::-1]
    r1 = inner_first[0]
    for k in range(6):
        tris.append((centre, r1[k], r1[(k + 1) % 6]))
    for j in range(len(inner_first) - 1):
        a, c = inner_first[j], inner_first[j + 1]
        tris.extend(_ring_band(a, c, verts))
    return TriangleMesh(verts, np.array(tris, dtype=np.int64), b)


def boundary_frames(mesh: TriangleMesh) -> tuple[np.ndarray, np.ndarray]:
    """Unit tangents and outward normals at the boundary vertices.

    The tangent at a vertex is the normalised mean of the unit tangents of
    the two adjacent boundary edges; the normal is the tangent rotated by
    -90 degrees.
    """
    key = "frames"
    if key in mesh.cache:
        return mesh.cache[key]
    p = mesh.vertices[mesh.boundary_loop]
    e = np.roll(p, -1, axis=0) - p
    lens = np.linalg.norm(e, axis=1)
    if np.any(lens <= 0):
        raise MeshError("degenerate boundary edge")
    u = e / lens[:, None]
    tau = u + np.roll(u, 1, axis=0)
    tn = np.linalg.norm(tau, axis=1)
    if np.any(tn <= 1e-14):
        raise MeshError("boundary folds back onto itself")
    tau = tau / tn[:, None]
    normal = np.column_stack([tau[:, 1], -tau[:, 0]])
    tau.flags.writeable = False
    normal.flags.writeable = False
    mesh.cache[key] = (tau, normal)
    return tau, normal


def boundary_weights(mesh: TriangleMesh) -> np.ndarray:
    """Lumped boundary mass: half the summed length of the adjacent edges."""
    le = mesh.boundary_edge_lengths
    return 0.5 * (le + np.roll(le, 1))


def deform(mesh: TriangleMesh, field: np.ndarray) -> TriangleMesh:
    """Return the mesh moved by ``id + field`` (volume field, length 2N)."""
    field = np.asarray(field, dtype=float)
    if field.size != 2 * mesh.n_vertices:
        raise MeshError(f"volume field has length {field.size}, expected {2 * mesh.n_vertices}")
    return TriangleMesh(mesh.vertices + field.reshape(-1, 2), mesh.triangles, mesh.boundary_loop)


def min_signed_area(mesh: TriangleMesh) -> float:
    return float(mesh.signed_areas.min())


def is_tangled(mesh: TriangleMesh, rel: float = 1e-12) -> bool:
    a = mesh.signed_areas
    return bool(a.min() <= rel * abs(np.median(a)))


def boundary_l2_norm(mesh: TriangleMesh, field: np.ndarray) -> float:
    """Exact L2 norm along the boundary polygon of a piecewise linear field."""
    v = np.asarray(field, dtype=float).reshape(-1, 2)
    if len(v) != mesh.n_boundary:
        raise MeshError("boundary field has wrong length")
    w = np.roll(v, -1, axis=0)
    le = mesh.boundary_edge_lengths
    sq = (v * v).sum(1) + (v * w).sum(1) + (w * w).sum(1)
    return math.sqrt(max(float(np.dot(le, sq)) / 3.0, 0.0))


def boundary_to_volume(mesh: TriangleMesh, bfield: np.ndarray) -> np.ndarray:
    """Zero-fill a boundary field onto all vertices."""
    out = np.zeros((mesh.n_vertices, 2))
    out[mesh.boundary_loop] = np.asarray(bfield, dtype=float).reshape(-1, 2)
    return out.ravel()


def volume_to_boundary(mesh: TriangleMesh, vfield: np.ndarray) -> np.ndarray:
    return np.asarray(vfield, dtype=float).reshape(-1, 2)[mesh.boundary_loop].ravel()


def write_mesh(mesh: TriangleMesh, path) -> None:
    """Write the plain text mesh format (17 significant digits)."""
    lines = [f"{mesh.n_vertices} {len(mesh.triangles)} {mesh.n_boundary}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [str(i) for i in mesh.boundary_loop]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> TriangleMesh:
    tok = Path(path).read_text().split()
    n, nt, nb = (int(x) for x in tok[:3])
    pos = 3
    v = np.array(tok[pos:pos + 2 * n], dtype=float).reshape(n, 2)
    pos += 2 * n
    t = np.array(tok[pos:pos + 3 * nt], dtype=np.int64).reshape(nt, 3)
    pos += 3 * nt
    b = np.array(tok[pos:pos + nb], dtype=np.int64)
    if len(b) != nb:
        raise MeshError(f"truncated mesh file {path}")
    return TriangleMesh(v, t, b)
