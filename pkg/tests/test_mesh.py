import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapehom.mesh import (MeshError, TriangleMesh, boundary_frames, boundary_l2_norm, deform,
                           generate_disk, is_tangled, min_signed_area, polygon_area, read_mesh,
                           write_mesh)


def square():
    v = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    t = np.array([[0, 1, 2], [0, 2, 3]])
    return TriangleMesh(v, t, np.array([0, 1, 2, 3]))


def test_disk_boundary_count():
    m = generate_disk(1.0, 0.05)
    assert abs(m.n_boundary - round(2 * math.pi / 0.05)) <= 0.1 * 126


def test_disk_boundary_on_circle():
    m = generate_disk(1.0, 0.5)
    r = np.linalg.norm(m.vertices[m.boundary_loop], axis=1)
    assert np.max(np.abs(r - 1)) <= 1e-14


@pytest.mark.parametrize("h", [0.5, 0.2, 0.1])
def test_disk_edge_length_bound(h):
    m = generate_disk(1.0, h)
    assert m.h_max <= 1.5 * h
    assert min_signed_area(m) > 0


def test_disk_area_converges_quadratically():
    hs = [0.5, 0.25, 0.125]
    errs = [abs(generate_disk(2.5, h).area - math.pi * 2.5 ** 2) for h in hs]
    assert np.polyfit(np.log(hs), np.log(errs), 1)[0] == pytest.approx(2, abs=0.3)


def test_disk_is_deterministic():
    a, b = generate_disk(1.0, 0.2), generate_disk(1.0, 0.2)
    assert np.array_equal(a.vertices, b.vertices) and np.array_equal(a.triangles, b.triangles)


def test_disk_rejects_bad_parameters():
    with pytest.raises(MeshError):
        generate_disk(1.0, 2.0)
    with pytest.raises(MeshError):
        generate_disk(-1.0, 0.1)


def test_frames_regular_polygon_are_radial():
    m = generate_disk(1.0, 0.3)
    tau, n = boundary_frames(m)
    x = m.vertices[m.boundary_loop]
    assert np.allclose(n, x / np.linalg.norm(x, axis=1)[:, None], atol=1e-12)
    assert np.allclose(np.linalg.norm(tau, axis=1), 1, atol=1e-14)
    assert np.allclose((tau * n).sum(1), 0, atol=1e-14)


def test_frames_square_corner():
    tau, n = boundary_frames(square())
    assert np.allclose(tau[2], np.array([-1, 1]) / math.sqrt(2))
    assert np.allclose(n[2], np.array([1, 1]) / math.sqrt(2))


def test_frames_outward_and_closed():
    m = generate_disk(1.0, 0.1)
    tau, n = boundary_frames(m)
    x = m.vertices[m.boundary_loop]
    for s in (1, -1):
        e = np.roll(x, -s, axis=0) - x
        out = s * np.stack([e[:, 1], -e[:, 0]], axis=1)
        assert np.all((out * n).sum(1) > 0)
    le = m.boundary_edge_lengths
    w = 0.5 * (le + np.roll(le, 1))
    assert np.linalg.norm((n * w[:, None]).sum(0)) <= m.h_max


def test_frames_collinear_segment():
    v = np.array([[0, 0], [1, 0], [2, 0], [2, 1], [0, 1]], dtype=float)
    t = np.array([[0, 1, 4], [1, 3, 4], [1, 2, 3]])
    tau, _ = boundary_frames(TriangleMesh(v, t, np.arange(5)))
    assert np.array_equal(tau[1], [1.0, 0.0])


def test_deform_cases():
    m = generate_disk(1.0, 0.25)
    assert np.array_equal(deform(m, np.zeros(2 * m.n_vertices)).vertices, m.vertices)
    moved = deform(m, np.full(2 * m.n_vertices, 0.3))
    assert np.allclose(moved.signed_areas, m.signed_areas)
    grown = deform(m, 0.1 * m.vertices.ravel())
    assert grown.area == pytest.approx(1.21 * m.area, rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_deform_roundtrip(seed):
    m = generate_disk(1.0, 0.3)
    f = np.random.default_rng(seed).standard_normal(2 * m.n_vertices) * 0.01
    back = deform(deform(m, f), -f)
    assert np.max(np.abs(back.vertices - m.vertices)) <= 1e-14


def test_signed_area_orientation():
    v = np.array([[0, 0], [1, 0], [0, 1]], dtype=float)
    assert polygon_area(v) == pytest.approx(0.5)
    m = TriangleMesh.__new__(TriangleMesh)
    a = TriangleMesh(v, np.array([[0, 1, 2]]), np.array([0, 1, 2]))
    assert min_signed_area(a) == pytest.approx(0.5)
    object.__setattr__(m, "vertices", v)
    flipped = deform(a, np.array([0, 0, -1, 1, 1, -1], dtype=float))  # swap vertices 1 and 2
    assert min_signed_area(flipped) == pytest.approx(-0.5)
    assert is_tangled(flipped)


def test_boundary_norm_examples():
    m = generate_disk(1.0, 0.1)
    nb = m.n_boundary
    assert boundary_l2_norm(m, np.zeros(2 * nb)) == 0
    const = np.tile([1.0, 0.0], nb)
    assert boundary_l2_norm(m, const) == pytest.approx(math.sqrt(m.perimeter), rel=1e-14)
    _, n = boundary_frames(m)
    assert boundary_l2_norm(m, n.ravel()) == pytest.approx(math.sqrt(2 * math.pi), abs=5 * m.h_max ** 2)


def test_mesh_file_roundtrip(tmp_path):
    m = generate_disk(1.0, 0.3)
    write_mesh(m, tmp_path / "a.mesh")
    back = read_mesh(tmp_path / "a.mesh")
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.array_equal(back.boundary_loop, m.boundary_loop)
    first = (tmp_path / "a.mesh").read_text().splitlines()[0]
    assert first == f"{m.n_vertices} {len(m.triangles)} {m.n_boundary}"
