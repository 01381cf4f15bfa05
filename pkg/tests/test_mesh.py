import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from den.errors import PointOutsideMesh
from den.mesh import (Mesh, boundary_edges_from_triangles, generate_unit_disk_mesh,
                      generate_unit_square_mesh, locate_point, locate_points)


@pytest.mark.parametrize("n,nodes,tris,bedges", [(1, 4, 2, 4), (2, 9, 8, 8), (38, 1521, 2888, 152)])
def test_square_counts(n, nodes, tris, bedges):
    m = generate_unit_square_mesh(n)
    assert (m.num_nodes, m.num_triangles, len(m.boundary_edges)) == (nodes, tris, bedges)


@pytest.mark.parametrize("n", [1, 3, 10, 27])
def test_square_area_and_perimeter(n):
    m = generate_unit_square_mesh(n)
    assert abs(m.signed_areas().sum() - 1.0) < 1e-12
    assert abs(m.boundary_edge_lengths().sum() - 4.0) < 1e-12
    assert np.all(m.signed_areas() > 0)


def _check_topology(m: Mesh):
    assert m.triangles.max() < m.num_nodes
    assert np.all(m.signed_areas() > 0)
    e = np.sort(m.boundary_edges, axis=1)
    all_e = np.sort(np.concatenate([m.triangles[:, [0, 1]], m.triangles[:, [1, 2]], m.triangles[:, [2, 0]]]), axis=1)
    _, counts = np.unique(all_e, axis=0, return_counts=True)
    keys, c = np.unique(all_e, axis=0, return_counts=True)
    boundary_set = {tuple(k) for k, cc in zip(keys, c) if cc == 1}
    assert boundary_set == {tuple(x) for x in e}
    # closed loops: every boundary node has in-degree = out-degree = 1
    out_deg = np.bincount(m.boundary_edges[:, 0], minlength=m.num_nodes)
    in_deg = np.bincount(m.boundary_edges[:, 1], minlength=m.num_nodes)
    assert np.array_equal(out_deg[m.boundary_nodes], np.ones(len(m.boundary_nodes)))
    assert np.array_equal(in_deg[m.boundary_nodes], np.ones(len(m.boundary_nodes)))
    assert np.array_equal(m.boundary_nodes, np.unique(m.boundary_edges))


@pytest.mark.parametrize("mesh", [generate_unit_square_mesh(5), generate_unit_disk_mesh(0.2)])
def test_topology_invariants(mesh):
    _check_topology(mesh)


def test_boundary_edges_orientation_domain_left():
    m = generate_unit_square_mesh(4)
    p = m.nodes
    mid = 0.5 * (p[m.boundary_edges[:, 0]] + p[m.boundary_edges[:, 1]])
    d = p[m.boundary_edges[:, 1]] - p[m.boundary_edges[:, 0]]
    inward = np.stack([-d[:, 1], d[:, 0]], axis=1)
    probe = mid + 1e-3 * inward
    assert np.all((probe > 0) & (probe < 1))


def test_disk_coarsest_is_hexagon_fan():
    m = generate_unit_disk_mesh(1.0)
    assert (m.num_nodes, m.num_triangles) == (7, 6)


@pytest.mark.parametrize("h", [1.0, 0.3, 0.1, 0.05])
def test_disk_boundary_on_circle(h):
    m = generate_unit_disk_mesh(h)
    r2 = (m.nodes[m.boundary_nodes] ** 2).sum(axis=1)
    assert np.max(np.abs(r2 - 1.0)) < 1e-12


def test_disk_edge_lengths_within_factor_two():
    h = 0.1
    m = generate_unit_disk_mesh(h)
    e = m.edges()
    L = np.linalg.norm(m.nodes[e[:, 0]] - m.nodes[e[:, 1]], axis=1)
    assert L.min() >= 0.5 * h and L.max() <= 2.0 * h


def test_disk_refinement_doubles_boundary_and_area_increases():
    a = generate_unit_disk_mesh(0.1)
    b = generate_unit_disk_mesh(0.05)
    ratio = len(b.boundary_nodes) / len(a.boundary_nodes)
    assert 1.8 <= ratio <= 2.2
    areas = [generate_unit_disk_mesh(h).signed_areas().sum() for h in (0.2, 0.1, 0.05)]
    assert areas[0] < areas[1] < areas[2] < np.pi


def test_locate_vertex_and_centroid():
    m = generate_unit_square_mesh(3)
    t, lam = locate_point(m, m.nodes[5])
    assert sorted(np.round(lam, 12).tolist()) == [0.0, 0.0, 1.0]
    c = m.nodes[m.triangles[7]].mean(axis=0)
    t, lam = locate_point(m, c)
    assert t == 7
    assert np.allclose(lam, 1.0 / 3.0, atol=1e-12)


def test_locate_tie_breaks_to_lowest_index():
    m = generate_unit_square_mesh(2)
    # midpoint of the diagonal shared by triangles 0 and 1
    t, _ = locate_point(m, np.array([0.25, 0.25]))
    assert t == 0


def test_locate_outside_raises():
    m = generate_unit_disk_mesh(0.2)
    with pytest.raises(PointOutsideMesh):
        locate_point(m, np.array([1.01, 0.0]))
    with pytest.raises(PointOutsideMesh):
        locate_point(generate_unit_square_mesh(2), np.array([0.5, -1e-6]))


def test_locate_snaps_within_tolerance():
    m = generate_unit_square_mesh(2)
    t, lam = locate_point(m, np.array([0.5, -1e-10]))
    assert lam.min() >= -1e-8


def test_reconstruction_identity_on_random_points():
    m = generate_unit_disk_mesh(0.1)
    rng = np.random.default_rng(0)
    r = 0.95 * np.sqrt(rng.random(1000))
    th = 2 * np.pi * rng.random(1000)
    pts = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    tri, lam = locate_points(m, pts)
    rec = np.einsum("pk,pkd->pd", lam, m.nodes[m.triangles[tri]])
    assert np.max(np.abs(rec - pts)) <= 1e-10
    assert lam.min() >= -1e-10
    assert np.allclose(lam.sum(axis=1), 1.0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_square_locate_property(x, y):
    m = generate_unit_square_mesh(6)
    t, lam = locate_point(m, np.array([x, y]))
    rec = lam @ m.nodes[m.triangles[t]]
    assert np.allclose(rec, [x, y], atol=1e-10)
    assert abs(lam.sum() - 1) < 1e-12


def test_boundary_edges_from_triangles_single():
    tris = np.array([[0, 1, 2]])
    be = boundary_edges_from_triangles(tris)
    assert sorted(map(tuple, be)) == [(0, 1), (1, 2), (2, 0)]
