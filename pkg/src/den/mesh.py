"""Unstructured P1 triangulations of the unit square and the unit disk."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PointOutsideMesh

SNAP_TOL = 1e-8
_EXACT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation with counterclockwise triangles and oriented boundary edges.

    ``boundary_edges`` are oriented so the domain lies to their left, and
    ``boundary_nodes`` is the sorted set of their endpoints.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=np.float64)
        tris = np.ascontiguousarray(self.triangles, dtype=np.int64)
        bedges = np.ascontiguousarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        for name, arr in (("nodes", nodes), ("triangles", tris), ("boundary_edges", bedges)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        bnodes = np.unique(bedges.ravel())
        bnodes.setflags(write=False)
        object.__setattr__(self, "boundary_nodes", bnodes)

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(self.num_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def boundary_edge_lengths(self) -> np.ndarray:
        d = self.nodes[self.boundary_edges[:, 1]] - self.nodes[self.boundary_edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def diameter(self) -> float:
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        return float(np.hypot(*(hi - lo)))


def boundary_edges_from_triangles(triangles: np.ndarray) -> np.ndarray:
    """Edges used by exactly one triangle, keeping the triangle's orientation."""
    t = np.asarray(triangles, dtype=np.int64)
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    once = counts[inverse.ravel()] == 1
    out = directed[once]
    order = np.lexsort((out[:, 1], out[:, 0]))
    return out[order]


def generate_unit_square_mesh(subdivisions: int) -> Mesh:
    """Uniform grid on [0,1]^2, each cell cut along its lower-left/upper-right diagonal."""
    n = int(subdivisions)
    if n < 1:
        raise ValueError("subdivisions must be >= 1")
    xs = np.arange(n + 1, dtype=np.float64) / n
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    a = (j * (n + 1) + i).ravel()
    b = a + 1
    c = a + n + 2
    d = a + n + 1
    lower = np.column_stack([a, b, c])
    upper = np.column_stack([a, c, d])
    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    tris[0::2] = lower
    tris[1::2] = upper
    return Mesh(nodes, tris, boundary_edges_from_triangles(tris))


def generate_unit_disk_mesh(target_edge_length: float) -> Mesh:
    """Concentric-ring triangulation of the unit disk.

    Ring ``j`` (``j = 1..R``) has radius ``j/R`` and ``6j`` equally spaced
    nodes starting at angle 0; consecutive rings are stitched by walking both
    rings in angle order.
    """
    h = float(target_edge_length)
    if not 0.0 < h <= 1.0:
        raise ValueError("target_edge_length must lie in (0, 1]")
    R = max(1, int(round(1.0 / h)))

    pts = [np.zeros((1, 2))]
    starts = [0]
    count = 1
    for j in range(1, R + 1):
        m = 6 * j
        ang = 2.0 * np.pi * np.arange(m) / m
        r = j / R
        ring = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
        if j == R:
            # unit-circle nodes: renormalize so x^2 + y^2 == 1 to rounding
            ring /= np.hypot(ring[:, 0], ring[:, 1])[:, None]
        pts.append(ring)
        starts.append(count)
        count += m
    nodes = np.concatenate(pts)

    tris = []
    for k in range(6):
        tris.append((0, 1 + k, 1 + (k + 1) % 6))
    for j in range(2, R + 1):
        n_in, n_out = 6 * (j - 1), 6 * j
        s_in, s_out = starts[j - 1], starts[j]
        i = o = 0
        while i < n_in or o < n_out:
            # compare next angles as exact rationals: (o+1)/n_out vs (i+1)/n_in
            advance_outer = o < n_out and (i == n_in or (o + 1) * n_in < (i + 1) * n_out)
            if advance_outer:
                tris.append((s_in + i % n_in, s_out + o % n_out, s_out + (o + 1) % n_out))
                o += 1
            else:
                tris.append((s_in + i % n_in, s_out + o % n_out, s_in + (i + 1) % n_in))
                i += 1
    tris = np.asarray(tris, dtype=np.int64)
    return Mesh(nodes, tris, boundary_edges_from_triangles(tris))


def _barycentric_all(mesh: Mesh, pts: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of every point w.r.t. every triangle, shape (P, T, 3)."""
    p = mesh.nodes[mesh.triangles]
    v0 = p[:, 0]
    T = np.stack([p[:, 1] - v0, p[:, 2] - v0], axis=2)  # (T, 2, 2)
    Tinv = np.linalg.inv(T)
    d = pts[:, None, :] - v0[None, :, :]
    l12 = np.einsum("tij,ptj->pti", Tinv, d)
    l0 = 1.0 - l12.sum(axis=2)
    return np.concatenate([l0[..., None], l12], axis=2)


def locate_points(mesh: Mesh, points: np.ndarray, chunk: int = 256):
    """Vectorized :func:`locate_point`; returns (triangle indices, barycentrics)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    tri_idx = np.empty(len(points), dtype=np.int64)
    bary = np.empty((len(points), 3))
    # chunking keeps memory at O(chunk * T)
    for s in range(0, len(points), chunk):
        block = points[s:s + chunk]
        lam = _barycentric_all(mesh, block)
        worst = lam.min(axis=2)
        exact = worst >= -_EXACT_TOL
        for k in range(len(block)):
            hits = np.flatnonzero(exact[k])
            if hits.size:
                t = hits[0]
            else:
                t = int(np.argmax(worst[k]))
                if worst[k, t] < -SNAP_TOL:
                    raise PointOutsideMesh(f"point {block[k].tolist()} lies outside the mesh")
            tri_idx[s + k] = t
            bary[s + k] = lam[k, t]
    return tri_idx, bary


def locate_point(mesh: Mesh, p) -> tuple[int, np.ndarray]:
    """Containing triangle (lowest index on ties) and barycentric coordinates of ``p``."""
    t, lam = locate_points(mesh, np.asarray(p, dtype=np.float64).reshape(1, 2))
    return int(t[0]), lam[0]
