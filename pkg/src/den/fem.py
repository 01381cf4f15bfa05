"""P1 finite-element assembly for the Steklov pencil ``A(n) x = lambda B x``.

``A(n) = -S + k^2 M_n`` and ``B = M_b`` where ``S`` is the stiffness matrix,
``M_n`` the mass matrix weighted by the refractive index, and ``M_b`` the
boundary mass matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateTriangle, ShapeMismatch
from .mesh import Mesh
from .random_field import ParameterField

AREA_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    S: sp.csr_matrix
    M_n: sp.csr_matrix
    M_b: sp.csr_matrix
    A: sp.csr_matrix
    B: sp.csr_matrix
    k_squared: float
    mesh: Mesh
    n: np.ndarray

    @property
    def size(self) -> int:
        return self.A.shape[0]


def _finalize(rows, cols, vals, N) -> sp.csr_matrix:
    # COO -> CSR sums duplicates in input order, so the result is bit-stable
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    mat.sort_indices()
    return mat


def _element_geometry(mesh: Mesh):
    p = mesh.nodes[mesh.triangles]
    area = mesh.signed_areas()
    if np.any(area < AREA_TOL):
        bad = int(np.flatnonzero(area < AREA_TOL)[0])
        raise DegenerateTriangle(f"triangle {bad} has area {area[bad]:.3e}")
    return p, area


def _local_pattern(tris: np.ndarray):
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    return rows, cols


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    p, area = _element_geometry(mesh)
    # gradient of barycentric basis function a is rot90(edge opposite a) / (2|K|)
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)  # (T,3,2)
    local = np.einsum("tai,tbi->tab", e, e) / (4.0 * area)[:, None, None]
    rows, cols = _local_pattern(mesh.triangles)
    return _finalize(rows, cols, local.ravel(), mesh.num_nodes)


def _nodal_values(mesh: Mesh, n) -> np.ndarray:
    vals = n.values if isinstance(n, ParameterField) else np.asarray(n)
    if vals.shape != (mesh.num_nodes,):
        raise ShapeMismatch(f"expected {mesh.num_nodes} nodal values, got shape {vals.shape}")
    return vals


def assemble_mass_weighted(mesh: Mesh, n) -> sp.csr_matrix:
    """Mass matrix weighted by ``n`` using edge-midpoint quadrature.

    Midpoint values are averages of the two endpoint nodal values. Local
    entries are ``|K|/12 * (n_ab + n_ac)`` on the diagonal (vertex ``a``) and
    ``|K|/12 * n_ab`` off the diagonal.
    """
    _, area = _element_geometry(mesh)
    vals = _nodal_values(mesh, n).astype(np.complex128)
    nv = vals[mesh.triangles]
    m01 = 0.5 * (nv[:, 0] + nv[:, 1])
    m12 = 0.5 * (nv[:, 1] + nv[:, 2])
    m02 = 0.5 * (nv[:, 0] + nv[:, 2])
    w = area / 12.0
    local = np.empty((mesh.num_triangles, 3, 3), dtype=np.complex128)
    local[:, 0, 0] = w * (m01 + m02)
    local[:, 1, 1] = w * (m01 + m12)
    local[:, 2, 2] = w * (m02 + m12)
    local[:, 0, 1] = local[:, 1, 0] = w * m01
    local[:, 1, 2] = local[:, 2, 1] = w * m12
    local[:, 0, 2] = local[:, 2, 0] = w * m02
    rows, cols = _local_pattern(mesh.triangles)
    return _finalize(rows, cols, local.ravel(), mesh.num_nodes)


def assemble_boundary_mass(mesh: Mesh) -> sp.csr_matrix:
    h = mesh.boundary_edge_lengths()
    local = np.empty((len(h), 2, 2))
    local[:, 0, 0] = local[:, 1, 1] = h / 3.0
    local[:, 0, 1] = local[:, 1, 0] = h / 6.0
    be = mesh.boundary_edges
    rows = np.repeat(be, 2, axis=1).ravel()
    cols = np.tile(be, (1, 2)).ravel()
    return _finalize(rows, cols, local.ravel(), mesh.num_nodes)


def build_system(mesh: Mesh, n, k_squared: float, stiffness=None, boundary_mass=None) -> AssembledSystem:
    """Assemble the pencil; ``stiffness``/``boundary_mass`` may be passed in to reuse them."""
    if not k_squared > 0:
        raise ValueError("k_squared must be positive")
    S = assemble_stiffness(mesh) if stiffness is None else stiffness
    M_b = assemble_boundary_mass(mesh) if boundary_mass is None else boundary_mass
    M_n = assemble_mass_weighted(mesh, n)
    A = (-S.astype(np.complex128) + k_squared * M_n).tocsr()
    A.sort_indices()
    return AssembledSystem(S=S, M_n=M_n, M_b=M_b, A=A, B=M_b, k_squared=float(k_squared),
                           mesh=mesh, n=np.asarray(_nodal_values(mesh, n), dtype=np.complex128))


def mass_lipschitz_constant(mesh: Mesh) -> float:
    """Operator norm of ``n -> M_n`` from the sup-norm to the spectral norm.

    All midpoint weights are non-negative, so entrywise ``|M_d| <= ||d||_inf M_1``
    and the constant field attains the maximum: the constant is ``||M_1||_2``.
    """
    M1 = assemble_mass_weighted(mesh, np.ones(mesh.num_nodes))
    return float(np.linalg.norm(M1.real.toarray(), 2))
