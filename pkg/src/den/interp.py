"""P1 transfer between meshes and the zero-shot resolution experiment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import RankCollapse
from .fem import assemble_boundary_mass, assemble_stiffness, build_system
from .linalg import orthonormal_columns
from .mesh import Mesh, locate_points
from .metrics import eigenfunction_table, eigenvalue_metrics, subspace_metrics
from .rayleigh_ritz import reconstruct_eigenpairs
from .reference_solver import solve_steklov

COND_LIMIT = 1e10


@dataclass(frozen=True, eq=False)
class TransferOperator:
    T: sp.csr_matrix
    src: Mesh
    dst: Mesh

    def __call__(self, values: np.ndarray) -> np.ndarray:
        return self.T @ values


def build_interpolation(src: Mesh, dst: Mesh) -> TransferOperator:
    """Row ``i`` holds the barycentric weights of ``dst`` node ``i`` in its ``src`` triangle."""
    tri, lam = locate_points(src, dst.nodes)
    rows = np.repeat(np.arange(dst.num_nodes), 3)
    cols = src.triangles[tri].ravel()
    # weights snapped onto exact vertices and edges leave zeros; drop them
    T = sp.coo_matrix((lam.ravel(), (rows, cols)), shape=(dst.num_nodes, src.num_nodes)).tocsr()
    T.sum_duplicates()
    T.data[np.abs(T.data) < 1e-14] = 0.0
    T.eliminate_zeros()
    T.sort_indices()
    return TransferOperator(T, src, dst)


def transfer_subspace(op: TransferOperator, Q: np.ndarray) -> np.ndarray:
    """Interpolate the columns of ``Q`` and re-orthonormalize them."""
    TQ = op.T @ np.asarray(Q)
    s = np.linalg.svd(TQ, compute_uv=False)
    if s[-1] == 0 or s[0] / s[-1] > COND_LIMIT:
        raise RankCollapse(f"interpolated basis has condition number {s[0] / max(s[-1], 1e-300):.3e}")
    return orthonormal_columns(TQ)


def zero_shot_eval(model, src_mesh: Mesh, dst_mesh: Mesh, n_src: np.ndarray, k_squared: float,
                   K: int, src_truth=None, field_on_dst=None) -> dict:
    """Predict on ``src_mesh``, transfer to ``dst_mesh`` and compare three arms.

    * ``pred``: predicted subspace, transferred, then Rayleigh-Ritz on the dst pencil.
    * ``true``: src reference subspace, transferred, Rayleigh-Ritz on the dst pencil.
    * ``raw``: src reference eigenvalues compared directly with dst reference eigenvalues.

    ``n_src`` is ``(S, N_src)``. ``src_truth`` may pass precomputed src
    eigenpairs as ``(eigvals (S, K), eigvecs (S, N_src, K))``; the dst fields are
    ``T n_src`` unless ``field_on_dst`` gives them explicitly.
    """
    from .den_model import input_channels

    op = build_interpolation(src_mesh, dst_mesh)
    n_src = np.asarray(n_src)
    S = len(n_src)
    n_dst = op.T @ n_src.T if field_on_dst is None else np.asarray(field_on_dst).T
    n_dst = np.ascontiguousarray(n_dst.T)
    Q_pred_src = model.predict_subspaces(input_channels(n_src, src_mesh.nodes))
    S_src, Mb_src = assemble_stiffness(src_mesh), assemble_boundary_mass(src_mesh)
    S_dst, Mb_dst = assemble_stiffness(dst_mesh), assemble_boundary_mass(dst_mesh)
    out = {a: {"eigvals": np.zeros((S, K), dtype=np.complex128), "d_ch": np.zeros(S), "d_pr": np.zeros(S),
               "L1": np.zeros(S), "CS": np.zeros((S, K)), "RelL1": np.zeros((S, K)),
               "MaxAE": np.zeros((S, K))} for a in ("pred", "true")}
    truth_src = np.zeros((S, K), dtype=np.complex128)
    truth_dst = np.zeros((S, K), dtype=np.complex128)
    for s in range(S):
        if src_truth is None:
            ref_src = solve_steklov(build_system(src_mesh, n_src[s], k_squared, S_src, Mb_src), K)
            vals_src, vecs_src = ref_src.eigenvalues, ref_src.eigenvectors
        else:
            vals_src, vecs_src = src_truth[0][s], src_truth[1][s]
        sys_dst = build_system(dst_mesh, n_dst[s], k_squared, S_dst, Mb_dst)
        ref_dst = solve_steklov(sys_dst, K)
        Q_dst_true = orthonormal_columns(ref_dst.eigenvectors)
        truth_src[s] = vals_src
        truth_dst[s] = ref_dst.eigenvalues
        arms = {"pred": Q_pred_src[s], "true": orthonormal_columns(vecs_src)}
        for arm, Q_src in arms.items():
            Q_t = transfer_subspace(op, Q_src)
            ritz = reconstruct_eigenpairs(Q_t, sys_dst, min(K, Q_t.shape[1]))
            rec = out[arm]
            rec["eigvals"][s, :ritz.selected_count] = ritz.ritz_values
            m = subspace_metrics(Q_t, Q_dst_true)
            for k in ("d_ch", "d_pr", "L1"):
                rec[k][s] = m[k]
            ef = eigenfunction_table(ref_dst.eigenvectors, Q_t)
            for k in ("CS", "RelL1", "MaxAE"):
                rec[k][s] = ef[k]
    for arm in ("pred", "true"):
        out[arm].update(eigenvalue_metrics(truth_dst, out[arm]["eigvals"]))
    out["raw"] = eigenvalue_metrics(truth_dst, truth_src)
    out["truth_dst"] = truth_dst
    out["truth_src"] = truth_src
    out["operator"] = op
    return out
