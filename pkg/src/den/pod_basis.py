"""Spectral bases for the network: snapshot POD (outputs, or joint inputs/outputs) and graph-Laplacian modes."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import RankDeficientWarning, ShapeMismatch
from .linalg import fix_phase
from .mesh import Mesh

KINDS = ("pod_y", "pod_xy", "laplacian")


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    Psi: np.ndarray
    kind: str
    singular_values: np.ndarray | None = None
    # graph eigenvalues for the laplacian kind
    eigenvalues: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")

    @property
    def num_nodes(self) -> int:
        return self.Psi.shape[0]

    @property
    def size(self) -> int:
        return self.Psi.shape[1]


def _pod(snapshots: np.ndarray, K_pod: int, kind: str) -> SpectralBasis:
    Y = np.asarray(snapshots, dtype=np.complex128)
    if Y.ndim != 2:
        raise ShapeMismatch("snapshot matrix must be 2-D")
    if not 1 <= K_pod <= min(Y.shape):
        raise ShapeMismatch(f"K_pod={K_pod} exceeds min(N, snapshots)={min(Y.shape)}")
    U, s, _ = la.svd(Y, full_matrices=False, lapack_driver="gesdd")
    if s[K_pod - 1] < 1e-12 * s[0]:
        warnings.warn(f"snapshot matrix has numerical rank below K_pod={K_pod}", RankDeficientWarning)
    Psi = fix_phase(U[:, :K_pod], normalize=False)
    return SpectralBasis(Psi=Psi, kind=kind, singular_values=s[:K_pod].copy())


def build_pod_y(training_eigvecs: np.ndarray, K_pod: int) -> SpectralBasis:
    """Leading left singular vectors of the output snapshot matrix (N x snapshots)."""
    return _pod(training_eigvecs, K_pod, "pod_y")


def build_pod_xy(inputs: np.ndarray, outputs: np.ndarray, K_pod: int) -> SpectralBasis:
    """POD of ``[X | Y]`` with each block scaled to unit Frobenius norm."""
    Y = np.asarray(outputs, dtype=np.complex128)
    X = np.asarray(inputs, dtype=np.complex128)
    if X.size == 0:
        return _pod(Y, K_pod, "pod_xy")
    if X.shape[0] != Y.shape[0]:
        raise ShapeMismatch("input and output snapshots must share the node dimension")
    blocks = [B / np.linalg.norm(B) for B in (X, Y) if np.linalg.norm(B) > 0]
    return _pod(np.hstack(blocks), K_pod, "pod_xy")


def graph_laplacian(mesh: Mesh) -> sp.csr_matrix:
    e = mesh.edges()
    N = mesh.num_nodes
    adj = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(N, N))
    adj = (adj + adj.T).tocsr()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    return (sp.diags(deg) - adj).tocsr()


def build_laplacian_basis(mesh: Mesh, K_pod: int) -> SpectralBasis:
    """First ``K_pod`` eigenvectors of the combinatorial graph Laplacian ``D - Adj``."""
    N = mesh.num_nodes
    if not 1 <= K_pod <= N:
        raise ShapeMismatch(f"K_pod={K_pod} exceeds N={N}")
    L = graph_laplacian(mesh).toarray()
    w, V = la.eigh(L, subset_by_index=[0, K_pod - 1])
    Psi = fix_phase(V.astype(np.complex128), normalize=False)
    return SpectralBasis(Psi=Psi, kind="laplacian", eigenvalues=w)


def project(basis: SpectralBasis, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z)
    if z.shape[0] != basis.num_nodes:
        raise ShapeMismatch(f"expected {basis.num_nodes} rows, got {z.shape[0]}")
    return basis.Psi.conj().T @ z


def expand(basis: SpectralBasis, c: np.ndarray) -> np.ndarray:
    c = np.asarray(c)
    if c.shape[0] != basis.size:
        raise ShapeMismatch(f"expected {basis.size} coefficient rows, got {c.shape[0]}")
    return basis.Psi @ c


def projection_error(basis: SpectralBasis, Y: np.ndarray) -> float:
    """Relative Frobenius error ``||Y - Psi Psi^H Y|| / ||Y||``."""
    Y = np.asarray(Y)
    r = Y - expand(basis, project(basis, Y))
    return float(np.linalg.norm(r) / np.linalg.norm(Y))
