"""Ground-truth eigenpairs of the Steklov pencil via reduction to boundary unknowns.

``B`` vanishes on interior rows, so eliminating the interior block leaves a
dense ``n_b x n_b`` pencil with symmetric positive definite right-hand side:

    A_s = A_bb - A_bi A_ii^{-1} A_ib,    A_s u_b = lambda B_bb u_b,

which a Cholesky factor of ``B_bb`` turns into a standard eigenproblem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InteriorSingular, SolverNoConverge
from .fem import AssembledSystem
from .linalg import fix_phase, spectral_order


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray

    def __len__(self):
        return len(self.eigenvalues)

    def head(self, K: int) -> "SpectrumResult":
        return SpectrumResult(self.eigenvalues[:K], self.eigenvectors[:, :K], self.residuals[:K])


def pencil_residuals(A, B, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    R = A @ vectors - (B @ vectors) * values[None, :]
    return np.linalg.norm(R, axis=0)


def residual_tolerance(A, B, values: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    a1 = abs(A).sum(axis=0).max()
    b1 = abs(B).sum(axis=0).max()
    return rtol * (a1 + np.abs(values) * b1)


def _schur_reduction(system: AssembledSystem):
    mesh = system.mesh
    b = mesh.boundary_nodes
    i = mesh.interior_nodes
    A = system.A.tocsc()
    A_ii = A[i][:, i].tocsc()
    A_ib = A[i][:, b].toarray()
    A_bi = A[b][:, i].toarray()
    A_bb = A[b][:, b].toarray()
    if len(i):
        try:
            lu = spla.splu(A_ii)
        except RuntimeError as exc:
            raise InteriorSingular(f"interior block factorization failed: {exc}") from exc
        X = lu.solve(A_ib)
        if not np.all(np.isfinite(X)):
            raise InteriorSingular("interior block solve produced non-finite values")
    else:
        X = np.zeros((0, len(b)), dtype=np.complex128)
    A_s = A_bb - A_bi @ X
    B_bb = system.B.tocsc()[b][:, b].toarray()
    return b, i, A_s, B_bb, X


def _solve_all(system: AssembledSystem) -> SpectrumResult:
    b, i, A_s, B_bb, X = _schur_reduction(system)
    try:
        L = la.cholesky(B_bb, lower=True)
        C = la.solve_triangular(L, A_s, lower=True)
        C = la.solve_triangular(L, C.conj().T, lower=True).conj().T
        w, V = la.eig(C)
        U_b = la.solve_triangular(L.conj().T, V, lower=False)
    except (la.LinAlgError, ValueError) as exc:
        raise SolverNoConverge(f"dense boundary eigensolve failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise SolverNoConverge("non-finite eigenvalues")
    N = system.size
    U = np.zeros((N, len(b)), dtype=np.complex128)
    U[b] = U_b
    U[i] = -X @ U_b
    order = spectral_order(w)
    w = w[order]
    U = fix_phase(U[:, order])
    res = pencil_residuals(system.A, system.B, w, U)
    return SpectrumResult(w, U, res)


def solve_steklov(system: AssembledSystem, K: int) -> SpectrumResult:
    """First ``K`` eigenpairs by ascending modulus."""
    nb = len(system.mesh.boundary_nodes)
    if not 1 <= K <= nb:
        raise ValueError(f"K must lie in [1, {nb}]")
    return _solve_all(system).head(K)


def full_spectrum_boundary(system: AssembledSystem) -> SpectrumResult:
    """All ``n_b`` finite eigenvalues of the pencil."""
    return _solve_all(system)
