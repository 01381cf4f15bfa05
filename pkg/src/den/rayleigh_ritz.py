"""Eigenpair recovery by Galerkin projection of the pencil onto a subspace."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import ReducedPencilSingular, ShapeMismatch
from .fem import AssembledSystem
from .linalg import fix_phase, spectral_order

COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class RitzResult:
    ritz_values: np.ndarray
    reduced_vectors: np.ndarray
    lifted_vectors: np.ndarray | None = None
    selected_count: int = 0


def reduce(Q_U: np.ndarray, system: AssembledSystem) -> tuple[np.ndarray, np.ndarray]:
    """``Q^H A Q`` and ``Q^H B Q`` via sparse-dense products."""
    Q = np.asarray(Q_U)
    if Q.shape[0] != system.size:
        raise ShapeMismatch(f"basis has {Q.shape[0]} rows, system has {system.size}")
    QH = Q.conj().T
    return QH @ (system.A @ Q), QH @ (system.B @ Q)


def solve_reduced(A_hat: np.ndarray, B_hat: np.ndarray) -> RitzResult:
    c = np.linalg.cond(B_hat)
    if not np.isfinite(c) or c >= COND_LIMIT:
        raise ReducedPencilSingular(f"reduced B has condition number {c:.3e}")
    mu, W = la.eig(A_hat, B_hat)
    if not np.all(np.isfinite(mu)):
        raise ReducedPencilSingular("reduced pencil has infinite eigenvalues")
    order = spectral_order(mu)
    return RitzResult(ritz_values=mu[order], reduced_vectors=W[:, order], selected_count=len(mu))


def reconstruct_eigenpairs(Q_U: np.ndarray, system: AssembledSystem, K: int) -> RitzResult:
    """Ritz pairs from ``span(Q_U)``; keeps the ``K`` smallest-modulus values."""
    Q = np.asarray(Q_U)
    if not 1 <= K <= Q.shape[1]:
        raise ShapeMismatch(f"K={K} must lie in [1, {Q.shape[1]}]")
    res = solve_reduced(*reduce(Q, system))
    W = res.reduced_vectors[:, :K]
    raw = Q @ W
    lifted = fix_phase(raw)
    # carry the same per-column scaling to the reduced coordinates
    idx = np.argmax(np.abs(lifted), axis=0)
    cols = np.arange(K)
    W = W * (lifted[idx, cols] / raw[idx, cols])
    return RitzResult(ritz_values=res.ritz_values[:K], reduced_vectors=W, lifted_vectors=lifted,
                      selected_count=K)


def ritz_residuals(system: AssembledSystem, result: RitzResult) -> np.ndarray:
    U = result.lifted_vectors
    R = system.A @ U - (system.B @ U) * result.ritz_values[None, :]
    return np.linalg.norm(R, axis=0)
