"""Small dense/sparse linear-algebra helpers shared by the solvers."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

DENSE_LIMIT = 2500


def spectral_order(values: np.ndarray) -> np.ndarray:
    """Indices sorting by ascending modulus, then real part, then imaginary part."""
    v = np.asarray(values)
    return np.lexsort((v.imag, v.real, np.abs(v)))


def fix_phase(columns: np.ndarray, normalize: bool = True) -> np.ndarray:
    """Scale each column to unit norm with its largest-modulus entry real positive."""
    X = np.array(columns, dtype=np.complex128, copy=True)
    if X.ndim == 1:
        return fix_phase(X[:, None], normalize)[:, 0]
    if normalize:
        norms = np.linalg.norm(X, axis=0)
        norms[norms == 0] = 1.0
        X /= norms
    idx = np.argmax(np.abs(X), axis=0)
    pivots = X[idx, np.arange(X.shape[1])]
    phase = np.ones_like(pivots)
    nz = pivots != 0
    phase[nz] = np.abs(pivots[nz]) / pivots[nz]
    X *= phase
    # the pivot is real by construction; drop rounding residue in its imaginary part
    X[idx, np.arange(X.shape[1])] = np.abs(X[idx, np.arange(X.shape[1])])
    return X


def spectral_norm(mat, tol: float = 1e-6, max_iter: int = 1000, seed: int = 0) -> float:
    """Largest singular value; dense SVD up to ``DENSE_LIMIT`` rows, power iteration beyond."""
    if sp.issparse(mat):
        if mat.shape[0] <= DENSE_LIMIT and mat.shape[1] <= DENSE_LIMIT:
            return float(np.linalg.norm(mat.toarray(), 2))
        return power_norm(lambda x: mat @ x, lambda x: mat.conj().T @ x, mat.shape[1],
                          tol=tol, max_iter=max_iter, seed=seed)
    return float(np.linalg.norm(np.asarray(mat), 2))


def power_norm(apply, apply_adjoint, n: int, tol: float = 1e-6, max_iter: int = 1000,
               seed: int = 0) -> float:
    """Power iteration on ``T^H T`` for ``||T||_2`` with relative tolerance ``tol``."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(max_iter):
        y = apply(x)
        sigma = np.linalg.norm(y)
        if sigma == 0.0:
            return 0.0
        x = apply_adjoint(y)
        nx = np.linalg.norm(x)
        x /= nx
        new = np.sqrt(nx)
        if est > 0 and abs(new - est) <= tol * new:
            return float(new)
        est = new
    return float(est)


def orthonormal_columns(U: np.ndarray) -> np.ndarray:
    """Thin QR with the R-factor diagonal made real positive."""
    Q, R = np.linalg.qr(U)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    mag = np.abs(d)
    phase = np.where(mag == 0, 1.0, d / np.where(mag == 0, 1.0, mag))
    return Q * phase[..., None, :]
