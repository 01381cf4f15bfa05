"""Contours, resolvent norms, Riesz projections and the perturbation bounds built on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.optimize as opt
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ClusterNotSeparable, NotDiagonalizable, SingularResolvent
from .fem import AssembledSystem
from .linalg import power_norm, spectral_norm
from .reference_solver import SpectrumResult

RESOLVENT_CAP = 1e12
RANK_THRESHOLD = 0.5


@dataclass(frozen=True)
class ContourSpec:
    center: complex
    radius: float
    quadrature_nodes: int = 64

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.quadrature_nodes < 8 or self.quadrature_nodes % 2:
            raise ValueError("quadrature_nodes must be even and >= 8")

    @property
    def length(self) -> float:
        return 2.0 * np.pi * self.radius

    def nodes(self) -> np.ndarray:
        theta = 2.0 * np.pi * np.arange(self.quadrature_nodes) / self.quadrature_nodes
        return self.center + self.radius * np.exp(1j * theta)

    def with_nodes(self, q: int) -> "ContourSpec":
        return ContourSpec(self.center, self.radius, q)

    def encloses(self, z) -> np.ndarray:
        return np.abs(np.asarray(z) - self.center) < self.radius

    def distance(self, z) -> np.ndarray:
        return np.abs(np.abs(np.asarray(z) - self.center) - self.radius)


@dataclass(frozen=True)
class ResolventReport:
    R_Gamma: float
    delta: float
    M_norm: float

    @property
    def assumption1_ok(self) -> bool:
        return self.delta > 0

    @property
    def assumption2_ok(self) -> bool:
        return bool(np.isfinite(self.R_Gamma))

    @property
    def assumption3_ok(self) -> bool:
        return self.M_norm * self.R_Gamma < 1.0

    @property
    def ok(self) -> bool:
        return self.assumption1_ok and self.assumption2_ok and self.assumption3_ok


@dataclass(frozen=True, eq=False)
class RieszProjection:
    P: np.ndarray
    contour: ContourSpec
    numeric_rank: int

    @property
    def idempotency_defect(self) -> float:
        return float(np.linalg.norm(self.P @ self.P - self.P, 2))


def _margins(center: complex, inside: np.ndarray, outside: np.ndarray):
    d_in = np.abs(inside - center).max()
    d_out = np.abs(outside - center).min() if outside.size else np.inf
    return d_in, d_out


def design_contour(reference_spectrum, K: int, quadrature_nodes: int = 64,
                   strategy: str = "ratio", cluster_gap: float = 0.05) -> ContourSpec:
    """Circle enclosing the first ``K`` eigenvalues of ``reference_spectrum``.

    ``strategy="centroid"`` centers the circle at the centroid of the enclosed
    eigenvalues. ``strategy="ratio"`` starts there and moves the center to
    maximize ``min outside distance / max inside distance``, which governs
    the convergence rate of trapezoidal quadrature on the circle. The radius is
    the midpoint between the two distances in both cases.

    ``K`` must close a modulus cluster: if ``|lambda_{K+1}|`` exceeds
    ``|lambda_K|`` by less than the relative ``cluster_gap`` the split is
    rejected with :class:`ClusterNotSeparable`.
    """
    eig = reference_spectrum.eigenvalues if isinstance(reference_spectrum, SpectrumResult) \
        else np.asarray(reference_spectrum)
    if not 1 <= K <= len(eig):
        raise ValueError(f"K must lie in [1, {len(eig)}]")
    inside = eig[:K]
    outside = eig[K:]
    if outside.size:
        m_in, m_out = abs(inside[-1]), abs(outside[0])
        if m_out - m_in <= cluster_gap * m_in:
            raise ClusterNotSeparable(
                f"K={K} splits a modulus cluster: |lambda_K|={m_in:.6g}, |lambda_K+1|={m_out:.6g}")
    center = complex(inside.mean())
    if strategy == "ratio" and outside.size:
        def neg_ratio(c):
            d_in, d_out = _margins(complex(c[0], c[1]), inside, outside)
            return -d_out / max(d_in, 1e-300)
        res = opt.minimize(neg_ratio, [center.real, center.imag], method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        if -res.fun > -neg_ratio([center.real, center.imag]):
            center = complex(res.x[0], res.x[1])
    elif strategy not in ("centroid", "ratio"):
        raise ValueError(f"unknown strategy {strategy!r}")
    d_in, d_out = _margins(center, inside, outside)
    if d_in >= d_out:
        raise ClusterNotSeparable(
            f"max inside distance {d_in:.6g} >= min outside distance {d_out:.6g} for K={K}")
    radius = 0.5 * (d_in + d_out) if np.isfinite(d_out) else (2.0 * d_in if d_in > 0 else 1.0)
    return ContourSpec(center, float(radius), quadrature_nodes)


def _factor(system: AssembledSystem, z: complex):
    T = (z * system.B - system.A).tocsc()
    try:
        lu = spla.splu(T)
    except RuntimeError as exc:
        raise SingularResolvent(f"Bz - A is singular at z={z}: {exc}") from exc
    return lu


def resolvent_norm(system: AssembledSystem, z: complex, tol: float = 1e-6) -> float:
    """``||(Bz - A)^{-1}||_2`` by power iteration on the factored solve and its adjoint."""
    lu = _factor(system, z)
    norm = power_norm(lambda x: lu.solve(x), lambda x: lu.solve(x, trans="H"),
                      system.size, tol=tol)
    if not np.isfinite(norm) or norm > RESOLVENT_CAP:
        raise SingularResolvent(f"resolvent norm {norm:.3e} at z={z} exceeds {RESOLVENT_CAP:.0e}")
    return norm


def resolvent_sup(system: AssembledSystem, contour: ContourSpec) -> float:
    return max(resolvent_norm(system, z) for z in contour.nodes())


def riesz_projection(system: AssembledSystem, contour: ContourSpec) -> RieszProjection:
    """Trapezoidal rule for ``(1/2 pi i) oint (Bz - A)^{-1} B dz`` on the circle."""
    b = system.mesh.boundary_nodes
    Bcols = system.B.tocsc()[:, b].toarray().astype(np.complex128)
    acc = np.zeros((system.size, len(b)), dtype=np.complex128)
    q = contour.quadrature_nodes
    for z in contour.nodes():
        lu = _factor(system, z)
        X = lu.solve(Bcols)
        if not np.all(np.isfinite(X)):
            raise SingularResolvent(f"non-finite resolvent solve at z={z}")
        # dz = i r e^{i theta} dtheta, and 1/(2 pi i) * i * 2 pi / q = 1/q
        acc += (z - contour.center) * X
    acc /= q
    P = np.zeros((system.size, system.size), dtype=np.complex128)
    P[:, b] = acc
    s = np.linalg.svd(acc, compute_uv=False)
    return RieszProjection(P, contour, int(np.sum(s > RANK_THRESHOLD)))


def spectral_sum_projection(system: AssembledSystem, eigvecs: np.ndarray) -> np.ndarray:
    """Spectral projector ``sum_j u_j u_j^T B / (u_j^T B u_j)``.

    ``A`` and ``B`` are complex symmetric, so ``conj(u_j)`` is a left
    eigenvector; valid for simple eigenvalues.
    """
    BU = system.B @ eigvecs
    denom = np.einsum("ij,ij->j", eigvecs, BU)
    return (eigvecs / denom[None, :]) @ BU.T


def verify_assumptions(contour: ContourSpec, system_mean: AssembledSystem, sample_systems,
                       reference_spectrum=None) -> list[ResolventReport]:
    """Check the three contour assumptions for each sample against the mean-field pencil."""
    if reference_spectrum is None:
        from .reference_solver import full_spectrum_boundary
        reference_spectrum = full_spectrum_boundary(system_mean)
    eig = reference_spectrum.eigenvalues
    outside = eig[~contour.encloses(eig)]
    delta = float(contour.distance(outside).min()) if outside.size else float("inf")
    try:
        R = resolvent_sup(system_mean, contour)
    except SingularResolvent:
        R = float("inf")
    reports = []
    for s in sample_systems:
        dM = (s.A - system_mean.A)
        reports.append(ResolventReport(R_Gamma=R, delta=delta, M_norm=spectral_norm(dM)))
    return reports


@dataclass(frozen=True)
class StabilityReport:
    lhs: float
    first_order_bound: float
    lipschitz_ratio: float
    R_Gamma: float
    dM_norm: float

    @property
    def slack(self) -> float:
        return 3.0 * self.R_Gamma * self.dM_norm

    @property
    def holds(self) -> bool:
        return self.lhs <= self.first_order_bound * (1.0 + self.slack)


def projection_stability_check(system1: AssembledSystem, system2: AssembledSystem,
                               contour: ContourSpec) -> StabilityReport:
    P1 = riesz_projection(system1, contour).P
    P2 = riesz_projection(system2, contour).P
    lhs = float(np.linalg.norm(P1 - P2, 2))
    R1 = resolvent_sup(system1, contour)
    dM = spectral_norm(system2.A - system1.A)
    Bn = spectral_norm(system1.B)
    bound = contour.length / (2.0 * np.pi) * R1 ** 2 * dM * Bn
    dn = float(np.max(np.abs(system1.n - system2.n)))
    ratio = lhs / dn if dn > 0 else 0.0
    return StabilityReport(lhs, bound, ratio, R1, dM)


def spectral_variation(true_eigs, approx_eigs) -> float:
    """``max_i min_j |approx_j - true_i|``."""
    t = np.asarray(true_eigs).ravel()
    a = np.asarray(approx_eigs).ravel()
    if not t.size or not a.size:
        raise ValueError("both eigenvalue lists must be nonempty")
    return float(np.abs(t[:, None] - a[None, :]).min(axis=1).max())


def pencil_condition_numbers(A_r: np.ndarray, B_r: np.ndarray, cond_limit: float = 1e12):
    """Per-eigenvalue condition numbers ``||x_i|| ||y_i|| / sqrt(|y^H A x|^2 + |y^H B x|^2)``."""
    w, Y, X = la.eig(A_r, B_r, left=True, right=True, homogeneous_eigvals=False)
    if np.linalg.cond(X) > cond_limit or np.linalg.cond(Y) > cond_limit:
        raise NotDiagonalizable("eigenvector matrix is numerically singular")
    Lam = np.einsum("ij,ik,kj->j", Y.conj(), A_r, X)
    Om = np.einsum("ij,ik,kj->j", Y.conj(), B_r, X)
    nu = np.linalg.norm(X, axis=0) * np.linalg.norm(Y, axis=0) / np.sqrt(np.abs(Lam) ** 2 + np.abs(Om) ** 2)
    return {"nu": nu, "nu_max": float(nu.max()), "eigenvalues": w}


def ritz_error_bound(A, B, nu_max: float, sin_theta: float) -> float:
    """``2 sqrt(2) nu_max sin_theta sqrt(||A||^2 + ||B||^2)``; ``A``/``B`` may be norms."""
    if not 0.0 <= sin_theta <= 1.0:
        raise ValueError("sin_theta must lie in [0, 1]")
    a = float(A) if np.isscalar(A) else spectral_norm(A)
    b = float(B) if np.isscalar(B) else spectral_norm(B)
    return 2.0 * np.sqrt(2.0) * nu_max * sin_theta * np.sqrt(a * a + b * b)


def diag_vs_full_error(A_psi: np.ndarray):
    """Best diagonal approximation in Frobenius norm and its residual."""
    A_psi = np.asarray(A_psi)
    if A_psi.ndim != 2 or A_psi.shape[0] != A_psi.shape[1]:
        raise ValueError("input must be square")
    d = np.diag(A_psi).copy()
    off = A_psi - np.diag(d)
    return {"eps_diag": float(np.linalg.norm(off, "fro")), "best_diag": d}


def restricted_rank(M: np.ndarray, signal_basis: np.ndarray, tol: float = 1e-10) -> int:
    """Rank of ``M`` restricted to the span of ``signal_basis``."""
    return int(np.linalg.matrix_rank(M @ signal_basis, tol=tol))
