import time

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import disk_spectrum
from den.fem import build_system
from den.linalg import fix_phase, orthonormal_columns, spectral_order
from den.mesh import generate_unit_disk_mesh, generate_unit_square_mesh
from den.random_field import FieldSpec, sample_parameter_field
from den.reference_solver import (full_spectrum_boundary, residual_tolerance, solve_steklov)


def _sample_system(mesh, i=0, k2=1.0):
    return build_system(mesh, sample_parameter_field(FieldSpec(), mesh, i), k2)


def test_disk_bessel_convergence():
    ref = disk_spectrum(1.0, 5)
    errs = []
    for h in (0.2, 0.1, 0.05):
        m = generate_unit_disk_mesh(h)
        lam = solve_steklov(build_system(m, np.ones(m.num_nodes), 1.0), 5).eigenvalues
        errs.append(np.max(np.abs(lam - ref) / np.abs(ref)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.02
    # second-order convergence in h
    assert errs[1] / errs[2] > 3.0


def test_matches_dense_generalized_eig():
    mesh = generate_unit_square_mesh(6)
    sysm = _sample_system(mesh, 3)
    w_all = la.eigvals(sysm.A.toarray(), sysm.B.toarray())
    finite = w_all[np.isfinite(w_all) & (np.abs(w_all) < 1e8)]
    finite = finite[spectral_order(finite)][:10]
    res = solve_steklov(sysm, 10)
    assert np.allclose(res.eigenvalues, finite, rtol=1e-7)


def test_residuals_and_normalization():
    mesh = generate_unit_square_mesh(10)
    sysm = _sample_system(mesh, 1)
    res = full_spectrum_boundary(sysm)
    assert len(res) == len(mesh.boundary_nodes)
    assert np.all(res.residuals <= residual_tolerance(sysm.A, sysm.B, res.eigenvalues))
    V = res.eigenvectors
    assert np.allclose(np.linalg.norm(V, axis=0), 1.0)
    piv = V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])]
    assert np.all(piv.imag == 0) and np.all(piv.real > 0)
    mods = np.abs(res.eigenvalues)
    assert np.all(np.diff(mods) >= 0)


def test_non_selfadjoint_spectrum_is_complex():
    mesh = generate_unit_square_mesh(8)
    lam = solve_steklov(_sample_system(mesh, 0, k2=4.0), 12).eigenvalues
    assert np.max(np.abs(lam.imag)) > 1e-3


def test_k_out_of_range():
    mesh = generate_unit_square_mesh(3)
    sysm = _sample_system(mesh)
    with pytest.raises(ValueError):
        solve_steklov(sysm, 0)
    with pytest.raises(ValueError):
        solve_steklov(sysm, len(mesh.boundary_nodes) + 1)


def test_deterministic_bits():
    mesh = generate_unit_square_mesh(8)
    a = solve_steklov(_sample_system(mesh, 5), 12)
    b = solve_steklov(_sample_system(mesh, 5), 12)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def test_square_desk_runtime():
    mesh = generate_unit_square_mesh(27)
    sysm = _sample_system(mesh)
    t = time.perf_counter()
    solve_steklov(sysm, 12)
    assert time.perf_counter() - t < 5.0


def test_spectral_order_tiebreak():
    v = np.array([1 + 0j, -1 + 0j, 1j, -1j, 0.5])
    assert spectral_order(v).tolist() == [4, 1, 3, 2, 0]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000))
def test_fix_phase_invariant_to_scaling(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((7, 3)) + 1j * rng.standard_normal((7, 3))
    c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    assert np.allclose(fix_phase(X), fix_phase(X * c), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000))
def test_orthonormal_columns_property(seed):
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((2, 9, 4)) + 1j * rng.standard_normal((2, 9, 4))
    Q = orthonormal_columns(U)
    assert np.allclose(np.swapaxes(Q, -1, -2).conj() @ Q, np.eye(4), atol=1e-12)
    R = np.swapaxes(Q, -1, -2).conj() @ U
    d = np.diagonal(R, axis1=-2, axis2=-1)
    assert np.all(d.real > 0) and np.allclose(d.imag, 0, atol=1e-12)
    assert np.allclose(np.tril(R, -1), 0, atol=1e-10)
