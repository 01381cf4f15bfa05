import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from den.errors import RankDeficientWarning, ShapeMismatch
from den.mesh import generate_unit_square_mesh
from den.pod_basis import (SpectralBasis, build_laplacian_basis, build_pod_xy, build_pod_y,
                           expand, graph_laplacian, project, projection_error)


def _crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 10))
def test_pod_orthonormal_and_eckart_young(seed, K):
    rng = np.random.default_rng(seed)
    Y = _crandn(rng, 30, 15)
    b = build_pod_y(Y, K)
    assert np.allclose(b.Psi.conj().T @ b.Psi, np.eye(K), atol=1e-10)
    assert np.all(np.diff(b.singular_values) <= 0)
    s = np.linalg.svd(Y, compute_uv=False)
    resid = np.linalg.norm(Y - b.Psi @ (b.Psi.conj().T @ Y)) ** 2
    assert abs(resid - np.sum(s[K:] ** 2)) <= 1e-8 * np.sum(s ** 2)


def test_pod_is_optimal_against_random_subspaces():
    rng = np.random.default_rng(0)
    Y = _crandn(rng, 40, 6) @ _crandn(rng, 6, 50) + 0.01 * _crandn(rng, 40, 50)
    best = projection_error(build_pod_y(Y, 6), Y)
    for _ in range(20):
        Q, _ = np.linalg.qr(_crandn(rng, 40, 6))
        assert projection_error(SpectralBasis(Q, "pod_y"), Y) >= best


def test_pod_xy_reduces_to_pod_y_without_inputs():
    rng = np.random.default_rng(1)
    Y = _crandn(rng, 20, 10)
    a = build_pod_y(Y, 5).Psi
    b = build_pod_xy(np.zeros((20, 0)), Y, 5).Psi
    assert np.allclose(a, b, atol=1e-12)
    assert build_pod_xy(rng.standard_normal((20, 4)), Y, 5).kind == "pod_xy"
    with pytest.raises(ShapeMismatch):
        build_pod_xy(rng.standard_normal((19, 4)), Y, 5)


def test_rank_deficient_warns_and_too_large_raises():
    rng = np.random.default_rng(2)
    Y = _crandn(rng, 20, 2) @ _crandn(rng, 2, 10)
    with pytest.warns(RankDeficientWarning):
        build_pod_y(Y, 4)
    with pytest.raises(ShapeMismatch):
        build_pod_y(Y, 11)


def test_laplacian_basis():
    mesh = generate_unit_square_mesh(6)
    L = graph_laplacian(mesh).toarray()
    assert np.allclose(L, L.T) and np.allclose(L.sum(axis=1), 0)
    b = build_laplacian_basis(mesh, 8)
    assert abs(b.eigenvalues[0]) < 1e-10
    assert np.allclose(np.abs(b.Psi[:, 0]), 1 / np.sqrt(mesh.num_nodes))
    assert np.allclose(b.Psi.conj().T @ b.Psi, np.eye(8), atol=1e-10)
    assert np.all(np.diff(b.eigenvalues) >= -1e-12)
    with pytest.raises(ShapeMismatch):
        build_laplacian_basis(mesh, mesh.num_nodes + 1)


def test_project_expand_shapes():
    rng = np.random.default_rng(3)
    b = build_pod_y(_crandn(rng, 12, 8), 4)
    c = project(b, _crandn(rng, 12, 3))
    assert c.shape == (4, 3)
    assert expand(b, c).shape == (12, 3)
    with pytest.raises(ShapeMismatch):
        project(b, np.zeros((11, 3)))
    with pytest.raises(ShapeMismatch):
        expand(b, np.zeros((5, 3)))
    with pytest.raises(ValueError):
        SpectralBasis(b.Psi, "bogus")


def test_pod_deterministic_phase():
    rng = np.random.default_rng(4)
    Y = _crandn(rng, 15, 9)
    a = build_pod_y(Y, 5).Psi
    b = build_pod_y(Y * np.exp(0.3j), 5).Psi
    assert np.allclose(a, b, atol=1e-10)
