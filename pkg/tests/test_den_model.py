import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import projector
from den import tensor_core as tc
from den.den_model import (DenConfig, DenModel, InputStats, apply_mixing, band_mask,
                           count_params, init_parameters, input_channels, spectral_layer)
from den.errors import ConfigError, RankCollapse, ShapeMismatch
from den.linalg import orthonormal_columns
from den.pod_basis import SpectralBasis


def _crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _basis(rng, N, K):
    return SpectralBasis(orthonormal_columns(_crandn(rng, N, K)), "pod_y")


def test_count_params_hand_example():
    cfg = DenConfig(layers=1, channels=1, K_pod=1, mix_rank=1, bandwidth=0, k_out=1, mixing_kind="none")
    # lift 4+1, layer R 1 + W 1 + b 1, proj 1+1 -> 10 complex
    assert count_params(cfg) == 20
    assert count_params(cfg) == sum(2 * v.size for v in init_parameters(cfg).values())


@pytest.mark.parametrize("kind", ["none", "blr", "dense", "banded_full"])
def test_count_matches_initialized_tensors(kind):
    cfg = DenConfig(layers=2, channels=5, K_pod=16, mix_rank=3, bandwidth=2, k_out=4, mixing_kind=kind)
    assert count_params(cfg) == sum(2 * v.size for v in init_parameters(cfg).values())


def test_count_ordering():
    base = dict(layers=4, channels=32, K_pod=128, mix_rank=16, bandwidth=5, k_out=12)
    c = {k: count_params(DenConfig(**base, mixing_kind=k)) for k in ("none", "blr", "dense", "banded_full")}
    assert c["none"] < c["blr"] < c["dense"] == c["banded_full"]


def test_init_deterministic_and_seeded():
    a = init_parameters(DenConfig(K_pod=16, mix_rank=4, seed=3))
    b = init_parameters(DenConfig(K_pod=16, mix_rank=4, seed=3))
    c = init_parameters(DenConfig(K_pod=16, mix_rank=4, seed=4))
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert not np.array_equal(a["lift.w"], c["lift.w"])


def test_config_validation_and_roundtrip():
    with pytest.raises(ConfigError):
        DenConfig(mixing_kind="sparse")
    with pytest.raises(ConfigError):
        DenConfig(K_pod=8, mix_rank=9)
    with pytest.raises(ConfigError):
        DenConfig(basis_kind="fourier")
    with pytest.raises(ConfigError):
        DenConfig(channels=8, k_out=12)
    cfg = DenConfig(K_pod=64, mix_rank=8, mixing_kind="dense")
    assert DenConfig.from_dict({k: str(v) for k, v in cfg.to_dict().items()}) == cfg
    with pytest.raises(ConfigError):
        DenConfig.from_dict({"width": 3})


def test_band_mask():
    m = band_mask(5, 1)
    assert m.sum() == 5 + 2 * 4
    assert np.array_equal(band_mask(4, 0), np.eye(4))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 9))
def test_blr_matches_dense_masked_oracle(seed, b):
    rng = np.random.default_rng(seed)
    K, r, d = 10, 3, 4
    cfg = DenConfig(layers=1, channels=d, K_pod=K, mix_rank=r, bandwidth=b, k_out=2)
    U, W = _crandn(rng, K, r), _crandn(rng, K, r)
    c = _crandn(rng, K, d)
    mask = np.array([[1.0 if abs(i - j) <= b else 0.0 for j in range(K)] for i in range(K)])
    expect = (mask * (U @ W.conj().T)) @ c
    got = apply_mixing(cfg, {"layer0.mixU": U, "layer0.mixW": W}, c)
    assert np.allclose(got, expect, atol=1e-12)


def test_mixing_special_cases():
    rng = np.random.default_rng(1)
    K, r, d = 6, 2, 3
    U, W, c = _crandn(rng, K, r), _crandn(rng, K, r), _crandn(rng, K, d)
    f = {"layer0.mixU": U, "layer0.mixW": W}
    full = apply_mixing(DenConfig(layers=1, channels=d, K_pod=K, k_out=2, mix_rank=r, bandwidth=K - 1), f, c)
    assert np.allclose(full, U @ W.conj().T @ c)
    diag = apply_mixing(DenConfig(layers=1, channels=d, K_pod=K, k_out=2, mix_rank=r, bandwidth=0), f, c)
    assert np.allclose(diag, np.diag(U @ W.conj().T)[:, None] * c)
    none = apply_mixing(DenConfig(layers=1, channels=d, K_pod=K, k_out=2, mixing_kind="none"), {}, c)
    assert np.array_equal(none, c)
    M = _crandn(rng, K, K)
    band = apply_mixing(DenConfig(layers=1, channels=d, K_pod=K, k_out=2, bandwidth=1, mixing_kind="banded_full"),
                        {"layer0.mix": M}, c)
    assert np.allclose(band, (band_mask(K, 1) * M) @ c)
    with pytest.raises(ShapeMismatch):
        apply_mixing(DenConfig(layers=1, channels=d, K_pod=K, k_out=2, mix_rank=r), f, c[:5])


def test_spectral_branch_is_projection():
    rng = np.random.default_rng(2)
    N, K, d = 20, 5, 3
    basis = _basis(rng, N, K)
    cfg = DenConfig(layers=1, channels=d, K_pod=K, mix_rank=1, k_out=2, mixing_kind="none")
    p = init_parameters(cfg)
    p["layer0.R"] = np.broadcast_to(np.eye(d, dtype=complex), (K, d, d)).copy()
    p["layer0.w"] = np.zeros((d, d), dtype=complex)
    z = _crandn(rng, d, N)
    out = spectral_layer(cfg, p, 0, basis, z)
    proj = (projector(basis.Psi) @ z.T).T
    assert np.allclose(out, tc.gelu(tc.as_tensor(proj)).value, atol=1e-12)
    with pytest.raises(ShapeMismatch):
        spectral_layer(cfg, p, 0, basis, z[:, :-1])


def test_forward_shapes_and_orthonormality():
    rng = np.random.default_rng(3)
    N = 30
    cfg = DenConfig(layers=2, channels=4, K_pod=8, mix_rank=2, bandwidth=1, k_out=3)
    model = DenModel(cfg, _basis(rng, N, 8))
    n = 1 + 4 * rng.random((2, N)) + 1j * (1 + 4 * rng.random((2, N)))
    X = input_channels(n, rng.random((N, 2)))
    out = model.forward(X)
    assert out["U_raw"].shape == (2, N, 3) and out["Q_U"].shape == (2, N, 3)
    QhQ = np.swapaxes(out["Q_U"], -1, -2).conj() @ out["Q_U"]
    assert np.allclose(QhQ, np.eye(3), atol=1e-12)
    assert np.allclose(projector(out["Q_U"][0]), projector(out["U_raw"][0]), atol=1e-10)
    single = model.forward(X[1].T)
    assert np.allclose(single["Q_U"], out["Q_U"][1], atol=1e-12)
    again = model.forward(X.copy())
    assert np.array_equal(again["Q_U"], out["Q_U"])
    with pytest.raises(ShapeMismatch):
        model.forward(np.zeros((2, N + 1, 4)))


def test_rank_collapse_detected():
    rng = np.random.default_rng(4)
    cfg = DenConfig(layers=1, channels=3, K_pod=4, mix_rank=1, k_out=2)
    model = DenModel(cfg, _basis(rng, 10, 4))
    p = model.numpy_params()
    p["proj.w"][1] = p["proj.w"][0]
    p["proj.b"][1] = p["proj.b"][0]
    model.load_params(p)
    with pytest.raises(RankCollapse):
        model.forward(rng.random((1, 10, 4)))


def test_input_channels_and_stats():
    n = np.array([[1 + 2j, 3 + 4j]])
    xy = np.array([[0.0, 0.5], [1.0, 0.25]])
    X = input_channels(n, xy)
    assert np.array_equal(X[0], [[1, 2, 0, 0.5], [3, 4, 1, 0.25]])
    s = InputStats.fit(X)
    Z = s.apply(X).reshape(-1, 4)
    assert np.allclose(Z.mean(axis=0), 0) and np.allclose(Z.std(axis=0), 1)
    const = InputStats.fit(np.ones((3, 4)))
    assert np.all(const.std == 1.0)


def test_basis_size_mismatch():
    rng = np.random.default_rng(5)
    with pytest.raises(ShapeMismatch):
        DenModel(DenConfig(K_pod=6, mix_rank=2), _basis(rng, 10, 5))
