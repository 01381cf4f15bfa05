import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import projector_loss, random_orthonormal
from den.dataset_io import build_dataset
from den.den_model import DenConfig
from den.errors import ConfigError
from den.mesh import generate_unit_square_mesh
from den.pipeline import train_model
from den.random_field import FieldSpec
from den.trainer import TrainConfig, subspace_loss_value


def _crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_loss_identical_and_orthogonal():
    rng = np.random.default_rng(0)
    Q = random_orthonormal(rng, 20, 4)
    # the Gram regularization eps=1e-10 biases the loss by about k * eps
    assert abs(subspace_loss_value(Q, Q)) <= 1e-8
    full = random_orthonormal(rng, 20, 8)
    assert abs(subspace_loss_value(full[:, 4:], full[:, :4]) - 4.0) <= 1e-8


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 6))
def test_loss_projector_identity(seed, k_U, k_V):
    rng = np.random.default_rng(seed)
    U = _crandn(rng, 25, k_U)
    V = random_orthonormal(rng, 25, k_V)
    assert abs(subspace_loss_value(U, V) - projector_loss(U, V)) <= 1e-8


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_loss_invariant_to_recombination_and_inclusion(seed):
    rng = np.random.default_rng(seed)
    U = _crandn(rng, 30, 5)
    V = random_orthonormal(rng, 30, 3)
    G = _crandn(rng, 5, 5) + 3 * np.eye(5)
    assert abs(subspace_loss_value(U, V) - subspace_loss_value(U @ G, V)) <= 1e-8
    bigger = np.hstack([V @ _crandn(rng, 3, 3), _crandn(rng, 30, 2)])
    assert abs(subspace_loss_value(bigger, V, epsilon=0.0)) <= 1e-8
    # the Gram regularization adds a first-order bias of at most eps * k_V * ||(U^H U)^-1||
    eps = 1e-10
    bias = eps * 3 * np.linalg.norm(np.linalg.inv(bigger.conj().T @ bigger), 2)
    assert 0 <= subspace_loss_value(bigger, V, epsilon=eps) <= 1e-8 + 1.01 * bias


def test_loss_is_batched():
    rng = np.random.default_rng(1)
    U = _crandn(rng, 3, 15, 2)
    V = np.stack([random_orthonormal(rng, 15, 2) for _ in range(3)])
    vals = subspace_loss_value(U, V)
    assert vals.shape == (3,)
    assert np.allclose(vals, [projector_loss(U[i], V[i]) for i in range(3)], atol=1e-10)


def test_random_predictor_expectation():
    # a uniformly random k_U-dim subspace captures k_U/N of each target direction on average
    rng = np.random.default_rng(2)
    N, k = 40, 4
    vals = [subspace_loss_value(random_orthonormal(rng, N, k), random_orthonormal(rng, N, k)) for _ in range(400)]
    assert abs(np.mean(vals) - k * (1 - k / N)) < 0.05


def test_lr_schedule_and_validation():
    c = TrainConfig(lr=0.01, lr_step=20, lr_rate=0.8)
    assert c.lr_at(0) == 0.01 and c.lr_at(19) == 0.01
    assert abs(c.lr_at(20) - 0.008) < 1e-15 and abs(c.lr_at(45) - 0.01 * 0.64) < 1e-15
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0)


@pytest.fixture(scope="module")
def tiny_dataset():
    return build_dataset(generate_unit_square_mesh(8), FieldSpec(), 16, 4, 1.0, 0.75)


def _train(ds, epochs, seed=0):
    mcfg = DenConfig(layers=2, channels=8, K_pod=16, mix_rank=4, bandwidth=2, k_out=4, seed=seed)
    tcfg = TrainConfig(batch_size=4, epochs=epochs, lr=0.01, k_V=4, seed=seed)
    return train_model(ds, mcfg, tcfg)


def test_training_reduces_loss_and_keeps_best(tiny_dataset):
    model, rep = _train(tiny_dataset, 15)
    assert len(rep.train_loss) == 15
    assert rep.train_loss[-1] < 0.5 * rep.train_loss[0]
    assert rep.best_epoch == int(np.argmin(rep.test_loss)) + 1
    loaded = model.numpy_params()
    assert all(np.array_equal(loaded[k], rep.best_params[k]) for k in loaded)


def test_training_is_deterministic(tiny_dataset):
    _, a = _train(tiny_dataset, 3, seed=5)
    _, b = _train(tiny_dataset, 3, seed=5)
    assert a.train_loss == b.train_loss and a.test_loss == b.test_loss
    assert all(np.array_equal(a.final_params[k], b.final_params[k]) for k in a.final_params)


def test_fit_rejects_mismatched_k(tiny_dataset):
    mcfg = DenConfig(layers=1, channels=4, K_pod=8, mix_rank=2, k_out=2)
    with pytest.raises(ConfigError):
        train_model(tiny_dataset, mcfg, TrainConfig(epochs=1, k_V=4))
