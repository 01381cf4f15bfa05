import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from den.dataset_io import build_dataset, read_dataset, write_dataset  # noqa: E402
from den.mesh import generate_unit_square_mesh  # noqa: E402
from den.random_field import FieldSpec  # noqa: E402

# optional on-disk cache for the expensive desk-scale artifacts (unset: always recompute)
CACHE_DIR = os.environ.get("DEN_TEST_CACHE")


def cached_dataset(name, build):
    if CACHE_DIR:
        path = os.path.join(CACHE_DIR, f"{name}.dend")
        if os.path.exists(path):
            return read_dataset(path)
        ds = build()
        os.makedirs(CACHE_DIR, exist_ok=True)
        write_dataset(path, ds)
        return ds
    return build()


@pytest.fixture(scope="session")
def square_mesh():
    return generate_unit_square_mesh(27)


@pytest.fixture(scope="session")
def small_dataset(square_mesh):
    return build_dataset(square_mesh, FieldSpec(), 40, 12, 1.0, 0.8)


@pytest.fixture(scope="session")
def desk_dataset(square_mesh):
    return cached_dataset("desk_500", lambda: build_dataset(square_mesh, FieldSpec(), 500, 12, 1.0, 0.8))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# model settings shared by the end-to-end and zero-shot criteria
DESK_MODEL = dict(layers=4, channels=32, K_pod=128, mix_rank=16, bandwidth=5, k_out=12)
DESK_EPOCHS = 100


@pytest.fixture(scope="session")
def desk_model(desk_dataset):
    """Criterion-9 model trained on the desk dataset; returns (model, report, wall seconds)."""
    import time

    from den.dataset_io import read_checkpoint, write_checkpoint
    from den.den_model import DenConfig
    from den.pipeline import train_model
    from den.trainer import TrainConfig

    path = os.path.join(CACHE_DIR, "desk_model.denc") if CACHE_DIR else None
    if path and os.path.exists(path):
        return read_checkpoint(path), None, float("nan")
    t0 = time.perf_counter()
    model, report = train_model(desk_dataset, DenConfig(**DESK_MODEL),
                                TrainConfig(epochs=DESK_EPOCHS, k_V=12))
    wall = time.perf_counter() - t0
    if path:
        write_checkpoint(path, model)
    return model, report, wall


@pytest.fixture(scope="session")
def desk_evaluation(desk_model, desk_dataset):
    from den.pipeline import full_evaluation
    return full_evaluation(desk_model[0], desk_dataset, "test")
