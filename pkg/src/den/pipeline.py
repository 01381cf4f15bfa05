"""Glue between run configuration and the numerical modules: data, bases, training, evaluation."""

from __future__ import annotations

import numpy as np

from .config import RunConfig
from .dataset_io import Dataset, build_dataset
from .den_model import DenConfig, DenModel, InputStats, count_params
from .errors import ConfigError
from .mesh import Mesh, generate_unit_disk_mesh, generate_unit_square_mesh
from .metrics import eigenfunction_table, eigenvalue_metrics, subspace_metrics
from .pod_basis import SpectralBasis, build_laplacian_basis, build_pod_xy, build_pod_y
from .random_field import FieldSpec
from .rayleigh_ritz import reconstruct_eigenpairs
from .trainer import TrainConfig, TrainReport, evaluate, fit


def mesh_from_config(cfg: RunConfig) -> Mesh:
    kind = cfg["mesh.kind"]
    if kind == "square":
        return generate_unit_square_mesh(cfg.get_int("mesh.subdivisions"))
    if kind == "disk":
        return generate_unit_disk_mesh(cfg.get_float("mesh.edge_length"))
    raise ConfigError(f"mesh.kind must be 'square' or 'disk', got {kind!r}")


def field_spec_from_config(cfg: RunConfig) -> FieldSpec:
    try:
        return FieldSpec(mode_min=cfg.get_int("field.mode_min"), mode_max=cfg.get_int("field.modes"),
                         beta=cfg.get_float("field.beta"), real_range=cfg.get_range("field.real_range"),
                         imag_range=cfg.get_range("field.imag_range"), seed=cfg.get_int("field.seed"),
                         weight_exponent_sign=cfg.get_int("field.weight_sign"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def dataset_from_config(cfg: RunConfig, mesh: Mesh | None = None, k_squared: float | None = None) -> Dataset:
    mesh = mesh_from_config(cfg) if mesh is None else mesh
    K = cfg.get_int("experiment.K")
    return build_dataset(mesh, field_spec_from_config(cfg), cfg.get_int("experiment.samples"), K,
                         cfg.get_float("physics.k_squared") if k_squared is None else k_squared,
                         cfg.get_float("experiment.train_frac"), min(cfg.get_int("experiment.k_V"), K))


def model_config_from(cfg: RunConfig, **overrides) -> DenConfig:
    kw = dict(layers=cfg.get_int("model.layers"), channels=cfg.get_int("model.channels"),
              K_pod=cfg.get_int("model.K_pod"), mix_rank=cfg.get_int("model.mix_rank"),
              bandwidth=cfg.get_int("model.bandwidth"), k_out=cfg.get_int("experiment.k_out"),
              basis_kind=cfg["model.basis"], mixing_kind=cfg["model.mixing"], seed=cfg.get_int("model.seed"))
    kw.update(overrides)
    return DenConfig(**kw)


def train_config_from(cfg: RunConfig, **overrides) -> TrainConfig:
    kw = dict(batch_size=cfg.get_int("train.batch_size"), epochs=cfg.get_int("train.epochs"),
              lr=cfg.get_float("train.lr"), lr_step=cfg.get_int("train.lr_step"),
              lr_rate=cfg.get_float("train.lr_rate"), weight_decay=cfg.get_float("train.weight_decay"),
              k_V=min(cfg.get_int("experiment.k_V"), cfg.get_int("experiment.K")),
              gram_epsilon=cfg.get_float("train.gram_epsilon"), seed=cfg.get_int("train.seed"))
    kw.update(overrides)
    return TrainConfig(**kw)


def basis_for(kind: str, dataset: Dataset, K_pod: int) -> SpectralBasis:
    """Spectral basis of the requested kind from the training split."""
    tr = dataset.split("train")
    if kind == "laplacian":
        return build_laplacian_basis(dataset.mesh, K_pod)
    Y = np.concatenate(list(dataset.eigvecs[tr, :, :dataset.k_V]), axis=1)
    if kind == "pod_y":
        return build_pod_y(Y, K_pod)
    if kind == "pod_xy":
        X = np.concatenate(list(dataset.inputs("train")), axis=1).astype(np.complex128)
        return build_pod_xy(X, Y, K_pod)
    raise ConfigError(f"unknown basis kind {kind!r}")


def train_model(dataset: Dataset, model_cfg: DenConfig, train_cfg: TrainConfig,
                basis: SpectralBasis | None = None, callback=None) -> tuple[DenModel, TrainReport]:
    """Fit a fresh model; the returned model holds the best-test-loss parameters."""
    if basis is None:
        basis = basis_for(model_cfg.basis_kind, dataset, model_cfg.K_pod)
    X_tr = dataset.inputs("train")
    stats = InputStats.fit(X_tr)
    model = DenModel(model_cfg, basis, stats=stats)
    te = dataset.split("test")
    report = fit(model, X_tr, dataset.Q_V[dataset.split("train")], train_cfg,
                 dataset.inputs("test"), dataset.Q_V[te], callback=callback)
    model.load_params(report.best_params)
    return model, report


def full_evaluation(model: DenModel, dataset: Dataset, part: str = "test", K: int | None = None) -> dict:
    """Subspace, eigenvalue (via Rayleigh-Ritz) and eigenfunction metrics on a split."""
    sl = dataset.split(part)
    K = dataset.K if K is None else K
    sub = evaluate(model, dataset.inputs(part), dataset.Q_V[sl])
    Q_U = sub.pop("Q_U")
    ids = np.arange(dataset.size)[sl]
    ritz_vals = np.zeros((len(ids), K), dtype=np.complex128)
    ef = {k: np.zeros((len(ids), K)) for k in ("MaxAE", "CS", "RelL1")}
    for j, i in enumerate(ids):
        system = dataset.system(i)
        res = reconstruct_eigenpairs(Q_U[j], system, min(K, Q_U.shape[2]))
        ritz_vals[j, :res.selected_count] = res.ritz_values
        table = eigenfunction_table(dataset.eigvecs[i][:, :K], Q_U[j])
        for k in ef:
            ef[k][j] = table[k]
    ev = eigenvalue_metrics(dataset.eigvals[sl, :K], ritz_vals)
    return {"subspace": sub, "ritz_values": ritz_vals, "eigenvalue": ev,
            "eigenfunction": ef, "sample_ids": dataset.sample_ids[sl], "Q_U": Q_U}


def subspace_rows(result: dict) -> list[dict]:
    sub = result["subspace"]
    return [{"sample_id": int(sid), "L1": sub["L1"][j], "d_pr": sub["d_pr"][j], "d_ch": sub["d_ch"][j]}
            for j, sid in enumerate(result["sample_ids"])]


def index_rows(result: dict) -> list[dict]:
    ev, ef = result["eigenvalue"], result["eigenfunction"]
    K = len(ev["MAE"])
    return [{"index": k + 1, "MAE": ev["MAE"][k], "R2": ev["R2"][k], "MAPE": ev["MAPE"][k],
             "MaxAE": ef["MaxAE"][:, k].mean(), "CS": ef["CS"][:, k].mean(), "RelL1": ef["RelL1"][:, k].mean()}
            for k in range(K)]


def ritz_rows(result: dict) -> list[dict]:
    rows = []
    for j, sid in enumerate(result["sample_ids"]):
        for k, mu in enumerate(result["ritz_values"][j]):
            rows.append({"sample_id": int(sid), "index": k + 1, "ritz_value": complex(mu)})
    return rows


def params_table(cfg: DenConfig) -> list[dict]:
    from dataclasses import replace
    return [{"mixing": m, "params": count_params(replace(cfg, mixing_kind=m))}
            for m in ("none", "blr", "banded_full", "dense")]
