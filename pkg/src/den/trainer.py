"""Subspace loss, mini-batch Adam training and test evaluation."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor_core as tc
from .den_model import DenModel
from .errors import ConfigError, NonFiniteLoss
from .metrics import subspace_metrics

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    epochs: int = 201
    lr: float = 0.01
    lr_step: int = 20
    lr_rate: float = 0.8
    weight_decay: float = 1e-6
    k_V: int = 12
    gram_epsilon: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0 or self.lr_step < 1:
            raise ConfigError("batch_size and lr_step must be positive, epochs non-negative")
        if self.k_V < 1:
            raise ConfigError("k_V must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    def lr_at(self, epoch: int) -> float:
        return self.lr * self.lr_rate ** (epoch // self.lr_step)


@dataclass(eq=False)
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    best_epoch: int = -1
    best_params: dict | None = None
    final_params: dict | None = None

    def rows(self):
        for e, (a, b) in enumerate(zip(self.train_loss, self.test_loss)):
            yield {"epoch": e + 1, "train_L1": a, "test_L1": b}


def subspace_loss(U_raw, Q_V: np.ndarray, epsilon: float = 1e-10) -> tc.Tensor:
    """Per-sample ``k_V - Re tr(G (U^H U + eps I)^{-1} G^H)`` with ``G = Q_V^H U``.

    Works batched over leading axes and returns a tensor of per-sample losses.
    Equal to ``k_V - ||Q_V^H Q_U||_F^2`` because ``U (U^H U)^{-1} U^H`` is the
    orthogonal projector onto ``span(U)``.
    """
    U = tc.as_tensor(U_raw)
    Q_V = np.asarray(Q_V)
    k_V = Q_V.shape[-1]
    k_U = U.shape[-1]
    QH = tc.Tensor(np.ascontiguousarray(np.swapaxes(Q_V, -1, -2).conj()))
    G = tc.matmul(QH, U)
    gram = tc.add(tc.matmul(tc.conj_transpose(U), U), epsilon * np.eye(k_U))
    Y = tc.hermitian_solve(gram, tc.conj_transpose(G))
    fit = tc.trace_real(tc.matmul(G, Y))
    return tc.add(float(k_V), tc.scale(fit, -1.0))


def subspace_loss_value(U_raw: np.ndarray, Q_V: np.ndarray, epsilon: float = 1e-10) -> np.ndarray:
    return subspace_loss(tc.Tensor(U_raw), Q_V, epsilon).value


def _batch_loss(model: DenModel, inputs: np.ndarray, targets: np.ndarray, eps: float) -> tc.Tensor:
    return tc.mean_all(subspace_loss(model.raw_output(inputs), targets, eps))


def _param_norm(model: DenModel) -> float:
    return float(np.sqrt(sum(np.sum(np.abs(p.value) ** 2) for p in model.parameter_list)))


def dataset_loss(model: DenModel, inputs: np.ndarray, targets: np.ndarray, eps: float = 1e-10,
                 batch_size: int = 32) -> float:
    total = 0.0
    for i in range(0, len(inputs), batch_size):
        total += float(np.sum(subspace_loss(model.raw_output(inputs[i:i + batch_size]),
                                            targets[i:i + batch_size], eps).value))
    return total / max(len(inputs), 1)


def fit(model: DenModel, train_inputs: np.ndarray, train_targets: np.ndarray,
        config: TrainConfig, test_inputs=None, test_targets=None, callback=None) -> TrainReport:
    """Train ``model`` in place.

    ``*_inputs`` are raw ``(S, N, 4)`` channels, ``*_targets`` orthonormal
    ``(S, N, k_V)`` bases. Test loss is evaluated after every epoch; the
    parameters with the lowest test loss (or train loss without a test set)
    are kept in the report.
    """
    if train_targets.shape[-1] != config.k_V:
        raise ConfigError(f"targets have {train_targets.shape[-1]} columns, k_V={config.k_V}")
    if config.k_V > model.config.k_out:
        raise ConfigError("k_V must not exceed k_out")
    params = model.parameter_list
    state = tc.AdamState(params, lr=config.lr, weight_decay=config.weight_decay)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x545241]))
    report = TrainReport()
    S = len(train_inputs)
    best = np.inf
    t0 = time.perf_counter()
    for epoch in range(config.epochs):
        state.lr = config.lr_at(epoch)
        order = rng.permutation(S)
        acc = 0.0
        for start in range(0, S, config.batch_size):
            ids = np.sort(order[start:start + config.batch_size])
            for p in params:
                p.zero_grad()
            loss = _batch_loss(model, train_inputs[ids], train_targets[ids], config.gram_epsilon)
            val = float(loss.value)
            if not np.isfinite(val):
                raise NonFiniteLoss(f"epoch {epoch + 1}: non-finite loss on samples {ids.tolist()}, "
                                    f"parameter norm {_param_norm(model):.3e}")
            tc.backward(loss)
            tc.adam_step(state, params)
            acc += val * len(ids)
        report.train_loss.append(acc / S)
        if test_inputs is not None and len(test_inputs):
            report.test_loss.append(dataset_loss(model, test_inputs, test_targets, config.gram_epsilon))
        else:
            report.test_loss.append(float("nan"))
        score = report.test_loss[-1] if test_inputs is not None and len(test_inputs) else report.train_loss[-1]
        if score < best:
            best = score
            report.best_epoch = epoch + 1
            report.best_params = model.numpy_params()
        log.info("epoch %d lr %.3e train %.4e test %.4e", epoch + 1, state.lr,
                 report.train_loss[-1], report.test_loss[-1])
        if callback is not None:
            callback(epoch, report)
    report.wall_time = time.perf_counter() - t0
    report.final_params = model.numpy_params()
    if report.best_params is None:
        report.best_params = report.final_params
    return report


def evaluate(model: DenModel, inputs: np.ndarray, targets: np.ndarray, predict=None) -> dict:
    """Mean L1 and per-sample ``L1``, ``d_pr``, ``d_ch`` on a split.

    ``predict`` may replace the model with any map from inputs to ``(S, N, k)``
    orthonormal bases.
    """
    Q_U = model.predict_subspaces(inputs) if predict is None else predict(inputs)
    rows = [subspace_metrics(Q_U[s], targets[s]) for s in range(len(targets))]
    out = {k: np.array([r[k] for r in rows]) for k in ("L1", "d_pr", "d_ch")}
    out["mean_L1"] = float(out["L1"].mean())
    out["mean_d_pr"] = float(out["d_pr"].mean())
    out["mean_d_ch"] = float(out["d_ch"].mean())
    out["Q_U"] = Q_U
    return out
