"""Finite-difference checks for every tensor op and for the full training loss."""

from __future__ import annotations

import numpy as np

from . import tensor_core as tc
from .den_model import DenConfig, DenModel
from .linalg import orthonormal_columns
from .pod_basis import SpectralBasis
from .trainer import subspace_loss


def _crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def op_cases(rng) -> dict:
    """Each entry: (list of parameter arrays, function of parameter tensors -> output tensor)."""
    spd = _crandn(rng, 2, 3, 3)
    spd = spd @ np.swapaxes(spd, -1, -2).conj() + 3.0 * np.eye(3)
    mask = (rng.random((4, 4)) > 0.4).astype(float)
    return {
        "add": ([_crandn(rng, 3, 4), _crandn(rng, 4)], lambda a, b: tc.add(a, b)),
        "scale": ([_crandn(rng, 3, 2)], lambda a: tc.scale(a, -1.7)),
        "complex_matmul": ([_crandn(rng, 2, 3, 4), _crandn(rng, 4, 2)], lambda a, b: tc.matmul(a, b)),
        "real_complex_matmul": ([rng.standard_normal((5, 4)), _crandn(rng, 4, 3)], lambda a, b: tc.matmul(a, b)),
        "linear_map": ([_crandn(rng, 5, 3), _crandn(rng, 2, 3), _crandn(rng, 2)],
                       lambda x, W, b: tc.linear_map(x, W, b)),
        "hadamard": ([_crandn(rng, 3, 3), _crandn(rng, 3, 3)], lambda a, b: tc.hadamard(a, b)),
        "hadamard_mask": ([_crandn(rng, 4, 4)], lambda a: tc.hadamard_mask(a, mask)),
        "conj_transpose": ([_crandn(rng, 3, 2)], lambda a: tc.conj_transpose(a)),
        "transpose_axes": ([_crandn(rng, 2, 3, 4)], lambda a: tc.transpose(a, (1, 0, 2))),
        "reshape": ([_crandn(rng, 2, 6)], lambda a: tc.reshape(a, (3, 4))),
        "gelu_complex": ([_crandn(rng, 4, 3)], lambda a: tc.gelu(a)),
        "gelu_real": ([rng.standard_normal((4, 3))], lambda a: tc.gelu(a)),
        "reduce_frobenius_sq": ([_crandn(rng, 3, 3)], lambda a: tc.reduce_frobenius_sq(a)),
        "trace_real": ([_crandn(rng, 2, 3, 3)], lambda a: tc.trace_real(a)),
        "mean_all": ([_crandn(rng, 3, 2)], lambda a: tc.mean_all(a)),
        "hermitian_solve": ([spd, _crandn(rng, 2, 3, 2)], lambda H, X: tc.hermitian_solve(H, X)),
    }


def check_ops(seed: int = 0, probe_count: int = 24) -> dict[str, float]:
    """Max relative FD error per op on small random inputs."""
    rng = np.random.default_rng(seed)
    results = {}
    for name, (arrays, fn) in op_cases(rng).items():
        params = [tc.parameter(a) for a in arrays]
        out0 = fn(*params)
        crng = np.random.default_rng([seed, len(name)])
        C = crng.standard_normal(out0.shape) + (1j * crng.standard_normal(out0.shape) if out0.is_complex else 0.0)

        def f(params=params, fn=fn, C=C):
            return tc.reduce_frobenius_sq(tc.add(fn(*params), C))
        results[name] = tc.grad_check(f, params, probe_count=probe_count, seed=seed)
    return results


def tiny_instance(seed: int = 0, N: int = 24, d: int = 4, K_pod: int = 8, r: int = 2, b: int = 1,
                  k_out: int = 2, k_V: int = 2, batch: int = 3, mixing_kind: str = "blr", layers: int = 4):
    rng = np.random.default_rng(seed)
    Psi = orthonormal_columns(_crandn(rng, N, K_pod))
    basis = SpectralBasis(Psi=Psi, kind="pod_y")
    cfg = DenConfig(layers=layers, channels=d, K_pod=K_pod, mix_rank=r, bandwidth=b, k_out=k_out,
                    mixing_kind=mixing_kind, seed=seed)
    model = DenModel(cfg, basis)
    X = rng.standard_normal((batch, N, 4))
    Q_V = orthonormal_columns(_crandn(rng, batch, N, k_V))
    return model, X, Q_V


def tiny_instance_check(seed: int = 0, probe_count: int = 64, mixing_kind: str = "blr"):
    """(max relative error of the full loss, per-op errors)."""
    model, X, Q_V = tiny_instance(seed, mixing_kind=mixing_kind)

    def f():
        return tc.mean_all(subspace_loss(model.raw_output(X), Q_V))
    err = tc.grad_check(f, model.parameter_list, probe_count=probe_count, seed=seed)
    return err, check_ops(seed)
