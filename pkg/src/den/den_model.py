"""Deep eigenspace network: lift, spectral layers with cross-mode mixing, projection, QR.

Latent states are laid out as ``(N, batch, d)`` so that the basis transforms
``Psi^H z`` and ``Psi c`` are single GEMMs over ``batch * d`` columns and the
per-mode channel mix is a batched matmul over the mode axis.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from . import tensor_core as tc
from .errors import ConfigError, RankCollapse, ShapeMismatch
from .linalg import orthonormal_columns
from .pod_basis import KINDS, SpectralBasis

MIXING_KINDS = ("blr", "banded_full", "dense", "none")
IN_CHANNELS = 4


@dataclass(frozen=True)
class DenConfig:
    layers: int = 4
    channels: int = 32
    K_pod: int = 240
    mix_rank: int = 32
    bandwidth: int = 5
    k_out: int = 12
    basis_kind: str = "pod_y"
    mixing_kind: str = "blr"
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1 or self.channels < 1 or self.K_pod < 1:
            raise ConfigError("layers, channels and K_pod must be positive")
        if self.mixing_kind == "blr" and not 1 <= self.mix_rank <= self.K_pod:
            raise ConfigError("mix_rank must lie in [1, K_pod]")
        if self.bandwidth < 0:
            raise ConfigError("bandwidth must be non-negative")
        if self.k_out < 1:
            raise ConfigError("k_out must be positive")
        # U_raw = Z W^T + 1 b^T has rank at most channels + 1
        if self.k_out > self.channels + 1:
            raise ConfigError(f"k_out={self.k_out} exceeds channels + 1 = {self.channels + 1}; "
                              "the projected output would be rank deficient")
        if self.basis_kind not in KINDS:
            raise ConfigError(f"basis_kind must be one of {KINDS}")
        if self.mixing_kind not in MIXING_KINDS:
            raise ConfigError(f"mixing_kind must be one of {MIXING_KINDS}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DenConfig":
        names = {f.name: f.type for f in fields(cls)}
        kw = {}
        for k, v in d.items():
            if k not in names:
                raise ConfigError(f"unknown model key {k!r}")
            kw[k] = v if k in ("basis_kind", "mixing_kind") else int(v)
        return cls(**kw)


def band_mask(K: int, b: int) -> np.ndarray:
    i = np.arange(K)
    return (np.abs(i[:, None] - i[None, :]) <= b).astype(np.float64)


def _complex_uniform(rng, shape, a: float) -> np.ndarray:
    re = rng.uniform(-a, a, size=shape)
    im = rng.uniform(-a, a, size=shape)
    return re + 1j * im


def init_parameters(config: DenConfig) -> dict[str, np.ndarray]:
    """Seeded initial parameters, keyed by checkpoint name.

    ``layer{l}.R`` is stored mode-first as ``(K_pod, d_in, d_out)``. Mixing
    factors are scaled so each row of the initial mixing operator has unit
    expected energy.
    """
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x44454E]))
    d, K, r, b = config.channels, config.K_pod, config.mix_rank, config.bandwidth
    p = {}
    a_lift = np.sqrt(3.0 / (2.0 * IN_CHANNELS))
    p["lift.w"] = _complex_uniform(rng, (d, IN_CHANNELS), a_lift)
    p["lift.b"] = np.zeros(d, dtype=np.complex128)
    s_R = 1.0 / (d * np.sqrt(K))
    band = min(2 * b + 1, K)
    for l in range(config.layers):
        p[f"layer{l}.R"] = _complex_uniform(rng, (K, d, d), s_R)
        if config.mixing_kind == "blr":
            # Var(re)+Var(im) of each factor entry is 2a^2/3; a band row then sums
            # r * band products of two such entries
            a = np.sqrt(1.5 / np.sqrt(r * band))
            p[f"layer{l}.mixU"] = _complex_uniform(rng, (K, r), a)
            p[f"layer{l}.mixW"] = _complex_uniform(rng, (K, r), a)
        elif config.mixing_kind in ("dense", "banded_full"):
            width = K if config.mixing_kind == "dense" else band
            p[f"layer{l}.mix"] = _complex_uniform(rng, (K, K), np.sqrt(1.5 / width))
        p[f"layer{l}.w"] = (np.eye(d) + rng.uniform(-0.01, 0.01, size=(d, d))).astype(np.complex128)
        p[f"layer{l}.b"] = np.zeros(d, dtype=np.complex128)
    a_proj = np.sqrt(3.0 / (2.0 * d))
    p["proj.w"] = _complex_uniform(rng, (config.k_out, d), a_proj)
    p["proj.b"] = np.zeros(config.k_out, dtype=np.complex128)
    return p


def count_params(config: DenConfig) -> int:
    """Real scalars in the parameter set (complex entries count twice)."""
    d, K, r, L = config.channels, config.K_pod, config.mix_rank, config.layers
    mix = {"blr": 2 * K * r, "dense": K * K, "banded_full": K * K, "none": 0}[config.mixing_kind]
    per_layer = K * d * d + mix + d * d + d
    complex_count = IN_CHANNELS * d + d + L * per_layer + config.k_out * d + config.k_out
    return 2 * complex_count


def _mixing_matrix(config: DenConfig, P: dict, l: int):
    kind = config.mixing_kind
    if kind == "none":
        return None
    if kind == "blr":
        # the K x K product costs K^2 r, far below applying it to batch * d columns
        M = tc.matmul(P[f"layer{l}.mixU"], tc.conj_transpose(P[f"layer{l}.mixW"]))
        if config.bandwidth < config.K_pod - 1:
            M = tc.hadamard_mask(M, band_mask(config.K_pod, config.bandwidth))
        return M
    M = P[f"layer{l}.mix"]
    if kind == "banded_full" and config.bandwidth < config.K_pod - 1:
        M = tc.hadamard_mask(M, band_mask(config.K_pod, config.bandwidth))
    return M


def apply_mixing(config: DenConfig, factors: dict, coefficients: np.ndarray, layer: int = 0) -> np.ndarray:
    """Apply layer ``layer``'s mixing operator to ``coefficients`` (K_pod x d)."""
    c = np.asarray(coefficients)
    if c.shape[0] != config.K_pod:
        raise ShapeMismatch(f"expected {config.K_pod} coefficient rows, got {c.shape[0]}")
    P = {k: tc.Tensor(v) for k, v in factors.items()}
    M = _mixing_matrix(config, P, layer)
    return c.copy() if M is None else M.value @ c


def _layer(config: DenConfig, P: dict, l: int, Psi_H: tc.Tensor, Psi: tc.Tensor, z: tc.Tensor) -> tc.Tensor:
    N, B, d = z.shape
    K = config.K_pod
    c = tc.matmul(Psi_H, tc.reshape(z, (N, B * d)))
    c = tc.matmul(tc.reshape(c, (K, B, d)), P[f"layer{l}.R"])
    M = _mixing_matrix(config, P, l)
    c = tc.reshape(c, (K, B * d))
    if M is not None:
        c = tc.matmul(M, c)
    spatial = tc.reshape(tc.matmul(Psi, c), (N, B, d))
    pointwise = tc.linear_map(z, P[f"layer{l}.w"], P[f"layer{l}.b"])
    return tc.gelu(tc.add(spatial, pointwise))


def spectral_layer(config: DenConfig, params: dict, layer: int, basis: SpectralBasis,
                   z: np.ndarray) -> np.ndarray:
    """One layer on a single latent state ``z`` of shape ``(d, N)``."""
    z = np.asarray(z)
    if z.shape != (config.channels, basis.num_nodes) or basis.size != config.K_pod:
        raise ShapeMismatch(f"latent shape {z.shape} does not match config/basis")
    P = {k: tc.Tensor(v) for k, v in params.items()}
    Psi = tc.Tensor(basis.Psi)
    Psi_H = tc.Tensor(np.ascontiguousarray(basis.Psi.conj().T))
    out = _layer(config, P, layer, Psi_H, Psi, tc.Tensor(z.T[:, None, :]))
    return out.value[:, 0, :].T


def input_channels(n_values: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Raw inputs ``(..., N, 4)`` ordered ``(Re n, Im n, x, y)``."""
    n = np.asarray(n_values)
    xy = np.broadcast_to(coords, n.shape + (2,))
    return np.concatenate([n.real[..., None], n.imag[..., None], xy], axis=-1)


@dataclass(frozen=True)
class InputStats:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, inputs: np.ndarray) -> "InputStats":
        X = np.asarray(inputs).reshape(-1, IN_CHANNELS)
        std = X.std(axis=0)
        std[std < 1e-12] = 1.0
        return cls(X.mean(axis=0), std)

    @classmethod
    def identity(cls) -> "InputStats":
        return cls(np.zeros(IN_CHANNELS), np.ones(IN_CHANNELS))

    def apply(self, inputs: np.ndarray) -> np.ndarray:
        return (np.asarray(inputs) - self.mean) / self.std


class DenModel:
    """Parameters plus the fixed pieces (config, basis, input statistics)."""

    def __init__(self, config: DenConfig, basis: SpectralBasis, params=None, stats: InputStats | None = None):
        if basis.size != config.K_pod:
            raise ShapeMismatch(f"basis has {basis.size} modes, config expects {config.K_pod}")
        self.config = config
        self.basis = basis
        self.stats = stats if stats is not None else InputStats.identity()
        init = init_parameters(config) if params is None else params
        self.params = {k: tc.parameter(v, name=k) for k, v in init.items()}
        self._Psi = tc.Tensor(basis.Psi)
        self._Psi_H = tc.Tensor(np.ascontiguousarray(basis.Psi.conj().T))

    @property
    def parameter_list(self) -> list[tc.Tensor]:
        return list(self.params.values())

    def numpy_params(self) -> dict[str, np.ndarray]:
        return {k: v.value.copy() for k, v in self.params.items()}

    def load_params(self, params: dict[str, np.ndarray]) -> None:
        for k, v in params.items():
            self.params[k].value[...] = v

    def raw_output(self, inputs: np.ndarray) -> tc.Tensor:
        """Differentiable ``U_raw`` of shape ``(batch, N, k_out)`` from raw ``(batch, N, 4)`` inputs."""
        X = np.asarray(inputs, dtype=np.float64)
        if X.ndim != 3 or X.shape[1] != self.basis.num_nodes or X.shape[2] != IN_CHANNELS:
            raise ShapeMismatch(f"inputs must be (batch, {self.basis.num_nodes}, 4), got {X.shape}")
        x = tc.Tensor(np.ascontiguousarray(self.stats.apply(X).transpose(1, 0, 2)))
        P = self.params
        z = tc.linear_map(x, P["lift.w"], P["lift.b"])
        for l in range(self.config.layers):
            z = _layer(self.config, P, l, self._Psi_H, self._Psi, z)
        U = tc.linear_map(z, P["proj.w"], P["proj.b"])
        return tc.transpose(U, (1, 0, 2))

    def forward(self, inputs: np.ndarray) -> dict[str, np.ndarray]:
        """``U_raw`` and orthonormal ``Q_U`` for a batch ``(batch, N, 4)`` or one ``(4, N)`` input."""
        X = np.asarray(inputs, dtype=np.float64)
        single = X.ndim == 2
        if single:
            X = X.T[None]
        U = self.raw_output(X).value
        Q, R = np.linalg.qr(U)
        dmin = np.abs(np.diagonal(R, axis1=-2, axis2=-1)).min()
        if dmin < 1e-12:
            raise RankCollapse(f"R-factor diagonal {dmin:.3e} below 1e-12")
        Q = orthonormal_columns(U)
        if single:
            return {"U_raw": U[0], "Q_U": Q[0]}
        return {"U_raw": U, "Q_U": Q}

    def predict_subspaces(self, inputs: np.ndarray, batch_size: int = 32) -> np.ndarray:
        out = [self.forward(inputs[i:i + batch_size])["Q_U"] for i in range(0, len(inputs), batch_size)]
        return np.concatenate(out, axis=0)
