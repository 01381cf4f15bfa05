"""Random complex refractive-index fields built from rotated sinusoidal modes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh

_REAL_TAG = 0
_IMAG_TAG = 1


@dataclass(frozen=True)
class FieldSpec:
    mode_min: int = 1
    mode_max: int = 8
    beta: float = 0.5
    real_range: tuple[float, float] = (1.0, 5.0)
    imag_range: tuple[float, float] = (1.0, 5.0)
    seed: int = 0
    # +1 gives mode weight beta**j (decaying); -1 gives beta**(-j)
    weight_exponent_sign: int = 1

    def __post_init__(self):
        if self.mode_min > self.mode_max:
            raise ValueError("mode_min must not exceed mode_max")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        for lo, hi in (self.real_range, self.imag_range):
            if lo > hi:
                raise ValueError("range lower bound exceeds upper bound")
        if self.weight_exponent_sign not in (1, -1):
            raise ValueError("weight_exponent_sign must be +1 or -1")

    def mode_weight(self, j: int) -> float:
        return self.beta ** (self.weight_exponent_sign * j)


@dataclass(frozen=True, eq=False)
class ParameterField:
    values: np.ndarray
    spec: FieldSpec
    sample_id: int


def sample_raw_field(spec: FieldSpec, node_coords: np.ndarray, rng) -> np.ndarray:
    """Evaluate one random superposition of rotated sinusoids at ``node_coords``.

    Per mode ``j`` the draws are taken in the fixed order
    ``a_j, b_j, theta_j, phi_j, alpha_j``.
    """
    x = np.asarray(node_coords, dtype=np.float64)[:, 0]
    y = np.asarray(node_coords, dtype=np.float64)[:, 1]
    g = np.zeros(x.shape[0])
    two_pi = 2.0 * np.pi
    for j in range(spec.mode_min, spec.mode_max + 1):
        a = rng.standard_normal()
        b = rng.standard_normal()
        theta = rng.uniform(0.0, two_pi)
        phi = rng.uniform(0.0, two_pi)
        alpha = rng.uniform(0.0, two_pi)
        u = (x * np.cos(alpha) + y * np.sin(alpha)) / 2.0
        v = (x * np.sin(alpha) + y * np.cos(alpha)) / 2.0
        f = float(j)
        g += spec.mode_weight(j) * (a * np.sin(two_pi * f * u + theta) + b * np.sin(two_pi * f * v + phi))
    return g


def normalize_to_range(field: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Affine map sending min(field) to ``lo`` and max(field) to ``hi``."""
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    f = np.asarray(field, dtype=np.float64)
    fmin, fmax = f.min(), f.max()
    if fmax == fmin:
        return np.full_like(f, 0.5 * (lo + hi))
    out = lo + (f - fmin) * ((hi - lo) / (fmax - fmin))
    # pin the extremes so range containment is exact
    return np.clip(out, lo, hi)


def component_rng(seed: int, sample_id: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(sample_id), int(tag)]))


def sample_parameter_field(spec: FieldSpec, mesh: Mesh | np.ndarray, sample_id: int) -> ParameterField:
    coords = mesh.nodes if isinstance(mesh, Mesh) else np.asarray(mesh)
    g_r = sample_raw_field(spec, coords, component_rng(spec.seed, sample_id, _REAL_TAG))
    g_i = sample_raw_field(spec, coords, component_rng(spec.seed, sample_id, _IMAG_TAG))
    n = normalize_to_range(g_r, *spec.real_range) + 1j * normalize_to_range(g_i, *spec.imag_range)
    return ParameterField(values=n, spec=spec, sample_id=int(sample_id))
