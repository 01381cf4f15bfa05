"""Line-based ``key=value`` run configuration."""

from __future__ import annotations

import platform

import numpy as np
import scipy

from .errors import ConfigError

# desk-scale defaults; every recognised key must appear here
DEFAULTS: dict[str, str] = {
    "mesh.kind": "square",
    "mesh.subdivisions": "27",
    "mesh.edge_length": "0.05",
    "field.modes": "8",
    "field.mode_min": "1",
    "field.beta": "0.5",
    "field.weight_sign": "1",
    "field.real_range": "1,5",
    "field.imag_range": "1,5",
    "field.seed": "0",
    "physics.k_squared": "1.0",
    "experiment.K": "12",
    "experiment.k_out": "12",
    "experiment.k_V": "12",
    "experiment.samples": "500",
    "experiment.train_frac": "0.8",
    "experiment.quadrature_nodes": "64",
    "experiment.dst_subdivisions": "54",
    "experiment.eval_samples": "100",
    "experiment.sweep_k_squared": "0.25,1,4,10",
    "experiment.sweep_k_out": "12,12,24,48",
    "experiment.ablate_mixing": "blr,banded_full,dense,none",
    "experiment.ablate_basis": "pod_y,pod_xy,laplacian",
    "experiment.ablate_seeds": "0,1,2",
    "model.layers": "4",
    "model.channels": "32",
    "model.K_pod": "128",
    "model.mix_rank": "16",
    "model.bandwidth": "5",
    "model.mixing": "blr",
    "model.basis": "pod_y",
    "model.seed": "0",
    "train.batch_size": "32",
    "train.epochs": "100",
    "train.lr": "0.01",
    "train.lr_step": "20",
    "train.lr_rate": "0.8",
    "train.weight_decay": "1e-6",
    "train.gram_epsilon": "1e-10",
    "train.seed": "0",
    "paths.mesh": "",
    "paths.dataset": "",
    "paths.basis": "",
    "paths.checkpoint": "",
}


class RunConfig:
    def __init__(self, values: dict[str, str] | None = None):
        self.values = dict(DEFAULTS)
        for k, v in (values or {}).items():
            self.set(k, v)

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        vals = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            if k in vals:
                raise ConfigError(f"line {lineno}: duplicate key {k!r}")
            vals[k] = v
        return cls(vals)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())

    def set(self, key: str, value) -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        self.values[key] = str(value)

    def __getitem__(self, key: str) -> str:
        return self.values[key]

    def get_int(self, key: str) -> int:
        try:
            return int(self.values[key])
        except ValueError as exc:
            raise ConfigError(f"{key} must be an integer, got {self.values[key]!r}") from exc

    def get_float(self, key: str) -> float:
        try:
            return float(self.values[key])
        except ValueError as exc:
            raise ConfigError(f"{key} must be a number, got {self.values[key]!r}") from exc

    def get_list(self, key: str, conv=str) -> list:
        raw = self.values[key].strip()
        if not raw:
            return []
        try:
            return [conv(s.strip()) for s in raw.split(",")]
        except ValueError as exc:
            raise ConfigError(f"{key}: cannot parse {raw!r}") from exc

    def get_range(self, key: str) -> tuple[float, float]:
        vals = self.get_list(key, float)
        if len(vals) != 2:
            raise ConfigError(f"{key} must be 'lo,hi'")
        return vals[0], vals[1]

    def dump(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in sorted(self.values.items()))

    def provenance(self) -> list[str]:
        """Config echo plus library versions, as header lines."""
        lines = [f"{k}={v}" for k, v in sorted(self.values.items())]
        lines.append(f"version.python={platform.python_version()}")
        lines.append(f"version.numpy={np.__version__}")
        lines.append(f"version.scipy={scipy.__version__}")
        return lines
