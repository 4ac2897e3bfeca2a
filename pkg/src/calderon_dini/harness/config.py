"""Experiment configuration: JSON on disk, merged over defaults."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

DEFAULTS = {
    "grid": {"N": 512, "L": 4.0},
    "family": {
        "alpha": 2.0,
        "amplitudes": [0.4, 0.2, 0.1, 0.05, 0.025, 0.0125],
        "center": [0.0, 0.0],
        "radii": [0.2, 0.8],
        "epsilon": 0.1,
    },
    "decay": {
        "members": [
            {"name": "zero", "kappa": 0.0},
            {"name": "dini", "kappa": 0.3, "profile": "log-power"},
            {"name": "holder", "kappa": 0.3, "profile": "holder", "exponent": 0.5},
        ],
        "k": [4, 8, 16, 32, 64, 128],
        "nonlinear": True,
        "n0": 4,
        "R0": 2.0,
        "beta": 1.2,
    },
    "stability": {"k": 1.0, "beta": 1.2, "sigma_alpha": 2.0},
    "solver": {"tol": 1e-10, "outer_tol": 1e-8, "n_max": 200, "outer_max": 100},
    "dtn": {"mesh_r": 256, "mesh_theta": 512, "modes": 32, "richardson": False},
    "oracles": {
        "cosine_gap_step": 0.05,
        "kernel_z": [[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]],
        "kernel_N": [256, 512],
        "interpolation_cases": 100,
        "i0_betas": [1.2, 1.4],
        "i0_r": [10.0, 31.6227766, 100.0, 316.227766, 1000.0, 3162.27766, 10000.0],
        "i0_r_ext": [31622.7766, 100000.0],
    },
    "out": "out",
    "seed": 0,
    "threads": 1,
}


class ConfigError(ValueError):
    pass


def _merge(base, over, path=""):
    for key, val in over.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path}{key}")
        if isinstance(base[key], dict) and isinstance(val, dict):
            _merge(base[key], val, f"{path}{key}.")
        else:
            base[key] = val
    return base


@dataclass(frozen=True)
class ExperimentConfig:
    data: dict

    def __getitem__(self, key):
        return self.data[key]

    def dumps(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def with_overrides(self, **kw):
        return ExperimentConfig(_merge(copy.deepcopy(self.data), kw))


def load_config(source=None, **overrides) -> ExperimentConfig:
    """Defaults, then a JSON file or dict, then keyword overrides."""
    data = copy.deepcopy(DEFAULTS)
    if source is not None:
        if isinstance(source, (str, Path)):
            try:
                user = json.loads(Path(source).read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{source}: {exc}") from exc
        else:
            user = source
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        _merge(data, user)
    _merge(data, {k: v for k, v in overrides.items() if v is not None})
    n = data["grid"]["N"]
    if n < 32 or n & (n - 1):
        raise ConfigError("grid.N must be a power of two >= 32")
    return ExperimentConfig(data)
