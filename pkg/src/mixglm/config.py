"""Experiment configuration: one dataclass, JSON round-trip, flag overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

PRESETS = {
    # n^{-1/2} scaling study for the direction error of the tensor step
    "paper-scaling": {
        "d": 10,
        "r": 3,
        "activation": "cubic",
        "noise_sigma": 0.1,
        "condition_floor": 0.2,
        "n_values": [10_000, 30_000, 100_000, 300_000, 1_000_000],
        "trials": 5,
        "em_max_iter": 0,
    },
}


@dataclass
class ExperimentConfig:
    """Knobs for generation, learning and sweeps. Flags override file values."""

    d: int = 10
    r: int = 3
    n: int = 100_000
    activation: str = "cubic"
    input: Optional[dict] = None           # score-model descriptor; default N(0, I_d)
    mode: str = "auto"                     # glm | regression | auto
    noise_sigma: float = 0.1
    condition_floor: float = 0.05
    bias_range: float = 0.5
    L: Optional[int] = None                # restarts; default max(50, 10 r)
    N: int = 100
    nu: float = 0.5
    em_max_iter: int = 30
    em_tol: float = 1e-8
    em_sigma: float = 0.1
    master_seed: int = 0
    output_dir: str = "."
    threshold: float = 0.1
    n_values: Optional[list] = None        # sweep sample sizes
    trials: int = 5
    workers: int = 1
    exact_moments: bool = False            # sweep short-circuit: decompose the
    data_format: str = "csv"               # exact CP tensor instead of sampling

    def __post_init__(self):
        if self.mode not in ("glm", "regression", "auto"):
            raise ValueError(f"mode must be glm|regression|auto, got {self.mode!r}")
        if self.data_format not in ("csv", "bin"):
            raise ValueError(f"data_format must be csv|bin, got {self.data_format!r}")
        if self.r < 1 or self.d < 1 or self.n < 1:
            raise ValueError("d, r, n must be positive")
        if self.trials < 1:
            raise ValueError("trials must be positive")

    @classmethod
    def from_dict(cls, spec: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(spec) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**spec)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        spec = self.to_dict()
        for key, value in overrides.items():
            if value is not None:
                if key not in spec:
                    raise ValueError(f"unknown config key {key!r}")
                spec[key] = value
        return ExperimentConfig.from_dict(spec)


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return ExperimentConfig.from_dict(PRESETS[name])
