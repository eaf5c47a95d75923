"""Ground-truth mixture models and seeded sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .activations import Activation
from .errors import DimensionMismatchError
from .moments import Dataset
from .scores import CoordinateMap, ScoreModel, Transformed
from .streams import rng as stream_rng


@dataclass(frozen=True)
class GlmMixture:
    """Mixture of generalized linear responses.

    A sample draws component j with probability weights[j] and emits
    y = g(<u_j, phi(x)> + biases[j]) + noise, where u_j is column j of u and
    phi is the optional coordinatewise input transform.
    """

    u: np.ndarray
    biases: np.ndarray
    weights: np.ndarray
    activation: Activation
    noise_sigma: float = 0.0
    transform: Optional[CoordinateMap] = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        biases = np.asarray(self.biases, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if u.ndim != 2:
            raise DimensionMismatchError(f"u must be (d, r), got {u.shape}")
        r = u.shape[1]
        if biases.shape != (r,) or weights.shape != (r,):
            raise DimensionMismatchError(
                f"biases {biases.shape} / weights {weights.shape} do not match r={r}"
            )
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a probability vector")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.u.shape[0]

    @property
    def n_components(self) -> int:
        return self.u.shape[1]

    def to_dict(self) -> dict:
        return {
            "U": self.u.tolist(),
            "biases": self.biases.tolist(),
            "weights": self.weights.tolist(),
            "activation": self.activation.kind,
            "noise_sigma": self.noise_sigma,
            "transform": self.transform.to_dict() if self.transform else None,
        }

    @classmethod
    def from_dict(cls, spec: dict) -> "GlmMixture":
        transform = spec.get("transform")
        return cls(
            u=np.asarray(spec["U"], dtype=float),
            biases=np.asarray(spec["biases"], dtype=float),
            weights=np.asarray(spec["weights"], dtype=float),
            activation=Activation(spec["activation"]),
            noise_sigma=float(spec.get("noise_sigma", 0.0)),
            transform=CoordinateMap(transform["kind"], tuple(transform.get("params", ())))
            if transform
            else None,
        )


def save_model(model: GlmMixture, path) -> None:
    with open(path, "w") as f:
        json.dump(model.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def load_model(path) -> GlmMixture:
    with open(path) as f:
        return GlmMixture.from_dict(json.load(f))


def random_model(d: int, r: int, activation: Activation, rng_seed: int,
                 condition_floor: float = 0.05, noise_sigma: float = 0.0,
                 bias_range: float = 0.5,
                 transform: Optional[CoordinateMap] = None) -> GlmMixture:
    """Unit-column weight matrix rejection-sampled to a conditioning floor.

    Mixing weights are symmetric Dirichlet(2); biases are uniform in
    [-bias_range, bias_range], small enough that logistic-family components
    stay far from third-derivative degeneracy.
    """
    if r > d:
        raise ValueError(f"r={r} components cannot exceed input dimension d={d}")
    gen = stream_rng(rng_seed, "model")
    for _ in range(1000):
        u = gen.standard_normal((d, r))
        u /= np.linalg.norm(u, axis=0)
        smallest = np.linalg.svd(u, compute_uv=False)[-1] if r > 1 else 1.0
        if smallest >= condition_floor:
            break
    else:
        raise RuntimeError(
            f"could not draw U with s_min >= {condition_floor} in 1000 attempts"
        )
    weights = gen.dirichlet(np.full(r, 2.0))
    weights = weights / weights.sum()
    biases = gen.uniform(-bias_range, bias_range, size=r)
    return GlmMixture(
        u=u,
        biases=biases,
        weights=weights,
        activation=activation,
        noise_sigma=noise_sigma,
        transform=transform,
    )


def sample(model: GlmMixture, input_model: ScoreModel, n: int, rng_seed: int) -> Dataset:
    """Draw n labeled samples; deterministic for a fixed seed."""
    if input_model.dim != model.dim:
        raise DimensionMismatchError(
            f"input model dim {input_model.dim} != mixture dim {model.dim}"
        )
    base = input_model.base if isinstance(input_model, Transformed) else input_model
    gen_x = stream_rng(rng_seed, "sample-x")
    gen_h = stream_rng(rng_seed, "sample-h")
    gen_eps = stream_rng(rng_seed, "sample-eps")
    x = base.sample(n, gen_x)
    h = gen_h.choice(model.n_components, size=n, p=model.weights)
    features = model.transform.value(x) if model.transform else x
    z = np.take_along_axis(features @ model.u, h[:, None], axis=1)[:, 0]
    y = model.activation(z + model.biases[h])
    if model.noise_sigma > 0:
        y = y + model.noise_sigma * gen_eps.standard_normal(n)
    return Dataset(x=x, y=y)


def score_model_for(model: GlmMixture, input_model: ScoreModel) -> ScoreModel:
    """Score model matching the features the mixture actually consumes.

    When the mixture applies a transform, learning needs the scores of the
    transformed variable, so the input model is wrapped accordingly.
    """
    if model.transform is None or model.transform.kind == "identity":
        return input_model
    if isinstance(input_model, Transformed):
        raise ValueError("cannot stack a transform onto an already transformed input")
    return Transformed(input_model, model.transform)
