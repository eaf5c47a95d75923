"""End-to-end learning: moments -> tensor decomposition -> EM refinement."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .activations import Activation, is_degenerate, rho
from .config import ExperimentConfig
from .decomposition import DecompositionResult, robust_decompose
from .em import EmState, em_refine, initial_scale_fit, scale_from_rho
from .errors import UnderRecoveryError
from .moments import Dataset, empirical_m3
from .scores import ScoreModel, StandardGaussian, score_model_from_dict
from .streams import child_seed
from .synthetic import GlmMixture, random_model, sample, score_model_for


@dataclass(frozen=True)
class LearnResult:
    model: GlmMixture
    decomposition: DecompositionResult
    mode: str
    rho_value: float
    em_initial: Optional[EmState]
    em_final: Optional[EmState]

    def diagnostics(self) -> dict:
        out = {
            "mode": self.mode,
            "rho": self.rho_value,
            "residual_fro": self.decomposition.residual_fro,
            "restarts": self.decomposition.n_restarts_used,
            "coefficients": self.decomposition.coefficients.tolist(),
        }
        if self.em_final is not None:
            out["em_iterations"] = self.em_final.n_iterations
            out["em_loglik"] = self.em_final.loglik
        return out


def resolve_mode(mode: str, activation: Activation) -> str:
    """glm unless the activation is third-derivative degenerate (auto mode)."""
    if mode != "auto":
        return mode
    return "regression" if is_degenerate(activation, 1.0, 0.0) else "glm"


def input_model_from_config(config: ExperimentConfig) -> ScoreModel:
    if config.input is None:
        return StandardGaussian(config.d)
    return score_model_from_dict(config.input)


def learn(data: Dataset, score: ScoreModel, config: ExperimentConfig) -> LearnResult:
    """Run the full learning pipeline on labeled samples.

    Raises UnderRecoveryError, carrying a partial LearnResult, when the
    decomposition finds fewer than r components.
    """
    activation = Activation(config.activation)
    mode = resolve_mode(config.mode, activation)
    rho_value = rho(activation, 1.0, 0.0).value
    moment = empirical_m3(data, score, mode=mode)
    seed = child_seed(config.master_seed, "decompose")
    try:
        dec = robust_decompose(
            moment.tensor, config.r, L=config.L, N=config.N, nu=config.nu,
            rng_seed=seed,
        )
        partial = False
    except UnderRecoveryError as exc:
        if exc.partial is None:
            raise
        dec = exc.partial
        partial = True

    em_init = em_final = None
    scales = np.ones(dec.directions.shape[1])
    biases = np.zeros_like(scales)
    weights = np.full(len(scales), 1.0 / len(scales))
    if config.em_max_iter > 0 and not partial:
        em_init = initial_scale_fit(
            data, dec.directions, activation, sigma=config.em_sigma,
            coefficients=dec.coefficients,
        )
        em_final = em_refine(
            data, dec.directions, activation, em_init,
            max_iter=config.em_max_iter, tol=config.em_tol, sigma=config.em_sigma,
        )
        scales, biases, weights = em_final.scales, em_final.biases, em_final.weights
    else:
        from_rho = scale_from_rho(dec.coefficients, activation)
        if from_rho is not None:
            weights, scales = from_rho

    learned = GlmMixture(
        u=dec.directions * scales,
        biases=biases,
        weights=weights,
        activation=activation,
        noise_sigma=config.em_sigma,
    )
    result = LearnResult(
        model=learned,
        decomposition=dec,
        mode=mode,
        rho_value=rho_value,
        em_initial=em_init,
        em_final=em_final,
    )
    if partial:
        raise UnderRecoveryError(
            f"recovered only {dec.directions.shape[1]} of {config.r} components",
            partial=result,
        )
    return result


def generate(config: ExperimentConfig):
    """Ground-truth model, dataset and matching score model for a config."""
    activation = Activation(config.activation)
    model = random_model(
        config.d, config.r, activation,
        rng_seed=child_seed(config.master_seed, "gen-model"),
        condition_floor=config.condition_floor,
        noise_sigma=config.noise_sigma,
        bias_range=config.bias_range,
    )
    input_model = input_model_from_config(config)
    data = sample(model, input_model, config.n,
                  rng_seed=child_seed(config.master_seed, "gen-data"))
    return model, data, score_model_for(model, input_model)
