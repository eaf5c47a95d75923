"""EM refinement of per-component scale, bias and mixing weight.

Directions come from the tensor step and stay fixed; EM only moves the 2r+r
residual parameters, so each M-step is a pair of 1-D line searches per
component. The observation model is y | x, component j ~
N(g(s_j <u_j, x> + b_j), sigma^2) with sigma known.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .activations import Activation, is_degenerate, rho
from .errors import ComponentCollapseWarning, DimensionMismatchError
from .moments import Dataset

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
_COLLAPSE_FRACTION = 1e-8


@dataclass(frozen=True)
class EmState:
    """Mixture parameters plus the E-step bookkeeping that produced them."""

    scales: np.ndarray
    biases: np.ndarray
    weights: np.ndarray
    responsibilities: Optional[np.ndarray] = None
    loglik: float = -np.inf
    n_iterations: int = 0

    def __post_init__(self):
        r = len(self.scales)
        if len(self.biases) != r or len(self.weights) != r:
            raise DimensionMismatchError("scales, biases, weights must share length")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be a probability vector")


def golden_minimize(f, lo: float, hi: float, iters: int = 35) -> float:
    """Golden-section minimizer of a unimodal f on [lo, hi]."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return c if fc < fd else d


def _log_emission(y, z, scales, biases, g: Activation, sigma: float):
    """log N(y; g(s_j z_j + b_j), sigma^2) columnwise, shape (n, r)."""
    mean = g(z * scales[None, :] + biases[None, :])
    return (
        -0.5 * ((y[:, None] - mean) / sigma) ** 2
        - np.log(sigma)
        - 0.5 * np.log(2.0 * np.pi)
    )


def _e_step(y, z, state: EmState, g, sigma):
    with np.errstate(divide="ignore"):
        logw = np.log(state.weights)
    joint = logw[None, :] + _log_emission(y, z, state.scales, state.biases, g, sigma)
    norm = logsumexp(joint, axis=1, keepdims=True)
    return np.exp(joint - norm), float(norm.sum())


def _weighted_sse(y, zj, resp_j, g, s, b):
    return float(resp_j @ (y - g(s * zj + b)) ** 2)


def _fit_component(y, zj, resp_j, g, s0, b0, sweeps, golden_iters):
    """Coordinate golden-section descent on the responsibility-weighted SSE."""
    s, b = s0, b0
    best = _weighted_sse(y, zj, resp_j, g, s, b)
    for _ in range(sweeps):
        half = 1.0 + 0.5 * abs(s)
        cand = golden_minimize(
            lambda v: _weighted_sse(y, zj, resp_j, g, v, b), s - half, s + half,
            golden_iters,
        )
        val = _weighted_sse(y, zj, resp_j, g, cand, b)
        if val < best:
            s, best = cand, val
        half = 1.0 + 0.5 * abs(b)
        cand = golden_minimize(
            lambda v: _weighted_sse(y, zj, resp_j, g, s, v), b - half, b + half,
            golden_iters,
        )
        val = _weighted_sse(y, zj, resp_j, g, s, cand)
        if val < best:
            b, best = cand, val
    return s, b


def em_refine(data: Dataset, directions: np.ndarray, g: Activation, init: EmState,
              max_iter: int = 30, tol: float = 1e-8, sigma: float = 0.1,
              sweeps: int = 3, golden_iters: int = 35) -> EmState:
    """Run EM from ``init`` until the mean log-likelihood change drops below tol.

    Components whose responsibility mass vanishes are frozen and a
    ComponentCollapseWarning is emitted. The returned state carries the final
    responsibilities and total log-likelihood.
    """
    directions = np.asarray(directions, dtype=float)
    if directions.shape[0] != data.dim:
        raise DimensionMismatchError(
            f"directions dim {directions.shape[0]} != data dim {data.dim}"
        )
    z = data.x @ directions
    y = data.y
    n = data.n
    state = init
    resp, loglik = _e_step(y, z, state, g, sigma)
    state = replace(state, responsibilities=resp, loglik=loglik)
    for it in range(1, max_iter + 1):
        resp = state.responsibilities
        mass = resp.sum(axis=0)
        scales = state.scales.copy()
        biases = state.biases.copy()
        for j in range(len(scales)):
            if mass[j] < _COLLAPSE_FRACTION * n:
                warnings.warn(
                    f"component {j} collapsed (mass {mass[j]:.3e}); freezing it",
                    ComponentCollapseWarning,
                )
                continue
            scales[j], biases[j] = _fit_component(
                y, z[:, j], resp[:, j], g, scales[j], biases[j], sweeps, golden_iters
            )
        weights = mass / mass.sum()
        candidate = EmState(scales=scales, biases=biases, weights=weights)
        resp_new, loglik_new = _e_step(y, z, candidate, g, sigma)
        if loglik_new < state.loglik:
            # approximate M-step failed to improve; keep the previous state
            state = replace(state, n_iterations=it)
            break
        converged = abs(loglik_new - state.loglik) / n < tol
        state = EmState(
            scales=scales,
            biases=biases,
            weights=weights,
            responsibilities=resp_new,
            loglik=loglik_new,
            n_iterations=it,
        )
        if converged:
            break
    return state


def initial_scale_fit(data: Dataset, directions: np.ndarray, g: Activation,
                      sigma: float = 0.1, sweeps: int = 3,
                      golden_iters: int = 35,
                      coefficients: Optional[np.ndarray] = None) -> EmState:
    """Scale-only starting point: each component fit against all samples.

    When tensor coefficients are supplied, scales start from the cube-root
    inversion coefficient = rho * w * s^3 under uniform weights, which puts
    the line search bracket in the right regime.
    """
    directions = np.asarray(directions, dtype=float)
    r = directions.shape[1]
    z = data.x @ directions
    ones = np.ones(data.n)
    scales = np.ones(r)
    if coefficients is not None:
        rho0 = rho(g, 1.0, 0.0).value
        if abs(rho0) > 1e-12:
            scaled = np.asarray(coefficients, dtype=float) * r / rho0
            scales = np.sign(scaled) * np.abs(scaled) ** (1.0 / 3.0)
            scales[np.abs(scales) < 1e-3] = 1.0
    biases = np.zeros(r)
    for j in range(r):
        scales[j], biases[j] = _fit_component(
            data.y, z[:, j], ones, g, scales[j], biases[j], sweeps, golden_iters
        )
    weights = np.full(r, 1.0 / r)
    state = EmState(scales=scales, biases=biases, weights=weights)
    resp, loglik = _e_step(data.y, z, state, g, sigma)
    return replace(state, responsibilities=resp, loglik=loglik)


def scale_from_rho(coefficients, g: Activation, directions=None):
    """Mixing weights from tensor coefficients when components are unit norm.

    Valid only for non-degenerate activations; returns None otherwise. The
    coefficient of a unit component is rho * w_j, so dividing by rho and
    renormalizing recovers the weights; scales stay at 1 by convention.
    """
    if is_degenerate(g, 1.0, 0.0):
        return None
    coefficients = np.asarray(coefficients, dtype=float)
    rho0 = rho(g, 1.0, 0.0).value
    w = np.clip(coefficients / rho0, 0.0, None)
    total = w.sum()
    if total <= 0:
        w = np.full(coefficients.size, 1.0 / coefficients.size)
    else:
        w = w / total
    return w, np.ones(coefficients.size)
