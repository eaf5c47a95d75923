"""Component matching against ground truth and sample-size sweeps."""

from __future__ import annotations

import csv
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy import stats

from .activations import Activation, rho
from .config import ExperimentConfig
from .decomposition import robust_decompose
from .errors import DimensionMismatchError
from .moments import exact_cp_tensor
from .pipeline import generate, learn
from .streams import child_seed


@dataclass(frozen=True)
class MatchReport:
    """Sign-resolved optimal assignment between true and estimated columns."""

    permutation: np.ndarray       # estimate column matched to truth column j
    signs: np.ndarray             # sign applied to the matched estimate
    per_component_error: np.ndarray
    max_error: float
    mean_error: float

    def to_dict(self) -> dict:
        return {
            "permutation": self.permutation.tolist(),
            "signs": self.signs.tolist(),
            "per_component_error": self.per_component_error.tolist(),
            "max_error": self.max_error,
            "mean_error": self.mean_error,
        }


def match(truth: np.ndarray, estimate: np.ndarray) -> MatchReport:
    """Hungarian assignment on the sign-resolved Euclidean column distance."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape or truth.ndim != 2:
        raise DimensionMismatchError(
            f"truth shape {truth.shape} and estimate shape {estimate.shape} differ"
        )
    r = truth.shape[1]
    # cost[i, j] = min over sign of ||u_i - s * uhat_j||, by direct differences
    # to keep full precision near zero
    diff_minus = truth[:, :, None] - estimate[:, None, :]
    diff_plus = truth[:, :, None] + estimate[:, None, :]
    cost = np.minimum(
        np.linalg.norm(diff_minus, axis=0), np.linalg.norm(diff_plus, axis=0)
    )
    gram = truth.T @ estimate
    rows, cols = linear_sum_assignment(cost)
    permutation = cols.copy()
    signs = np.where(gram[rows, cols] >= 0, 1.0, -1.0)
    errors = cost[rows, cols]
    return MatchReport(
        permutation=permutation,
        signs=signs,
        per_component_error=errors,
        max_error=float(errors.max()),
        mean_error=float(errors.mean()),
    )


@dataclass(frozen=True)
class SweepResult:
    """Per-n direction errors and the fitted log-log decay slope."""

    n_values: list
    errors: list                  # mean over trials of the max matched error
    slope: float
    slope_ci: tuple
    records: list                 # (n, trial, max_error, mean_error, seconds)
    ci_reliable: bool

    def to_dict(self) -> dict:
        return {
            "n_values": list(self.n_values),
            "errors": list(self.errors),
            "slope": self.slope,
            "slope_ci": list(self.slope_ci),
            "ci_reliable": self.ci_reliable,
        }


def _exact_moment_directions(config: ExperimentConfig):
    """Short-circuit mode: decompose the noiseless CP tensor directly."""
    model, _, _ = generate(config.with_overrides(n=1))
    activation = Activation(config.activation)
    coeffs = np.array([
        rho(activation, 1.0, b).value * w
        for b, w in zip(model.biases, model.weights)
    ])
    tensor = exact_cp_tensor(model.u, coeffs)
    dec = robust_decompose(
        tensor, config.r, L=config.L, N=config.N, nu=config.nu,
        rng_seed=child_seed(config.master_seed, "decompose"),
    )
    return model.u, dec.directions


def _sweep_trial(args):
    """One (n, trial) cell; returns a record tuple or an error sentinel."""
    config_dict, n, trial = args
    try:
        config = ExperimentConfig.from_dict(config_dict)
        start = time.perf_counter()
        trial_cfg = config.with_overrides(
            n=int(n),
            master_seed=child_seed(config.master_seed, "sweep-trial", trial),
            em_max_iter=0,
        )
        if config.exact_moments:
            truth, directions = _exact_moment_directions(trial_cfg)
        else:
            model, data, score = generate(trial_cfg)
            result = learn(data, score, trial_cfg)
            directions = result.decomposition.directions
            truth = model.u
        report = match(truth / np.linalg.norm(truth, axis=0), directions)
        seconds = time.perf_counter() - start
        return ("ok", (int(n), int(trial), report.max_error, report.mean_error, seconds))
    except Exception as exc:
        return ("error", f"n={n} trial={trial}: {exc}")


def sweep(config: ExperimentConfig) -> SweepResult:
    """Direction error of the tensor step across sample sizes.

    The trial seed is independent of n, so each trial reuses one model
    instance and a common sample stream across all n, and the fitted slope
    measures the decay of that instance's error directly. EM is skipped: it
    refines scales and biases but leaves the matched directions unchanged.
    Trials may run in worker processes; aggregation is sorted, so results do
    not depend on scheduling.
    """
    if not config.n_values:
        raise ValueError("sweep needs a non-empty n_values list")
    n_values = sorted(int(n) for n in config.n_values)
    if config.trials < 3:
        warnings.warn("fewer than 3 trials per n; slope CI is unreliable")
    jobs = [
        (config.to_dict(), n, trial)
        for n in n_values
        for trial in range(config.trials)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_sweep_trial, jobs))
    else:
        outcomes = [_sweep_trial(job) for job in jobs]
    records = sorted(rec for status, rec in outcomes if status == "ok")
    failures = [rec for status, rec in outcomes if status == "error"]
    for message in failures:
        warnings.warn(f"sweep trial failed: {message}")
    if len(failures) > 0.2 * len(jobs):
        raise RuntimeError(f"{len(failures)}/{len(jobs)} sweep trials failed")

    by_n = {n: [] for n in n_values}
    for n, trial, max_err, mean_err, seconds in records:
        by_n[n].append(max_err)
    if any(not v for v in by_n.values()):
        raise RuntimeError("all trials failed for at least one sample size")
    errors = [float(np.mean(by_n[n])) for n in n_values]
    logn = np.log(np.asarray(n_values, dtype=float))
    loge = np.log(np.maximum(errors, 1e-300))
    fit = stats.linregress(logn, loge)
    if len(n_values) > 2 and np.isfinite(fit.stderr) and fit.stderr > 0:
        tval = stats.t.ppf(0.975, len(n_values) - 2)
        ci = (float(fit.slope - tval * fit.stderr), float(fit.slope + tval * fit.stderr))
    else:
        ci = (-np.inf, np.inf)
    return SweepResult(
        n_values=n_values,
        errors=errors,
        slope=float(fit.slope),
        slope_ci=ci,
        records=records,
        ci_reliable=config.trials >= 3 and len(n_values) > 2,
    )


def save_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["n", "trial", "max_error", "mean_error", "seconds"])
        for rec in result.records:
            writer.writerow([rec[0], rec[1], f"{rec[2]:.17g}", f"{rec[3]:.17g}",
                             f"{rec[4]:.3f}"])
