"""Command-line front end: gen, learn, eval and sweep subcommands.

Exit codes: 0 success, 1 eval threshold exceeded, 2 usage or input error,
3 decomposition under-recovery.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, preset
from .errors import MixglmError, UnderRecoveryError
from .evaluation import match, save_sweep_csv, sweep
from .moments import load_dataset, save_dataset_binary, save_dataset_csv
from .pipeline import learn
from .scores import load_score_model, save_score_model
from .synthetic import load_model, save_model

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_USAGE = 2
EXIT_UNDER_RECOVERY = 3


def _write_json(payload: dict, path: Path) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _config_from_args(args) -> ExperimentConfig:
    if getattr(args, "preset", None):
        config = preset(args.preset)
    elif args.config:
        config = ExperimentConfig.load(args.config)
    else:
        config = ExperimentConfig()
    overrides = {
        "master_seed": args.seed,
        "mode": args.mode,
        "n": args.n,
        "d": args.d,
        "r": args.r,
        "activation": args.activation,
        "L": args.L,
        "N": args.N,
        "nu": args.nu,
        "threshold": args.threshold,
        "output_dir": args.out,
        "noise_sigma": getattr(args, "noise_sigma", None),
        "trials": getattr(args, "trials", None),
        "workers": getattr(args, "workers", None),
        "data_format": getattr(args, "format", None),
        "em_max_iter": getattr(args, "em_max_iter", None),
    }
    n_values = getattr(args, "n_values", None)
    if n_values:
        overrides["n_values"] = [int(v) for v in n_values.split(",") if v]
    return config.with_overrides(**overrides)


def cmd_gen(args) -> int:
    config = _config_from_args(args)
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output dir: {exc}", file=sys.stderr)
        return EXIT_USAGE
    from .pipeline import generate

    model, data, score = generate(config)
    save_model(model, out / "model.json")
    if config.data_format == "bin":
        save_dataset_binary(data, out / "data.bin")
    else:
        save_dataset_csv(data, out / "data.csv")
    save_score_model(score, out / "score.json")
    config.save(out / "config.json")
    return EXIT_OK


def cmd_learn(args) -> int:
    config = _config_from_args(args)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = load_dataset(args.data)
    score = load_score_model(args.score)
    config = config.with_overrides(d=data.dim)
    try:
        result = learn(data, score, config)
    except UnderRecoveryError as exc:
        if exc.partial is not None:
            save_model(exc.partial.model, out / "learned.json")
            diag = exc.partial.diagnostics()
            diag["error"] = str(exc)
            _write_json(diag, out / "diagnostics.json")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDER_RECOVERY
    save_model(result.model, out / "learned.json")
    _write_json(result.diagnostics(), out / "diagnostics.json")
    return EXIT_OK


def cmd_eval(args) -> int:
    truth = load_model(args.truth)
    learned = load_model(args.learned)
    if truth.u.shape != learned.u.shape:
        print(
            f"error: shape mismatch {truth.u.shape} vs {learned.u.shape}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    norm_t = np.linalg.norm(truth.u, axis=0)
    norm_l = np.linalg.norm(learned.u, axis=0)
    if np.any(norm_t == 0) or np.any(norm_l == 0):
        print("error: zero column in a weight matrix", file=sys.stderr)
        return EXIT_USAGE
    report = match(truth.u / norm_t, learned.u / norm_l)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    threshold = args.threshold if args.threshold is not None else 0.1
    return EXIT_OK if report.max_error <= threshold else EXIT_THRESHOLD


def cmd_sweep(args) -> int:
    config = _config_from_args(args)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = sweep(config)
    save_sweep_csv(result, out / "sweep.csv")
    _write_json(result.to_dict(), out / "summary.json")
    print(
        f"slope {result.slope:.4f} ci [{result.slope_ci[0]:.4f}, {result.slope_ci[1]:.4f}]"
        + ("" if result.ci_reliable else " (unreliable)")
    )
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, include=()):
    p.add_argument("--config", type=str, default=None, help="JSON config file")
    p.add_argument("--seed", type=int, default=None, dest="seed", help="master seed")
    p.add_argument("--mode", choices=["glm", "regression", "auto"], default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--activation", type=str, default=None)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", type=str, default=None, help="output directory")
    if "gen" in include:
        p.add_argument("--noise-sigma", type=float, default=None, dest="noise_sigma")
        p.add_argument("--format", choices=["csv", "bin"], default=None)
    if "learn" in include:
        p.add_argument("--em-max-iter", type=int, default=None, dest="em_max_iter")
    if "sweep" in include:
        p.add_argument("--preset", type=str, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--n-values", type=str, default=None, dest="n_values",
                       help="comma-separated sample sizes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixglm",
        description="Learn mixtures of GLMs from moment tensors of score functions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic instance")
    _add_common(p_gen, include=("gen",))
    p_gen.set_defaults(func=cmd_gen)

    p_learn = sub.add_parser("learn", help="learn parameters from data")
    p_learn.add_argument("data", help="dataset file (.csv or .bin)")
    p_learn.add_argument("score", help="score model JSON")
    _add_common(p_learn, include=("learn",))
    p_learn.set_defaults(func=cmd_learn)

    p_eval = sub.add_parser("eval", help="match a learned model against truth")
    p_eval.add_argument("truth", help="ground-truth model JSON")
    p_eval.add_argument("learned", help="learned model JSON")
    p_eval.add_argument("--threshold", type=float, default=None)
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="sample-size scaling study")
    _add_common(p_sweep, include=("sweep", "learn"))
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnderRecoveryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDER_RECOVERY
    except (MixglmError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
