"""Command-line interface.

Subcommands: train, attack, mix-eval, certify, verify, rs-predict, and
sweep <kind> (alpha_sweep, design_study, confidence_table,
certified_curve).  Every command reads a JSON config (keys documented in
the README), writes stamped CSVs into --out-dir, and exits 0 only if all
requested runs complete.
"""

import argparse
import os
import sys

from . import experiments
from .io import load_config


def _add_common(parser):
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out-dir", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config's top-level seed")
    parser.add_argument("--workers", type=int, default=1, help="worker threads for independent items")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixcert")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("train", "attack", "certify", "rs-predict"):
        _add_common(sub.add_parser(name))

    mix_eval = sub.add_parser("mix-eval")
    _add_common(mix_eval)
    mix_eval.add_argument("--alpha", type=float, default=None)
    mix_eval.add_argument("--gamma", type=float, default=None)
    mix_eval.add_argument("--formulation", choices=("smo1", "smo2", "smo3", "alpha"), default=None)
    mix_eval.add_argument("--r-mode", choices=("one", "grad_gi", "grad_max_gj", "grad_ratio"), default=None)
    mix_eval.add_argument("--domain", choices=("logit", "probability"), default=None)
    mix_eval.add_argument("--norm", choices=("2", "inf"), default=None)

    verify = sub.add_parser("verify")
    _add_common(verify)
    verify.add_argument("--certificates", required=True, help="certificate CSV to re-check")

    sweep = sub.add_parser("sweep")
    sweep.add_argument("kind", choices=sorted(experiments.SWEEPS))
    _add_common(sweep)
    return parser


def _apply_seed(config: dict, seed: int | None) -> dict:
    if seed is not None:
        config = dict(config)
        config["seed"] = seed
        if "train" in config:
            config["train"] = dict(config["train"], seed=seed)
    return config


def _apply_mix_flags(config: dict, args) -> dict:
    mixing = dict(config.get("mixing", {}))
    if args.formulation is not None:
        mixing["formulation"] = args.formulation
    if args.alpha is not None:
        mixing["alpha"] = args.alpha
        mixing.setdefault("formulation", "alpha")
    if args.gamma is not None:
        mixing["gamma"] = args.gamma
        mixing.setdefault("formulation", "smo3")
    if args.r_mode is not None:
        mixing["r_mode"] = args.r_mode
    if args.domain is not None:
        mixing["domain"] = args.domain
    if args.norm is not None:
        mixing["norm"] = args.norm
    config = dict(config)
    if mixing:
        config["mixing"] = mixing
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = _apply_seed(load_config(args.config), args.seed)
    config_dir = os.path.dirname(os.path.abspath(args.config))
    os.makedirs(args.out_dir, exist_ok=True)

    try:
        if args.command == "train":
            paths = experiments.run_train(config, args.out_dir, args.workers, config_dir)
        elif args.command == "attack":
            paths = experiments.run_attack(config, args.out_dir, args.workers, config_dir)
        elif args.command == "certify":
            paths = experiments.run_certify(config, args.out_dir, args.workers, config_dir)
        elif args.command == "verify":
            paths = experiments.run_verify(
                config, args.certificates, args.out_dir, args.workers, config_dir
            )
        elif args.command == "rs-predict":
            paths = experiments.run_rs_predict(config, args.out_dir, args.workers, config_dir)
        elif args.command == "mix-eval":
            config = _apply_mix_flags(config, args)
            paths = experiments.run_mix_eval(config, args.out_dir, args.workers, config_dir)
        elif args.command == "sweep":
            paths = experiments.SWEEPS[args.kind](config, args.out_dir, args.workers, config_dir)
        else:  # pragma: no cover - argparse enforces the choices
            raise ValueError(args.command)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
