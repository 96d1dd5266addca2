"""Command line interface: run experiments, selftest, describe weight specs.

Exit codes: 0 when every verdict passes, 1 when any verdict fails, 2 on
config errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import ConfigError, ExperimentConfig, emit, run, selftest_report

WEIGHT_SPEC_DOC = {
    "piecewise": {
        "fields": {
            "probs": "interval probabilities, nonnegative, summing to 1",
            "values": "weight value per interval; a zero atom must be exact 0.0",
        },
        "example": {"kind": "piecewise", "probs": [0.6, 0.4], "values": [0.0, 1.0]},
        "notes": "interval i is [sum(probs[:i]), sum(probs[:i+1])); tau is constant on it",
    },
    "countable": {
        "fields": {
            "probs": "atom probabilities p_i in (0,1), sum <= 1 (leftover mass is the zero atom)",
            "betas": "positive scale sequence; sum(beta_i / log(1/p_i)) must be finite",
            "ts": "bounded-variation multiplier sequence; atom i sits at betas[i]*ts[i]",
            "truncation": "kept atom count; the tail probability folds into the last atom",
        },
        "example": {"kind": "countable", "probs": [0.3, 0.2, 0.1], "betas": [1.0, 0.5, 2.0], "ts": [2.0, 2.0, 2.0], "truncation": 64},
    },
    "analytic": {
        "fields": {
            "name": "one of: uniform, power, affine, exp",
            "params": "per-name parameters (power: k; affine: a, b; exp: rate, cap)",
        },
        "example": {"kind": "analytic", "name": "uniform", "params": {}},
        "notes": "exp is the exponential quantile -log(1-u)/rate; u=1 evaluates to cap",
    },
    "inverse_cdf": {
        "fields": {
            "breakpoints": "list of [t, F(t)] pairs, nondecreasing in both coordinates",
            "cap": "value returned beyond the last breakpoint when F never reaches 1",
        },
        "example": {"kind": "inverse_cdf", "breakpoints": [[0.0, 0.0], [1.0, 0.632120558829], [2.0, 0.864664716763]], "cap": 1e9},
        "notes": "evaluates inf{t : F(t) >= u}; repeated t encode atoms, flat F encode gaps",
    },
    "shift": {
        "fields": {
            "base": "a nested weight spec",
            "h": "shift amount (may be negative; the lattice rejects negative weights)",
            "mode": "'add' (everywhere) or 'add_positive' (only where base > 0)",
        },
        "example": {"kind": "shift", "base": {"kind": "analytic", "name": "uniform"}, "h": 0.5, "mode": "add_positive"},
    },
}


def _print_verdicts(report) -> None:
    for v in report.verdicts:
        tag = "PASS" if v["passed"] else "FAIL"
        print(f"[{tag}] {v['rule']}: {v['detail']}")


def _cmd_run(args) -> int:
    try:
        obj = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = ExperimentConfig.from_json(obj)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    report = run(cfg, threads=args.threads)
    out_dir = args.out or cfg.output_dir
    written = emit(report, out_dir)
    _print_verdicts(report)
    print(f"wrote {len(written) + 1} files to {out_dir}")
    return 0 if report.passed else 1


def _cmd_selftest(args) -> int:
    report = selftest_report(seed=args.seed, threads=args.threads)
    if args.out:
        emit(report, args.out)
    _print_verdicts(report)
    return 0 if report.passed else 1


def _cmd_describe_weights(_args) -> int:
    print(json.dumps(WEIGHT_SPEC_DOC, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fpp-lab", description="first-passage percolation laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("--config", required=True, help="path to the experiment config JSON")
    p_run.add_argument("--threads", type=int, default=1, help="worker processes for replicas")
    p_run.add_argument("--out", default=None, help="output directory (overrides config output_dir)")
    p_run.set_defaults(func=_cmd_run)

    p_self = sub.add_parser("selftest", help="run the built-in oracle suite")
    p_self.add_argument("--threads", type=int, default=1)
    p_self.add_argument("--seed", type=int, default=2024)
    p_self.add_argument("--out", default=None, help="write selftest artifacts to this directory")
    p_self.set_defaults(func=_cmd_selftest)

    p_desc = sub.add_parser("describe-weights", help="print the JSON weight-spec schema")
    p_desc.set_defaults(func=_cmd_describe_weights)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
