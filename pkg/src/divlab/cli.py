"""Command-line entry point: ``divlab {sweep,codep,oracle,verify-code,as}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import harness, theory


def _emit(res: harness.SweepResult, args) -> int:
    text = harness.results_to_text(res, args.format)
    if args.out:
        with open(args.out, "w", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    for rec in res.failures:
        print(f"record failed: {rec['error']}", file=sys.stderr)
    return 0 if res.ok else 1


def cmd_sweep(args) -> int:
    cfg = harness.load_config(args.config)
    return _emit(harness.run_sweep(cfg), args)


def cmd_codep(args) -> int:
    cfg = harness.load_config(args.config)
    res = harness.run_codependence(cfg)
    if res.precondition_ok is False:
        print("warning: alignment precondition check failed; no flip is guaranteed", file=sys.stderr)
    return _emit(res, args)


def cmd_as(args) -> int:
    cfg = harness.load_config(args.config)
    return _emit(harness.run_agreement_scores(cfg), args)


def cmd_oracle(args) -> int:
    fn = theory.analytic_h2_dbat if args.method == "dbat" else theory.analytic_h2_divdis_seq
    try:
        angle = fn(args.r)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"{angle:.6g}")
    return 0


def cmd_verify_code(args) -> int:
    try:
        if args.q is not None or args.m is not None:
            if args.q is None or args.m is None:
                raise ValueError("--q and --m go together")
            code = theory.generalized_hadamard(args.q, args.m)
            if args.n is not None and args.n != code.length:
                raise ValueError(f"--n {args.n} does not match q^m = {code.length}")
        else:
            if args.n is None:
                raise ValueError("--n is required for the binary Hadamard code")
            code = theory.hadamard_code(args.n)
        if args.target:
            h_star = theory.load_labels(args.target)
        else:
            h_star = np.random.default_rng(args.seed).integers(0, code.q, code.length)
        aligned = theory.align_code_to_target(code, h_star)
        report = theory.verify_diverse_nongeneralizing(aligned, h_star)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(json.dumps({"q": code.q, "N": code.length, **report.as_dict()}))
    return 0 if report.below_chance_bound else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="divlab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, help_ in (
        ("sweep", cmd_sweep, "run a spurious-ratio / K / alpha sweep"),
        ("codep", cmd_codep, "run the co-dependence grid"),
        ("as", cmd_as, "agreement scores of found hypotheses"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config")
        s.add_argument("-o", "--out", help="results file (default: stdout)")
        s.add_argument("--format", choices=["csv", "jsonl"], default="csv")
        s.set_defaults(func=fn)

    s = sub.add_parser("oracle", help="print the analytic second-hypothesis angle")
    s.add_argument("--method", choices=["dbat", "divdis-seq"], required=True)
    s.add_argument("--r", type=float, required=True)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("verify-code", help="exhaustively verify a diverse-but-wrong code")
    s.add_argument("--n", type=int)
    s.add_argument("--q", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--target", help="label file for h*; random if omitted")
    s.add_argument("--seed", type=int, default=0, help="seed for the random target")
    s.set_defaults(func=cmd_verify_code)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
