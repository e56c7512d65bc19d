"""Command line entry point: ``collardeform {check,sweep,cutoff,oracle}``.

Exit codes: 0 pass, 1 violation, 2 configuration or usage error.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .deformation import CutoffBeta, CutoffChi
from .oracles import ORACLES, run_oracle
from .scenario import ConfigError, emit_report, load_config, run_scenario

EXIT_PASS, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


def _write_reports(result, out):
    os.makedirs(out, exist_ok=True)
    emit_report(result, "csv", os.path.join(out, "report.csv"))
    emit_report(result, "json", os.path.join(out, "report.json"))
    emit_report(result, "plot", os.path.join(out, "plot_data.json"))


def _summary(result, label):
    lam = result.lambda_star
    star = "none" if lam is None else format(lam, "g")
    failing = sum(1 for r in result.rows if not r.passed and not r.region.endswith("difference"))
    print(f"{label} {result.name}: lambda_star={star}, failing absolute rows={failing}")


def cmd_check(args):
    cfg = load_config(args.scenario)
    lam = max(cfg.lambdas)
    result = run_scenario(cfg, [lam])
    _write_reports(result, args.out)
    _summary(result, "check")
    return EXIT_PASS if result.passing(lam) else EXIT_VIOLATION


def cmd_sweep(args):
    cfg = load_config(args.scenario)
    result = run_scenario(cfg)
    _write_reports(result, args.out)
    _summary(result, "sweep")
    return EXIT_PASS if result.lambda_star is not None else EXIT_VIOLATION


def cmd_cutoff(args):
    if args.samples < 2:
        raise ConfigError("need at least two samples")
    if args.which == "chi":
        xs = np.linspace(0.0, 1.2, args.samples)
        vals = CutoffChi()(xs)
        header = ["s", "chi", "chi_d1", "chi_d2"]
    else:
        xs = np.linspace(-2.5, 0.0, args.samples)
        vals = CutoffBeta()(xs)
        header = ["s", "beta", "beta_d1", "beta_d2"]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(xs, *vals):
            writer.writerow([format(float(v), ".17g") for v in row])
    return EXIT_PASS


def cmd_oracle(args):
    summary = run_oracle(args.test, args.seed, args.trials)
    print(json.dumps(summary))
    return EXIT_PASS if summary["pass"] else EXIT_VIOLATION


def build_parser():
    p = argparse.ArgumentParser(prog="collardeform", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, text in (("check", cmd_check, "evaluate the largest configured lambda"),
                           ("sweep", cmd_sweep, "evaluate every lambda and report lambda_star")):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("cutoff", help="sample a cutoff profile and its derivatives as CSV")
    sp.add_argument("--which", choices=["chi", "beta"], required=True)
    sp.add_argument("--samples", type=int, default=201)
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.set_defaults(func=cmd_cutoff)

    sp = sub.add_parser("oracle", help="run a built-in consistency oracle")
    sp.add_argument("--test", choices=sorted(ORACLES), required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=100)
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
