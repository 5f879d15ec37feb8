"""Command line entry point: ``mflab <subcommand> --config <path>``.

Exit codes are 0 on success, 1 when an invariant check fails and 2 for a
malformed or inconsistent config.
"""

import argparse
import os
import sys

from . import experiment
from .experiment import ConfigError, ExperimentConfig

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 1, 2


def _load(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_dict({})
    if args.seed is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    return cfg


def build_parser():
    p = argparse.ArgumentParser(prog="mflab", description="Mean-field limit experiments on a truncated Fock space.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("run-convergence", "quantum vs classical characteristic functions along the epsilon list"),
                        ("run-hartree", "integrate the Hartree equation and record mass/energy drift"),
                        ("check-invariants", "run the algebraic and dynamical invariant suite")]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="TOML or JSON experiment config (defaults when omitted)")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--output", default=None, help="output directory (overrides the config)")
    s = sub.add_parser("plot", help="render a result CSV as an SVG line chart")
    s.add_argument("table", help="CSV written by run-convergence or run-hartree")
    s.add_argument("--kind", choices=["convergence", "hartree"], default=None)
    s.add_argument("--out", default=None, help="SVG path (defaults next to the table)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "plot":
        kind = args.kind or ("hartree" if "hartree" in os.path.basename(args.table) else "convergence")
        out = args.out or os.path.splitext(args.table)[0] + ".svg"
        try:
            experiment.plot(args.table, kind, out)
        except (OSError, ValueError) as err:
            print(f"error: {err}", file=sys.stderr)
            return EXIT_CONFIG
        print(out)
        return EXIT_OK
    try:
        cfg = _load(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run-convergence":
        table = experiment.run_convergence(cfg, args.output)
        for eps, sup, _ in table.summary:
            print(f"eps={eps:<10g} sup_error={sup:.6e}")
        return EXIT_OK
    if args.command == "run-hartree":
        table = experiment.run_hartree(cfg, args.output)
        last = table.rows[-1]
        print(f"t={last[0]:g} mass_drift={max(table.column('mass_drift')):.3e} "
              f"energy_drift={max(table.column('energy_drift')):.3e}")
        return EXIT_OK
    table, ok = experiment.check_invariants(cfg, args.output)
    for name, value, tol, passed in table.rows:
        print(f"{'PASS' if passed else 'FAIL'} {name}: {value:.3e} (tol {tol:.1e})")
    return EXIT_OK if ok else EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
