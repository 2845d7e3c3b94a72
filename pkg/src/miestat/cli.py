"""Command-line front end.

Subcommands pick the operation, a config file carries the physics
(geometry or zeta targets, coupling, replica indices), and a handful of
flags override the config for quick runs:

    miestat compare --config run.cfg --seed 7 --trajectories 2000 --out results/

Exit codes: 0 success, 1 validation error, 2 convergence failure,
3 I/O failure.  The worker count is controlled only by the
MIESTAT_WORKERS environment variable (unset means auto-detect).
"""

import argparse
import sys

from .config import ExperimentConfig, parse_config
from .errors import ConvergenceError
from .harness import emit_report, run_die, run_distribution, run_sweep

FORCED_ENGINES = {
    "analytic": "analytic",
    "simulate": "lattice",
    "compare": "both",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="miestat",
        description="Measurement-induced entanglement statistics on a ring.")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "analytic": "closed-form cumulants only",
        "simulate": "Born-sampled lattice cumulants only",
        "compare": "both engines side by side",
        "sweep": "engines as configured",
        "distribution": "sampled entropy histogram plus analytic density",
        "die": "uniform-outcome ensemble average vs analytic value",
    }
    for name, desc in commands.items():
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", help="flat key=value or JSON config file")
        p.add_argument("--seed", type=int, help="base RNG seed")
        p.add_argument("--trajectories", type=int,
                       help="sampled trajectories per parameter point")
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--format", choices=("csv", "json"),
                       help="report format")
        p.add_argument("--engines", choices=("analytic", "lattice", "both"),
                       help="engine selection (sweep/die only)")
    return parser


def load_config(args):
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    cfg = cfg.replace(seed=args.seed, trajectories=args.trajectories,
                      out=args.out, format=args.format, engines=args.engines)
    forced = FORCED_ENGINES.get(args.command)
    if forced:
        cfg = cfg.replace(engines=forced)
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "distribution":
            reports = [run_distribution(cfg)]
        elif args.command == "die":
            reports = run_die(cfg)
        else:
            reports = run_sweep(cfg)
        written = emit_report(reports, cfg)
        blocked = [rep for rep in reports if rep.errors]
        for rep in blocked:
            for engine, msg in rep.errors.items():
                print(f"warning: zeta={rep.zeta:.6g} {engine}: {msg}",
                      file=sys.stderr)
        for path in written:
            print(path)
        if blocked and all(not rep.rows for rep in reports):
            raise ConvergenceError("every parameter point failed")
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
