"""Command-line entry point.

Subcommands mirror the experiment kinds:

    fracpq solve      --config cfg.json [--out DIR] [--seed N]
    fracpq singular   --config cfg.json ...
    fracpq barrier    --config cfg.json ...
    fracpq principles --config cfg.json ...
    fracpq exponent   --config cfg.json [--fit-window LO:HI] ...
    fracpq sweep      --config cfg.json ...
    fracpq report     --config cfg.json ...

Common flags: --config PATH (required), --out DIR, --seed INT,
--fit-window LO:HI, --resolution-override N.  The environment variable
FRACPQ_THREADS caps the sweep worker count.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .experiments import run

_SUBCOMMANDS = ("solve", "singular", "barrier", "principles", "exponent", "sweep", "report")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracpq",
        description="Numerical laboratory for the 1-D fractional (p,q)-Laplacian",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run a {name} experiment")
        p.add_argument("--config", required=True, help="path to the JSON config file")
        p.add_argument("--out", default=None, help="override experiment.out_dir")
        p.add_argument("--seed", type=int, default=None, help="override experiment.seed")
        p.add_argument("--fit-window", default=None, metavar="LO:HI",
                       help="override the exponent-fit distance window")
        p.add_argument("--resolution-override", type=int, default=None, metavar="N",
                       help="override grid.n")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        overrides = {"experiment.kind": args.command}
        if args.out is not None:
            overrides["experiment.out_dir"] = args.out
        if args.seed is not None:
            overrides["experiment.seed"] = args.seed
        if args.resolution_override is not None:
            overrides["grid.n"] = args.resolution_override
        if args.fit_window is not None:
            try:
                lo, hi = args.fit_window.split(":")
                overrides["fit.d_lo"] = float(lo)
                overrides["fit.d_hi"] = float(hi)
            except ValueError:
                print("fracpq: --fit-window expects LO:HI with numeric bounds",
                      file=sys.stderr)
                return 2
        cfg = cfg.with_overrides(**overrides)
        result = run(cfg)
    except ConfigError as exc:
        print(f"fracpq: invalid config: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"fracpq: {exc}", file=sys.stderr)
        return 2
    for line in result.messages:
        print(line)
    for name, measured, requirement, status in result.checks:
        print(f"[{status:>4}] {name}: {measured} ({requirement})")
    print(f"artifacts in {result.out_dir}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
