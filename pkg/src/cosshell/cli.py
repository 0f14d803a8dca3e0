"""Command-line entry point: ``cosshell {run,refine-study,gradcheck,check-convexity} CONFIG``.

Exit codes: 0 success (converged or iteration cap), 1 failed gradient
check, 2 configuration error, 3 infeasible start, 4 line-search failure.
"""
import argparse
import json
import logging
import sys

from . import experiments as ex
from .config import load_config
from .errors import ConfigError, InvalidInputError

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_LINESEARCH = 0, 1, 2, 3, 4


def _parser():
    p = argparse.ArgumentParser(prog="cosshell", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in (("run", "minimize one scenario"),
                      ("refine-study", "nested mesh refinement with warm starts"),
                      ("gradcheck", "finite-difference gradient check"),
                      ("check-convexity", "convexity, rank-one and blow-up probes")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("config", help="scenario file (.toml or .json)")
        s.add_argument("--out", help="output directory (overrides run.out)")
        s.add_argument("--seed", type=int, help="seed (overrides run.seed)")
        if name == "refine-study":
            s.add_argument("--levels", type=int, help="number of levels (overrides refine.levels)")
    return p


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.out is not None:
            over["out"] = args.out
        if over:
            cfg = cfg.replace(run=over)
        levels = getattr(args, "levels", None)
        if levels is not None:
            cfg = cfg.replace(refine={"levels": levels})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command in ("run", "refine-study"):
        try:
            ex.check_start(cfg)
        except InvalidInputError as exc:
            print(f"infeasible start: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE

    if args.command == "run":
        summary, _ = ex.run(cfg)
        _emit(summary.to_dict())
        return EXIT_LINESEARCH if summary.reason == "line_search_failure" else EXIT_OK
    if args.command == "refine-study":
        rows = ex.refine_study(cfg)
        _emit(rows)
        return EXIT_LINESEARCH if any(r["reason"] == "line_search_failure" for r in rows) else EXIT_OK
    if args.command == "gradcheck":
        rep = ex.gradcheck(cfg)
        _emit(rep)
        return EXIT_OK if rep["passed"] else EXIT_CHECK
    rep = ex.check_convexity(cfg)
    _emit(rep)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
