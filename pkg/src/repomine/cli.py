"""Command-line entry point.

Exit status: 0 success, 1 analysis failure (stage named), 2 configuration
error (key named), 3 repository error (path named).
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .config import ConfigError, load_config
from .gitio import GitError
from .runner import SUBCOMMAND_STAGES, execute

log = logging.getLogger("repomine")

EXIT_OK = 0
EXIT_ANALYSIS = 1
EXIT_CONFIG = 2
EXIT_REPO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repomine", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML run configuration")
    common.add_argument("--out", default="out", help="artifact directory (default: out)")
    common.add_argument("--jobs", type=int, default=None, help="worker threads")
    common.add_argument("--seed", type=int, default=None, help="override run.seed")
    common.add_argument("--variant", action="append", default=None,
                        help="restrict to named variant(s)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "extract": "write fact tables per variant",
        "networks": "write per-window developer networks",
        "roles": "core/peripheral agreement study",
        "brooks": "team size vs productivity study",
        "turnover": "turnover vs bug density study",
        "compare": "all configured studies plus cross-variant verdicts",
        "report": "like compare, with report.md as the headline output",
        "run": "full pipeline (alias of compare)",
    }
    for name in SUBCOMMAND_STAGES:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        run.seed = args.seed
    if args.variant:
        unknown = [v for v in args.variant if v not in {x.name for x in run.variants}]
        if unknown:
            print(f"config error: variant: unknown variant {unknown[0]!r}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        outcome = execute(run, args.out, args.command, jobs=args.jobs, only=args.variant)
    except GitError as exc:
        print(f"repository error: {run.repo}: {exc}", file=sys.stderr)
        return EXIT_REPO
    if outcome.cache_hits:
        log.info("shared extraction reused %d time(s)", outcome.cache_hits)
    if outcome.failed:
        for v in outcome.failed:
            print(f"analysis failure in stage {v.error.stage} ({v.name}): {v.error.cause}",
                  file=sys.stderr)
        return EXIT_ANALYSIS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
