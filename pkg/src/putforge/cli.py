"""Command line entry point: ``putforge <subcommand> [options] [project]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .config import ConfigError, load_config

EXIT_OK, EXIT_USAGE, EXIT_MISSING, EXIT_BUILD = 0, 2, 3, 4


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("project", nargs="?", default=".", help="subject project root (default: .)")
    p.add_argument("--workspace", help="output directory for all artifacts")
    p.add_argument("--test-command", dest="test_command")
    p.add_argument("--workload-command", dest="workload_command")
    p.add_argument("--adapter")
    p.add_argument("--assertion", dest="assertion_allow_list", action="append",
                   help="assertion name (repeatable; 'assert' is the statement)")
    p.add_argument("--exclude", action="append", help="glob of project files to ignore (repeatable)")
    p.add_argument("--row-cap", dest="provider_row_cap", type=int)
    p.add_argument("--timeout", dest="per_row_timeout", type=float, help="seconds per provider row")
    p.add_argument("--retries", type=int)
    p.add_argument("--jobs", type=int, help="PUTs executed in parallel")
    p.add_argument("--parallel-rows", dest="parallel_rows", action="store_const", const=True)
    p.add_argument("--per-site", dest="per_site", action="store_const", const=True,
                   help="one PUT family per call site instead of per target")
    p.add_argument("--max-records", dest="max_records", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="putforge",
        description="Turn conventional unit tests into parameterized unit tests fed by captured arguments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("analyze", "find tests, assertions and target methods"),
                        ("capture", "run an instrumented copy and log target arguments"),
                        ("generate", "build unions and write parameterized tests"),
                        ("classify", "execute, classify and finalize the parameterized tests"),
                        ("report", "rewrite report.md and report.json from the artifacts"),
                        ("run", "all stages in sequence")):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        if name == "capture":
            p.add_argument("--mode", choices=pipeline.MODES, required=True)
            p.add_argument("--cmd", help="command to run instead of the configured one")
    return parser


_OVERRIDES = ("workspace", "test_command", "workload_command", "adapter", "assertion_allow_list", "exclude",
              "provider_row_cap", "per_row_timeout", "retries", "jobs", "parallel_rows", "per_site",
              "max_records")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.project, {k: getattr(args, k) for k in _OVERRIDES})
    except ConfigError as exc:
        print(f"putforge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "capture":
            results = [pipeline.capture(cfg, args.mode, args.cmd)]
        elif args.command == "run":
            results = pipeline.run_all(cfg)
        else:
            results = [getattr(pipeline, args.command)(cfg)]
    except pipeline.MissingStageError as exc:
        print(f"putforge: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except pipeline.BuildError as exc:
        print(f"putforge: {exc}", file=sys.stderr)
        if exc.log_text:
            print(exc.log_text, file=sys.stderr)
        return EXIT_BUILD
    for res in results:
        for w in res.warnings:
            print(f"warning: {w}", file=sys.stderr)
        print(f"{res.stage}: {json.dumps(res.summary, sort_keys=True)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
