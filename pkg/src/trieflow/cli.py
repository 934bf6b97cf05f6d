"""Batch command-line client.

    nmo run PROGRAM.rls [--export-dir D] [--overwrite] [--format csv|ntriples]
                        [--max-facts N] [--max-iterations N] [--timeout SECS]
                        [--export PRED ...] [--timing] [-v]

Exit codes: 0 success, 1 program error (syntax, safety, stratification,
usage), 2 runtime error (I/O, malformed data), 3 resource limit exceeded.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError, ProgramError, ResourceLimitError, TrieflowError
from .io import NullNamer, ensure_directory, export, export_name
from .reasoner import Limits, load_program, materialise

EXIT_OK = 0
EXIT_PROGRAM = 1
EXIT_RUNTIME = 2
EXIT_LIMIT = 3


@dataclass
class RunConfig:
    program: Path
    export_dir: Path | None = None
    overwrite: bool = False
    format: str = "csv"
    limits: Limits = field(default_factory=Limits)
    export: list[str] | None = None
    verbosity: int = 0
    timing: bool = False

    def __post_init__(self):
        if self.export and self.export_dir is None:
            raise ValueError("--export needs --export-dir")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PROGRAM, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nmo", description="Materialise a Datalog program and store the results.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run_p = sub.add_parser("run", help="load data, apply the rules, report and export")
    run_p.add_argument("program", type=Path, help="rule file (.rls)")
    run_p.add_argument("--export-dir", type=Path, help="directory for exported predicates")
    run_p.add_argument("--overwrite", action="store_true", help="replace existing export files")
    run_p.add_argument("--format", choices=("csv", "ntriples"), default="csv")
    run_p.add_argument("--max-facts", type=int, default=Limits.max_facts)
    run_p.add_argument("--max-iterations", type=int, default=Limits.max_iterations)
    run_p.add_argument("--timeout", type=float, default=None, metavar="SECS")
    run_p.add_argument("--export", nargs="+", metavar="PRED", help="export only these predicates")
    run_p.add_argument("--timing", action="store_true", help="print load_ms= and reason_ms= lines")
    run_p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        program=args.program,
        export_dir=args.export_dir,
        overwrite=args.overwrite,
        format=args.format,
        limits=Limits(args.max_facts, args.max_iterations, args.timeout),
        export=args.export,
        verbosity=args.verbose,
        timing=args.timing,
    )


def run(config: RunConfig, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        program, base_dir = load_program(config.program)
    except OSError as exc:
        print(f"error: cannot read {config.program}: {exc.strerror or exc}", file=err)
        return EXIT_RUNTIME
    except ProgramError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_PROGRAM
    arities = program.arities()
    if config.export:
        unknown = [p for p in config.export if p not in arities]
        if unknown:
            print(f"error: unknown predicate(s) to export: {', '.join(unknown)}", file=err)
            return EXIT_PROGRAM
    try:
        state, report = materialise(program, config.limits, base_dir=base_dir)
    except ProgramError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_PROGRAM
    except ResourceLimitError as exc:
        print(f"error: resource limit exceeded: {exc}", file=err)
        return EXIT_LIMIT
    except (DataError, TrieflowError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_RUNTIME

    print(f"loading: {report.load_seconds * 1000:.0f} ms", file=out)
    for i, seconds in enumerate(report.stratum_seconds):
        print(f"reasoning stratum {i}: {seconds * 1000:.0f} ms", file=out)
    print(f"reasoning: {report.reason_seconds * 1000:.0f} ms", file=out)
    derived_preds = program.head_predicates()
    for pred in sorted(derived_preds):
        print(f"derived {pred}: {report.derived.get(pred, 0)}", file=out)
    print(f"inferred facts: {report.inferred_facts}", file=out)
    if report.nulls:
        print(f"nulls: {report.nulls} ({report.chase_applications} chase applications)", file=out)
    if config.timing:
        print(f"load_ms={round(report.load_seconds * 1000)}", file=out)
        print(f"reason_ms={round(report.reason_seconds * 1000)}", file=out)

    if config.export_dir is not None:
        targets = config.export if config.export else sorted(derived_preds)
        try:
            directory = ensure_directory(config.export_dir)
            nulls = NullNamer()
            for pred in targets:
                path = directory / export_name(pred, config.format)
                rows = export(pred, state.relation(pred), config.format, path, state.dictionary,
                              overwrite=config.overwrite, nulls=nulls)
                print(f"exported {pred}: {rows} rows to {path}", file=out)
        except DataError as exc:
            print(f"error: {exc}", file=err)
            return EXIT_RUNTIME
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
    except ValueError as exc:
        parser.error(str(exc))
    level = logging.WARNING - 10 * min(config.verbosity, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
