"""Command-line interface.

Subcommands: validate, nl, decompose, tables, bound, grid, search.
Boxes come either from ``--box FILE`` (JSON table of "num/den" strings)
or ``--wedge e,d`` (the PR / correlated-bit / facet mixture).  All
rationals are printed as "num/den"; floats appear only in explicitly
approximate columns.  Exit codes: 0 success, 2 invalid box, 3 infeasible
parameters, 4 I/O or cache failure.

Long-running work (profile scans at n >= 8 and the n = 2 exhaustive
search) must be opted into with --long-run.  Progress is reported as one
JSON object per line on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import kernels
from .boxes import BinarySystem, BoxFormatError, nl_value, rational, validate, wedge
from .bounds import BoundReport, class_grid, general_bound, iso_bound
from .decompose import DecompositionError, minimal_isotropic
from .delta import (
    DeltaTableError,
    DeltaTables,
    build_tables,
    cache_filename,
    load_tables,
)
from .protocols import brute_force_D

EXIT_OK = 0
EXIT_INVALID_BOX = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

LONG_RUN_N = 8  # profile scans at or above this n need --long-run


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage errors are parameter errors
        raise CliError(EXIT_INFEASIBLE, message)


def _log(obj: dict) -> None:
    print(json.dumps(obj), file=sys.stderr, flush=True)


def _parse_wedge(text: str) -> BinarySystem:
    parts = text.split(",")
    if len(parts) != 2:
        raise CliError(EXIT_INFEASIBLE, f"--wedge wants 'eps,delta', got {text!r}")
    try:
        return wedge(rational(parts[0]), rational(parts[1]))
    except (ValueError, ZeroDivisionError) as exc:
        raise CliError(EXIT_INFEASIBLE, f"infeasible wedge parameters: {exc}")


def _load_box(args, *, require_valid: bool = True) -> BinarySystem:
    if getattr(args, "wedge", None):
        system = _parse_wedge(args.wedge)
    elif getattr(args, "box", None):
        try:
            text = Path(args.box).read_text()
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot read box file: {exc}")
        try:
            system = BinarySystem.from_json(text)
        except BoxFormatError as exc:
            raise CliError(EXIT_INVALID_BOX, str(exc))
    else:
        raise CliError(EXIT_INFEASIBLE, "provide a box via --wedge or --box")
    if require_valid:
        report = validate(system)
        if not report.ok:
            raise CliError(
                EXIT_INVALID_BOX,
                "box violates nonsignaling-polytope membership: "
                + json.dumps(report.to_json_obj()["issues"]),
            )
    return system


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot write output: {exc}")
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _format(args, default: str) -> str:
    fmt = getattr(args, "format", None) or default
    return fmt


def _require_long_run(args, what: str) -> None:
    if not args.long_run:
        raise CliError(
            EXIT_INFEASIBLE,
            f"{what} is a long-running computation; re-run with --long-run",
        )


def _tables_for(p: Fraction, n: int, args) -> DeltaTables:
    cache_dir = getattr(args, "cache", None)
    path = None
    if cache_dir:
        path = Path(cache_dir) / cache_filename(p, n)
        if path.exists():
            try:
                tables = load_tables(path, expect_p=p, expect_n=n)
            except DeltaTableError as exc:
                raise CliError(
                    EXIT_IO, f"table cache corrupt ({type(exc).__name__}): {exc}"
                )
            _log({"event": "cache_hit", "path": str(path), "n": n,
                  "p": f"{p.numerator}/{p.denominator}"})
            return tables
    t0 = time.perf_counter()
    tables = build_tables(p, n, backend=getattr(args, "backend", None),
                          progress=_log)
    _log({"event": "tables_built", "n": n,
          "p": f"{p.numerator}/{p.denominator}",
          "seconds": round(time.perf_counter() - t0, 3)})
    if path is not None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tables.save(path)
        except OSError as exc:
            raise CliError(EXIT_IO, f"cannot write table cache: {exc}")
        _log({"event": "cache_write", "path": str(path)})
    return tables


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    system = _load_box(args, require_valid=False)
    report = validate(system)
    _emit(args, json.dumps(report.to_json_obj(), indent=2))
    return EXIT_OK if report.ok else EXIT_INVALID_BOX


def cmd_nl(args) -> int:
    system = _load_box(args)
    value, expr = nl_value(system)
    if _format(args, "text") == "json":
        _emit(args, json.dumps({
            "nl": str(value),
            "anchor": [expr.x, expr.y],
            "sign": expr.sign,
        }, indent=2))
    else:
        _emit(args, f"{value}\nfacet: {expr.label()}")
    return EXIT_OK


def cmd_decompose(args) -> int:
    system = _load_box(args)
    try:
        dec = minimal_isotropic(system)
    except DecompositionError as exc:
        raise CliError(EXIT_INVALID_BOX, f"decomposition failed: {exc}")
    _emit(args, json.dumps(dec.to_json_obj(), indent=2))
    return EXIT_OK


def cmd_tables(args) -> int:
    system = _load_box(args)
    if args.n >= LONG_RUN_N:
        _require_long_run(args, f"building tables at n={args.n}")
    p = system.prob(0, 0, 0, 0)
    if not 0 <= p <= Fraction(1, 2):
        raise CliError(EXIT_INFEASIBLE,
                       f"table parameter p={p} outside [0, 1/2]")
    if not args.cache:
        raise CliError(EXIT_INFEASIBLE, "tables needs --cache DIR to store results")
    tables = _tables_for(p, args.n, args)
    _emit(args, json.dumps({
        "path": str(Path(args.cache) / cache_filename(p, args.n)),
        "n": tables.n,
        "p": f"{p.numerator}/{p.denominator}",
        "ops_per_level": list(tables.ops_per_level or []),
        "backend": tables.backend,
    }, indent=2))
    return EXIT_OK


def cmd_bound(args) -> int:
    system = _load_box(args)
    if args.n >= LONG_RUN_N:
        _require_long_run(args, f"the profile scan at n={args.n}")
    try:
        dec = minimal_isotropic(system)
    except DecompositionError as exc:
        raise CliError(EXIT_INVALID_BOX, f"decomposition failed: {exc}")
    if dec.epsilon == 0:
        report = general_bound(system, args.n)
    else:
        tables = _tables_for(dec.p_iso.prob(0, 0, 0, 0), args.n, args)
        iso = iso_bound(dec.p_iso, args.n, tables=tables)
        report = BoundReport(
            raw_bound=iso.raw_bound, clamped_bound=iso.clamped_bound,
            witness_profile=iso.witness_profile, n=args.n, system=system,
            system_nl=nl_value(system)[0], decomposition=dec,
            backend=iso.backend,
        )
    _log({"event": "bound_done", "raw": str(report.raw_bound),
          "witness": list(report.witness_profile.as_tuple())})
    if _format(args, "json") == "csv":
        raise CliError(EXIT_INFEASIBLE, "csv output is only available for grid")
    _emit(args, json.dumps(report.to_json_obj(), indent=2))
    return EXIT_OK


def cmd_grid(args) -> int:
    system = _load_box(args)
    if args.n >= LONG_RUN_N:
        _require_long_run(args, f"the class grid at n={args.n}")
    try:
        tables = _tables_for(system.prob(0, 0, 0, 0), args.n, args)
        grid = class_grid(system, args.n, tables=tables)
    except ValueError as exc:
        raise CliError(EXIT_INFEASIBLE, str(exc))
    best, arg = grid.max_cell()
    _log({"event": "grid_done", "max": str(best), "cell": list(arg)})
    if _format(args, "csv") == "json":
        obj = {
            "n": grid.n,
            "max": str(best),
            "max_cell": list(arg),
            "cells": [[str(v) for v in row] for row in grid.values],
        }
        _emit(args, json.dumps(obj))
    else:
        _emit(args, grid.to_csv(approx=args.approx))
    return EXIT_OK


def cmd_search(args) -> int:
    system = _load_box(args)
    if args.n not in (1, 2):
        raise CliError(EXIT_INFEASIBLE, "search supports --n 1 or 2 only")
    if args.n == 2:
        _require_long_run(args, "the n=2 exhaustive search")
    t0 = time.perf_counter()
    result = brute_force_D(system, args.n, backend=getattr(args, "backend", None))
    _log({"event": "search_done", "value": str(result.value),
          "cells": result.cells_scanned,
          "seconds": round(time.perf_counter() - t0, 3)})
    obj = result.to_json_obj()
    obj["seed"] = args.seed
    obj["nl"] = str(nl_value(system)[0])
    _emit(args, json.dumps(obj, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_box_args(sub) -> None:
    sub.add_argument("--wedge", metavar="E,D",
                     help="wedge box: eps,delta as rationals, e.g. 1/5,0")
    sub.add_argument("--box", metavar="FILE", help="box JSON file")


def _add_common(sub) -> None:
    sub.add_argument("--out", metavar="FILE", help="write output here instead of stdout")
    sub.add_argument("--format", choices=("json", "csv"), default=None)
    sub.add_argument("--cache", metavar="DIR", help="delta-table cache directory")
    sub.add_argument("--jobs", type=int, default=0,
                     help="parallelism degree forwarded to the numba kernels")
    sub.add_argument("--long-run", action="store_true", dest="long_run",
                     help="opt in to long computations (n >= 8 scans, n = 2 search)")
    sub.add_argument("--seed", type=int, default=0, help="seed recorded in reports")
    sub.add_argument("--backend", choices=("numba", "numpy"), default=None,
                     help="kernel backend (default: numba when available)")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nldistill",
                     description="Exact bounds on distillable nonlocality "
                                 "of binary nonsignaling boxes.")
    subs = parser.add_subparsers(dest="command", required=True)

    specs = [
        ("validate", cmd_validate, "check polytope membership of a box", False),
        ("nl", cmd_nl, "CHSH nonlocality NL(P) with its facet", False),
        ("decompose", cmd_decompose, "minimal isotropic decomposition", False),
        ("tables", cmd_tables, "build and cache delta tables", True),
        ("bound", cmd_bound, "distillable-nonlocality upper bound", True),
        ("grid", cmd_grid, "class grid of bounds (CSV, plot-ready)", True),
        ("search", cmd_search, "exhaustive D(n,P) search, n <= 2", True),
    ]
    for name, fn, help_text, needs_n in specs:
        sub = subs.add_parser(name, help=help_text)
        _add_box_args(sub)
        if needs_n:
            sub.add_argument("--n", type=int, required=True, metavar="N",
                             help="number of box copies")
        if name == "grid":
            sub.add_argument("--approx", action="store_true",
                             help="append a decimal approximation column "
                                  "(marked approximate)")
        _add_common(sub)
        sub.set_defaults(func=fn)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "n", None) is not None and args.n < 1:
            raise CliError(EXIT_INFEASIBLE, "n must be >= 1")
        if args.jobs:
            kernels.set_num_threads(args.jobs)
        return args.func(args)
    except CliError as exc:
        print(f"nldistill: error: {exc}", file=sys.stderr)
        return exc.code
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    except OSError as exc:
        print(f"nldistill: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
