"""lucretia (check|run|trace|fuzz) [FILE] [--json] [--fuel N] [--seed N] [--count N] [--depth N] [--unchecked]"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, TextIO

from .checker import check_program
from .diagnostics import Diagnostic, LucretiaError
from .fuzz import fuzz
from .interpreter import DEFAULT_FUEL, RuntimeFault, render_value, run, trace
from .parser import parse_program
from .typemodel import render_type

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lucretia", description="Check, run, trace or fuzz Lucretia programs.")
    p.add_argument("command", choices=("check", "run", "trace", "fuzz"))
    p.add_argument("file", nargs="?", help="a .luc source file (not used by fuzz)")
    p.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    p.add_argument("--fuel", type=int, default=None, help=f"step budget (default {DEFAULT_FUEL})")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--unchecked", action="store_true", help="run or trace without checking first")
    return p


def _color(stream: TextIO) -> bool:
    flag = os.environ.get("LUCRETIA_COLOR")
    if flag in ("0", "1"):
        return flag == "1"
    return hasattr(stream, "isatty") and stream.isatty()


class _Output:
    def __init__(self, as_json: bool, filename: str, out: TextIO, err: TextIO):
        self.as_json = as_json
        self.filename = filename
        self.out, self.err = out, err
        self.doc: dict = {"status": "ok", "judgment": None, "diagnostics": [], "trace": None,
                          "fuzz_report": None, "result": None}

    def diagnostics(self, diags: list[Diagnostic]) -> None:
        self.doc["diagnostics"].extend(d.to_json() for d in diags)
        if not self.as_json:
            paint = _color(self.err)
            for d in diags:
                text = d.render(self.filename)
                if paint:
                    text = text.replace(f"{d.severity} [", f"\x1b[31m{d.severity}\x1b[0m [", 1)
                print(text, file=self.err)

    def line(self, text: str) -> None:
        if not self.as_json:
            print(text, file=self.out)

    def finish(self, status: str, code: int) -> int:
        self.doc["status"] = status
        if self.as_json:
            json.dump(self.doc, self.out, indent=2, ensure_ascii=False)
            self.out.write("\n")
        return code


def _read(path: Optional[str]) -> str:
    if path is None:
        raise _UsageError("a FILE argument is required")
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except (OSError, UnicodeDecodeError) as err:
        raise OSError(f"cannot read {path}: {err}") from err


def _fuel(args) -> int:
    fuel = DEFAULT_FUEL if args.fuel is None else args.fuel
    if fuel < 1:
        raise _UsageError("--fuel must be at least 1")
    return fuel


def _cmd_fuzz(args, o: _Output) -> int:
    if args.count < 1 or args.depth < 1:
        raise _UsageError("--count and --depth must be at least 1")
    if args.file is not None:
        raise _UsageError("fuzz takes no FILE")
    report = fuzz(args.seed, args.count, args.depth, _fuel(args))
    o.doc["fuzz_report"] = report.to_json()
    o.line(report.render())
    if report.ok:
        return o.finish("ok", EXIT_OK)
    o.diagnostics([Diagnostic("F-VIOLATION", f"program {v.index}: {v.kind}: {v.message}")
                   for v in report.violations])
    return o.finish("error", EXIT_FAIL)


def _cmd_program(args, o: _Output) -> int:
    fuel = _fuel(args) if args.command != "check" else DEFAULT_FUEL
    src = _read(args.file)
    expr = parse_program(src)
    judgment = None
    if args.command == "check" or not args.unchecked:
        judgment = check_program(expr)
        o.doc["judgment"] = judgment.to_json()
        if args.command == "check":
            o.line(judgment.render())
            return o.finish("ok", EXIT_OK)
    if args.command == "trace":
        try:
            entries = trace(expr, fuel)
        except RuntimeFault as err:
            o.doc["trace"] = [e.to_json() for e in err.trace]
            for e in err.trace:
                o.line(e.line())
            raise
        o.doc["trace"] = [e.to_json() for e in entries]
        for e in entries:
            o.line(e.line())
    halt = run(expr, fuel)
    value = render_value(halt.value)
    rtype = render_type(judgment.type) if judgment else None
    o.doc["result"] = {"value": value, "type": rtype, "heap": halt.heap.render()}
    o.line(f"{value} : {rtype}" if rtype else value)
    return o.finish("ok", EXIT_OK)


def main(argv: Optional[list[str]] = None, out: TextIO = None, err: TextIO = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    out = out or sys.stdout
    err = err or sys.stderr
    as_json = "--json" in argv
    try:
        args = build_parser().parse_intermixed_args(argv)
    except _UsageError as e:
        o = _Output(as_json, "<args>", out, err)
        o.diagnostics([Diagnostic("U-USAGE", str(e))])
        return o.finish("usage-error", EXIT_USAGE)
    o = _Output(args.json, args.file or "<fuzz>", out, err)
    try:
        if args.command == "fuzz":
            return _cmd_fuzz(args, o)
        return _cmd_program(args, o)
    except _UsageError as e:
        o.diagnostics([Diagnostic("U-USAGE", str(e))])
        return o.finish("usage-error", EXIT_USAGE)
    except OSError as e:
        o.diagnostics([Diagnostic("U-IO", str(e))])
        return o.finish("usage-error", EXIT_USAGE)
    except LucretiaError as e:
        o.diagnostics(e.diagnostics)
        return o.finish("error", EXIT_FAIL)


if __name__ == "__main__":
    sys.exit(main())
