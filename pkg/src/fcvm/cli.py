"""Command-line driver: ``fcvm run | flatten | check FILE``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Optional, TextIO

from .answers import compare_answers
from .engine import DEFAULT_MAX_STEPS, EngineError, Limits, Machine
from .frontend import ParseError, parse_file, pretty_print
from .graph import to_dot
from .oracle import OracleError, run_oracle
from .restrictor import restrict
from .syntax import NotRestricted, Program, RProgram, as_restricted, restricted_violations, validate_program

EXIT_OK, EXIT_NO_ANSWERS, EXIT_USAGE, EXIT_TRUNCATED = 0, 1, 2, 3


@dataclass
class RunConfig:
    path: str
    command: str
    max_answers: Optional[int] = None
    max_steps: int = DEFAULT_MAX_STEPS
    trace: bool = False
    dot: Optional[str] = None
    oracle: bool = False
    show_failures: bool = False
    mode: str = "ordered"
    restricted: bool = False
    entry: str = "main"

    def __post_init__(self):
        if self.max_answers is not None and self.max_answers < 1:
            raise ValueError("answer limit must be at least 1")
        if self.max_steps < 1:
            raise ValueError("step budget must be at least 1")


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fcvm", description="Run, flatten, or check FlatCurry programs.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="enumerate the answers of main")
    run.add_argument("path")
    limit = run.add_mutually_exclusive_group()
    limit.add_argument("--all", dest="max_answers", action="store_const", const=None,
                       help="print every answer (default)")
    limit.add_argument("-n", dest="max_answers", type=_positive, metavar="N",
                       help="stop after N answers")
    run.add_argument("--max-steps", type=_positive, default=DEFAULT_MAX_STEPS, metavar="K",
                     help=f"rule-firing budget (default {DEFAULT_MAX_STEPS})")
    run.add_argument("--trace", action="store_true", help="log every rule firing to stderr")
    run.add_argument("--dot", metavar="PATH", help="write the graph at each answer and at exhaustion")
    run.add_argument("--oracle", action="store_true", help="cross-check against the reference interpreter")
    mode = run.add_mutually_exclusive_group()
    mode.add_argument("--ordered", dest="mode", action="store_const", const="ordered",
                      help="oracle answers must agree in order (default)")
    mode.add_argument("--multiset", dest="mode", action="store_const", const="multiset",
                      help="oracle answers must agree up to order")
    run.add_argument("--show-failures", action="store_true", help="print <fail> for failed attempts")
    run.add_argument("--entry", default="main", help="entry function (default main)")
    run.set_defaults(mode="ordered")

    flat = sub.add_parser("flatten", help="print the restricted form")
    flat.add_argument("path")
    flat.add_argument("--entry", default="main")

    check = sub.add_parser("check", help="validate a program")
    check.add_argument("path")
    check.add_argument("--restricted", action="store_true", help="also require restricted shape")
    check.add_argument("--entry", default="main")
    return ap


def _load(cfg: RunConfig, err: TextIO, validate: bool = True) -> Optional[Program]:
    try:
        return parse_file(cfg.path, cfg.entry, validate)
    except ParseError as e:
        print(f"error: {e}", file=err)
    except OSError as e:
        print(f"error: {cfg.path}: {e.strerror or e}", file=err)
    return None


def _lower(p: Program) -> RProgram:
    try:
        return as_restricted(p)
    except NotRestricted:
        return restrict(p)


def cmd_run(cfg: RunConfig, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    prog = _load(cfg, err)
    if prog is None:
        return EXIT_USAGE
    rp = _lower(prog)
    trace = (lambda line: print(line, file=err)) if cfg.trace else None
    m = Machine(rp, Limits(cfg.max_steps, cfg.max_answers), trace)
    dots: list[str] = []

    def on_answer(machine: Machine, ans):
        if ans.failed:
            if cfg.show_failures:
                print(ans, file=out)
            return
        print(ans, file=out)
        if cfg.dot:
            dots.append(to_dot(machine.graph, machine.root, f"answer_{len(dots) + 1}"))

    try:
        result = m.run(on_answer=on_answer, keep_failures=cfg.show_failures)
    except EngineError as e:
        print(f"error: {e}", file=err)
        return EXIT_USAGE
    if cfg.dot:
        dots.append(to_dot(m.graph, m.root, "exhausted" if not result.truncated else "truncated"))
        with open(cfg.dot, "w", encoding="utf-8") as fh:
            fh.write("".join(dots))
    if result.truncated:
        print(f"truncated: resource limit reached after {result.steps} steps", file=err)
    if cfg.oracle:
        _cross_check(cfg, rp, result, out)
    if result.truncated:
        return EXIT_TRUNCATED
    return EXIT_OK if result.answers else EXIT_NO_ANSWERS


def _cross_check(cfg: RunConfig, rp: RProgram, result, out: TextIO):
    try:
        ref = run_oracle(rp, cfg.max_steps, cfg.max_answers)
    except OracleError as e:
        print(f"ORACLE: SKIPPED ({e})", file=out)
        return
    mode = cfg.mode
    if result.truncated or ref.truncated:
        # only completed answers are comparable, and not their positions
        mode = "multiset"
    cmp = compare_answers(result.answers, ref.answers, mode)
    note = " (truncated run, compared as multisets)" if mode != cfg.mode else ""
    print(f"ORACLE: {cmp}{note}", file=out)


def cmd_flatten(cfg: RunConfig, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    prog = _load(cfg, err)
    if prog is None:
        return EXIT_USAGE
    out.write(pretty_print(restrict(prog)))
    return EXIT_OK


def cmd_check(cfg: RunConfig, out: TextIO = sys.stdout, err: TextIO = sys.stderr) -> int:
    prog = _load(cfg, err, validate=False)
    if prog is None:
        return EXIT_USAGE
    diags = list(validate_program(prog).diagnostics)
    if cfg.restricted:
        diags += restricted_violations(prog).diagnostics
    if not diags:
        print("OK", file=out)
        return EXIT_OK
    for d in diags:
        print(d, file=out)
    return EXIT_USAGE


COMMANDS = {"run": cmd_run, "flatten": cmd_flatten, "check": cmd_check}


def main(argv: Optional[list[str]] = None, out: TextIO = None, err: TextIO = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    cfg = RunConfig(
        path=args.path, command=args.command, entry=args.entry,
        max_answers=getattr(args, "max_answers", None),
        max_steps=getattr(args, "max_steps", DEFAULT_MAX_STEPS),
        trace=getattr(args, "trace", False), dot=getattr(args, "dot", None),
        oracle=getattr(args, "oracle", False), show_failures=getattr(args, "show_failures", False),
        mode=getattr(args, "mode", "ordered"), restricted=getattr(args, "restricted", False),
    )
    return COMMANDS[cfg.command](cfg, out, err)


if __name__ == "__main__":
    sys.exit(main())
