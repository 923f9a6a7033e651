"""A backtracking graph-rewriting machine for FlatCurry."""

from .answers import Answer, compare_answers, show_term
from .engine import Limits, Machine, RunResult, run_main
from .frontend import ParseError, parse_file, parse_program, pretty_print
from .restrictor import restrict
from .syntax import Program, RProgram, validate_program, validate_restricted

__all__ = [
    "Answer", "Limits", "Machine", "ParseError", "Program", "RProgram", "RunResult",
    "compare_answers", "parse_file", "parse_program", "pretty_print", "restrict", "run_main",
    "show_term", "validate_program", "validate_restricted",
]
