"""Reference interpreter for the natural semantics of Curry.

This is a big-step, heap-based semantics: let binds thunks, variable lookup
evaluates a thunk once and writes the value back, ``?`` explores both sides,
and a case on a free variable guesses each branch pattern in turn.  Search is
depth-first with the left alternative first, which is the order the engine
enumerates answers in.

Evaluation is written as generators over one mutable heap.  Every generator
undoes its own heap writes before it resumes the producer it consumes from,
so a consumer always sees the heap exactly as it was when a value was
yielded.  The oracle shares nothing with the engine beyond the AST and the
answer type.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from ._deep import deep_call
from .answers import Answer, TCon, TFree, TLit, Term, canonical, compare_answers
from .syntax import (
    Apply, Bot, Case, Choice, ConApp, ConPat, Expr, Free, FunApp, Let, Lit, LitPat, PartRef,
    Program, RProgram, Var, embed, walk,
)

__all__ = [
    "NatConfig", "NatHeap", "OracleError", "OracleResult", "VCon", "VLit", "VFree",
    "compare_answers", "nat_hnf", "nat_normalize", "run_oracle",
]

DEFAULT_MAX_STEPS = 10**6


class OracleError(ValueError):
    """The program lies outside what the oracle evaluates (higher-order code)."""


class _Budget(Exception):
    pass


@dataclass(frozen=True)
class VCon:
    name: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class VLit:
    value: int


@dataclass(frozen=True)
class VFree:
    var: str


Value = Union[VCon, VLit, VFree]


@dataclass(frozen=True)
class Thunk:
    expr: Expr
    env: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Ind:
    """Points at another heap variable; a variable pointing at itself is free."""

    var: str


class _Hole:
    def __repr__(self):
        return "<blackhole>"


BLACKHOLE = _Hole()

Entry = Union[Thunk, VCon, VLit, Ind, _Hole]


class NatHeap:
    """Heap variables mapped to thunks, values, or indirections."""

    def __init__(self, bindings: Optional[dict[str, Entry]] = None):
        self.bindings: dict[str, Entry] = dict(bindings or {})
        self._names = itertools.count(1)

    def fresh(self, base: str = "h") -> str:
        while True:
            name = f"%{base}{next(self._names)}"
            if name not in self.bindings:
                return name

    def new_free(self) -> str:
        x = self.fresh("y")
        self.bindings[x] = Ind(x)
        return x

    def resolve(self, x: str) -> str:
        while True:
            e = self.bindings[x]
            if isinstance(e, Ind) and e.var != x:
                x = e.var
            else:
                return x

    def is_free(self, x: str) -> bool:
        e = self.bindings.get(x)
        return isinstance(e, Ind) and e.var == x

    def __getitem__(self, x: str) -> Entry:
        return self.bindings[x]

    def __setitem__(self, x: str, e: Entry):
        self.bindings[x] = e

    def __contains__(self, x: str) -> bool:
        return x in self.bindings

    def __len__(self):
        return len(self.bindings)


@dataclass
class NatConfig:
    heap: NatHeap
    control: Expr
    env: dict[str, str] = field(default_factory=dict)
    budget: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be non-negative")


@dataclass
class OracleResult:
    answers: list[Answer]
    truncated: bool
    steps: int
    rules: Counter = field(default_factory=Counter)


class _Evaluator:
    def __init__(self, program: Program, heap: NatHeap, budget: int):
        self.funs = {f.name: f for f in program.functions}
        self.heap = heap
        self.budget = budget
        self.steps = 0
        self.rules: Counter[str] = Counter()

    def tick(self, rule: str):
        self.steps += 1
        self.rules[rule] += 1
        if self.steps > self.budget:
            raise _Budget()

    # -- helpers

    def _bind_arg(self, e: Expr, env: dict[str, str]) -> str:
        """A heap variable for an argument; non-variables become fresh thunks."""
        if isinstance(e, Var):
            return env[e.name]
        x = self.heap.fresh()
        self.heap[x] = Thunk(e, tuple(env.items()))
        return x

    # -- head normal forms

    def hnf(self, e: Expr, env: dict[str, str]) -> Iterator[Value]:
        if isinstance(e, Var):
            yield from self.hnf_var(env[e.name])
        elif isinstance(e, Lit):
            self.tick("Nat-Val")
            yield VLit(e.value)
        elif isinstance(e, ConApp):
            self.tick("Nat-Val")
            yield VCon(e.name, tuple(self._bind_arg(a, env) for a in e.args))
        elif isinstance(e, Bot):
            self.tick("Nat-Fail")
        elif isinstance(e, Choice):
            self.tick("Nat-Or")
            yield from self.hnf(e.left, env)
            self.tick("Nat-Or")
            yield from self.hnf(e.right, env)
        elif isinstance(e, FunApp):
            self.tick("Nat-Fun")
            f = self.funs[e.name]
            args = [self._bind_arg(a, env) for a in e.args]
            yield from self.hnf(f.body, dict(zip(f.params, args)))
        elif isinstance(e, Let):
            self.tick("Nat-Let")
            inner = dict(env)
            for n, _ in e.bindings:
                inner[n] = self.heap.fresh()
            frozen = tuple(inner.items())
            for n, b in e.bindings:
                self.heap[inner[n]] = Thunk(b, frozen)
            yield from self.hnf(e.body, inner)
        elif isinstance(e, Free):
            self.tick("Nat-Let")
            inner = dict(env)
            for n in e.names:
                inner[n] = self.heap.new_free()
            yield from self.hnf(e.body, inner)
        elif isinstance(e, Case):
            yield from self.case(e, env)
        else:
            raise OracleError(f"oracle cannot evaluate {type(e).__name__}")

    def hnf_var(self, x: str) -> Iterator[Value]:
        heap = self.heap
        x = heap.resolve(x)
        entry = heap[x]
        if isinstance(entry, Ind):
            self.tick("Nat-Val")
            yield VFree(x)
        elif isinstance(entry, (VCon, VLit)):
            self.tick("Nat-VarCons")
            yield entry
        elif entry is BLACKHOLE:
            # a variable that needs its own value: no derivation
            self.tick("Nat-Loop")
        else:
            self.tick("Nat-VarExp")
            heap[x] = BLACKHOLE
            for v in self.hnf(entry.expr, dict(entry.env)):
                heap[x] = Ind(v.var) if isinstance(v, VFree) else v
                yield v
                heap[x] = BLACKHOLE
            heap[x] = entry

    def case(self, e: Case, env: dict[str, str]) -> Iterator[Value]:
        for v in self.hnf(e.scrutinee, env):
            if isinstance(v, VFree):
                yield from self.guess(v.var, e.branches, env)
                continue
            for p, body in e.branches:
                if isinstance(p, ConPat) and isinstance(v, VCon) and p.name == v.name:
                    self.tick("Nat-Select")
                    yield from self.hnf(body, {**env, **dict(zip(p.vars, v.args))})
                    break
                if isinstance(p, LitPat) and isinstance(v, VLit) and p.value == v.value:
                    self.tick("Nat-Select")
                    yield from self.hnf(body, env)
                    break
            else:
                self.tick("Nat-NoMatch")

    def guess(self, x: str, branches, env: dict[str, str]) -> Iterator[Value]:
        heap = self.heap
        for p, body in branches:
            self.tick("Nat-Guess")
            if isinstance(p, LitPat):
                heap[x] = VLit(p.value)
                inner = env
            else:
                ys = tuple(heap.new_free() for _ in p.vars)
                heap[x] = VCon(p.name, ys)
                inner = {**env, **dict(zip(p.vars, ys))}
            yield from self.hnf(body, inner)
        heap[x] = Ind(x)

    # -- normal forms

    def normalize(self, e: Expr, env: dict[str, str]) -> Iterator[Term]:
        x = self._bind_arg(e, env)
        yield from self.normalize_var(x)

    def normalize_var(self, x: str) -> Iterator[Term]:
        for v in self.hnf_var(x):
            if isinstance(v, VFree):
                yield TFree(v.var)
            elif isinstance(v, VLit):
                yield TLit(v.value)
            else:
                for kids in self._normalize_all(v.args):
                    yield TCon(v.name, kids)

    def _normalize_all(self, xs: tuple[str, ...]) -> Iterator[tuple[Term, ...]]:
        if not xs:
            yield ()
            return
        for t in self.normalize_var(xs[0]):
            for rest in self._normalize_all(xs[1:]):
                yield (t,) + rest


# ---------------------------------------------------------------------------
# Public entry points


def _as_program(p: Union[Program, RProgram]) -> Program:
    prog = embed(p) if isinstance(p, RProgram) else p
    for f in prog.functions:
        for x in walk(f.body):
            if isinstance(x, (Apply, PartRef)):
                raise OracleError(
                    f"the oracle evaluates first-order programs only; "
                    f"function {f.name} uses {'apply' if isinstance(x, Apply) else 'a partial application'}")
    return prog


def nat_hnf(c: NatConfig, program: Union[Program, RProgram]) -> tuple[list[tuple[dict, Value]], bool]:
    """All head normal forms of ``c.control`` with a copy of the final heap for each.

    Returns the list and whether the step budget cut the search short.
    """
    ev = _Evaluator(_as_program(program), c.heap, c.budget)
    out: list[tuple[dict, Value]] = []

    def go():
        try:
            for v in ev.hnf(c.control, dict(c.env)):
                out.append((dict(c.heap.bindings), v))
        except _Budget:
            return True
        return False

    return out, deep_call(go)


def nat_normalize(c: NatConfig, program: Union[Program, RProgram]) -> tuple[list[Answer], bool]:
    """All normal forms of ``c.control`` in left-first order, plus a truncation flag."""
    r = _run(_as_program(program), c.control, c.env, c.heap, c.budget, None)
    return r.answers, r.truncated


def _run(prog: Program, control: Expr, env, heap: NatHeap, budget: int,
         max_answers: Optional[int]) -> OracleResult:
    ev = _Evaluator(prog, heap, budget)
    answers: list[Answer] = []

    def go():
        try:
            for t in ev.normalize(control, dict(env)):
                answers.append(Answer(canonical(t)))
                if max_answers is not None and len(answers) >= max_answers:
                    break
        except _Budget:
            return True
        return False

    truncated = deep_call(go)
    return OracleResult(answers, truncated, ev.steps, ev.rules)


def run_oracle(program: Union[Program, RProgram], max_steps: int = DEFAULT_MAX_STEPS,
               max_answers: Optional[int] = None) -> OracleResult:
    """Evaluate ``main`` (the program's entry) and collect its normal forms."""
    prog = _as_program(program)
    return _run(prog, FunApp(prog.entry, ()), {}, NatHeap(), max_steps, max_answers)
