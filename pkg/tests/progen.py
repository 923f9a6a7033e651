"""Random small first-order programs that always terminate.

Function ``f<i>`` only calls ``f<j>`` with ``j < i``, so there is no
recursion; every other construct (choice, let, free, case, failure) is fair
game, including cases whose scrutinee is a free variable.
"""

from __future__ import annotations

import itertools
import random

from fcvm.syntax import (
    Bot, Case, Choice, ConApp, ConPat, DataDecl, Free, FuncDef, FunApp, Let, Lit, LitPat, Program, Var,
)

DATA = (
    DataDecl("Bool", (("False", 0), ("True", 0))),
    DataDecl("Nat", (("Z", 0), ("S", 1))),
    DataDecl("Pair", (("Pair", 2),)),
)


class _Gen:
    def __init__(self, rng: random.Random, allow_free: bool = True):
        self.rng = rng
        self.allow_free = allow_free
        self.names = itertools.count()
        self.arity: dict[str, int] = {}

    def var(self) -> str:
        return f"v{next(self.names)}"

    def expr(self, scope: list[str], callable_: list[str], depth: int):
        r = self.rng
        if depth <= 0 or r.random() < 0.25:
            return self.leaf(scope)
        kind = r.choice(["choice", "choice", "con", "call", "call", "let", "free", "case", "case"])
        d = depth - 1
        if kind == "choice":
            return Choice(self.expr(scope, callable_, d), self.expr(scope, callable_, d))
        if kind == "con":
            c, n = r.choice([("S", 1), ("Pair", 2), ("True", 0), ("Z", 0)])
            return ConApp(c, tuple(self.expr(scope, callable_, d) for _ in range(n)))
        if kind == "call" and callable_:
            g = r.choice(callable_)
            return FunApp(g, tuple(self.expr(scope, callable_, d) for _ in range(self.arity[g])))
        if kind == "let":
            names = [self.var() for _ in range(r.randint(1, 2))]
            # bindings only see the outer scope, so lets never loop
            binds = tuple((n, self.expr(scope, callable_, d)) for n in names)
            return Let(binds, self.expr(scope + names, callable_, d))
        if kind == "free" and self.allow_free:
            names = [self.var() for _ in range(r.randint(1, 2))]
            return Free(tuple(names), self.expr(scope + names, callable_, d))
        if kind == "case":
            return self.case(scope, callable_, d)
        return self.leaf(scope)

    def case(self, scope, callable_, d):
        r = self.rng
        scrut = Var(r.choice(scope)) if scope and r.random() < 0.6 else self.expr(scope, callable_, d)
        ty = r.choice(["Bool", "Nat", "Pair", "Lit"])
        if ty == "Bool":
            pats = [ConPat("False", ()), ConPat("True", ())]
        elif ty == "Nat":
            pats = [ConPat("Z", ()), ConPat("S", (self.var(),))]
        elif ty == "Pair":
            pats = [ConPat("Pair", (self.var(), self.var()))]
        else:
            pats = [LitPat(v) for v in r.sample(range(-2, 4), r.randint(1, 3))]
        if len(pats) > 1 and r.random() < 0.3:
            pats = pats[:-1]
        if r.random() < 0.5:
            r.shuffle(pats)
        branches = []
        for p in pats:
            bound = list(p.vars) if isinstance(p, ConPat) else []
            branches.append((p, self.expr(scope + bound, callable_, d)))
        return Case(scrut, tuple(branches))

    def leaf(self, scope):
        r = self.rng
        x = r.random()
        if scope and x < 0.5:
            return Var(r.choice(scope))
        if x < 0.75:
            return Lit(r.randint(-2, 3))
        if x < 0.8:
            return Bot()
        return ConApp(r.choice(["Z", "True", "False"]), ())

    def program(self, n_funs: int, depth: int) -> Program:
        funs = []
        for i in range(n_funs):
            name = f"f{i}"
            params = [self.var() for _ in range(self.rng.randint(0, 2))]
            body = self.expr(params, [f.name for f in funs], depth)
            funs.append(FuncDef(name, tuple(params), body))
            self.arity[name] = len(params)
        callable_ = [f.name for f in funs]
        main = FuncDef("main", (), self.expr([], callable_, depth))
        return Program(DATA, tuple(funs) + (main,))


def random_program(seed: int, n_funs: int = 3, depth: int = 4, allow_free: bool = True) -> Program:
    return _Gen(random.Random(seed), allow_free).program(n_funs, depth)
