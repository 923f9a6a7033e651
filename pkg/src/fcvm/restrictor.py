"""Lowering from FlatCurry to Restricted FlatCurry.

Two steps per source function:

1. ``lift_cases`` leaves at most one case in the function, outermost and
   scrutinizing a variable.  Every other case moves into a fresh function
   ``f#k`` whose parameters are the case's live variables.
2. Atomization turns each statement into a chain of let groups ending in a
   return expression whose arguments are all variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .syntax import (
    Apply, Bot, Case, Choice, ConApp, ConPat, Expr, Free, FreeDecl, FunApp, FuncDef, Let, Lit,
    PartRef, Program, RApply, RBot, RCase, RChoice, RConApp, RExpr, RFuncDef, RFunApp, RLet, RLit,
    RPartRef, RProgram, RVar, Return, Stmt, Var, free_vars, walk,
)


@dataclass
class FreshNamer:
    """Hands out ``base#k`` names that avoid everything in ``taken``."""

    base: str
    counter: int = 0
    taken: set[str] = field(default_factory=set)

    def fresh(self, base: str | None = None) -> str:
        while True:
            self.counter += 1
            name = f"{base or self.base}#{self.counter}"
            if name not in self.taken:
                self.taken.add(name)
                return name


def _names_in(f: FuncDef) -> set[str]:
    names = set(f.params)
    for e in walk(f.body):
        if isinstance(e, Var):
            names.add(e.name)
        elif isinstance(e, Let):
            names.update(n for n, _ in e.bindings)
        elif isinstance(e, Free):
            names.update(e.names)
        elif isinstance(e, Case):
            for p, _ in e.branches:
                if isinstance(p, ConPat):
                    names.update(p.vars)
    return names


def _has_case(e: Expr) -> bool:
    return any(isinstance(x, Case) for x in walk(e))


# ---------------------------------------------------------------------------
# Case lifting


class _Lifter:
    def __init__(self, funs: FreshNamer, out: list[FuncDef]):
        self.funs = funs
        self.out = out

    def lift(self, case: Case, vars_namer: FreshNamer) -> Expr:
        """Replace ``case`` with a call to a new function over its live variables."""
        name = self.funs.fresh()
        live = tuple(free_vars(case))
        slot = len(self.out)
        self.out.append(None)
        self.out[slot] = FuncDef(name, live, self.block(case, vars_namer))
        return FunApp(name, tuple(Var(v) for v in live))

    def block(self, e: Expr, vars_namer: FreshNamer) -> Expr:
        """Rewrite a function body so only an outermost case survives."""
        if isinstance(e, Case):
            if isinstance(e.scrutinee, Var):
                return Case(e.scrutinee, tuple((p, self.stmt(b, vars_namer)) for p, b in e.branches))
            # let-bind the scrutinee; the case is then no longer outermost
            x = vars_namer.fresh("v")
            scrut = self.expr(e.scrutinee, vars_namer)
            inner = Case(Var(x), e.branches)
            return Let(((x, scrut),), self.lift(inner, vars_namer))
        return self.stmt(e, vars_namer)

    def stmt(self, e: Expr, vars_namer: FreshNamer) -> Expr:
        if isinstance(e, Case):
            return self.lift(e, vars_namer)
        return self.expr(e, vars_namer)

    def expr(self, e: Expr, vars_namer: FreshNamer) -> Expr:
        if not _has_case(e):
            return e
        if isinstance(e, Case):
            return self.lift(e, vars_namer)
        if isinstance(e, Choice):
            return Choice(self.expr(e.left, vars_namer), self.expr(e.right, vars_namer), loc=e.loc)
        if isinstance(e, FunApp):
            return FunApp(e.name, tuple(self.expr(a, vars_namer) for a in e.args), loc=e.loc)
        if isinstance(e, ConApp):
            return ConApp(e.name, tuple(self.expr(a, vars_namer) for a in e.args), loc=e.loc)
        if isinstance(e, Apply):
            return Apply(self.expr(e.fn, vars_namer), tuple(self.expr(a, vars_namer) for a in e.args),
                         loc=e.loc)
        if isinstance(e, Let):
            return Let(tuple((n, self.expr(b, vars_namer)) for n, b in e.bindings),
                       self.expr(e.body, vars_namer), loc=e.loc)
        if isinstance(e, Free):
            return Free(e.names, self.expr(e.body, vars_namer), loc=e.loc)
        return e


def lift_cases(f: FuncDef, namer: FreshNamer, var_namer: FreshNamer | None = None) -> list[RFuncDef]:
    """Lower one function; the first result is ``f`` itself, then its lifted helpers."""
    return [_restrict_fn(g, var_namer or FreshNamer("v", taken=_names_in(g)))
            for g in _lift_all(f, namer, var_namer)]


def _lift_all(f: FuncDef, namer: FreshNamer, var_namer: FreshNamer | None = None) -> list[FuncDef]:
    helpers: list[FuncDef] = []
    vn = var_namer or FreshNamer("v", taken=_names_in(f))
    body = _Lifter(namer, helpers).block(f.body, vn)
    return [FuncDef(f.name, f.params, body, loc=f.loc)] + helpers


# ---------------------------------------------------------------------------
# Atomization


def _atom(e: Expr, namer: FreshNamer, groups: list[list[tuple[str, RExpr]]],
          current: list[tuple[str, RExpr]], rename: dict[str, str]) -> str:
    """Return a variable standing for ``e``, adding bindings for it as needed."""
    if isinstance(e, Var):
        return rename.get(e.name, e.name)
    if isinstance(e, (Let, Free)):
        # hoist the binders, then the body stands for the whole expression
        inner = _hoist(e, namer, groups, current, rename)
        return _atom(e.body, namer, groups, current, inner)
    x = namer.fresh("v")
    r = _rexpr(e, namer, groups, current, rename)
    current.append((x, r))
    return x


def _rexpr(e: Expr, namer: FreshNamer, groups, current, rename) -> RExpr:
    if isinstance(e, Case):
        raise ValueError("atomize_expr: case must be lifted first")
    if isinstance(e, Var):
        return RVar(rename.get(e.name, e.name))
    if isinstance(e, Lit):
        return RLit(e.value)
    if isinstance(e, Bot):
        return RBot()
    if isinstance(e, PartRef):
        return RPartRef(e.name)
    if isinstance(e, Choice):
        return RChoice(_atom(e.left, namer, groups, current, rename),
                       _atom(e.right, namer, groups, current, rename))
    if isinstance(e, FunApp):
        return RFunApp(e.name, tuple(_atom(a, namer, groups, current, rename) for a in e.args))
    if isinstance(e, ConApp):
        return RConApp(e.name, tuple(_atom(a, namer, groups, current, rename) for a in e.args))
    if isinstance(e, Apply):
        fn = _atom(e.fn, namer, groups, current, rename)
        return RApply(fn, tuple(_atom(a, namer, groups, current, rename) for a in e.args))
    if isinstance(e, (Let, Free)):
        inner = _hoist(e, namer, groups, current, rename)
        return _rexpr(e.body, namer, groups, current, inner)
    raise TypeError(f"not an expression: {e!r}")


def _hoist(e: Union[Let, Free], namer: FreshNamer, groups, current, rename) -> dict[str, str]:
    """Bind a nested let or free under fresh names; returns the extended renaming."""
    inner = dict(rename)
    if isinstance(e, Free):
        for n in e.names:
            inner[n] = namer.fresh("v")
        groups.append([(inner[n], FreeDecl()) for n in e.names])
        return inner
    for n, _ in e.bindings:
        inner[n] = namer.fresh("v")
    for n, b in e.bindings:
        current.append((inner[n], _rexpr(b, namer, groups, current, inner)))
    return inner


def atomize_expr(e: Expr, namer: FreshNamer) -> tuple[list[tuple[tuple[str, RExpr], ...]], RExpr]:
    """Split a case-free expression into let groups and an atomic return expression.

    The groups are listed outermost first.  Free declarations get a group of
    their own.
    """
    groups: list[list[tuple[str, RExpr]]] = []
    current: list[tuple[str, RExpr]] = []
    r = _rexpr(e, namer, groups, current, {})
    out = [tuple(g) for g in groups]
    if current:
        out.append(tuple(current))
    return out, r


def _wrap(groups, last: Stmt) -> Stmt:
    for g in reversed(groups):
        if g:
            last = RLet(tuple(g), last)
    return last


def _stmt(e: Expr, namer: FreshNamer, rename: dict[str, str]) -> Stmt:
    if isinstance(e, Free):
        inner = dict(rename)
        for n in e.names:
            inner.pop(n, None)
        return RLet(tuple((n, FreeDecl()) for n in e.names), _stmt(e.body, namer, inner))
    if isinstance(e, Let):
        inner = dict(rename)
        for n, _ in e.bindings:
            inner.pop(n, None)
        groups: list[list[tuple[str, RExpr]]] = []
        current: list[tuple[str, RExpr]] = []
        for n, b in e.bindings:
            r = _rexpr(b, namer, groups, current, inner)
            current.append((n, r))
        return _wrap(groups + [current], _stmt(e.body, namer, inner))
    groups, current = [], []
    r = _rexpr(e, namer, groups, current, rename)
    return _wrap(groups + [current], Return(r))


def _restrict_fn(f: FuncDef, namer: FreshNamer) -> RFuncDef:
    body = f.body
    if isinstance(body, Case):
        assert isinstance(body.scrutinee, Var)
        branches = []
        for p, b in body.branches:
            branches.append((p, _stmt(b, namer, {})))
        return RFuncDef(f.name, f.params, RCase(body.scrutinee.name, tuple(branches)))
    return RFuncDef(f.name, f.params, _stmt(body, namer, {}))


def restrict(p: Program) -> RProgram:
    taken = {f.name for f in p.functions}
    out: list[RFuncDef] = []
    for f in p.functions:
        namer = FreshNamer(f.name, taken=taken)
        for g in _lift_all(f, namer):
            vn = FreshNamer("v", taken=_names_in(g))
            out.append(_restrict_fn(g, vn))
    return RProgram(p.data, tuple(out), p.entry)
