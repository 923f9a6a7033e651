"""Abstract syntax for FlatCurry and Restricted FlatCurry, plus validation.

Two program levels live here:

* ``Program`` holds full FlatCurry: arbitrary nesting of lets, cases,
  choices and applications.
* ``RProgram`` holds the restricted form the engine executes: every
  application argument is a variable and each function body has at most one
  case, which must be outermost.

Both are plain frozen dataclasses. Source locations ride along on nodes
but never take part in equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

APPLY = "apply"

LIT_MIN = -(2**63)
LIT_MAX = 2**63 - 1


@dataclass(frozen=True)
class SourceLocation:
    file: str
    line: int
    column: int

    def __post_init__(self):
        if self.line < 1 or self.column < 1:
            raise ValueError("line and column are 1-based")

    def __str__(self):
        return f"{self.file}:{self.line}:{self.column}"


def _loc():
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------------------
# FlatCurry expressions


@dataclass(frozen=True)
class Var:
    name: str
    loc: Optional[SourceLocation] = _loc()


@dataclass(frozen=True)
class Lit:
    value: int
    loc: Optional[SourceLocation] = _loc()


@dataclass(frozen=True)
class Bot:
    loc: Optional[SourceLocation] = _loc()


@dataclass(frozen=True)
class Choice:
    left: "Expr"
    right: "Expr"
    loc: Optional[SourceLocation] = _loc()


@dataclass(frozen=True)
class FunApp:
    name: str
    args: tuple["Expr", ...]
    loc: Optional[SourceLocation] = _loc()


@dataclass(frozen=True)
class ConApp:
    name: str
    args: tuple["Expr", ...]
    loc: Optional[SourceLocation] = _loc()


@dataclass(frozen=True)
class PartRef:
    """A function or constructor used as a value, below its arity.

    Evaluates to a partial application that is missing every argument.
    """

    name: str
    loc: Optional[SourceLocation] = _loc()


@dataclass(frozen=True)
class Let:
    bindings: tuple[tuple[str, "Expr"], ...]
    body: "Expr"
    loc: Optional[SourceLocation] = _loc()


@dataclass(frozen=True)
class Free:
    names: tuple[str, ...]
    body: "Expr"
    loc: Optional[SourceLocation] = _loc()


@dataclass(frozen=True)
class ConPat:
    name: str
    vars: tuple[str, ...]


@dataclass(frozen=True)
class LitPat:
    value: int


Pattern = Union[ConPat, LitPat]


@dataclass(frozen=True)
class Case:
    scrutinee: "Expr"
    branches: tuple[tuple[Pattern, "Expr"], ...]
    loc: Optional[SourceLocation] = _loc()


@dataclass(frozen=True)
class Apply:
    fn: "Expr"
    args: tuple["Expr", ...]
    loc: Optional[SourceLocation] = _loc()


Expr = Union[Var, Lit, Bot, Choice, FunApp, ConApp, PartRef, Let, Free, Case, Apply]


@dataclass(frozen=True)
class FuncDef:
    name: str
    params: tuple[str, ...]
    body: Expr
    loc: Optional[SourceLocation] = _loc()


@dataclass(frozen=True)
class DataDecl:
    name: str
    constructors: tuple[tuple[str, int], ...]
    params: tuple[str, ...] = ()
    loc: Optional[SourceLocation] = _loc()


@dataclass(frozen=True)
class Program:
    data: tuple[DataDecl, ...]
    functions: tuple[FuncDef, ...]
    entry: str = "main"

    def function(self, name: str) -> FuncDef:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def function_arities(self) -> dict[str, int]:
        return {f.name: len(f.params) for f in self.functions}

    def constructor_arities(self) -> dict[str, int]:
        return {c: n for d in self.data for c, n in d.constructors}


# ---------------------------------------------------------------------------
# Restricted FlatCurry


@dataclass(frozen=True)
class RVar:
    name: str


@dataclass(frozen=True)
class RLit:
    value: int


@dataclass(frozen=True)
class RBot:
    pass


@dataclass(frozen=True)
class RChoice:
    left: str
    right: str


@dataclass(frozen=True)
class FreeDecl:
    pass


@dataclass(frozen=True)
class RFunApp:
    name: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class RConApp:
    name: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class RApply:
    fn: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class RPartRef:
    name: str


RExpr = Union[RVar, RLit, RBot, RChoice, FreeDecl, RFunApp, RConApp, RApply, RPartRef]


@dataclass(frozen=True)
class Return:
    expr: RExpr


@dataclass(frozen=True)
class RLet:
    bindings: tuple[tuple[str, RExpr], ...]
    rest: "Stmt"


Stmt = Union[RLet, Return]


@dataclass(frozen=True)
class RCase:
    scrutinee: str
    branches: tuple[tuple[Pattern, Stmt], ...]


Block = Union[RCase, RLet, Return]


@dataclass(frozen=True)
class RFuncDef:
    name: str
    params: tuple[str, ...]
    body: Block


@dataclass(frozen=True)
class RProgram:
    data: tuple[DataDecl, ...]
    functions: tuple[RFuncDef, ...]
    entry: str = "main"

    def function(self, name: str) -> RFuncDef:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def function_arities(self) -> dict[str, int]:
        return {f.name: len(f.params) for f in self.functions}

    def constructor_arities(self) -> dict[str, int]:
        return {c: n for d in self.data for c, n in d.constructors}


# ---------------------------------------------------------------------------
# Helpers


def children(e: Expr) -> Iterator[Expr]:
    if isinstance(e, Choice):
        yield e.left
        yield e.right
    elif isinstance(e, (FunApp, ConApp)):
        yield from e.args
    elif isinstance(e, Apply):
        yield e.fn
        yield from e.args
    elif isinstance(e, Let):
        for _, b in e.bindings:
            yield b
        yield e.body
    elif isinstance(e, Free):
        yield e.body
    elif isinstance(e, Case):
        yield e.scrutinee
        for _, b in e.branches:
            yield b


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        x = stack.pop()
        yield x
        stack.extend(reversed(list(children(x))))


def free_vars(e: Expr) -> list[str]:
    """Variables occurring free in ``e``, in first-occurrence order."""
    out: list[str] = []
    seen: set[str] = set()

    def go(x: Expr, bound: frozenset[str]):
        if isinstance(x, Var):
            if x.name not in bound and x.name not in seen:
                seen.add(x.name)
                out.append(x.name)
        elif isinstance(x, Let):
            inner = bound | {n for n, _ in x.bindings}
            for _, b in x.bindings:
                go(b, inner)
            go(x.body, inner)
        elif isinstance(x, Free):
            go(x.body, bound | set(x.names))
        elif isinstance(x, Case):
            go(x.scrutinee, bound)
            for p, b in x.branches:
                go(b, bound | set(p.vars) if isinstance(p, ConPat) else bound)
        else:
            for c in children(x):
                go(c, bound)

    go(e, frozenset())
    return out


def is_first_order(e: Expr) -> bool:
    return not any(isinstance(x, (Apply, PartRef)) for x in walk(e))


def constructor_siblings(p: Union[Program, RProgram], con: str) -> list[tuple[str, int]]:
    for d in p.data:
        if any(c == con for c, _ in d.constructors):
            return list(d.constructors)
    raise KeyError(f"unknown constructor {con!r}")


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    message: str
    function: Optional[str] = None
    loc: Optional[SourceLocation] = None

    def __str__(self):
        where = str(self.loc) if self.loc else (self.function or "<program>")
        if self.loc and self.function:
            where = f"{self.loc} (in {self.function})"
        return f"{where}: {self.rule}: {self.message}"


@dataclass
class Report:
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def rules(self) -> list[str]:
        return [d.rule for d in self.diagnostics]

    def __iter__(self):
        return iter(self.diagnostics)


def _dups(names) -> list[str]:
    seen, dup = set(), []
    for n in names:
        if n in seen and n not in dup:
            dup.append(n)
        seen.add(n)
    return dup


def _check_data(data, report: Report) -> dict[str, int]:
    arities: dict[str, int] = {}
    for d in data:
        for c, n in d.constructors:
            if c in arities:
                report.diagnostics.append(
                    Diagnostic("duplicate-constructor", f"constructor {c} declared twice", loc=d.loc))
            if n < 0:
                report.diagnostics.append(
                    Diagnostic("arity", f"constructor {c} has negative arity", loc=d.loc))
            arities[c] = n
    return arities


def _check_patterns(branches, con_ar, sibling_of, fname, loc, report):
    diag = report.diagnostics.append
    if not branches:
        diag(Diagnostic("empty-case", "case has no branches", fname, loc))
        return
    pats = [p for p, _ in branches]
    if all(isinstance(p, LitPat) for p in pats):
        if len({p.value for p in pats}) != len(pats):
            diag(Diagnostic("duplicate-pattern", "literal patterns repeat", fname, loc))
        return
    if not all(isinstance(p, ConPat) for p in pats):
        diag(Diagnostic("mixed-patterns", "case mixes literal and constructor patterns", fname, loc))
        return
    names = [p.name for p in pats]
    if _dups(names):
        diag(Diagnostic("duplicate-pattern", f"constructor patterns repeat: {_dups(names)}", fname, loc))
    types = set()
    for p in pats:
        if p.name not in con_ar:
            diag(Diagnostic("undefined-constructor", f"unknown constructor {p.name}", fname, loc))
            continue
        types.add(sibling_of[p.name])
        if len(p.vars) != con_ar[p.name]:
            diag(Diagnostic("arity", f"pattern {p.name} binds {len(p.vars)} variables, "
                                     f"declared arity is {con_ar[p.name]}", fname, loc))
        if _dups(p.vars):
            diag(Diagnostic("duplicate-variable", f"pattern {p.name} repeats {_dups(p.vars)}", fname, loc))
    if len(types) > 1:
        diag(Diagnostic("mixed-types", "case patterns come from different data types", fname, loc))


def validate_program(p: Program) -> Report:
    """Check arities, scoping and case shape. Never raises."""
    report = Report()
    diag = report.diagnostics.append
    con_ar = _check_data(p.data, report)
    sibling_of = {c: d.name for d in p.data for c, _ in d.constructors}
    fun_ar: dict[str, int] = {}
    for f in p.functions:
        if f.name in fun_ar:
            diag(Diagnostic("duplicate-function", f"function {f.name} defined twice", f.name, f.loc))
        fun_ar[f.name] = len(f.params)
    if APPLY in fun_ar:
        diag(Diagnostic("reserved-name", "'apply' is the built-in apply", APPLY))
    if p.entry not in fun_ar:
        diag(Diagnostic("undefined-entry", f"entry function {p.entry} is not defined"))
    elif fun_ar[p.entry] != 0:
        diag(Diagnostic("entry-arity", f"entry function {p.entry} must take no arguments",
                        p.entry, p.function(p.entry).loc))

    def binder(name, fname, loc):
        if name in fun_ar:
            diag(Diagnostic("shadowing", f"variable {name} shadows a function", fname, loc))

    def go(e: Expr, scope: frozenset[str], fname: str):
        loc = e.loc
        if isinstance(e, Var):
            if e.name not in scope:
                diag(Diagnostic("unbound-variable", f"variable {e.name} is not in scope", fname, loc))
        elif isinstance(e, Lit):
            if not LIT_MIN <= e.value <= LIT_MAX:
                diag(Diagnostic("literal-range", f"literal {e.value} exceeds 64 bits", fname, loc))
        elif isinstance(e, Bot):
            pass
        elif isinstance(e, Choice):
            go(e.left, scope, fname)
            go(e.right, scope, fname)
        elif isinstance(e, FunApp):
            if e.name not in fun_ar:
                diag(Diagnostic("undefined-function", f"function {e.name} is not defined", fname, loc))
            elif fun_ar[e.name] != len(e.args):
                diag(Diagnostic("arity", f"{e.name} expects {fun_ar[e.name]} arguments, "
                                         f"got {len(e.args)}", fname, loc))
            for a in e.args:
                go(a, scope, fname)
        elif isinstance(e, ConApp):
            if e.name not in con_ar:
                diag(Diagnostic("undefined-constructor", f"constructor {e.name} is not declared", fname, loc))
            elif con_ar[e.name] != len(e.args):
                diag(Diagnostic("arity", f"{e.name} expects {con_ar[e.name]} arguments, "
                                         f"got {len(e.args)}", fname, loc))
            for a in e.args:
                go(a, scope, fname)
        elif isinstance(e, PartRef):
            arity = fun_ar.get(e.name, con_ar.get(e.name))
            if arity is None:
                diag(Diagnostic("undefined-function", f"{e.name} is not defined", fname, loc))
            elif arity == 0:
                diag(Diagnostic("arity", f"{e.name} has no arguments to leave out", fname, loc))
        elif isinstance(e, Apply):
            if not e.args:
                diag(Diagnostic("arity", "apply needs at least one argument", fname, loc))
            go(e.fn, scope, fname)
            for a in e.args:
                go(a, scope, fname)
        elif isinstance(e, Let):
            names = [n for n, _ in e.bindings]
            if _dups(names):
                diag(Diagnostic("duplicate-variable", f"let binds {_dups(names)} twice", fname, loc))
            for n in names:
                binder(n, fname, loc)
            inner = scope | set(names)
            for _, b in e.bindings:
                go(b, inner, fname)
            go(e.body, inner, fname)
            _check_alias_cycles(e.bindings, fname, loc, report)
        elif isinstance(e, Free):
            if _dups(e.names):
                diag(Diagnostic("duplicate-variable", f"free declares {_dups(e.names)} twice", fname, loc))
            if not e.names:
                diag(Diagnostic("empty-free", "free declares no variables", fname, loc))
            for n in e.names:
                binder(n, fname, loc)
            go(e.body, scope | set(e.names), fname)
        elif isinstance(e, Case):
            go(e.scrutinee, scope, fname)
            _check_patterns(e.branches, con_ar, sibling_of, fname, loc, report)
            for pat, b in e.branches:
                if isinstance(pat, ConPat):
                    for v in pat.vars:
                        binder(v, fname, loc)
                    go(b, scope | set(pat.vars), fname)
                else:
                    go(b, scope, fname)
        else:
            diag(Diagnostic("unknown-node", f"not an expression: {e!r}", fname, loc))

    for f in p.functions:
        if _dups(f.params):
            diag(Diagnostic("duplicate-variable", f"parameters repeat {_dups(f.params)}", f.name, f.loc))
        for x in f.params:
            binder(x, f.name, f.loc)
        go(f.body, frozenset(f.params), f.name)
    return report


def _check_alias_cycles(bindings, fname, loc, report):
    alias = {n: b.name for n, b in bindings if isinstance(b, (Var, RVar))}
    for start in alias:
        seen = {start}
        cur = alias[start]
        while cur in alias:
            if cur in seen:
                report.diagnostics.append(
                    Diagnostic("alias-cycle", f"let bindings {sorted(seen)} alias each other", fname, loc))
                return
            seen.add(cur)
            cur = alias[cur]


_REXPR = (RVar, RLit, RBot, RChoice, FreeDecl, RFunApp, RConApp, RApply, RPartRef)


def validate_restricted(p: RProgram) -> Report:
    """Check the restricted-form rules on top of arity and scoping."""
    report = Report()
    diag = report.diagnostics.append
    con_ar = _check_data(p.data, report)
    sibling_of = {c: d.name for d in p.data for c, _ in d.constructors}
    fun_ar = {f.name: len(f.params) for f in p.functions}
    if p.entry not in fun_ar:
        diag(Diagnostic("undefined-entry", f"entry function {p.entry} is not defined"))
    elif fun_ar[p.entry] != 0:
        diag(Diagnostic("entry-arity", f"entry function {p.entry} must take no arguments", p.entry))

    def var(name, scope, fname):
        if not isinstance(name, str):
            diag(Diagnostic("non-variable-argument", f"argument {name!r} is not a variable", fname))
        elif name not in scope:
            diag(Diagnostic("unbound-variable", f"variable {name} is not in scope", fname))

    def rexpr(e, scope, fname):
        if not isinstance(e, _REXPR):
            if isinstance(e, (RCase, Case)):
                diag(Diagnostic("multiple-cases", "case appears below the outermost position", fname))
            else:
                diag(Diagnostic("not-restricted", f"{type(e).__name__} is not a restricted expression", fname))
            return
        if isinstance(e, RVar):
            var(e.name, scope, fname)
        elif isinstance(e, RLit):
            if not isinstance(e.value, int) or not LIT_MIN <= e.value <= LIT_MAX:
                diag(Diagnostic("literal-range", f"bad literal {e.value!r}", fname))
        elif isinstance(e, RChoice):
            var(e.left, scope, fname)
            var(e.right, scope, fname)
        elif isinstance(e, RFunApp):
            if e.name not in fun_ar:
                diag(Diagnostic("undefined-function", f"function {e.name} is not defined", fname))
            elif fun_ar[e.name] != len(e.args):
                diag(Diagnostic("arity", f"{e.name} expects {fun_ar[e.name]} arguments", fname))
            for a in e.args:
                var(a, scope, fname)
        elif isinstance(e, RConApp):
            if e.name not in con_ar:
                diag(Diagnostic("undefined-constructor", f"constructor {e.name} is not declared", fname))
            elif con_ar[e.name] != len(e.args):
                diag(Diagnostic("arity", f"{e.name} expects {con_ar[e.name]} arguments", fname))
            for a in e.args:
                var(a, scope, fname)
        elif isinstance(e, RApply):
            if not e.args:
                diag(Diagnostic("arity", "apply needs at least one argument", fname))
            var(e.fn, scope, fname)
            for a in e.args:
                var(a, scope, fname)
        elif isinstance(e, RPartRef):
            arity = fun_ar.get(e.name, con_ar.get(e.name))
            if not arity:
                diag(Diagnostic("arity", f"{e.name} cannot be partially applied", fname))

    def stmt(s, scope, fname):
        if isinstance(s, RCase):
            diag(Diagnostic("multiple-cases", "case appears below the outermost position", fname))
            return
        if isinstance(s, Return):
            rexpr(s.expr, scope, fname)
            return
        if not isinstance(s, RLet):
            diag(Diagnostic("not-restricted", f"{type(s).__name__} is not a statement", fname))
            return
        names = [n for n, _ in s.bindings]
        if not names:
            diag(Diagnostic("empty-let", "let binds nothing", fname))
        if _dups(names):
            diag(Diagnostic("duplicate-variable", f"let binds {_dups(names)} twice", fname))
        inner = scope | set(names)
        for _, b in s.bindings:
            rexpr(b, inner, fname)
        _check_alias_cycles(s.bindings, fname, None, report)
        stmt(s.rest, inner, fname)

    for f in p.functions:
        scope = frozenset(f.params)
        if _dups(f.params):
            diag(Diagnostic("duplicate-variable", f"parameters repeat {_dups(f.params)}", f.name))
        body = f.body
        if isinstance(body, RCase):
            if not isinstance(body.scrutinee, str):
                diag(Diagnostic("non-variable-scrutinee", "case scrutinee must be a variable", f.name))
            else:
                var(body.scrutinee, scope, f.name)
            _check_patterns(body.branches, con_ar, sibling_of, f.name, None, report)
            for pat, s in body.branches:
                inner = scope | set(pat.vars) if isinstance(pat, ConPat) else scope
                stmt(s, inner, f.name)
        else:
            stmt(body, scope, f.name)
    return report


# ---------------------------------------------------------------------------
# Moving between the two levels


def embed(p: RProgram) -> Program:
    """Include a restricted program back into full FlatCurry."""
    return Program(p.data, tuple(FuncDef(f.name, f.params, embed_block(f.body)) for f in p.functions),
                   p.entry)


def embed_rexpr(e: RExpr) -> Expr:
    if isinstance(e, RVar):
        return Var(e.name)
    if isinstance(e, RLit):
        return Lit(e.value)
    if isinstance(e, RBot):
        return Bot()
    if isinstance(e, RChoice):
        return Choice(Var(e.left), Var(e.right))
    if isinstance(e, RFunApp):
        return FunApp(e.name, tuple(Var(a) for a in e.args))
    if isinstance(e, RConApp):
        return ConApp(e.name, tuple(Var(a) for a in e.args))
    if isinstance(e, RApply):
        return Apply(Var(e.fn), tuple(Var(a) for a in e.args))
    if isinstance(e, RPartRef):
        return PartRef(e.name)
    raise TypeError(f"cannot embed {e!r}")


def embed_stmt(s: Stmt) -> Expr:
    if isinstance(s, Return):
        return embed_rexpr(s.expr)
    rest = embed_stmt(s.rest)
    frees = tuple(n for n, b in s.bindings if isinstance(b, FreeDecl))
    binds = tuple((n, embed_rexpr(b)) for n, b in s.bindings if not isinstance(b, FreeDecl))
    if binds:
        rest = Let(binds, rest)
    if frees:
        rest = Free(frees, rest)
    return rest


def embed_block(b: Block) -> Expr:
    if isinstance(b, RCase):
        return Case(Var(b.scrutinee), tuple((p, embed_stmt(s)) for p, s in b.branches))
    return embed_stmt(b)


class NotRestricted(ValueError):
    pass


def _as_rexpr(e: Expr) -> RExpr:
    def v(x):
        if not isinstance(x, Var):
            raise NotRestricted(f"argument is not a variable: {x!r}")
        return x.name

    if isinstance(e, Var):
        return RVar(e.name)
    if isinstance(e, Lit):
        return RLit(e.value)
    if isinstance(e, Bot):
        return RBot()
    if isinstance(e, Choice):
        return RChoice(v(e.left), v(e.right))
    if isinstance(e, FunApp):
        return RFunApp(e.name, tuple(map(v, e.args)))
    if isinstance(e, ConApp):
        return RConApp(e.name, tuple(map(v, e.args)))
    if isinstance(e, Apply):
        return RApply(v(e.fn), tuple(map(v, e.args)))
    if isinstance(e, PartRef):
        return RPartRef(e.name)
    raise NotRestricted(f"{type(e).__name__} is not allowed here")


def _as_stmt(e: Expr) -> Stmt:
    if isinstance(e, Free):
        inner = _as_stmt(e.body)
        return RLet(tuple((n, FreeDecl()) for n in e.names), inner)
    if isinstance(e, Let):
        return RLet(tuple((n, _as_rexpr(b)) for n, b in e.bindings), _as_stmt(e.body))
    if isinstance(e, Case):
        raise NotRestricted("case is not outermost")
    return Return(_as_rexpr(e))


def as_restricted(p: Program) -> RProgram:
    """Read a program that is already in restricted shape as an RProgram.

    Raises NotRestricted on the first violation; use ``restrictor.restrict``
    to lower arbitrary programs instead.
    """
    fs = []
    for f in p.functions:
        body = f.body
        if isinstance(body, Case):
            if not isinstance(body.scrutinee, Var):
                raise NotRestricted(f"{f.name}: case scrutinee is not a variable")
            block: Block = RCase(body.scrutinee.name, tuple((pat, _as_stmt(b)) for pat, b in body.branches))
        else:
            block = _as_stmt(body)
        fs.append(RFuncDef(f.name, f.params, block))
    return RProgram(p.data, tuple(fs), p.entry)


def restricted_violations(p: Program) -> Report:
    """Diagnose where a full program departs from restricted shape."""
    report = Report()
    diag = report.diagnostics.append

    def arg(x, fname):
        if not isinstance(x, Var):
            diag(Diagnostic("non-variable-argument", f"argument is not a variable: {type(x).__name__}",
                            fname, x.loc))

    def rexpr(e, fname):
        if isinstance(e, Case):
            diag(Diagnostic("multiple-cases", "case appears below the outermost position", fname, e.loc))
            for _, b in e.branches:
                stmt(b, fname)
        elif isinstance(e, Choice):
            arg(e.left, fname)
            arg(e.right, fname)
        elif isinstance(e, (FunApp, ConApp)):
            for a in e.args:
                arg(a, fname)
        elif isinstance(e, Apply):
            arg(e.fn, fname)
            for a in e.args:
                arg(a, fname)
        elif isinstance(e, (Let, Free)):
            diag(Diagnostic("nested-let", "let appears in expression position", fname, e.loc))

    def stmt(e, fname):
        if isinstance(e, Let):
            for _, b in e.bindings:
                rexpr(b, fname)
            stmt(e.body, fname)
        elif isinstance(e, Free):
            stmt(e.body, fname)
        else:
            rexpr(e, fname)

    for f in p.functions:
        if isinstance(f.body, Case):
            if not isinstance(f.body.scrutinee, Var):
                diag(Diagnostic("non-variable-scrutinee", "case scrutinee must be a variable",
                                f.name, f.body.loc))
            for _, b in f.body.branches:
                stmt(b, f.name)
        else:
            stmt(f.body, f.name)
    return report
