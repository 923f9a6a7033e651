"""Surface syntax for FlatCurry programs (``.fcy`` files).

Grammar summary (layout-insensitive except that a top-level item starts in
column 1)::

    program  ::= item*
    item     ::= 'data' Con tyvar* '=' condecl ('|' condecl)*
               | fun var* '=' expr ['where' var (',' var)* 'free']
    condecl  ::= Con (INT | slot*)
    expr     ::= 'let' binds 'in' expr
               | 'let' var (',' var)* 'free' 'in' expr
               | app ['?' expr]
    binds    ::= '{' var '=' expr (';' var '=' expr)* '}' | var '=' expr
    app      ::= 'apply' atom atom+ | atom atom*
    atom     ::= var | Con | INT | 'fail' | '(' expr ')'
               | 'case' expr 'of' '{' alt (';' alt)* '}'
    alt      ::= (Con var* | INT) '->' expr

Juxtaposed applications are classified against the program's arity tables:
full applications of known functions and constructors become ``FunApp`` and
``ConApp``, short ones become ``Apply`` over a ``PartRef``, and long ones
split at the declared arity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .syntax import (
    APPLY, Apply, Bot, Case, Choice, ConApp, ConPat, DataDecl, Expr, Free, FunApp, FuncDef, Let,
    Lit, LitPat, PartRef, Program, RProgram, SourceLocation, Var, embed, validate_program,
)

KEYWORDS = {"data", "let", "in", "free", "case", "of", "fail", "apply", "where"}


class ParseError(Exception):
    def __init__(self, message: str, loc: SourceLocation):
        super().__init__(f"{loc}: {message}")
        self.message = message
        self.loc = loc


@dataclass(frozen=True)
class Token:
    kind: str  # 'var', 'con', 'int', 'kw', 'sym', 'eof'
    text: str
    loc: SourceLocation


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<int>-?[0-9]+)
  | (?P<ident>[A-Za-z][A-Za-z0-9_'\#]*)
  | (?P<sym>->|[=|?(){};,])
""", re.VERBOSE)


def tokenize(text: str, file: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        loc = SourceLocation(file, line, pos - line_start + 1)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", loc)
        kind = m.lastgroup
        s = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "int":
            tokens.append(Token("int", s, loc))
        elif kind == "ident":
            if s in KEYWORDS:
                tokens.append(Token("kw", s, loc))
            elif s[0].isupper():
                tokens.append(Token("con", s, loc))
            else:
                tokens.append(Token("var", s, loc))
        elif kind == "sym":
            tokens.append(Token("sym", s, loc))
        pos = m.end()
    tokens.append(Token("eof", "", SourceLocation(file, line, pos - line_start + 1)))
    return tokens


def _split_items(tokens: list[Token]) -> list[list[Token]]:
    items: list[list[Token]] = []
    for t in tokens[:-1]:
        if t.loc.column == 1 or not items:
            if t.loc.column != 1:
                raise ParseError("top-level item must start in column 1", t.loc)
            items.append([])
        items[-1].append(t)
    return items


class _Parser:
    def __init__(self, tokens: list[Token], eof: Token, funs: dict[str, int], cons: dict[str, int]):
        self.toks = tokens + [Token("eof", "", eof.loc)]
        self.i = 0
        self.funs = funs
        self.cons = cons

    @property
    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.peek
        return t.kind == kind and (text is None or t.text == text)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        t = self.peek
        if not self.at(kind, text):
            want = text or kind
            got = t.text or "end of item"
            raise ParseError(f"expected {want!r}, found {got!r}", t.loc)
        return self.next()

    def int_value(self, t: Token) -> int:
        return int(t.text)

    # -- expressions

    def expr(self, scope: frozenset[str]) -> Expr:
        if self.at("kw", "let"):
            return self.let(scope)
        left = self.app(scope)
        if self.at("sym", "?"):
            t = self.next()
            return Choice(left, self.expr(scope), loc=t.loc)
        return left

    def let(self, scope: frozenset[str]) -> Expr:
        start = self.expect("kw", "let")
        # free declaration: let x, y free in e
        j = self.i
        names = []
        while self.toks[j].kind == "var":
            names.append(self.toks[j].text)
            if self.toks[j + 1].kind == "sym" and self.toks[j + 1].text == ",":
                j += 2
                continue
            j += 1
            break
        if names and self.toks[j].kind == "kw" and self.toks[j].text == "free":
            self.i = j + 1
            self.expect("kw", "in")
            return Free(tuple(names), self.expr(scope | set(names)), loc=start.loc)
        if self.at("sym", "{"):
            self.next()
            heads = self._binding_heads()
            inner = scope | {n for n, _ in heads}
            binds = []
            while True:
                name = self.expect("var").text
                self.expect("sym", "=")
                binds.append((name, self.expr(inner)))
                if self.at("sym", ";"):
                    self.next()
                    continue
                self.expect("sym", "}")
                break
        else:
            name = self.expect("var").text
            self.expect("sym", "=")
            inner = scope | {name}
            binds = [(name, self.expr(inner))]
        self.expect("kw", "in")
        return Let(tuple(binds), self.expr(inner), loc=start.loc)

    def _binding_heads(self) -> list[tuple[str, Token]]:
        """Names bound by a braced let group, found by a bracket-aware scan."""
        heads = []
        j, depth, expect_name = self.i, 0, True
        while True:
            t = self.toks[j]
            if t.kind == "eof":
                break
            if expect_name and depth == 0:
                if t.kind == "var" and self.toks[j + 1].text == "=":
                    heads.append((t.text, t))
                expect_name = False
            if t.kind == "sym" and t.text in "({":
                depth += 1
            elif t.kind == "sym" and t.text in ")}":
                if depth == 0:
                    break
                depth -= 1
            elif t.kind == "sym" and t.text == ";" and depth == 0:
                expect_name = True
            j += 1
        return heads

    def _starts_atom(self) -> bool:
        t = self.peek
        return (t.kind in ("var", "con", "int")
                or (t.kind == "kw" and t.text in ("fail", "case"))
                or (t.kind == "sym" and t.text == "("))

    def app(self, scope: frozenset[str]) -> Expr:
        if self.at("kw", "apply"):
            t = self.next()
            fn = self.atom(scope)
            args = []
            while self._starts_atom():
                args.append(self.atom(scope))
            if not args:
                raise ParseError("apply needs at least one argument", self.peek.loc)
            return Apply(fn, tuple(args), loc=t.loc)
        if not self._starts_atom():
            t = self.peek
            raise ParseError(f"expected an expression, found {t.text or 'end of item'!r}", t.loc)
        head_tok = self.peek
        if head_tok.kind in ("var", "con"):
            self.next()
            args = []
            while self._starts_atom():
                args.append(self.atom(scope))
            return self.classify(head_tok, args, scope)
        head = self.atom(scope)
        args = []
        while self._starts_atom():
            args.append(self.atom(scope))
        if args:
            return Apply(head, tuple(args), loc=head_tok.loc)
        return head

    def classify(self, t: Token, args: list[Expr], scope: frozenset[str]) -> Expr:
        name, loc, n = t.text, t.loc, len(args)
        if t.kind == "var" and name in scope:
            return Apply(Var(name, loc=loc), tuple(args), loc=loc) if args else Var(name, loc=loc)
        if t.kind == "var":
            if name not in self.funs:
                raise ParseError(f"undefined variable or function {name!r}", loc)
            k = self.funs[name]
            if n == k:
                return FunApp(name, tuple(args), loc=loc)
            if n < k:
                ref = PartRef(name, loc=loc)
                return Apply(ref, tuple(args), loc=loc) if args else ref
            return Apply(FunApp(name, tuple(args[:k]), loc=loc), tuple(args[k:]), loc=loc)
        if name not in self.cons:
            raise ParseError(f"undeclared constructor {name!r}", loc)
        k = self.cons[name]
        if n == k:
            return ConApp(name, tuple(args), loc=loc)
        if n < k:
            ref = PartRef(name, loc=loc)
            return Apply(ref, tuple(args), loc=loc) if args else ref
        raise ParseError(f"constructor {name} takes {k} arguments, given {n}", loc)

    def atom(self, scope: frozenset[str]) -> Expr:
        t = self.peek
        if t.kind in ("var", "con"):
            self.next()
            return self.classify(t, [], scope)
        if t.kind == "int":
            self.next()
            return Lit(self.int_value(t), loc=t.loc)
        if self.at("kw", "fail"):
            self.next()
            return Bot(loc=t.loc)
        if self.at("kw", "case"):
            return self.case(scope)
        if self.at("sym", "("):
            self.next()
            e = self.expr(scope)
            self.expect("sym", ")")
            return e
        raise ParseError(f"expected an expression, found {t.text or 'end of item'!r}", t.loc)

    def case(self, scope: frozenset[str]) -> Expr:
        start = self.expect("kw", "case")
        scrut = self.expr(scope)
        self.expect("kw", "of")
        self.expect("sym", "{")
        branches = []
        while True:
            t = self.peek
            if t.kind == "int":
                self.next()
                pat: Union[ConPat, LitPat] = LitPat(self.int_value(t))
                inner = scope
            elif t.kind == "con":
                self.next()
                vs = []
                while self.at("var"):
                    vs.append(self.next().text)
                pat = ConPat(t.text, tuple(vs))
                inner = scope | set(vs)
            else:
                raise ParseError(f"expected a pattern, found {t.text or 'end of item'!r}", t.loc)
            self.expect("sym", "->")
            branches.append((pat, self.expr(inner)))
            if self.at("sym", ";"):
                self.next()
                continue
            self.expect("sym", "}")
            break
        return Case(scrut, tuple(branches), loc=start.loc)


def _parse_data(item: list[Token]) -> DataDecl:
    toks = item
    i = 1
    if i >= len(toks) or toks[i].kind != "con":
        raise ParseError("expected a type name after 'data'", toks[min(i, len(toks) - 1)].loc)
    name = toks[i].text
    i += 1
    params = []
    while i < len(toks) and toks[i].kind == "var":
        params.append(toks[i].text)
        i += 1
    if i >= len(toks) or toks[i].text != "=":
        raise ParseError("expected '=' in data declaration", toks[min(i, len(toks) - 1)].loc)
    i += 1
    cons = []
    while True:
        if i >= len(toks) or toks[i].kind != "con":
            raise ParseError("expected a constructor", toks[min(i, len(toks) - 1)].loc)
        cname = toks[i].text
        i += 1
        if i < len(toks) and toks[i].kind == "int":
            arity = int(toks[i].text)
            if arity < 0:
                raise ParseError("constructor arity must be non-negative", toks[i].loc)
            i += 1
        else:
            arity = 0
            depth = 0
            while i < len(toks):
                t = toks[i]
                if depth == 0 and t.kind == "sym" and t.text == "|":
                    break
                if t.kind == "sym" and t.text == "(":
                    if depth == 0:
                        arity += 1
                    depth += 1
                elif t.kind == "sym" and t.text == ")":
                    depth -= 1
                    if depth < 0:
                        raise ParseError("unbalanced ')'", t.loc)
                elif depth == 0:
                    if t.kind in ("var", "con"):
                        arity += 1
                    else:
                        raise ParseError(f"unexpected {t.text!r} in constructor declaration", t.loc)
                i += 1
            if depth:
                raise ParseError("unbalanced '('", toks[-1].loc)
        cons.append((cname, arity))
        if i < len(toks) and toks[i].text == "|":
            i += 1
            continue
        if i < len(toks):
            raise ParseError(f"unexpected {toks[i].text!r}", toks[i].loc)
        break
    return DataDecl(name, tuple(cons), tuple(params), loc=toks[0].loc)


def _function_head(item: list[Token]) -> tuple[str, list[str], int]:
    name = item[0]
    if name.kind != "var":
        raise ParseError(f"expected a definition, found {name.text!r}", name.loc)
    params = []
    i = 1
    while i < len(item) and item[i].kind == "var":
        params.append(item[i].text)
        i += 1
    if i >= len(item) or item[i].text != "=":
        t = item[i] if i < len(item) else item[-1]
        raise ParseError("expected '=' in function definition", t.loc)
    return name.text, params, i + 1


def parse_program(text: str, file: str = "<input>", entry: str = "main",
                  validate: bool = True) -> Program:
    """Parse a program and, unless ``validate`` is false, validate it too.

    Raises ParseError at the first problem.
    """
    try:
        prog = _parse(text, file, entry)
    except RecursionError:
        raise ParseError("expression nested too deeply", SourceLocation(file, 1, 1)) from None
    if validate:
        report = validate_program(prog)
        if not report.ok:
            d = report.diagnostics[0]
            raise ParseError(f"{d.rule}: {d.message}", d.loc or SourceLocation(file, 1, 1))
    return prog


def _parse(text: str, file: str, entry: str) -> Program:
    tokens = tokenize(text, file)
    eof = tokens[-1]
    items = _split_items(tokens)
    data, heads = [], []
    for item in items:
        if item[0].kind == "kw" and item[0].text == "data":
            data.append(_parse_data(item))
        else:
            heads.append((item, *_function_head(item)))
    cons: dict[str, int] = {}
    for d in data:
        for c, n in d.constructors:
            cons[c] = n
    funs = {name: len(params) for _, name, params, _ in heads}
    funs.pop(APPLY, None)
    functions = []
    for item, name, params, start in heads:
        p = _Parser(item[start:], eof, funs, cons)
        scope = frozenset(params)
        # where-bound free variables scope over the whole body
        where = _where_free(item[start:])
        if where:
            scope = scope | set(where)
        body = p.expr(scope)
        if where:
            p.expect("kw", "where")
            p.i = len(p.toks) - 1
            body = Free(tuple(where), body, loc=item[0].loc)
        if not p.at("eof"):
            raise ParseError(f"unexpected {p.peek.text!r}", p.peek.loc)
        functions.append(FuncDef(name, tuple(params), body, loc=item[0].loc))
    return Program(tuple(data), tuple(functions), entry)


def _where_free(toks: list[Token]) -> list[str]:
    """Trailing ``where x, y free`` clause at bracket depth 0, if any."""
    depth = 0
    for j, t in enumerate(toks):
        if t.kind == "sym" and t.text in "({":
            depth += 1
        elif t.kind == "sym" and t.text in ")}":
            depth -= 1
        elif depth == 0 and t.kind == "kw" and t.text == "where":
            rest = toks[j + 1:]
            names = []
            k = 0
            while k < len(rest) and rest[k].kind == "var":
                names.append(rest[k].text)
                if k + 1 < len(rest) and rest[k + 1].text == ",":
                    k += 2
                else:
                    k += 1
                    break
            if names and k == len(rest) - 1 and rest[k].kind == "kw" and rest[k].text == "free":
                return names
            bad = rest[k] if k < len(rest) else t
            raise ParseError("expected 'where x, ... free'", bad.loc)
    return []


def parse_file(path, entry: str = "main", validate: bool = True) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read(), str(path), entry, validate)


# ---------------------------------------------------------------------------
# Printing


class _Printer:
    def __init__(self, funs: dict[str, int], cons: dict[str, int]):
        self.funs = funs
        self.cons = cons

    def expr(self, e: Expr, indent: int) -> str:
        if isinstance(e, Let):
            if not e.bindings:
                return self.expr(e.body, indent)
            binds = "; ".join(f"{n} = {self.expr(b, indent)}" for n, b in e.bindings)
            return f"let {{ {binds} }} in {self.expr(e.body, indent)}"
        if isinstance(e, Free):
            return f"let {', '.join(e.names)} free in {self.expr(e.body, indent)}"
        if isinstance(e, Choice):
            left = self.app(e.left, indent)
            if isinstance(e.left, (Choice, Let, Free)):
                left = f"({self.expr(e.left, indent)})"
            return f"{left} ? {self.expr(e.right, indent)}"
        return self.app(e, indent)

    def app(self, e: Expr, indent: int) -> str:
        if isinstance(e, (FunApp, ConApp)) and e.args:
            return " ".join([e.name] + [self.atom(a, indent) for a in e.args])
        if isinstance(e, Apply):
            return self.apply(e, indent)
        return self.atom(e, indent)

    def apply(self, e: Apply, indent: int) -> str:
        args = [self.atom(a, indent) for a in e.args]
        fn = e.fn
        # print as plain juxtaposition whenever the parser would rebuild the same node
        if isinstance(fn, Var) and e.args:
            return " ".join([fn.name] + args)
        if isinstance(fn, PartRef) and e.args:
            k = self.funs.get(fn.name, self.cons.get(fn.name, 0))
            if len(e.args) < k:
                return " ".join([fn.name] + args)
        if isinstance(fn, FunApp) and fn.name in self.funs and e.args:
            head = [fn.name] + [self.atom(a, indent) for a in fn.args]
            return " ".join(head + args)
        return " ".join(["apply", self.atom(fn, indent)] + args)

    def atom(self, e: Expr, indent: int) -> str:
        if isinstance(e, Var):
            return e.name
        if isinstance(e, PartRef):
            return e.name
        if isinstance(e, Lit):
            return str(e.value)
        if isinstance(e, Bot):
            return "fail"
        if isinstance(e, (FunApp, ConApp)) and not e.args:
            return e.name
        if isinstance(e, Case):
            pad = " " * (indent + 4)
            alts = []
            for p, b in e.branches:
                pat = str(p.value) if isinstance(p, LitPat) else " ".join((p.name,) + p.vars)
                alts.append(f"{pad}{pat} -> {self.expr(b, indent + 4)}")
            return ("(case " + self.expr(e.scrutinee, indent) + " of {\n"
                    + ";\n".join(alts) + "\n" + " " * (indent + 2) + "})")
        return f"({self.expr(e, indent)})"

    def top(self, e: Expr) -> str:
        if isinstance(e, Case):
            return self.atom(e, 0)[1:-1]
        return self.expr(e, 0)


def _data_text(d: DataDecl) -> str:
    cons = " | ".join(c if n == 0 else f"{c} {n}" for c, n in d.constructors)
    params = "".join(" " + p for p in d.params)
    return f"data {d.name}{params} = {cons}"


def pretty_print(p: Union[Program, RProgram]) -> str:
    if isinstance(p, RProgram):
        p = embed(p)
    pr = _Printer(p.function_arities(), p.constructor_arities())
    lines = [_data_text(d) for d in p.data]
    if lines:
        lines.append("")
    for f in p.functions:
        head = " ".join((f.name,) + f.params)
        lines.append(f"{head} = {pr.top(f.body)}")
    return "\n".join(lines) + "\n"


def format_diagnostics(errs) -> str:
    return "\n".join(str(d) for d in errs)
