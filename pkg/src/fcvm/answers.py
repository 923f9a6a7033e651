"""Answer terms shared by the engine and the oracle."""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Union


@dataclass(frozen=True)
class TCon:
    name: str
    args: tuple["Term", ...] = ()


@dataclass(frozen=True)
class TLit:
    value: int


@dataclass(frozen=True)
class TFree:
    name: str


Term = Union[TCon, TLit, TFree]


@dataclass(frozen=True)
class Answer:
    """Outcome of one attempt: a normal-form term, or failure when ``term`` is None."""

    term: Optional[Term]
    frames: int = 0

    @property
    def failed(self) -> bool:
        return self.term is None

    def __str__(self):
        return "<fail>" if self.term is None else show_term(self.term)


FAILURE = Answer(None)


def free_name(i: int) -> str:
    letters = string.ascii_lowercase
    s = ""
    i += 1
    while i:
        i, r = divmod(i - 1, 26)
        s = letters[r] + s
    return "_" + s


def canonical(term: Term) -> Term:
    """Rename free variables to ``_a``, ``_b``, ... by first occurrence."""
    names: dict[str, str] = {}

    def go(t):
        if isinstance(t, TFree):
            if t.name not in names:
                names[t.name] = free_name(len(names))
            return TFree(names[t.name])
        if isinstance(t, TCon):
            return TCon(t.name, tuple(go(a) for a in t.args))
        return t

    return go(term)


def show_term(t: Term, nested: bool = False) -> str:
    try:
        return _show(t, nested)
    except RecursionError:
        from ._deep import deep_call
        return deep_call(_show, t, nested)


def _show(t: Term, nested: bool) -> str:
    if isinstance(t, TLit):
        s = str(t.value)
        return f"({s})" if nested and t.value < 0 else s
    if isinstance(t, TFree):
        return t.name
    if not t.args:
        return t.name
    s = " ".join([t.name] + [_show(a, True) for a in t.args])
    return f"({s})" if nested else s


@dataclass
class Comparison:
    equal: bool
    index: Optional[int] = None
    detail: str = ""

    def __str__(self):
        return "MATCH" if self.equal else f"MISMATCH at {self.index}: {self.detail}"


def compare_answers(engine: list, oracle: list, mode: str = "ordered") -> Comparison:
    try:
        return _compare(engine, oracle, mode)
    except RecursionError:
        from ._deep import deep_call
        return deep_call(_compare, engine, oracle, mode)


def _compare(engine: list, oracle: list, mode: str) -> Comparison:
    """Compare two answer lists, either position by position or as multisets.

    Entries may be Answers or bare terms; failures are ignored.  Free
    variables are canonicalized per answer, which is a consistent renaming.
    """
    def terms(xs):
        out = []
        for x in xs:
            t = x.term if isinstance(x, Answer) else x
            if t is not None:
                out.append(canonical(t))
        return out

    a, b = terms(engine), terms(oracle)
    if mode == "ordered":
        for i, (x, y) in enumerate(zip(a, b)):
            if x != y:
                return Comparison(False, i, f"engine {show_term(x)} vs oracle {show_term(y)}")
        if len(a) != len(b):
            i = min(len(a), len(b))
            return Comparison(False, i, f"engine has {len(a)} answers, oracle {len(b)}")
        return Comparison(True)
    if mode == "multiset":
        ca, cb = Counter(a), Counter(b)
        if ca == cb:
            return Comparison(True)
        extra = list((ca - cb).elements())
        missing = list((cb - ca).elements())
        first = next((i for i, x in enumerate(a) if x in extra), len(a))
        detail = ", ".join([f"only engine: {show_term(x)}" for x in extra[:3]]
                           + [f"only oracle: {show_term(x)}" for x in missing[:3]])
        return Comparison(False, first, detail)
    raise ValueError(f"unknown comparison mode {mode!r}")
