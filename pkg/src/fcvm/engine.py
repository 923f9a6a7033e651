"""Backtracking graph-rewriting evaluator for Restricted FlatCurry.

The machine state is a ``Graph`` plus a ``BtStack``.  Evaluation rewrites
nodes in place and records every rewrite of an existing node on the stack,
so backtracking can restore any earlier graph.  Choices (and narrowing of
free variables) push choice-marked frames; answers are enumerated by
normalizing the root, then backtracking to the most recent choice frame and
normalizing again.

Rule names used in traces follow the evaluation rules: ``Fun``, ``Let``,
``Var``, ``Con``, ``Lit``, ``Bot``, ``Choice``, ``Free``, the ``Case-*``,
``Apply-*`` and ``Norm-*`` families, ``BT`` and ``BT-Choice``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from ._deep import deep_call
from .answers import Answer, TCon, TFree, TLit, Term, canonical
from .graph import (
    BOT, FREE, BotNode, BtStack, ChoiceNode, ConNode, Frame, FreeNode, FunNode, FwdNode, Graph,
    LitNode, NodeContent, NodeId, PartNode,
)
from .syntax import (
    APPLY, ConPat, FreeDecl, LitPat, RApply, RBot, RCase, RChoice, RConApp, RExpr, RFunApp, RLet,
    RLit, RPartRef, RProgram, RVar, Return, Stmt,
)

DEFAULT_MAX_STEPS = 10**7


class EngineError(Exception):
    """Ill-typed or malformed input reached the machine."""


class ResourceExhausted(Exception):
    pass


class StepBudgetExceeded(ResourceExhausted):
    pass


@dataclass
class Limits:
    max_steps: int = DEFAULT_MAX_STEPS
    max_answers: Optional[int] = None

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.max_answers is not None and self.max_answers < 1:
            raise ValueError("max_answers must be at least 1")


@dataclass
class RunResult:
    outcomes: list[Answer] = field(default_factory=list)
    truncated: bool = False
    steps: int = 0

    @property
    def answers(self) -> list[Answer]:
        return [a for a in self.outcomes if not a.failed]

    @property
    def failures(self) -> int:
        return sum(1 for a in self.outcomes if a.failed)


class Machine:
    def __init__(self, program: RProgram, limits: Optional[Limits] = None,
                 trace: Optional[Callable[[str], None]] = None):
        self.program = program
        self.limits = limits or Limits()
        self.trace = trace
        self.funcs = {f.name: f for f in program.functions}
        self.fun_arity = program.function_arities()
        self.con_arity = program.constructor_arities()
        self.graph = Graph({**self.fun_arity, **self.con_arity})
        self.stack = BtStack()
        self.steps = 0
        self.root: Optional[NodeId] = None

    # -- bookkeeping

    def fire(self, rule: str, node: NodeId):
        self.steps += 1
        if self.steps > self.limits.max_steps:
            raise StepBudgetExceeded(f"step budget {self.limits.max_steps} exhausted")
        if self.trace is not None:
            self.trace(f"RULE {rule} node={node} depth={len(self.stack)}")

    def rewrite(self, n: NodeId, c: NodeContent):
        """Overwrite ``n`` and remember its old content for backtracking."""
        self.stack.push(Frame(n, self.graph[n]))
        self.graph.set(n, c)

    def choose(self, n: NodeId, c: ChoiceNode):
        """Take the left alternative of the choice at ``n``; the right one goes on the stack."""
        self.stack.push(Frame(n, FwdNode(c.right), True, c))
        self.graph.set(n, FwdNode(c.left))

    # -- instantiation

    def _content(self, e: RExpr, env: dict[str, NodeId]) -> NodeContent:
        if isinstance(e, RVar):
            return FwdNode(env[e.name])
        if isinstance(e, RFunApp):
            return FunNode(e.name, tuple(env[a] for a in e.args))
        if isinstance(e, RConApp):
            return ConNode(e.name, tuple(env[a] for a in e.args))
        if isinstance(e, RLit):
            return LitNode(e.value)
        if isinstance(e, RBot):
            return BOT
        if isinstance(e, RChoice):
            return ChoiceNode(env[e.left], env[e.right])
        if isinstance(e, FreeDecl):
            return FREE
        if isinstance(e, RApply):
            return FunNode(APPLY, (env[e.fn],) + tuple(env[a] for a in e.args))
        if isinstance(e, RPartRef):
            arity = self.fun_arity.get(e.name, self.con_arity.get(e.name))
            if not arity:
                raise EngineError(f"{e.name} cannot be partially applied")
            return PartNode(e.name, arity, ())
        raise EngineError(f"not a restricted expression: {e!r}")

    def _bind(self, group, env: dict[str, NodeId], at: NodeId) -> dict[str, NodeId]:
        self.fire("Let", at)
        outer = env
        env = dict(env)
        aliases = {n: b.name for n, b in group if isinstance(b, RVar)}
        real = [(n, b) for n, b in group if not isinstance(b, RVar)]
        real_names = {n for n, _ in real}
        for n in real_names:
            env[n] = self.graph.reserve()
        for n in aliases:
            seen = {n}
            t = aliases[n]
            while t in aliases:
                if t in seen:
                    raise EngineError(f"let bindings {sorted(seen)} alias each other")
                seen.add(t)
                t = aliases[t]
            env[n] = env[t] if t in real_names else outer[t]
        for n, b in real:
            self.graph.set(env[n], self._content(b, env))
        return env

    def _stmt(self, s: Stmt, env: dict[str, NodeId], at: NodeId) -> NodeContent:
        while isinstance(s, RLet):
            env = self._bind(s.bindings, env, at)
            s = s.rest
        if not isinstance(s, Return):
            raise EngineError(f"not a statement: {s!r}")
        c = self._content(s.expr, env)
        self.fire(_RETURN_RULE[type(s.expr)], at)
        return c

    def instantiate(self, fname: str, args) -> NodeId:
        """Build the graph for ``fname`` applied to existing nodes ``args``."""
        fd = self.funcs.get(fname)
        if fd is None:
            raise EngineError(f"unknown function {fname}")
        args = tuple(args)
        if len(args) != len(fd.params):
            raise EngineError(f"{fname} expects {len(fd.params)} arguments, got {len(args)}")
        if isinstance(fd.body, RCase):
            return self.graph.alloc(FunNode(fname, args))
        env = dict(zip(fd.params, args))
        s = fd.body
        while isinstance(s, RLet):
            env = self._bind(s.bindings, env, -1)
            s = s.rest
        return self.graph.alloc(self._content(s.expr, env))

    # -- head normal form

    def hnf(self, n: NodeId):
        """Reduce node ``n`` in place until it is no longer a function application."""
        g = self.graph
        while True:
            c = g[n]
            if not isinstance(c, FunNode):
                return
            if c.name == APPLY:
                result = self.apply(c.children[0], c.children[1:], n)
            else:
                result = self._call(n, c)
            self.rewrite(n, result)

    def _call(self, n: NodeId, c: FunNode) -> NodeContent:
        fd = self.funcs.get(c.name)
        if fd is None:
            raise EngineError(f"unknown function {c.name}")
        self.fire("Fun", n)
        env = dict(zip(fd.params, c.children))
        body = fd.body
        if isinstance(body, RCase):
            return self.eval_case(env[body.scrutinee], body.branches, n, env)
        return self._stmt(body, env, n)

    def eval_case(self, x: NodeId, branches, outer: NodeId, env: Optional[dict] = None) -> NodeContent:
        """Dispatch loop for ``case x of branches``; returns the content for ``outer``."""
        g = self.graph
        env = env or {}
        while True:
            c = g[x]
            if isinstance(c, FwdNode):
                self.fire("Case-Fwd", x)
                x = c.target
            elif isinstance(c, FunNode):
                self.fire("Case-Fun", x)
                self.hnf(x)
            elif isinstance(c, ChoiceNode):
                self.fire("Case-Choice", x)
                self.choose(x, c)
            elif isinstance(c, BotNode):
                self.fire("Case-Bot", x)
                return BOT
            elif isinstance(c, ConNode):
                self.fire("Case-Con", x)
                for pat, s in branches:
                    if isinstance(pat, ConPat) and pat.name == c.name:
                        return self._stmt(s, {**env, **dict(zip(pat.vars, c.children))}, outer)
                return BOT
            elif isinstance(c, LitNode):
                self.fire("Case-Lit", x)
                for pat, s in branches:
                    if isinstance(pat, LitPat) and pat.value == c.value:
                        return self._stmt(s, env, outer)
                return BOT
            elif isinstance(c, FreeNode):
                self._narrow(x, branches)
            elif isinstance(c, PartNode):
                raise EngineError("partial application as case scrutinee")
            else:
                raise EngineError(f"unknown node content {c!r}")

    def _narrow(self, x: NodeId, branches):
        pats = [p for p, _ in branches]
        if all(isinstance(p, LitPat) for p in pats):
            self.fire("Case-LitFree", x)
            alts = [LitNode(p.value) for p in pats]
        else:
            self.fire("Case-ConFree", x)
            alts = []
            for p in pats:
                kids = tuple(self.graph.alloc(FREE) for _ in p.vars)
                alts.append(ConNode(p.name, kids))
        self.stack.push(Frame(x, FREE))
        for alt in reversed(alts[1:]):
            self.stack.push(Frame(x, alt, True, FREE))
        self.graph.set(x, alts[0])

    # -- apply

    def apply(self, fn: NodeId, args, outer: NodeId) -> NodeContent:
        """Eval-apply dispatch; returns the content for ``outer``."""
        g = self.graph
        args = tuple(args)
        if not args:
            raise EngineError("apply needs at least one argument")
        while True:
            c = g[fn]
            if isinstance(c, FwdNode):
                fn = c.target
            elif isinstance(c, FunNode):
                self.hnf(fn)
            elif isinstance(c, ChoiceNode):
                self.fire("Apply-Choice", fn)
                self.choose(fn, c)
            elif isinstance(c, FreeNode):
                self.fire("Apply-Free", fn)
                return BOT
            elif isinstance(c, BotNode):
                self.fire("Apply-Bot", fn)
                return BOT
            elif isinstance(c, PartNode):
                k, m = c.missing, len(args)
                is_con = c.head in self.con_arity
                if m < k:
                    self.fire("Apply-Under", outer)
                    return PartNode(c.head, k - m, c.supplied + args)
                if m == k:
                    self.fire("Apply-Full", outer)
                    full = c.supplied + args
                    return ConNode(c.head, full) if is_con else FunNode(c.head, full)
                if is_con:
                    raise EngineError(f"constructor {c.head} applied to too many arguments")
                self.fire("Apply-Over", outer)
                first = g.alloc(FunNode(c.head, c.supplied + args[:k]))
                return FunNode(APPLY, (first,) + args[k:])
            else:
                raise EngineError(f"cannot apply {type(c).__name__.removesuffix('Node').lower()}")

    # -- normal form

    def normalize(self, n: NodeId) -> Optional[Term]:
        """Normalize ``n``; None means this attempt failed."""
        g = self.graph
        while True:
            self.hnf(n)
            c = g[n]
            if isinstance(c, FwdNode):
                n = c.target
                continue
            if isinstance(c, ChoiceNode):
                self.fire("Norm-Choice", n)
                self.choose(n, c)
                n = c.left
                continue
            break
        if isinstance(c, ConNode):
            self.fire("Norm-Con", n)
            kids = []
            for k in c.children:
                t = self.normalize(k)
                if t is None:
                    return None
                kids.append(t)
            return TCon(c.name, tuple(kids))
        if isinstance(c, LitNode):
            self.fire("Norm-Lit", n)
            return TLit(c.value)
        if isinstance(c, FreeNode):
            self.fire("Norm-Free", n)
            return TFree(str(n))
        if isinstance(c, BotNode):
            self.fire("Norm-Bot", n)
            return None
        if isinstance(c, PartNode):
            raise EngineError("a partial application is not a printable value")
        raise EngineError(f"unknown node content {c!r}")

    # -- backtracking

    def backtrack(self) -> bool:
        """Undo deterministic frames up to the next choice frame and take it."""
        g, s = self.graph, self.stack
        while s.frames:
            f = s.pop()
            if f.is_choice:
                self.fire("BT-Choice", f.target)
                restore = f.restore if f.restore is not None else g[f.target]
                g.set(f.target, f.replacement)
                s.push(Frame(f.target, restore))
                return True
            self.fire("BT", f.target)
            g.set(f.target, f.replacement)
        return False

    # -- driver

    def start(self) -> NodeId:
        entry = self.program.entry
        if self.fun_arity.get(entry) != 0:
            raise EngineError(f"entry function {entry} with no arguments is required")
        self.root = self.graph.alloc(FunNode(entry, ()))
        return self.root

    def attempt(self) -> Answer:
        term = self.normalize(self.root)
        if term is None:
            return Answer(None, len(self.stack))
        return Answer(canonical(term), len(self.stack))

    def run(self, on_answer: Optional[Callable[["Machine", Answer], None]] = None,
            keep_failures: bool = True) -> RunResult:
        result = RunResult()
        if self.root is None:
            self.start()
        return deep_call(self._run, result, on_answer, keep_failures)

    def _run(self, result, on_answer, keep_failures) -> RunResult:
        last_size = max(len(self.graph), 1024)
        try:
            while True:
                ans = self.attempt()
                if not ans.failed or keep_failures:
                    result.outcomes.append(ans)
                if on_answer is not None:
                    on_answer(self, ans)
                if (self.limits.max_answers is not None
                        and len(result.answers) >= self.limits.max_answers):
                    break
                if not self.backtrack():
                    break
                if len(self.graph) > 2 * last_size:
                    self.graph.collect([self.root], self.stack)
                    last_size = max(len(self.graph), 1024)
        except (ResourceExhausted, RecursionError):
            result.truncated = True
        result.steps = self.steps
        return result


_RETURN_RULE = {
    RVar: "Var", RFunApp: "Fun-Call", RConApp: "Con", RLit: "Lit", RBot: "Bot",
    RChoice: "Choice", FreeDecl: "Free", RApply: "Apply", RPartRef: "Part",
}


def run_main(p: RProgram, limits: Optional[Limits] = None, trace=None,
             keep_failures: bool = True, on_answer=None) -> RunResult:
    """Enumerate the answers of ``p``'s entry function, left branch first."""
    m = Machine(p, limits, trace)
    return m.run(on_answer=on_answer, keep_failures=keep_failures)
