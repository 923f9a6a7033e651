import re
from collections import Counter

import pytest

from checks import trail_soundness
from conftest import CORPUS_FILES, load
from fcvm._deep import deep_call
from fcvm.engine import EngineError, Limits, Machine, run_main
from fcvm.frontend import parse_file, parse_program
from fcvm.graph import (
    BOT, FREE, ChoiceNode, ConNode, Frame, FunNode, FwdNode, LitNode, PartNode,
)
from fcvm.restrictor import restrict
from fcvm.syntax import APPLY
from progen import random_program


def answers(src_or_prog, **kw):
    p = parse_program(src_or_prog) if isinstance(src_or_prog, str) else src_or_prog
    return [str(a) for a in run_main(restrict(p), **kw).answers]


def traced(p):
    lines = []
    res = run_main(restrict(p), trace=lines.append)
    rules = Counter(re.match(r"RULE (\S+)", line).group(1) for line in lines)
    return res, rules, lines


# -- basic enumeration


@pytest.mark.parametrize("src, want", [
    ("main = 0 ? 1", ["0", "1"]),
    ("main = (0 ? 1) ? 2", ["0", "1", "2"]),
    ("main = 0 ? (1 ? 2)", ["0", "1", "2"]),
    ("main = 1 ? 0", ["1", "0"]),
    ("main = fail ? 5", ["5"]),
    ("main = fail", []),
    ("main = -3", ["-3"]),
])
def test_small_programs(src, want):
    assert answers(src) == want


def test_failures_are_outcomes_not_answers():
    res = run_main(restrict(load("fail_then_value")))
    assert [str(a) for a in res.outcomes] == ["<fail>", "3"]
    assert res.failures == 1 and [str(a) for a in res.answers] == ["3"]
    res = run_main(restrict(load("fail_then_value")), keep_failures=False)
    assert [str(a) for a in res.outcomes] == ["3"]


def test_answer_limit_and_budget():
    p = restrict(load("perms"))
    assert len(run_main(p, Limits(max_answers=2)).answers) == 2
    res = run_main(p, Limits(max_steps=40))
    assert res.truncated and res.steps == 41
    with pytest.raises(ValueError):
        Limits(max_steps=0)


def test_free_variables_in_answers():
    assert answers(load("free_pair")) == ["Pair (Pair _a _b) _a"]


def test_recursive_let_builds_a_cycle():
    assert answers(load("letrec_stream")) == ["2"]


def test_alias_cycle_is_an_engine_error():
    from fcvm.syntax import RFuncDef, RLet, RProgram, RVar, Return
    rp = RProgram((), (RFuncDef("main", (), RLet((("a", RVar("b")), ("b", RVar("a"))), Return(RVar("a")))),))
    with pytest.raises(EngineError):
        run_main(rp)


def test_partial_application_is_not_a_value():
    with pytest.raises(EngineError):
        run_main(restrict(parse_program("f x = x\nmain = f")))


def test_deep_terms_do_not_overflow():
    src = ("data N = Z | S 1\n"
           "dbl n = case n of { Z -> Z; S m -> S (S (dbl m)) }\n"
           "main = " + "dbl (" * 13 + "S Z" + ")" * 13)
    res = run_main(restrict(parse_program(src)))
    text = str(res.answers[0])
    assert text.count("S") == 2 ** 13 and text.endswith("Z" + ")" * (2 ** 13 - 1))


# -- sharing


def test_shared_choice_is_taken_once():
    assert answers(load("share_xor")) == ["False", "False"]
    assert answers(load("xor_unshared")) == ["False", "True", "True", "False"]
    assert answers(load("share_pair")) == ["Pair 0 0", "Pair 1 1"]


def test_shared_call_is_evaluated_once():
    src = ("data P = P 2\nslow x = case x of { 0 -> 1 }\n"
           "main = let y = slow 0 in P y y")
    _, rules, lines = traced(parse_program(src))
    calls = [line for line in lines if line.startswith("RULE Fun ")]
    # main, and slow exactly once although y is demanded twice
    assert len(calls) == 2


# -- narrowing


def test_narrowing_fires_once_and_restores_the_variable():
    res, rules, lines = traced(load("narrow_not"))
    assert [str(a) for a in res.answers] == ["False", "True"]
    assert rules["Case-ConFree"] == 1 and rules["BT-Choice"] == 1
    x = int(re.search(r"Case-ConFree node=(\d+)", "\n".join(lines)).group(1))
    m = Machine(restrict(load("narrow_not")))
    m.run()
    assert m.graph[x] == FREE and len(m.stack) == 0


def test_literal_narrowing():
    res, rules, _ = traced(load("narrow_lit"))
    assert [str(a) for a in res.answers] == ["10", "20", "30"]
    assert rules["Case-LitFree"] == 1 and rules["BT-Choice"] == 2


def test_narrowing_through_recursion():
    assert answers(load("nat_add_narrow")) == ["S Z"]
    assert answers(load("append_narrow")) == [
        "Pair Nil (Cons 1 (Cons 2 Nil))", "Pair (Cons 1 Nil) (Cons 2 Nil)", "Pair (Cons 1 (Cons 2 Nil)) Nil"]


# -- apply rules, checked against the rule conclusions


APPLY_SRC = """
data T = T 3
f a b c = T a b c
sel a b = a
main = 0
"""


@pytest.fixture
def m():
    mach = Machine(restrict(parse_program(APPLY_SRC)))
    mach.start()
    return mach


def lits(m, *vs):
    return tuple(m.graph.alloc(LitNode(v)) for v in vs)


def test_apply_under(m):
    (a,) = lits(m, 1)
    x = m.graph.alloc(PartNode("f", 3, ()))
    out = m.apply(x, (a,), x)
    assert out == PartNode("f", 3 - 1, (a,))
    (b,) = lits(m, 2)
    y = m.graph.alloc(out)
    assert m.apply(y, (b,), y) == PartNode("f", 1, (a, b))
    assert len(m.stack) == 0


def test_apply_full(m):
    a, b, c = lits(m, 1, 2, 3)
    x = m.graph.alloc(PartNode("f", 2, (a,)))
    assert m.apply(x, (b, c), x) == FunNode("f", (a, b, c))
    y = m.graph.alloc(PartNode("T", 3, ()))
    assert m.apply(y, (a, b, c), y) == ConNode("T", (a, b, c))


def test_apply_over_splits_at_missing_count(m):
    a, b, c = lits(m, 1, 2, 3)
    x = m.graph.alloc(PartNode("sel", 2, ()))
    out = m.apply(x, (a, b, c), x)
    assert out.name == APPLY and out.children[1:] == (c,)
    assert m.graph[out.children[0]] == FunNode("sel", (a, b))


def test_apply_free_fails_without_touching_state(m):
    (a,) = lits(m, 1)
    x = m.graph.alloc(FREE)
    before = list(m.graph.nodes)
    assert m.apply(x, (a,), x) == BOT
    assert m.graph.nodes == before and len(m.stack) == 0


def test_apply_choice_goes_left_and_pushes_right(m):
    (a,) = lits(m, 1)
    y = m.graph.alloc(PartNode("f", 3, ()))
    z = m.graph.alloc(PartNode("sel", 2, ()))
    x = m.graph.alloc(ChoiceNode(y, z))
    out = m.apply(x, (a,), x)
    assert m.graph[x] == FwdNode(y)
    top = m.stack.frames[-1]
    assert (top.target, top.replacement, top.is_choice) == (x, FwdNode(z), True)
    assert out == PartNode("f", 2, (a,))


def test_apply_programs():
    assert answers(load("apply_map")) == ["Cons (S Z) (Cons (S (S Z)) Nil)"]
    assert answers(load("apply_over")) == ["S (S Z)"]
    assert answers(load("apply_choice")) == ["S Z", "S (S Z)"]
    assert answers(load("apply_free")) == []
    assert answers(load("apply_under")) == ["Triple 1 2 3", "Triple 1 2 4"]


def test_applying_a_value_is_an_error():
    with pytest.raises(EngineError):
        run_main(restrict(parse_program("main = let x = 1 in apply x 2")))


# -- trail soundness


@pytest.mark.parametrize("path", CORPUS_FILES, ids=lambda p: p.stem)
def test_trail_soundness_on_corpus(path):
    attempts, bad = deep_call(trail_soundness, restrict(parse_file(path)))
    assert attempts >= 1 and bad == 0


@pytest.mark.parametrize("seed", range(0, 300, 3))
def test_trail_soundness_on_random_programs(seed):
    _, bad = deep_call(trail_soundness, restrict(random_program(seed)))
    assert bad == 0


class ForgetfulMachine(Machine):
    """Writes without logging the old content; a broken trail."""

    def rewrite(self, n, c):
        self.graph.set(n, c)


def test_trail_check_detects_a_broken_trail():
    _, bad = deep_call(trail_soundness, restrict(load("share_xor")), machine_cls=ForgetfulMachine)
    assert bad > 0


def test_frames_carry_restore_content():
    m = Machine(restrict(load("choice01")))
    m.start()
    m.normalize(m.root)
    choice = [f for f in m.stack if f.is_choice]
    assert len(choice) == 1 and isinstance(choice[0].restore, ChoiceNode)
    assert isinstance(choice[0], Frame)


# -- trace examples and left bias


NOT = "data Bool = False | True\nnot x = case x of { True -> False; False -> True }\n"


def test_trace_counts_for_not():
    _, rules, _ = traced(parse_program(NOT + "main = not True"))
    assert rules["Case-Con"] == 1
    res, rules, _ = traced(parse_program(NOT + "main = not (True ? False)"))
    assert [str(a) for a in res.answers] == ["False", "True"]
    assert rules["Case-Choice"] == 1 and rules["BT-Choice"] == 1


def test_tracing_is_deterministic_and_optional():
    p = load("perms")
    assert traced(p)[2] == traced(p)[2]
    assert run_main(restrict(p)).answers == traced(p)[0].answers


def _mirror(e):
    from dataclasses import fields, replace

    from fcvm.syntax import Choice
    if isinstance(e, Choice):
        return Choice(_mirror(e.right), _mirror(e.left))
    changes = {}
    for f in fields(e):
        v = getattr(e, f.name)
        if hasattr(v, "__dataclass_fields__"):
            changes[f.name] = _mirror(v)
        elif isinstance(v, tuple):
            changes[f.name] = tuple(
                tuple(_mirror(y) if hasattr(y, "__dataclass_fields__") else y for y in x)
                if isinstance(x, tuple) else (_mirror(x) if hasattr(x, "__dataclass_fields__") else x)
                for x in v)
    return replace(e, **changes)


@pytest.mark.parametrize("seed", range(200))
def test_mirrored_choices_reverse_the_answers(seed):
    # narrowing order follows branch order, so keep free variables out
    p = random_program(seed, allow_free=False)
    from dataclasses import replace
    mirrored = replace(p, functions=tuple(replace(f, body=_mirror(f.body)) for f in p.functions))
    assert answers(mirrored) == answers(p)[::-1]
