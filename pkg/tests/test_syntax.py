import pytest

from fcvm.frontend import parse_program
from fcvm.restrictor import restrict
from fcvm.syntax import (
    Case, ConApp, ConPat, DataDecl, Free, FuncDef, FunApp, Let, Lit, LitPat, NotRestricted, Program,
    RCase, RChoice, RFuncDef, RLet, RProgram, RVar, Return, Var, as_restricted, constructor_siblings,
    embed, free_vars, is_first_order, restricted_violations, validate_program, validate_restricted,
)

BOOL = "data Bool = False | True\n"


def rules(src: str, entry: str = "main") -> set[str]:
    return set(validate_program(parse_program(src, entry=entry, validate=False)).rules())


def test_clean_program_has_no_diagnostics():
    assert rules(BOOL + "main = True ? False") == set()


@pytest.mark.parametrize("src, rule", [
    (BOOL + "data B = True\nmain = True", "duplicate-constructor"),
    (BOOL + "f x = x\nf y = y\nmain = True", "duplicate-function"),
    (BOOL + "go = True", "undefined-entry"),
    (BOOL + "main x = x", "entry-arity"),
    (BOOL + "f x = x\nmain = let f = True in f", "shadowing"),
    (BOOL + "main = 9223372036854775808", "literal-range"),
    (BOOL + "f x y = x\nmain = let x free in case x of { True -> True; True -> False }", "duplicate-pattern"),
    (BOOL + "main = let x free in case x of { True -> True; 1 -> False }", "mixed-patterns"),
    (BOOL + "data N = Z\nmain = let x free in case x of { True -> True; Z -> False }", "mixed-types"),
    (BOOL + "main = let { x = y; y = x } in x", "alias-cycle"),
    (BOOL + "f x x = x\nmain = True", "duplicate-variable"),
])
def test_each_rule_fires(src, rule):
    assert rule in rules(src)


def test_diagnostic_carries_location():
    p = parse_program(BOOL + "main = 9223372036854775808", file="t.fcy", validate=False)
    d = validate_program(p).diagnostics[0]
    assert d.loc is not None and d.loc.file == "t.fcy" and d.loc.line == 2
    assert str(d).startswith("t.fcy:2:")


def test_hand_built_ast_rules():
    p = Program((), (FuncDef("main", (), Var("y")),))
    assert "unbound-variable" in validate_program(p).rules()
    p = Program((), (FuncDef("apply", ("x",), Var("x")), FuncDef("main", (), Lit(0))))
    assert "reserved-name" in validate_program(p).rules()
    p = Program((), (FuncDef("main", (), FunApp("g", ())),))
    assert "undefined-function" in validate_program(p).rules()
    p = Program((), (FuncDef("main", (), ConApp("C", ())),))
    assert "undefined-constructor" in validate_program(p).rules()
    p = Program((), (FuncDef("main", (), Free((), Lit(1))),))
    assert "empty-free" in validate_program(p).rules()
    p = Program((), (FuncDef("main", (), Case(Lit(1), ())),))
    assert "empty-case" in validate_program(p).rules()
    data = (DataDecl("P", (("P", 2),)),)
    p = Program(data, (FuncDef("main", (), ConApp("P", (Lit(1),))),))
    assert "arity" in validate_program(p).rules()


def test_free_vars_in_first_occurrence_order():
    e = Let((("a", Var("z")),), ConApp("P", (Var("y"), Var("a"), Var("z"))))
    assert free_vars(e) == ["z", "y"]
    c = Case(Var("s"), ((ConPat("C", ("u",)), Var("u")), (LitPat(1), Var("w"))))
    assert free_vars(c) == ["s", "w"]


def test_first_order_and_siblings():
    p = parse_program("data L = N | C 2\nf x = x\nmain = apply f 1")
    assert not is_first_order(p.function("main").body)
    assert is_first_order(p.function("f").body)
    assert constructor_siblings(p, "C") == [("N", 0), ("C", 2)]
    with pytest.raises(KeyError):
        constructor_siblings(p, "Q")


def test_restricted_validation():
    good = RProgram((), (RFuncDef("main", (), RLet((("a", RVar("a0")),), Return(RVar("a")))),))
    assert "unbound-variable" in validate_restricted(good).rules()
    nested = RFuncDef("main", (), RLet((("x", RChoice("y", "y")),), RCase("x", ())))
    assert not validate_restricted(RProgram((), (nested,))).ok


def test_embed_then_as_restricted_is_identity():
    src = BOOL + "main = let x = True ? False in case x of { True -> x; False -> True }"
    rp = restrict(parse_program(src))
    assert as_restricted(embed(rp)) == rp


def test_as_restricted_rejects_unrestricted_input():
    p = parse_program(BOOL + "id x = x\nmain = id (id True)")
    with pytest.raises(NotRestricted):
        as_restricted(p)
    assert "non-variable-argument" in restricted_violations(p).rules()
