import pytest

from cases import GOLDEN, PROGRAMS, REJECTIONS
from lucretia import program_path
from lucretia.checker import alpha_equivalent, check_program
from lucretia.diagnostics import CheckError
from lucretia.parser import parse_program
from lucretia.typemodel import BOT, INT, STRING, Maybe, TVar, constraints, ftv, record


def judge(src, pre=None, ctx=None):
    return check_program(parse_program(src), pre or constraints(), ctx)


def codes(src):
    with pytest.raises(CheckError) as info:
        judge(src)
    return [d.code for d in info.value.diagnostics]


@pytest.mark.parametrize("g", GOLDEN, ids=lambda g: g.key)
def test_golden(g):
    j = check_program(parse_program(g.src), g.pre, g.ctx)
    fixed = ftv(g.pre) | ftv(tuple(g.ctx.values()))
    assert alpha_equivalent((j.type, j.post), (g.expected_type, g.expected_post), fixed=fixed), j.render()


@pytest.mark.parametrize("name", sorted(PROGRAMS))
def test_bundled_program(name):
    t, post = PROGRAMS[name]
    j = check_program(parse_program(program_path(name).read_text(encoding="utf-8")))
    assert alpha_equivalent((j.type, j.post), (t, post)), j.render()


@pytest.mark.parametrize("name", sorted(REJECTIONS))
def test_witness_rejected(name):
    with pytest.raises(CheckError) as info:
        check_program(parse_program(program_path(name).read_text(encoding="utf-8")))
    assert {d.code for d in info.value.diagnostics} & REJECTIONS[name]


def test_rendering_of_judgment():
    j = judge('let x = new in if true then x.m = "a" else x.m = "b"')
    assert j.render() == '|- let x = new in if true then x.m = "a"... : string ; X <# {m: string}'
    assert set(j.to_json()) == {"pre", "expr", "type", "post", "text"}


@pytest.mark.parametrize("src, expected", [
    ("y", ["E-UNBOUND"]),
    ("let x = 1; x.m", ["E-NON-OBJECT"]),
    ("let o = new; o.m", ["E-RACC-UNKNOWN"]),
    ("let o = new; if true then o.m = 1 else 0; o.m", ["E-RACC-MAYBE"]),
    ("contract [X; X.m: bot] => [int] func(x) { x.m }", ["E-CONTRACT", "E-RACC-ABSENT"]),
    ('1 + "a"', ["E-OP-TYPE"]),
    ('1 == "a"', ["E-OP-TYPE"]),
    ("true < false", ["E-OP-TYPE"]),
    ("if 1 then 2 else 3", ["E-COND-TYPE"]),
    ("let f = 1; f(2)", ["E-NOT-FUNCTION"]),
    ("let f = contract [X; X.m: int] => [int] func(x) { x.m }; let o = new; f(o)", ["E-FAPP"]),
    ("let f = contract [int] => [int] func(x) { x }; f(1, 2)", ["E-ARITY"]),
    ("contract [int, int] => [int] func(x) { x }", ["E-ARITY"]),
    ("contract [int] => [string] func(x) { x }", ["E-CONTRACT"]),
    ("contract [int] => [int; ^Q.m: int] func(x) { x }", ["E-GENERALIZATION"]),
    ("contract [X] => [int] func(x) { ifhasattr(x, m) then 1 else 0 }", ["E-CONTRACT", "E-IFHAS-FIELD"]),
    ("contract [X, bool] => [int; X.m: int | bot] func(x, b) { if b then x.m = 1 else 0 }",
     ["E-CONTRACT", "E-JOIN"]),
])
def test_rejections(src, expected):
    assert codes(src) == expected


def test_contract_error_carries_expected_and_actual():
    with pytest.raises(CheckError) as info:
        judge("contract [int] => [string] func(x) { x }")
    d = info.value.diagnostics[0]
    assert d.expected == "string ; {}" and d.actual == "int ; {}"


def test_fapp_notes_each_contract():
    src = ("let f = contract [X; X.m: int] => [int] contract [X; X.m: string] => [string] "
           "func(x) { x.m }; let o = new; f(o)")
    with pytest.raises(CheckError) as info:
        judge(src)
    assert len(info.value.diagnostics[0].notes) == 2


def test_ifhasattr_on_fresh_object_takes_else_branch():
    j = judge("let o = new; ifhasattr(o, m) then 1 else 0")
    assert j.type == INT and j.post == constraints(("Xo", record(m=BOT)))


def test_ifhasattr_refines_then_branch():
    pre = constraints(("X", record(m=Maybe(STRING))))
    j = judge('ifhasattr(x, m) then x.m else "none"', pre, {"x": TVar("X")})
    assert j.type == STRING and j.post == pre


def test_existing_pre_is_preserved():
    pre = constraints(("Z", record(k=INT)))
    j = judge("let o = new; o.m = 1", pre)
    assert j.post["Z"] == pre["Z"]


def test_unknown_object_in_context():
    with pytest.raises(CheckError) as info:
        judge("x.m", constraints(), {"x": TVar("X")})
    assert info.value.diagnostics[0].code == "E-UNKNOWN-OBJECT"


def test_alpha_equivalent_respects_fixed():
    a = (INT, constraints(("X", record())))
    b = (INT, constraints(("Y", record())))
    assert alpha_equivalent(a, b)
    assert not alpha_equivalent(a, b, fixed=frozenset({"X", "Y"}))


def test_new_alone():
    j = judge("new")
    assert alpha_equivalent((j.type, j.post), (TVar("X"), constraints(("X", record()))))


def test_intersection_call_without_field_fails():
    g = GOLDEN[[g.key for g in GOLDEN].index("f-distinct")]
    ctx = {"p": TVar("X"), "q": TVar("Y"), "f": g.ctx["f"]}
    with pytest.raises(CheckError) as info:
        judge("f(p, q)", constraints(("X", record()), ("Y", record())), ctx)
    d = info.value.diagnostics[0]
    assert d.code == "E-FAPP" and len(d.notes) == 2
