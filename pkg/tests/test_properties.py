"""Structural invariants as hypothesis properties."""
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from lucretia.checker import alpha_equivalent, check_program
from lucretia.constraints import bot_extend, definiteness, entails, join, update
from lucretia.diagnostics import CODES, LucretiaError, ParseError
from lucretia.fuzz import generate
from lucretia.interpreter import Config, Heap, RuntimeFault, reduce
from lucretia.parser import parse_contract, parse_program, tokenize
from lucretia.syntax import Const, Loc, alpha_equal, free_names, is_value, pretty, type_of_const, validate, walk
from lucretia.typemodel import (
    BOOL,
    BOT,
    INT,
    REAL,
    STRING,
    ConstraintSet,
    FunctionContract,
    Functions,
    Maybe,
    Present,
    Record,
    Renaming,
    TVar,
    Union,
    field_union,
    ftv,
    normalize,
    render_contract,
    union,
)

settings.register_profile("lucretia", max_examples=150, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lucretia")

VARS = ("X", "Y", "Z")
FIELDS = ("a", "m", "n")

types = st.lists(st.sampled_from([INT, BOOL, STRING, REAL] + [TVar(v) for v in VARS]),
                 min_size=1, max_size=3).map(lambda ts: union(*ts))
fields = st.one_of(st.just(BOT), types.map(Present), types.map(Maybe))
records = st.dictionaries(st.sampled_from(FIELDS), fields, max_size=3).map(Record)
csets = st.dictionaries(st.sampled_from(VARS), records, max_size=3).map(ConstraintSet)
programs = st.tuples(st.integers(0, 10_000), st.integers(0, 50), st.integers(1, 5))


def program(key):
    return generate(*key)


# -- types ------------------------------------------------------------------------

@given(st.lists(types, min_size=1, max_size=4))
def test_union_members_distinct_and_flat(ts):
    u = normalize(union(*ts))
    if isinstance(u, Union):
        assert len(set(u.members)) == len(u.members) > 1
        assert not any(isinstance(m, Union) for m in u.members)


@given(st.lists(fields, min_size=1, max_size=4))
def test_field_union_never_wraps_bot(qs):
    q = field_union(*qs)
    assert not (isinstance(q, Maybe) and q.type == BOT)
    assert all(entails(p, q) for p in qs)


@given(st.permutations(VARS), csets)
def test_renaming_round_trips(image, psi):
    theta = Renaming(dict(zip(VARS, image)))
    assert theta.inverse()(theta(psi)) == psi


@given(csets, types, csets)
def test_contract_quantifies_its_free_variables(pre, result, post):
    args = tuple(TVar(x) for x in pre)
    post = update(pre, ConstraintSet({x: r for x, r in post.items() if x in pre}))
    fv = ftv((pre, args, result, post))
    c = FunctionContract(tuple(sorted(fv)), pre, args, result, post)
    assert ftv(c) == frozenset()
    assert parse_contract(render_contract(c)) == c


# -- constraint algebra ---------------------------------------------------------------

@given(csets)
def test_entails_reflexive(psi):
    assert entails(psi, psi)


@given(csets, csets, csets)
def test_entails_transitive(a, b, c):
    if entails(a, b) and entails(b, c):
        assert entails(a, c)


@given(records, records)
def test_update_right_idempotent(r, u):
    assert update(update(r, u), u) == update(r, u)


@given(records, records, records)
def test_update_associative(r, s, t):
    assert update(update(r, s), t) == update(r, update(s, t))


@given(csets, st.sampled_from(VARS), st.sampled_from(FIELDS))
def test_definiteness_plus_strips_bot_once(psi, x, f):
    out = definiteness(psi, x, f, "+")
    if out is not None and x in psi:
        assert out[x][f] == Present(psi[x][f].type)
        assert definiteness(out, x, f, "+") == out


@given(csets, csets)
def test_join_is_an_upper_bound(a, b):
    # every variable counts as fresh; a branch that mentions one also constrains it,
    # as happens when each branch creates its own objects
    fresh = frozenset(a) | frozenset(b)
    assume(all(ftv(side) <= set(side) | (set(VARS) - fresh) for side in (a, b)))
    j = join(a, b, fresh)
    assert entails(bot_extend(a, fresh, j), j)
    assert entails(bot_extend(b, fresh, j), j)
    assert join(b, a, fresh) == j


# -- syntax -----------------------------------------------------------------------------

@given(st.one_of(st.integers(-2**63, 2**63 - 1), st.booleans(), st.text(max_size=5),
                 st.floats(allow_nan=False), st.just(())))
def test_every_constant_has_one_base_type(v):
    assert type_of_const(Const(v)).name in ("int", "bool", "string", "real", "unit")


@given(programs)
def test_generated_programs_round_trip_through_text(key):
    e = program(key)
    assert not validate(e)
    assert not any(isinstance(n, Loc) for n in walk(e))
    assert alpha_equal(parse_program(pretty(e)), e)


@given(programs)
def test_token_spans_lie_within_input(key):
    src = pretty(program(key))
    for tok in tokenize(src):
        s = tok.span
        assert 0 <= s.start <= s.end <= len(src.encode())


@given(st.text(alphabet="let x=new;.m(){}+1\"if then else ifhasattr,contract[]X<#:int=>bot|", max_size=40))
def test_parser_fails_only_with_listed_codes(src):
    try:
        parse_program(src)
    except ParseError as err:
        for d in err.diagnostics:
            assert d.code in CODES
            assert d.span is None or 0 <= d.span.start <= d.span.end <= len(src.encode())


# -- checker ------------------------------------------------------------------------

@given(programs)
def test_judgment_domains(key):
    j = check_program(program(key))
    assert set(j.pre) <= set(j.post)
    if not isinstance(j.type, Functions):
        assert ftv(j.type) <= set(j.post)


frame_renaming = Renaming({v: f"F{v}" for v in VARS})


@given(programs, csets)
def test_checking_is_monotone_in_unrelated_preconditions(key, frame):
    frame = frame_renaming(frame)
    e = program(key)
    base = check_program(e)
    framed = check_program(e, frame)
    assert alpha_equivalent((framed.type, framed.post), (base.type, update(frame, base.post)),
                            fixed=ftv(frame))


# -- interpreter ------------------------------------------------------------------------

@settings(max_examples=60)
@given(programs)
def test_configurations_stay_closed_and_heap_consistent(key):
    c = Config(Heap(), program(key))
    for _ in range(300):
        assert not free_names(c.control)
        locs = {n.id for n in walk(c.control) if isinstance(n, Loc)}
        for obj in c.heap.objects.values():
            locs |= {v.id for v in obj.values() if isinstance(v, Loc)}
        assert locs <= set(c.heap.objects)
        assert all(i < c.heap.next_id for i in c.heap.objects)
        try:
            nxt, rule = reduce(c)
        except RuntimeFault:
            return
        assert reduce(c) == (nxt, rule)  # deterministic
        c = nxt
        if is_value(c.control):
            return


@given(programs, st.integers(0, 10_000))
def test_damaged_programs_fail_with_listed_codes(key, cut):
    src = pretty(program(key))
    toks = [t for t in tokenize(src) if t.kind != "eof"]
    tok = toks[cut % len(toks)]
    raw = src.encode()
    damaged = (raw[:tok.span.start] + raw[tok.span.end:]).decode()
    try:
        check_program(parse_program(damaged))
    except LucretiaError as err:
        assert err.diagnostics and all(d.code in CODES for d in err.diagnostics)
