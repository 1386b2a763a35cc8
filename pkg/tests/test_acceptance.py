"""Acceptance suite: one PASS/FAIL line per criterion, printed as the tests run."""
from __future__ import annotations

import io
import json
import random
import time

import pytest

from cases import CLAUSES, GOLDEN, GOLDEN_BY_KEY, PROGRAMS, REJECTIONS
from gen import joinable_pair, rand_cs, rand_record, sequential_split, weaken
from lucretia import program_path
from lucretia.checker import alpha_equivalent, check_program
from lucretia.cli import main
from lucretia.constraints import bot_extend, entails, join, update
from lucretia.diagnostics import CheckError
from lucretia.fuzz import fuzz, generate
from lucretia.interpreter import Config, Heap, RuntimeFault, applicable_rules, reduce
from lucretia.parser import parse_program
from lucretia.syntax import is_value
from lucretia.typemodel import (
    BOOL,
    INT,
    STRING,
    ConstraintSet,
    Maybe,
    Present,
    Record,
    TVar,
    ftv,
    union,
)

PROPERTY_SECONDS: dict[str, float] = {}


@pytest.fixture
def verdict(capsys):
    def say(criterion: str, ok: bool, detail: str = "") -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'}  {criterion}" + (f"  ({detail})" if detail else ""))
        assert ok, f"{criterion}: {detail}"

    return say


def _judge(g):
    return check_program(parse_program(g.src), g.pre, g.ctx)


def _fixed(g) -> frozenset:
    return ftv(g.pre) | ftv(tuple(g.ctx.values()))


def _matches(g, j) -> bool:
    return alpha_equivalent((j.type, j.post), (g.expected_type, g.expected_post), fixed=_fixed(g))


# -- golden judgments ---------------------------------------------------------------

def test_golden_suite(verdict):
    start = time.perf_counter()
    failures = []
    for g in GOLDEN:
        try:
            if not _matches(g, _judge(g)):
                failures.append(g.key)
        except CheckError as err:
            failures.append(f"{g.key}: {err}")
    for name, (t, post) in PROGRAMS.items():
        j = check_program(parse_program(program_path(name).read_text(encoding="utf-8")))
        if not alpha_equivalent((j.type, j.post), (t, post)):
            failures.append(name)
    elapsed = time.perf_counter() - start
    verdict("golden judgments (a)-(g) match after canonicalization, under 1 s",
            not failures and elapsed < 1.0, f"{elapsed:.3f}s" + (f"; failed {failures}" if failures else ""))


def test_golden_f_selects_conjuncts(verdict):
    alias = _judge(GOLDEN_BY_KEY["f-alias"])
    distinct = _judge(GOLDEN_BY_KEY["f-distinct"])
    verdict("intersection call sites select the aliased and the distinct conjunct",
            alias.type == INT and distinct.type == TVar("U"),
            f"f(o, o) : {alias.type}, f(x, y) : {distinct.type}")


# -- constraint algebra -------------------------------------------------------------

def test_constraint_clauses(verdict):
    wrong = [f"{c.figure}: {c.name}" for c in CLAUSES if c.actual() != c.expected]
    figures = {c.figure for c in CLAUSES}
    verdict("constraint-algebra clause suite (update, order, definiteness)",
            not wrong and figures == {"update", "order", "definiteness"} and len(CLAUSES) >= 20,
            f"{len(CLAUSES)} clauses" + (f"; wrong {wrong}" if wrong else ""))


# -- rejections ---------------------------------------------------------------------

def test_rejection_suite(verdict):
    outcome = {}
    for name, codes in REJECTIONS.items():
        try:
            check_program(parse_program(program_path(name).read_text(encoding="utf-8")))
            outcome[name] = "accepted"
        except CheckError as err:
            got = {d.code for d in err.diagnostics}
            outcome[name] = "ok" if got & codes else f"codes {sorted(got)}"
    bad = {k: v for k, v in outcome.items() if v != "ok"}
    verdict("witness programs for constraint, field and bot-union forgetting are rejected", not bad, str(bad or ""))


def test_unchecked_crash(verdict):
    path = str(program_path("crash_unchecked"))
    out, err = io.StringIO(), io.StringIO()
    unchecked = main(["run", path, "--unchecked", "--json"], out, err)
    doc = json.loads(out.getvalue())
    crash_codes = [d["code"] for d in doc["diagnostics"]]
    checked_out = io.StringIO()
    checked = main(["run", path, "--json"], checked_out, io.StringIO())
    checked_codes = [d["code"] for d in json.loads(checked_out.getvalue())["diagnostics"]]
    ok = unchecked == 1 and crash_codes[:1] == ["R-PRIMOP"] and checked == 1 and "E-FAPP" in checked_codes
    verdict("run --unchecked shows the runtime crash the checker rejects", ok,
            f"unchecked exit {unchecked} {crash_codes}; checked exit {checked} {checked_codes}")


# -- properties ---------------------------------------------------------------------

def _timed(name):
    def wrap(fn):
        def inner(verdict):
            start = time.perf_counter()
            fn(verdict)
            PROPERTY_SECONDS[name] = time.perf_counter() - start
        inner.__name__ = fn.__name__
        return inner

    return wrap


@_timed("entails")
def test_property_entails_preorder(verdict):
    rng = random.Random(1001)
    refl = trans = chains = 0
    for _ in range(10_000):
        a = rand_cs(rng)
        refl += not entails(a, a)
        b = weaken(rng, a)
        c = weaken(rng, b)
        chains += not (entails(a, b) and entails(b, c))
        trans += not entails(a, c)
        x, y, z = rand_cs(rng), rand_cs(rng), rand_cs(rng)
        if entails(x, y) and entails(y, z) and not entails(x, z):
            trans += 1
    verdict("(i) entails reflexive and transitive over 10^4 constraint sets",
            refl == trans == chains == 0, f"reflexivity {refl}, transitivity {trans}, chains {chains}")


@_timed("update")
def test_property_update_laws(verdict):
    rng = random.Random(1002)
    idem = assoc = 0
    for _ in range(10_000):
        r, u = rand_record(rng), rand_record(rng)
        idem += update(update(r, u), u) != update(r, u)
        assoc += update(r, u) != sequential_split(rng, r, u)
    verdict("(ii) update right-idempotent and field-by-field associative over 10^4 records",
            idem == assoc == 0, f"idempotence {idem}, associativity {assoc}")


@_timed("join")
def test_property_join_sound(verdict):
    rng = random.Random(1003)
    bad = 0
    for _ in range(1_000):
        p1, p2, fresh = joinable_pair(rng)
        j = join(p1, p2, fresh)
        bad += not (entails(bot_extend(p1, fresh, j), j) and entails(bot_extend(p2, fresh, j), j))
    verdict("(iii) both inputs entail the join over 10^3 joinable pairs", bad == 0, f"{bad} unsound")


FRAME_VARS = ("F1", "F2", "F3")


def _frame(rng: random.Random) -> ConstraintSet:
    return rand_cs(rng, tvars=FRAME_VARS, payload_vars=FRAME_VARS)


@_timed("frame")
def test_property_frames(verdict):
    rng = random.Random(1004)
    failures = []
    for g in GOLDEN:
        expr = parse_program(g.src)
        for _ in range(100):
            frame = _frame(rng)
            try:
                j = check_program(expr, update(frame, g.pre), g.ctx)
                ok = alpha_equivalent((j.type, j.post), (g.expected_type, update(frame, g.expected_post)),
                                      fixed=_fixed(g) | frozenset(frame))
            except CheckError:
                ok = False
            if not ok:
                failures.append((g.key, str(frame)))
    verdict("(iv) every golden judgment re-checks under 100 disjoint frames",
            not failures, f"{len(GOLDEN) * 100} frames" + (f"; first failure {failures[0]}" if failures else ""))


@_timed("fuzz")
def test_property_fuzz(verdict):
    report = fuzz(seed=42, count=500, depth=6, fuel=10_000)
    verdict("(v) fuzz seed=42 count=500 depth=6 fuel=10^4 finds no safety violation",
            report.ok and report.generated == 500,
            f"{report.halted} halted, {report.out_of_fuel} out of fuel, {len(report.violations)} violations")


def test_property_budget(verdict):
    total = sum(PROPERTY_SECONDS.values())
    verdict("property suites finish under 60 s", len(PROPERTY_SECONDS) == 5 and total < 60,
            f"{total:.1f}s")


# -- determinism --------------------------------------------------------------------

def _trace_bytes(name: str, as_json: bool) -> bytes:
    out = io.StringIO()
    argv = ["trace", str(program_path(name))] + (["--json"] if as_json else [])
    main(argv, out, io.StringIO())
    return out.getvalue().encode()


def test_trace_byte_identical(verdict):
    differing = [n for n in PROGRAMS for j in (False, True) if _trace_bytes(n, j) != _trace_bytes(n, j)]
    verdict("trace output is byte-identical across two runs of every golden program", not differing,
            str(differing or ""))


def _reachable(limit: int):
    seen = 0
    index = 0
    while seen < limit:
        c = Config(Heap(), generate(7, index, 5))
        index += 1
        for _ in range(400):
            if is_value(c.control) or seen >= limit:
                break
            yield c
            seen += 1
            try:
                c = reduce(c)[0]
            except RuntimeFault:
                break


def test_single_applicable_rule(verdict):
    bad = []
    count = 0
    for c in _reachable(1_000):
        count += 1
        rules = applicable_rules(c)
        try:
            fired = [reduce(c)[1]]
        except RuntimeFault:
            fired = []
        if len(rules) > 1 or rules != fired:
            bad.append((rules, fired))
    verdict("exactly one rule applies at each of 10^3 reachable configurations",
            count == 1_000 and not bad, f"{count} configurations" + (f"; mismatches {bad[:3]}" if bad else ""))
