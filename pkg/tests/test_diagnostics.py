import pytest

import lucretia
from lucretia.diagnostics import CODES, Diagnostic, LucretiaError, SourceSpan


def test_unknown_code_is_rejected():
    with pytest.raises(ValueError):
        Diagnostic("E-NOPE", "x")


def test_span_order_is_enforced():
    with pytest.raises(ValueError):
        SourceSpan(5, 2, 1, 6, 1, 3)


def test_span_slices_bytes():
    src = "é = 1"
    assert SourceSpan(0, 2, 1, 1, 1, 2).slice(src) == "é"


def test_render():
    d = Diagnostic("E-RACC-MAYBE", "field m of o may be absent", SourceSpan(4, 7, 2, 3, 2, 6),
                   rule="racc", expected="m: present", actual="X <# {m: int | bot}", notes=("see branch",))
    assert d.render("p.luc").splitlines() == [
        "p.luc:2:3: error [E-RACC-MAYBE] field m of o may be absent (rule racc)",
        "  expected: m: present",
        "  actual:   X <# {m: int | bot}",
        "  note: see branch",
    ]


def test_json_key_order():
    assert list(Diagnostic("U-IO", "gone").to_json()) == [
        "severity", "code", "message", "span", "rule", "expected", "actual", "notes"]


def test_error_carries_first_code():
    err = LucretiaError([Diagnostic("E-CONTRACT", "a"), Diagnostic("E-JOIN", "b")])
    assert err.code == "E-CONTRACT" and str(err) == "a; b"


def test_code_families():
    assert {c.split("-")[0] for c in CODES} == {"E", "R", "U", "F"}


def test_public_api():
    assert set(lucretia.__all__) <= set(dir(lucretia))
    assert lucretia.program_path("init_app").read_text(encoding="utf-8")
