import io
import json
from importlib import resources

import jsonschema
import pytest

from lucretia import program_path
from lucretia.cli import main

SCHEMA = json.loads((resources.files("lucretia") / "schema" / "output.schema.json").read_text(encoding="utf-8"))


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def cli_json(*argv):
    code, out, _ = cli(*argv, "--json")
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    return code, doc


def prog(name):
    return str(program_path(name))


def test_run_prints_value_and_type():
    assert cli("run", prog("init_app")) == (0, "42 : int\n", "")


def test_run_unchecked_prints_value_only():
    code, out, _ = cli("run", prog("init_app"), "--unchecked")
    assert code == 0 and out == "42\n"


def test_check_prints_judgment():
    code, out, _ = cli("check", prog("one_branch"))
    assert code == 0 and out.rstrip().endswith(": string ; X <# {m: string | bot}")


def test_flags_may_precede_file():
    assert cli("run", "--fuel", "500", prog("init_app"))[0] == 0


def test_trace_lines():
    code, out, _ = cli("trace", prog("init_app"))
    lines = out.splitlines()
    assert code == 0 and lines[-1] == "42 : int"
    assert all(line.startswith("#") for line in lines[:-1])


@pytest.mark.parametrize("argv, status, code", [
    (("check", "init_app"), "ok", 0),
    (("run", "init_app"), "ok", 0),
    (("trace", "init_app"), "ok", 0),
    (("check", "forget_field"), "error", 1),
    (("run", "crash_unchecked"), "error", 1),
    (("run", "crash_unchecked", "--unchecked"), "error", 1),
    (("trace", "crash_unchecked", "--unchecked"), "error", 1),
])
def test_json_documents(argv, status, code):
    command, name, *rest = argv
    got, doc = cli_json(command, prog(name), *rest)
    assert got == code and doc["status"] == status
    assert list(doc) == ["status", "judgment", "diagnostics", "trace", "fuzz_report", "result"]


def test_json_result_and_judgment():
    _, doc = cli_json("run", prog("init_app"))
    assert doc["result"]["value"] == "42" and doc["result"]["type"] == "int"
    assert doc["judgment"]["post"] == "Xo <# {m: int}"


def test_partial_trace_on_crash():
    _, doc = cli_json("trace", prog("crash_unchecked"), "--unchecked")
    assert doc["trace"] and doc["diagnostics"][0]["code"] == "R-PRIMOP"


def test_fuel_exhaustion():
    code, doc = cli_json("run", prog("init_app"), "--fuel", "2")
    assert code == 1 and doc["diagnostics"][0]["code"] == "R-FUEL"


@pytest.mark.parametrize("argv", [
    (),
    ("explode",),
    ("check",),
    ("run", "x.luc", "--fuel", "0"),
    ("run", "x.luc", "--fuel", "many"),
    ("fuzz", "--count", "0"),
    ("fuzz", "--depth", "0"),
    ("fuzz", "x.luc"),
])
def test_usage_errors(argv):
    code, doc = cli_json(*argv)
    assert code == 2 and doc["status"] == "usage-error"
    assert doc["diagnostics"][0]["code"] == "U-USAGE"


def test_missing_file(tmp_path):
    code, doc = cli_json("check", str(tmp_path / "missing.luc"))
    assert code == 2 and doc["diagnostics"][0]["code"] == "U-IO"


def test_parse_error_rendering(tmp_path):
    src = tmp_path / "bad.luc"
    src.write_text("let x = in 1")
    code, _, err = cli("check", str(src))
    assert code == 1 and err.startswith(f"{src}:1:")
    assert "[E-SYNTAX]" in err


def test_color_only_when_forced(monkeypatch, tmp_path):
    src = tmp_path / "bad.luc"
    src.write_text("y")
    monkeypatch.setenv("LUCRETIA_COLOR", "1")
    assert "\x1b[31m" in cli("check", str(src))[2]
    monkeypatch.setenv("LUCRETIA_COLOR", "0")
    assert "\x1b[" not in cli("check", str(src))[2]


def test_fuzz_json_report():
    code, doc = cli_json("fuzz", "--seed", "3", "--count", "20", "--depth", "3")
    assert code == 0 and doc["fuzz_report"]["generated"] == 20


def test_output_is_deterministic():
    for argv in (("trace", prog("intersection")), ("fuzz", "--count", "15")):
        assert cli(*argv, "--json") == cli(*argv, "--json")


def test_check_output_ends_with_canonical_judgment():
    code, out, _ = cli("check", prog("both_branches"))
    assert code == 0 and out.rstrip().endswith(": string ; X <# {m: string}")
    code, _, err = cli("check", prog("forget_constraint"))
    assert code == 1 and ("[E-RACC-MAYBE]" in err or "[E-JOIN]" in err)
