"""Check and run every bundled program, printing judgments and results.

    python3 demos/tour.py
"""
from lucretia import CheckError, check_program, parse_program, program_path, run
from lucretia.interpreter import RuntimeFault, render_value
from lucretia.typemodel import render_type

ACCEPTED = [
    "both_branches",
    "one_branch",
    "object_one_branch",
    "init_app",
    "width_subtyping",
    "intersection",
    "intersection_distinct",
    "ifhasattr_fn",
]
REJECTED = ["forget_constraint", "forget_field", "bot_injection", "crash_unchecked"]


def source(name: str) -> str:
    return program_path(name).read_text(encoding="utf-8")


def main() -> None:
    print("accepted programs")
    for name in ACCEPTED:
        expr = parse_program(source(name))
        j = check_program(expr)
        halt = run(expr)
        print(f"  {name:22} {j.render()}")
        print(f"  {'':22} => {render_value(halt.value)} : {render_type(j.type)}")

    print("\nrejected programs")
    for name in REJECTED:
        try:
            check_program(parse_program(source(name)))
            print(f"  {name:22} unexpectedly accepted")
        except CheckError as err:
            print(f"  {name:22} {' / '.join(d.code for d in err.diagnostics)}: {err.diagnostics[-1].message}")

    print("\nrunning the last one anyway")
    try:
        run(parse_program(source("crash_unchecked")))
    except RuntimeFault as err:
        d = err.diagnostics[0]
        print(f"  {d.code}: {d.message} ({d.notes[0]})")


if __name__ == "__main__":
    main()
