"""How a two-contract function is matched at each call site.

`f` has one contract for distinct arguments and one for the same object
passed twice. The renaming built at a call must be injective, so an aliased
call can only use the second contract.

    python3 demos/aliasing.py
"""
from lucretia import CheckError, check_program, parse_program

F = """
let f = contract [X, Y; Y.m: U] => [U; X.m: int]
        contract [X, X] => [int; X.m: int]
        func(x, y) { x.m = 1; y.m };
"""

CALLS = {
    "same object twice": "let o = new; f(o, o)",
    "second has m": 'let a = new; let b = new; b.m = "s"; f(a, b)',
    "second lacks m": "let a = new; let b = new; f(a, b)",
}


def main() -> None:
    for title, call in CALLS.items():
        try:
            j = check_program(parse_program(F + call))
            print(f"{title:18} : {j.render().split(' : ', 1)[1]}")
        except CheckError as err:  # a rejected call is part of the story
            print(f"{title:18} ! {err}")


if __name__ == "__main__":
    main()
