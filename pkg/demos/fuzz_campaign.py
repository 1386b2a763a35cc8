"""Run a fuzz campaign, then the same campaign against a deliberately unsound checker.

The broken checker treats a possibly-absent field as present on read. The
campaign should find a program it accepts that fails at run time, and shrink it.

    python3 demos/fuzz_campaign.py [SEED]
"""
import sys

from lucretia.checker import Checker
from lucretia.diagnostics import CheckError
from lucretia.fuzz import fuzz
from lucretia.syntax import GetField
from lucretia.typemodel import Maybe, Present


def lenient_reads() -> None:
    original = Checker.check

    def check(self, e, psi, ctx, fresh, hint=None):
        if isinstance(e, GetField):
            try:
                x = self._object(e.obj, psi, ctx, "racc")
            except CheckError:
                x = None
            q = psi[x].get(e.field) if x else None
            if isinstance(q, Maybe):
                psi = psi.set(x, psi[x].set(e.field, Present(q.type)))
        return original(self, e, psi, ctx, fresh, hint)

    Checker.check = check


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 42
    print(fuzz(seed, 300, 5, 10_000).render())
    print()
    lenient_reads()
    print("with lenient field reads:")
    print(fuzz(seed, 300, 5, 10_000).render())


if __name__ == "__main__":
    main()
