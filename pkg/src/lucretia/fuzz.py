"""Random well-typed programs, executed to look for runtime failures the checker should exclude.

Programs are grown one let-statement at a time. Each candidate statement is
checked against the current (Psi, Gamma) before it is kept, so every program
is accepted by construction; the whole program is re-checked before running.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .checker import Checker, check_program
from .diagnostics import LucretiaError
from .interpreter import (
    DEFAULT_FUEL,
    FuelExhausted,
    MessageNotUnderstood,
    PrimOpError,
    RuntimeFault,
    TypeMismatch,
    UnboundVariable,
    run,
)
from .syntax import (
    App,
    Const,
    Expr,
    Func,
    GetField,
    If,
    IfHasAttr,
    Let,
    New,
    PrimOp,
    SetField,
    UNIT_VALUE,
    Var,
    free_names,
    pretty,
    type_of_const,
)
from .typemodel import (
    BOT,
    Absent,
    Base,
    ConstraintSet,
    FunctionContract,
    Functions,
    Present,
    Record,
    TVar,
    Type,
    disjuncts,
    ftv,
)

FIELDS = ("a", "b", "m", "n")
ATTEMPTS = 12

# object creation, field traffic and conditionals dominate; arithmetic is rare
WEIGHTS = {
    "new": 4,
    "set": 6,
    "get": 4,
    "ifhasattr": 4,
    "if": 3,
    "func": 2,
    "app": 3,
    "arith": 1,
    "compare": 1,
    "const": 1,
}


@dataclass
class Violation:
    index: int
    kind: str
    message: str
    program: str

    def to_json(self) -> dict:
        return {"index": self.index, "kind": self.kind, "message": self.message, "program": self.program}


@dataclass
class FuzzReport:
    seed: int
    count: int
    depth: int
    fuel: int
    generated: int = 0
    halted: int = 0
    out_of_fuel: int = 0
    overflow: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "count": self.count,
            "depth": self.depth,
            "fuel": self.fuel,
            "generated": self.generated,
            "halted": self.halted,
            "out_of_fuel": self.out_of_fuel,
            "overflow": self.overflow,
            "violations": [v.to_json() for v in self.violations],
        }

    def render(self) -> str:
        lines = [
            f"fuzz seed={self.seed} count={self.count} depth={self.depth} fuel={self.fuel}",
            f"generated {self.generated}, halted {self.halted}, out of fuel {self.out_of_fuel}, "
            f"overflow {self.overflow}, violations {len(self.violations)}",
        ]
        for v in self.violations:
            lines.append(f"violation in program {v.index} [{v.kind}]: {v.message}")
            lines.append("  " + v.program)
        return "\n".join(lines)


class _State:
    def __init__(self, psi: ConstraintSet, ctx: dict, fresh: frozenset):
        self.psi, self.ctx, self.fresh = psi, ctx, fresh

    def objects(self) -> list[str]:
        return [v for v, t in self.ctx.items() if isinstance(t, TVar) and t.name in self.psi]

    def of_type(self, t: Type) -> list[str]:
        return [v for v, u in self.ctx.items() if u == t]

    def functions(self) -> list[str]:
        return [v for v, t in self.ctx.items() if isinstance(t, Functions)]


class Generator:
    def __init__(self, rng: random.Random, depth: int):
        self.rng = rng
        self.depth = depth
        self.checker = Checker()
        self.names = 0
        self.budget = 4 * depth  # statements left for the whole program

    def name(self) -> str:
        self.names += 1
        return f"v{self.names}"

    # -- atoms
    def const(self, base: Optional[str] = None) -> Const:
        base = base or self.rng.choice(("int", "int", "bool", "string", "real", "unit"))
        r = self.rng
        if base == "int":
            return Const(r.randint(-3, 9))
        if base == "bool":
            return Const(r.random() < 0.5)
        if base == "string":
            return Const(r.choice(("", "s", "help", "blue")))
        if base == "real":
            return Const(r.choice((0.5, 1.0, 2.25)))
        return Const(UNIT_VALUE)

    def atom_of(self, st: _State, t: Type) -> Optional[Expr]:
        names = st.of_type(t)
        if names and self.rng.random() < 0.7:
            return Var(self.rng.choice(names))
        if isinstance(t, Base):
            return self.const(t.name)
        return Var(self.rng.choice(names)) if names else None

    def any_atom(self, st: _State) -> Expr:
        if st.ctx and self.rng.random() < 0.6:
            return Var(self.rng.choice(sorted(st.ctx)))
        return self.const()

    # -- statements
    def block(self, st: _State, depth: int, length: int) -> Expr:
        """A let-chain of `length` accepted statements ending in an atom."""
        binds = []
        for _ in range(length):
            if self.budget <= 0:
                break
            self.budget -= 1
            got = self.statement(st, depth)
            if got is not None:
                binds.append(got)
        tail = Var(binds[-1][0]) if binds and self.rng.random() < 0.8 else self.any_atom(st)
        e: Expr = tail
        for name, bound in reversed(binds):
            e = Let(name, bound, e)
        return e

    def statement(self, st: _State, depth: int) -> Optional[tuple[str, Expr]]:
        kinds = [k for k in WEIGHTS if depth > 0 or k not in ("if", "ifhasattr", "func")]
        weights = [WEIGHTS[k] for k in kinds]
        for _ in range(ATTEMPTS):
            kind = self.rng.choices(kinds, weights)[0]
            cand = getattr(self, "_" + kind)(st, depth)
            if cand is None:
                continue
            name = self.name()
            try:
                t, psi, fresh = self.checker.check(cand, st.psi, st.ctx, st.fresh, hint=name)
            except LucretiaError:
                continue
            st.psi, st.fresh = psi, fresh
            st.ctx = {**st.ctx, name: t}
            return name, cand
        return None

    def _branch(self, st: _State, depth: int) -> Expr:
        inner = _State(st.psi, dict(st.ctx), st.fresh)
        return self.block(inner, depth - 1, self.rng.randint(1, 2))

    def _new(self, st, depth):
        return New()

    def _const(self, st, depth):
        return self.const()

    def _set(self, st, depth):
        objs = st.objects()
        if not objs:
            return None
        return SetField(Var(self.rng.choice(objs)), self.rng.choice(FIELDS), self.any_atom(st))

    def _get(self, st, depth):
        # mostly reads the checker should accept, but any field may be proposed:
        # rejecting the rest is the checker's job, not the generator's
        objs = st.objects()
        if not objs:
            return None
        present = [(v, f) for v in objs for f, q in st.psi[st.ctx[v].name].items() if isinstance(q, Present)]
        if present and self.rng.random() < 0.7:
            v, f = self.rng.choice(present)
        else:
            v, f = self.rng.choice(objs), self.rng.choice(FIELDS)
        return GetField(Var(v), f)

    def _ifhasattr(self, st, depth):
        objs = st.objects()
        if not objs:
            return None
        v = self.rng.choice(objs)
        known = list(st.psi[st.ctx[v].name])
        fields = known if known and self.rng.random() < 0.7 else list(FIELDS)
        f = self.rng.choice(fields)
        then = self._branch(st, depth)
        if self.rng.random() < 0.5:
            then = Let(self.name(), GetField(Var(v), f), then)
        return IfHasAttr(Var(v), f, then, self._branch(st, depth))

    def _if(self, st, depth):
        conds = st.of_type(Base("bool"))
        cond = Var(self.rng.choice(conds)) if conds and self.rng.random() < 0.7 else self.const("bool")
        return If(cond, self._branch(st, depth), self._branch(st, depth))

    def _arith(self, st, depth):
        op = self.rng.choice(("+", "+", "-", "*", "not"))
        if op == "not":
            return PrimOp("not", (self.atom_of(st, Base("bool")),))
        base = Base(self.rng.choice(("int", "int", "real", "bool") if op == "+" else ("int", "real")))
        other = Base(self.rng.choice(("int", "real"))) if self.rng.random() < 0.3 else base
        return PrimOp(op, (self.atom_of(st, base), self.atom_of(st, other)))

    def _compare(self, st, depth):
        op = self.rng.choice(("==", "<"))
        base = Base(self.rng.choice(("int", "string", "real") if op == "<" else ("int", "bool", "string")))
        return PrimOp(op, (self.atom_of(st, base), self.atom_of(st, base)))

    def _func(self, st, depth):
        """A literal whose contract is read off a checked body."""
        params, args = [], []
        pre = {}
        objs = st.objects()
        if objs and self.rng.random() < 0.8:
            model = st.psi[st.ctx[self.rng.choice(objs)].name]
            var = self.checker.fresh_var("P")
            fields = {f: q for f, q in model.items()
                      if not ftv(q) and self.rng.random() < 0.7}
            if self.rng.random() < 0.4:
                f = self.rng.choice(FIELDS)
                fields.setdefault(f, BOT)
            pre[var] = Record(fields)
            params.append("self")
            args.append(TVar(var))
        if not params or self.rng.random() < 0.5:
            params.append("k")
            args.append(Base(self.rng.choice(("int", "bool", "string"))))
        pre_cs = ConstraintSet(pre)
        ctx = {v: t for v, t in st.ctx.items() if not ftv(t)}
        ctx.update(zip(params, args))
        body_state = _State(pre_cs, ctx, frozenset())
        body = self.block(body_state, min(depth - 1, 2), self.rng.randint(1, 2))
        try:
            t, post, _ = self.checker.check(body, pre_cs, ctx, frozenset())
        except LucretiaError:
            return None
        quantified = tuple(sorted(ftv((pre_cs, tuple(args), t, post))))
        contract = FunctionContract(quantified, pre_cs, tuple(args), t, post)
        return Func(tuple(params), (contract,), body)

    def _app(self, st, depth):
        fns = st.functions()
        if not fns:
            return None
        f = self.rng.choice(fns)
        c = self.rng.choice(st.ctx[f].contracts)
        actuals = []
        for formal in c.args:
            if isinstance(formal, TVar) and formal.name in c.pre:
                objs = st.objects()
                if not objs:
                    return None
                actuals.append(Var(self.rng.choice(objs)))
            else:
                a = self.atom_of(st, formal)
                if a is None:
                    return None
                actuals.append(a)
        return App(Var(f), tuple(actuals))


def generate(seed: int, index: int, depth: int) -> Expr:
    """Program number `index` of the stream for `seed`."""
    rng = random.Random(f"lucretia:{seed}:{index}")
    gen = Generator(rng, depth)
    st = _State(ConstraintSet(), {}, frozenset())
    return gen.block(st, depth, rng.randint(2, 2 + depth))


def _shrinks(e: Expr):
    """Smaller variants of e: a let dropped or cut short, or a conditional collapsed."""
    match e:
        case Let(name=x, bound=b, body=body):
            if x not in free_names(body):
                yield body
            if body == Var(x):
                yield b
            else:
                yield Let(x, b, Var(x))  # cut the program after this statement
            for b2 in _shrinks(b):
                yield Let(x, b2, body)
            for body2 in _shrinks(body):
                yield Let(x, b, body2)
        case If(cond=c, then=t, else_=f):
            yield t
            yield f
            for t2 in _shrinks(t):
                yield If(c, t2, f)
            for f2 in _shrinks(f):
                yield If(c, t, f2)
        case IfHasAttr(obj=o, field=n, then=t, else_=f):
            yield t
            yield f
            for t2 in _shrinks(t):
                yield IfHasAttr(o, n, t2, f)
            for f2 in _shrinks(f):
                yield IfHasAttr(o, n, t, f2)
        case Func(params=ps, contracts=cs, body=body):
            for body2 in _shrinks(body):
                yield Func(ps, cs, body2)


def classify(e: Expr, fuel: int) -> tuple[str, str]:
    """('halted'|'fuel'|'overflow'|violation kind, message) for a checked program."""
    judgment = check_program(e)
    try:
        halt = run(e, fuel)
    except FuelExhausted:
        return "fuel", ""
    except PrimOpError as err:
        if err.reason == "overflow":
            return "overflow", ""
        return "primop", str(err)
    except (MessageNotUnderstood, TypeMismatch, UnboundVariable) as err:
        return err.code, str(err)
    v = halt.value
    allowed = disjuncts(judgment.type)
    if isinstance(v, Const):
        ok = type_of_const(v) in allowed
    elif isinstance(v, Func):
        ok = any(isinstance(d, Functions) for d in allowed)
    else:
        ok = any(isinstance(d, TVar) for d in allowed)
    if not ok:
        return "result-type", f"value {pretty(v)} outside {judgment.type}"
    return "halted", ""


_BENIGN = ("halted", "fuel", "overflow")


def minimize(e: Expr, kind: str, fuel: int) -> Expr:
    """Greedily shrink e while it stays accepted and fails the same way."""
    progress = True
    while progress:
        progress = False
        for trial in _shrinks(e):
            try:
                same = classify(trial, fuel)[0] == kind
            except LucretiaError:
                same = False
            if same:
                e, progress = trial, True
                break
    return e


def fuzz(seed: int, count: int, depth: int, fuel: int = DEFAULT_FUEL) -> FuzzReport:
    if count < 1 or depth < 1:
        raise ValueError("count and depth must be at least 1")
    report = FuzzReport(seed, count, depth, fuel)
    for i in range(count):
        prog = generate(seed, i, depth)
        report.generated += 1
        try:
            kind, message = classify(prog, fuel)
        except LucretiaError as err:
            # construction and whole-program checking disagree: a checker bug in itself
            report.violations.append(Violation(i, "rechecked-rejected", str(err), pretty(prog)))
            continue
        if kind == "halted":
            report.halted += 1
        elif kind == "fuel":
            report.out_of_fuel += 1
        elif kind == "overflow":
            report.overflow += 1
        else:
            small = minimize(prog, kind, fuel)
            report.violations.append(Violation(i, kind, message, pretty(small)))
    return report
