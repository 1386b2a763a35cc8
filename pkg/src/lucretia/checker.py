"""Syntax-directed Hoare-style checking: Psi1; Gamma |- e : t; Psi2."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .constraints import (
    JoinError,
    bot_extend,
    definiteness,
    entails,
    explain_entailment,
    join,
    type_entails,
    update,
)
from .diagnostics import CheckError, Diagnostic
from .syntax import (
    App,
    Const,
    Expr,
    Func,
    GetField,
    If,
    IfHasAttr,
    Let,
    Loc,
    New,
    PrimOp,
    SetField,
    TEMP_PREFIX,
    Var,
    pretty,
    type_of_const,
)
from .typemodel import (
    BOOL,
    BOT,
    EMPTY,
    INT,
    REAL,
    STRING,
    Absent,
    Base,
    ConstraintSet,
    FunctionContract,
    Functions,
    Maybe,
    Present,
    Record,
    Renaming,
    TVar,
    Type,
    Union,
    _contract_vars,
    disjuncts,
    fresh_name,
    ftv,
    normalize,
    parallel_ok,
    render_constraints,
    render_contract,
    render_field,
    render_type,
    substitute,
    union,
)

Context = Mapping[str, Type]

_PLUS_DOMAIN = union(BOOL, INT, REAL)
_ARITH_DOMAIN = union(INT, REAL)
_ORDERED = (INT, REAL, STRING)
MAX_ASSIGNMENTS = 5040  # result-side objects tried against created ones


class _NoMatch(Exception):
    """A contract conjunct does not apply; the message says why."""


def _err(code: str, message: str, node=None, rule=None, expected=None, actual=None, notes=()) -> CheckError:
    return CheckError(
        Diagnostic(code, message, getattr(node, "span", None), rule=rule,
                   expected=expected, actual=actual, notes=tuple(notes))
    )


@dataclass(frozen=True)
class Judgment:
    pre: ConstraintSet
    ctx: Mapping[str, Type]
    expr: Expr
    type: Type
    post: ConstraintSet

    def summary(self, width: int = 40) -> str:
        text = " ".join(pretty(self.expr).split())
        return text if len(text) <= width else text[: width - 3] + "..."

    def render(self) -> str:
        return f"|- {self.summary()} : {render_type(self.type)} ; {render_constraints(self.post)}"

    def to_json(self) -> dict:
        return {
            "pre": render_constraints(self.pre),
            "expr": self.summary(),
            "type": render_type(self.type),
            "post": render_constraints(self.post),
            "text": self.render(),
        }


# -- structural matching ---------------------------------------------------------------

def _bind(theta: dict, var: str, actual: Type) -> None:
    if var in theta and theta[var] != actual:
        raise _NoMatch(f"{var} would stand for both {render_type(theta[var])} and {render_type(actual)}")
    theta[var] = actual


def match_type(formal: Type, actual: Type, theta: dict, flex: frozenset) -> None:
    """Extend theta (flex var -> Type) so that theta(formal) agrees with actual."""
    if isinstance(formal, TVar) and formal.name in flex:
        _bind(theta, formal.name, actual)
        return
    if isinstance(formal, (Base, TVar)):
        if formal != actual:
            raise _NoMatch(f"expected {render_type(formal)}, got {render_type(actual)}")
        return
    if isinstance(formal, Functions):
        if substitute({k: v for k, v in theta.items()}, formal) != actual:
            raise _NoMatch(f"expected {render_type(formal)}, got {render_type(actual)}")
        return
    if isinstance(formal, Union):
        fixed = [m for m in formal.members if not (isinstance(m, TVar) and m.name in flex)]
        loose = [m for m in formal.members if isinstance(m, TVar) and m.name in flex]
        rest = list(disjuncts(actual))
        for m in fixed:
            m2 = substitute(theta, m)
            if m2 not in rest:
                raise _NoMatch(f"expected {render_type(formal)}, got {render_type(actual)}")
            rest.remove(m2)
        if len(loose) != len(rest) and not (len(loose) == 1 and rest):
            raise _NoMatch(f"expected {render_type(formal)}, got {render_type(actual)}")
        if len(loose) == 1:
            _bind(theta, loose[0].name, union(*rest))
        else:
            for v, a in zip(loose, rest):
                _bind(theta, v.name, a)
        return
    raise _NoMatch(f"cannot match {render_type(formal)}")


def _payload(q) -> Optional[Type]:
    return None if isinstance(q, Absent) else q.type


def match_records(formal: ConstraintSet, actual: ConstraintSet, theta: dict, flex: frozenset) -> None:
    """Propagate theta through field payloads of matched objects until nothing changes."""
    while True:
        before = dict(theta)
        for v, rec in formal.items():
            target = theta.get(v, TVar(v) if v not in flex else None)
            if not isinstance(target, TVar) or target.name not in actual:
                continue
            have = actual[target.name]
            for f, q in rec.items():
                if f in have:
                    fp, ap = _payload(q), _payload(have[f])
                    if fp is not None and ap is not None:
                        match_type(fp, ap, theta, flex)
        if theta == before:
            return


def _shape_fits(have: Record, want: Record) -> bool:
    """Field names alone allow have to be weakened to want (missing ones read as bot)."""
    return all(f in want for f in have) and all(
        f in have or isinstance(q, (Absent, Maybe)) for f, q in want.items()
    )


def _assignments(objects: list[str], pool: list[str], c: FunctionContract, t: Type,
                 have: ConstraintSet, flex: frozenset):
    """Injective maps objects -> pool, pruned step by step, in a fixed order.

    A step v -> x is kept only if the record shapes fit, result objects go to
    result objects, and every field whose promised type is already fully
    determined is entailed.
    """
    want = c.post
    in_result = {d.name for d in disjuncts(c.result) if isinstance(d, TVar)}
    returned = {d.name for d in disjuncts(t) if isinstance(d, TVar)}
    objects = sorted(objects, key=lambda v: (v not in in_result, v))
    theta: dict[str, Type] = {}

    def fits(v: str, x: str) -> bool:
        if not _shape_fits(have[x], want[v]):
            return False
        if v in in_result and x not in returned:
            return False
        for f, wq in want[v].items():
            if ftv(wq) & (flex - set(theta)):
                continue
            if not entails(have[x].get(f, BOT), substitute(theta, wq)):
                return False
        return True

    def go(i: int):
        if i == len(objects):
            yield dict(theta)
            return
        v = objects[i]
        for x in pool:
            if TVar(x) not in theta.values():
                theta[v] = TVar(x)
                if fits(v, x):
                    yield from go(i + 1)
                del theta[v]

    yield from go(0)


# -- the checker -----------------------------------------------------------------------

@dataclass
class Checker:
    used: set = field(default_factory=set)
    steps: int = 0

    # -- fresh names
    @staticmethod
    def object_base(binder: Optional[str]) -> str:
        """Type variable base for an object bound to `binder`: x -> X, o -> Xo."""
        if not binder or binder.startswith(TEMP_PREFIX) or binder == "_":
            return "Y"
        return "X" if binder == "x" else "X" + binder

    def fresh_var(self, base: str) -> str:
        name = fresh_name(base, self.used)
        self.used.add(name)
        return name

    def reserve(self, *xs) -> None:
        for x in xs:
            self.used |= ftv(x)

    # -- helpers
    @staticmethod
    def _lookup(ctx: Context, e: Var) -> Type:
        if e.name not in ctx:
            raise _err("E-UNBOUND", f"unknown variable {e.name}", e, rule="var")
        return ctx[e.name]

    def _object(self, atom: Expr, psi: ConstraintSet, ctx: Context, rule: str) -> str:
        t = self.atom(atom, psi, ctx)
        if not isinstance(t, TVar):
            raise _err("E-NON-OBJECT", f"{pretty(atom)} has type {render_type(t)}, not an object type",
                       atom, rule=rule, actual=render_type(t))
        if t.name not in psi:
            raise _err("E-UNKNOWN-OBJECT",
                       f"no constraint on {t.name} (the type of {pretty(atom)}) is in scope",
                       atom, rule=rule, actual=render_constraints(psi))
        return t.name

    def atom(self, e: Expr, psi: ConstraintSet, ctx: Context) -> Type:
        if isinstance(e, Var):
            return self._lookup(ctx, e)
        if isinstance(e, Const):
            return type_of_const(e)
        if isinstance(e, Func):
            return self.check_function(e, ctx)
        if isinstance(e, Loc):
            raise _err("E-NON-OBJECT", "heap locations cannot be checked", e)
        raise _err("E-NON-OBJECT", f"expected an atom, got {type(e).__name__}", e)

    # -- expressions
    def check(self, e: Expr, psi: ConstraintSet, ctx: Context, fresh: frozenset,
              hint: Optional[str] = None) -> tuple[Type, ConstraintSet, frozenset]:
        self.steps += 1
        match e:
            case Var() | Const() | Func() | Loc():
                return self.atom(e, psi, ctx), psi, fresh
            case New():
                x = self.fresh_var(self.object_base(hint))
                return TVar(x), psi.set(x, Record()), fresh | {x}
            case GetField(obj=o, field=n):
                x = self._object(o, psi, ctx, "racc")
                q = psi[x].get(n)
                where = render_constraints(ConstraintSet({x: psi[x]}))
                if isinstance(q, Present):
                    return q.type, psi, fresh
                if isinstance(q, Maybe):
                    raise _err("E-RACC-MAYBE", f"field {n} of {pretty(o)} may be absent", e, rule="racc",
                               expected=f"{n}: present", actual=where)
                if isinstance(q, Absent):
                    raise _err("E-RACC-ABSENT", f"field {n} of {pretty(o)} is absent", e, rule="racc",
                               expected=f"{n}: present", actual=where)
                raise _err("E-RACC-UNKNOWN", f"field {n} of {pretty(o)} is not known to be present", e,
                           rule="racc", expected=f"{n}: present", actual=where)
            case SetField(obj=o, field=n, value=v):
                x = self._object(o, psi, ctx, "update")
                t = self.atom(v, psi, ctx)
                return t, update(psi, ConstraintSet({x: Record({n: Present(t)})})), fresh
            case PrimOp(op=op, args=args):
                return self._primop(e, [self.atom(a, psi, ctx) for a in args]), psi, fresh
            case Let(name=x, bound=b, body=body):
                t1, psi1, fresh1 = self.check(b, psi, ctx, fresh, hint=x)
                inner = dict(ctx)
                inner[x] = t1
                return self.check(body, psi1, inner, fresh1)
            case If(cond=c, then=t, else_=f):
                tc = self.atom(c, psi, ctx)
                if not type_entails(tc, BOOL):
                    raise _err("E-COND-TYPE", f"condition has type {render_type(tc)}", c, rule="cond",
                               expected="bool", actual=render_type(tc))
                t1, psi1, f1 = self.check(t, psi, ctx, fresh)
                t2, psi2, f2 = self.check(f, psi, ctx, fresh)
                return normalize(union(t1, t2)), self._join(psi1, psi2, f1 | f2, e, "cond"), f1 | f2
            case IfHasAttr(obj=o, field=n, then=t, else_=f):
                return self._ifhasattr(e, o, n, t, f, psi, ctx, fresh)
            case App(fn=fn, args=args):
                callee = self.atom(fn, psi, ctx)
                actuals = [self.atom(a, psi, ctx) for a in args]
                return self.match_application(e, callee, actuals, psi, ctx, fresh)
        raise _err("E-NON-OBJECT", f"cannot check {type(e).__name__}", e)

    def _join(self, psi1, psi2, fresh, node, rule) -> ConstraintSet:
        try:
            return join(psi1, psi2, fresh)
        except JoinError as err:
            raise _err("E-JOIN", str(err), node, rule=rule,
                       expected=render_constraints(psi1), actual=render_constraints(psi2)) from None

    def _primop(self, e: PrimOp, ts: list[Type]) -> Type:
        shown = ", ".join(render_type(t) for t in ts)

        def fail(expected: str) -> CheckError:
            return _err("E-OP-TYPE", f"{e.op} cannot be applied to ({shown})", e, rule="plus",
                        expected=expected, actual=shown)

        if e.op == "not":
            if not type_entails(ts[0], BOOL):
                raise fail("bool")
            return BOOL
        a, b = ts
        if e.op == "+":
            if not (type_entails(a, _PLUS_DOMAIN) and type_entails(b, _PLUS_DOMAIN)):
                raise fail(render_type(_PLUS_DOMAIN))
            return normalize(union(a, b))
        if e.op in ("-", "*"):
            if not (type_entails(a, _ARITH_DOMAIN) and type_entails(b, _ARITH_DOMAIN)):
                raise fail(render_type(_ARITH_DOMAIN))
            return normalize(union(a, b))
        if e.op == "==":
            if not (isinstance(a, Base) and a == b):
                raise fail("two operands of one base type")
            return BOOL
        if e.op == "<":
            if not (a in _ORDERED and a == b):
                raise fail("two ints, two reals or two strings")
            return BOOL
        raise fail("a known operator")

    def _ifhasattr(self, e, o, n, then, else_, psi, ctx, fresh):
        x = self._object(o, psi, ctx, "ifhat")
        if n not in psi[x]:
            if x not in fresh:
                raise _err("E-IFHAS-FIELD",
                           f"{x} does not mention field {n}; declare it as {n}: bot or {n}: t | bot",
                           e, rule="ifhat", actual=render_constraints(ConstraintSet({x: psi[x]})))
            psi = psi.set(x, psi[x].set(n, BOT))  # created here, so every unmentioned field is absent
        q = psi[x][n]
        if isinstance(q, Present):
            return self.check(then, psi, ctx, fresh)
        if isinstance(q, Absent):
            return self.check(else_, psi, ctx, fresh)
        t1, psi1, f1 = self.check(then, definiteness(psi, x, n, "+"), ctx, fresh)
        t2, psi2, f2 = self.check(else_, definiteness(psi, x, n, "-"), ctx, fresh)
        return normalize(union(t1, t2)), self._join(psi1, psi2, f1 | f2, e, "ifhat"), f1 | f2

    # -- functions
    def check_function(self, f: Func, ctx: Context) -> Functions:
        if not f.contracts:
            raise _err("E-UNANNOTATED-FUNCTION", "function literal has no contract", f, rule="fdecl")
        env_vars = ftv(tuple(ctx.values()))
        for c in f.contracts:
            self._check_contract(f, c, ctx, env_vars)
        return Functions(tuple(f.contracts))

    def _check_contract(self, f: Func, c: FunctionContract, ctx: Context, env_vars: frozenset) -> None:
        shown = render_contract(c)
        if len(c.args) != len(f.params):
            raise _err("E-ARITY", f"function takes {len(f.params)} but the contract lists {len(c.args)} arguments",
                       f, rule="fdecl", expected=str(len(c.args)), actual=str(len(f.params)))
        free = ftv(c)
        unknown = sorted(free - env_vars)
        if unknown:
            raise _err("E-GENERALIZATION",
                       f"nonlocal {', '.join(unknown)} is not the type of anything in scope",
                       f, rule="fdecl", actual=shown)
        unused = [q for q in c.quantified if q not in _contract_vars(c)]
        if unused:
            raise _err("E-GENERALIZATION", f"quantified {', '.join(unused)} does not occur in the contract",
                       f, rule="fdecl", actual=shown)
        # quantified names that collide with the enclosing scope are renamed apart
        clash = [q for q in c.quantified if q in env_vars]
        if clash:
            avoid = set(self.used) | set(env_vars) | set(_contract_vars(c))
            ren = {}
            for q in clash:
                ren[q] = TVar(fresh_name(q, avoid))
                avoid.add(ren[q].name)
            c = FunctionContract(
                tuple(ren[q].name if q in ren else q for q in c.quantified),
                substitute(ren, c.pre), tuple(substitute(ren, t) for t in c.args),
                substitute(ren, c.result), substitute(ren, c.post),
            )
        self.reserve(c.pre, c.post, c.result, tuple(c.args), *(TVar(q) for q in c.quantified))
        inner = dict(ctx)
        inner.update(zip(f.params, c.args))
        try:
            t, psi, created = self.check(f.body, c.pre, inner, frozenset())
        except CheckError as err:
            first = err.diagnostics[0]
            raise CheckError(
                [Diagnostic("E-CONTRACT", f"body does not check against {shown}: {first.message}",
                            f.span, rule="fdecl", expected=shown, actual=first.message)]
                + err.diagnostics
            ) from None
        self._conform(f, c, t, psi, created, shown)

    def _conform(self, f, c, t, psi, created, shown) -> None:
        """Body result (t, psi) meets the contract for some choice of its result-side objects."""
        flex = frozenset(v for v in c.quantified if v not in c.pre)
        objects = sorted(set(c.post) & flex)
        pool = sorted(x for x in created if x in psi)
        failures = []
        if len(pool) < len(objects):
            failures.append(f"the contract promises {len(objects)} new objects, the body creates {len(pool)}")
        choices = itertools.islice(_assignments(objects, pool, c, t, psi, flex), MAX_ASSIGNMENTS)
        for theta in choices:
            try:
                match_type(c.result, t, theta, flex)
            except _NoMatch:
                pass  # the promised result may be a weakening; entailment decides
            try:
                match_records(c.post, psi, theta, flex)
            except _NoMatch as why:
                failures.append(str(why))
                continue
            for v in sorted(flex - set(theta)):
                theta[v] = TVar(self.fresh_var(v))
            want_t = substitute(theta, c.result)
            if not type_entails(t, want_t):
                failures.append(f"body returns {render_type(t)}, contract promises {render_type(want_t)}")
                continue
            want = substitute(theta, c.post)
            reason = explain_entailment(bot_extend(psi, created, want), want)
            if reason is None:
                return
            failures.append(reason)
        why = failures[0] if failures else "no assignment of created objects fits"
        raise _err("E-CONTRACT", f"body does not meet {shown}: {why}", f, rule="fdecl",
                   expected=f"{render_type(c.result)} ; {render_constraints(c.post)}",
                   actual=f"{render_type(t)} ; {render_constraints(psi)}")

    # -- application
    def match_application(self, e: App, callee: Type, actuals: list[Type], psi: ConstraintSet,
                          ctx: Context, fresh: frozenset):
        if not isinstance(callee, Functions):
            raise _err("E-NOT-FUNCTION", f"callee has type {render_type(callee)}", e.fn, rule="fapp",
                       actual=render_type(callee))
        reasons = []
        for i, c in enumerate(callee.contracts):
            try:
                return self._apply_contract(c, actuals, psi, ctx, fresh)
            except _NoMatch as why:
                reasons.append(f"contract {i + 1} {render_contract(c)}: {why}")
        arity_only = all(len(c.args) != len(actuals) for c in callee.contracts)
        code = "E-ARITY" if arity_only else "E-FAPP"
        raise _err(code, "no contract of the callee applies to these arguments", e, rule="fapp",
                   actual="(" + ", ".join(render_type(t) for t in actuals) + ") under " + render_constraints(psi),
                   notes=reasons)

    def _apply_contract(self, c: FunctionContract, actuals: list[Type], psi, ctx, fresh):
        if len(c.args) != len(actuals):
            raise _NoMatch(f"expects {len(c.args)} arguments, {len(actuals)} given")
        flex = frozenset(c.quantified)
        theta: dict[str, Type] = {}
        for formal, actual in zip(c.args, actuals):
            match_type(formal, actual, theta, flex)
        match_records(c.pre, psi, theta, flex)
        objects = (set(c.pre) | set(c.post)) & flex
        for v in objects:
            if v in theta and not isinstance(theta[v], TVar):
                raise _NoMatch(f"{v} is an object but the argument has type {render_type(theta[v])}")
        env = ftv(psi) | ftv(tuple(ctx.values())) | ftv(c)
        self.used |= env
        for v in c.quantified:
            if v not in theta:
                theta[v] = TVar(self.fresh_var(v))
        var_images = [(v, t.name) for v, t in theta.items() if isinstance(t, TVar)]
        names = [n for _, n in var_images]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            shared = [v for v, n in var_images if n == dup]
            raise _NoMatch(f"{' and '.join(shared)} would both stand for {dup}, but the renaming must be injective")
        if not parallel_ok(ftv(c), Renaming(dict(var_images))):
            raise _NoMatch("an argument aliases a nonlocal object of the contract")
        for formal, actual in zip(c.args, actuals):
            want = substitute(theta, formal)
            if not type_entails(actual, want):
                raise _NoMatch(f"argument of type {render_type(actual)} where {render_type(want)} is expected")
        pre = substitute(theta, c.pre)
        missing = [x for x in pre if x not in psi]
        if missing:
            raise _NoMatch(f"no constraint on {', '.join(missing)} at the call site")
        have = bot_extend(psi, fresh, pre)
        reason = explain_entailment(have, update(have, pre))
        if reason is not None:
            raise _NoMatch(f"precondition not met: {reason}")
        post = substitute(theta, c.post)
        created = set(post) - set(pre)
        if created & ftv(psi):
            raise _NoMatch(f"{', '.join(sorted(created & ftv(psi)))} is not fresh at the call site")
        return substitute(theta, c.result), update(have, post), fresh | created


# -- drivers --------------------------------------------------------------------------

def check_program(e: Expr, pre: ConstraintSet = EMPTY, ctx: Optional[Context] = None) -> Judgment:
    """Check e from pre and ctx (empty by default); raises CheckError with diagnostics."""
    ctx = dict(ctx or {})
    ch = Checker()
    ch.reserve(pre, tuple(ctx.values()))
    t, post, created = ch.check(e, pre, ctx, frozenset())
    assert set(pre) <= set(post), "checker dropped a constraint"
    assert set(post) - set(pre) <= created, "unexplained variable in postcondition"
    return Judgment(pre, ctx, e, t, post)


def alpha_equivalent(a, b, fixed: frozenset = frozenset(), limit: int = 8) -> bool:
    """a and b agree up to a bijective renaming of type variables outside `fixed`.

    Accepts any type-model sort, or tuples of them (e.g. (type, post)).
    """
    va, vb = sorted(ftv(a) - fixed), sorted(ftv(b) - fixed)
    if len(va) != len(vb):
        return False
    if len(va) > limit:
        raise ValueError(f"too many variables to search ({len(va)})")
    for perm in itertools.permutations(vb):
        theta = {x: TVar(y) for x, y in zip(va, perm)}
        if substitute(theta, a) == b:
            return True
    return False
