"""Abstract syntax of the calculus and structural utilities over it."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional, Union as _U

from .diagnostics import Diagnostic, SourceSpan
from .typemodel import BOOL, INT, REAL, STRING, UNIT, Base, FunctionContract, render_contract

RESERVED = frozenset(
    {"let", "in", "if", "then", "else", "ifhasattr", "func", "new", "true", "false", "contract", "not"}
)
IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
TEMP_RE = re.compile(r"\$t\d+\Z")
TEMP_PREFIX = "$t"
SEQ_NAME = "_"  # binder introduced by `e; es`

BINARY_OPS = ("+", "-", "*", "==", "<")
UNARY_OPS = ("not",)
OPS = BINARY_OPS + UNARY_OPS


@dataclass(frozen=True)
class Node:
    span: Optional[SourceSpan] = field(default=None, compare=False, repr=False, kw_only=True)


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True, eq=False)
class Const(Node):
    """Literal constant; ``()`` is the unit value.

    Equality distinguishes ``1``, ``1.0`` and ``true`` even though Python does not.
    """

    value: _U[int, float, bool, str, tuple]

    def _key(self):
        return (type(self.value), self.value)

    def __eq__(self, other) -> bool:
        return isinstance(other, Const) and self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())


UNIT_VALUE = ()


@dataclass(frozen=True)
class Loc(Node):
    id: int


@dataclass(frozen=True)
class Func(Node):
    params: tuple[str, ...]
    contracts: tuple[FunctionContract, ...]
    body: Expr


@dataclass(frozen=True)
class PrimOp(Node):
    op: str
    args: tuple


@dataclass(frozen=True)
class New(Node):
    pass


@dataclass(frozen=True)
class GetField(Node):
    obj: Expr
    field: str


@dataclass(frozen=True)
class SetField(Node):
    obj: Expr
    field: str
    value: Expr


@dataclass(frozen=True)
class Let(Node):
    name: str
    bound: Expr
    body: Expr


@dataclass(frozen=True)
class If(Node):
    cond: Expr
    then: Expr
    else_: Expr


@dataclass(frozen=True)
class IfHasAttr(Node):
    obj: Expr
    field: str
    then: Expr
    else_: Expr


@dataclass(frozen=True)
class App(Node):
    fn: Expr
    args: tuple


Expr = _U[Var, Const, Loc, Func, PrimOp, New, GetField, SetField, Let, If, IfHasAttr, App]
ATOMS = (Var, Const, Loc, Func)
VALUES = (Const, Loc, Func)


def is_atom(e: Expr) -> bool:
    return isinstance(e, ATOMS)


def is_value(e: Expr) -> bool:
    return isinstance(e, VALUES)


def type_of_const(c: Const) -> Base:
    v = c.value
    if type(v) is bool:
        return BOOL
    if type(v) is int:
        return INT
    if type(v) is float:
        return REAL
    if type(v) is str:
        return STRING
    if v == UNIT_VALUE and type(v) is tuple:
        return UNIT
    raise TypeError(f"not a constant: {v!r}")


def children(e: Expr) -> tuple:
    match e:
        case Func(body=body):
            return (body,)
        case PrimOp(args=args):
            return tuple(args)
        case GetField(obj=o):
            return (o,)
        case SetField(obj=o, value=v):
            return (o, v)
        case Let(bound=b, body=body):
            return (b, body)
        case If(cond=c, then=t, else_=f):
            return (c, t, f)
        case IfHasAttr(obj=o, then=t, else_=f):
            return (o, t, f)
        case App(fn=fn, args=args):
            return (fn, *args)
    return ()


def walk(e: Expr):
    yield e
    for c in children(e):
        yield from walk(c)


def free_names(e: Expr) -> frozenset[str]:
    match e:
        case Var(name=n):
            return frozenset({n})
        case Func(params=ps, body=body):
            return free_names(body) - set(ps)
        case Let(name=x, bound=b, body=body):
            return free_names(b) | (free_names(body) - {x})
    out: frozenset[str] = frozenset()
    for c in children(e):
        out |= free_names(c)
    return out


def substitute(e: Expr, env: dict[str, Expr]) -> Expr:
    """e[x := v, ...] for closed values v, so no capture can occur."""
    if not env:
        return e
    match e:
        case Var(name=n):
            return env.get(n, e)
        case Const() | Loc() | New():
            return e
        case Func(params=ps, contracts=cs, body=body):
            inner = {k: v for k, v in env.items() if k not in ps}
            return Func(ps, cs, substitute(body, inner), span=e.span) if inner else e
        case PrimOp(op=op, args=args):
            return PrimOp(op, tuple(substitute(a, env) for a in args), span=e.span)
        case GetField(obj=o, field=f):
            return GetField(substitute(o, env), f, span=e.span)
        case SetField(obj=o, field=f, value=v):
            return SetField(substitute(o, env), f, substitute(v, env), span=e.span)
        case Let(name=x, bound=b, body=body):
            inner = {k: v for k, v in env.items() if k != x}
            return Let(x, substitute(b, env), substitute(body, inner), span=e.span)
        case If(cond=c, then=t, else_=f):
            return If(substitute(c, env), substitute(t, env), substitute(f, env), span=e.span)
        case IfHasAttr(obj=o, field=n, then=t, else_=f):
            return IfHasAttr(substitute(o, env), n, substitute(t, env), substitute(f, env), span=e.span)
        case App(fn=fn, args=args):
            return App(substitute(fn, env), tuple(substitute(a, env) for a in args), span=e.span)
    raise TypeError(f"not an expression: {e!r}")


# -- validation ------------------------------------------------------------------

def _ident_ok(name: str) -> bool:
    if TEMP_RE.match(name):
        return True
    return bool(IDENT_RE.match(name)) and name not in RESERVED


def validate(e: Expr) -> list[Diagnostic]:
    """Every invariant violation in e, one diagnostic each; empty when well formed."""
    out: list[Diagnostic] = []

    def ident(name, node, what) -> None:
        if not isinstance(name, str) or not _ident_ok(name):
            out.append(Diagnostic("E-BAD-IDENTIFIER", f"bad {what} name {name!r}", node.span))

    def atom(a, node, where) -> None:
        if not is_atom(a):
            out.append(Diagnostic("E-NOT-ATOM", f"{where} must be an atom, got {type(a).__name__}", node.span))

    for node in walk(e):
        match node:
            case Var(name=n):
                ident(n, node, "variable")
            case Loc():
                out.append(Diagnostic("E-LOCATION-IN-SOURCE", f"location @l{node.id} in source", node.span))
            case Func(params=ps, contracts=cs):
                for p in ps:
                    ident(p, node, "parameter")
                dupes = sorted({p for p in ps if ps.count(p) > 1})
                for p in dupes:
                    out.append(Diagnostic("E-DUPLICATE-PARAMETER", f"parameter {p!r} bound twice", node.span))
                if not cs:
                    out.append(Diagnostic("E-UNANNOTATED-FUNCTION", "function literal needs a contract", node.span))
            case PrimOp(op=op, args=args):
                arity = 1 if op in UNARY_OPS else 2
                if op not in OPS or len(args) != arity:
                    out.append(Diagnostic("E-NOT-ATOM", f"unknown operator {op}/{len(args)}", node.span))
                for a in args:
                    atom(a, node, f"operand of {op}")
            case GetField(obj=o, field=f) | SetField(obj=o, field=f):
                atom(o, node, "receiver")
                ident(f, node, "field")
                if isinstance(node, SetField):
                    atom(node.value, node, "assigned value")
            case Let(name=x):
                ident(x, node, "let-bound")
            case If(cond=c):
                atom(c, node, "condition")
            case IfHasAttr(obj=o, field=f):
                atom(o, node, "ifhasattr subject")
                ident(f, node, "field")
            case App(fn=fn, args=args):
                if not isinstance(fn, (Var, Func, Const, Loc)):
                    out.append(Diagnostic("E-NOT-ATOM", "callee must be a variable or function literal", node.span))
                for a in args:
                    atom(a, node, "argument")
    return out


# -- alpha-equivalence ------------------------------------------------------------

def alpha_equal(a: Expr, b: Expr) -> bool:
    """Structural equality up to consistent renaming of let and parameter binders."""

    def go(x, y, env: dict[str, str]) -> bool:
        if type(x) is not type(y):
            return False
        match x:
            case Var(name=n):
                return env.get(n, n) == y.name
            case Const() | Loc() | New():
                return x == y
            case Func(params=ps, contracts=cs, body=body):
                if len(ps) != len(y.params) or cs != y.contracts:
                    return False
                return go(body, y.body, {**env, **dict(zip(ps, y.params))})
            case Let(name=n, bound=bd, body=body):
                return go(bd, y.bound, env) and go(body, y.body, {**env, n: y.name})
            case GetField(field=f) | SetField(field=f) | IfHasAttr(field=f):
                if f != y.field:
                    return False
            case PrimOp(op=op):
                if op != y.op or len(x.args) != len(y.args):
                    return False
            case App(args=args):
                if len(args) != len(y.args):
                    return False
        return all(go(c, d, env) for c, d in zip(children(x), children(y)))

    return go(a, b, {})


# -- pretty printing ----------------------------------------------------------------

def format_const(value) -> str:
    if type(value) is bool:
        return "true" if value else "false"
    if type(value) is str:
        return json.dumps(value, ensure_ascii=False)
    if type(value) is tuple:
        return "()"
    return repr(value)


def pretty(e: Expr) -> str:
    """Surface text that parses back to an alpha-equivalent term.

    Parser temporaries are renamed to ordinary identifiers that clash with nothing.
    """
    used = {n for node in walk(e) for n in _binders_and_names(node)}
    renames: dict[str, str] = {}
    for n in sorted(used, key=lambda s: (len(s), s)):
        if TEMP_RE.match(n):
            base = "t" + n[len(TEMP_PREFIX):]
            cand, i = base, 0
            while cand in used or cand in renames.values() or cand in RESERVED:
                i += 1
                cand = f"{base}_{i}"
            renames[n] = cand
    return _Printer(renames).seq(e)


def _binders_and_names(node) -> tuple:
    match node:
        case Var(name=n):
            return (n,)
        case Let(name=n):
            return (n,)
        case Func(params=ps):
            return tuple(ps)
    return ()


class _Printer:
    def __init__(self, renames: dict[str, str]):
        self.renames = renames

    def name(self, n: str) -> str:
        return self.renames.get(n, n)

    def atom(self, e: Expr) -> str:
        match e:
            case Var(name=n):
                return self.name(n)
            case Const(value=v):
                return format_const(v)
            case Loc(id=i):
                return f"@l{i}"
            case Func(params=ps, contracts=cs, body=body):
                heads = "".join(f"contract {render_contract(c)} " for c in cs)
                return f"{heads}func({', '.join(self.name(p) for p in ps)}) {{ {self.seq(body)} }}"
        return "(" + self.seq(e) + ")"

    def operand(self, e: Expr) -> str:
        # function literals are wrapped so a following call or field binds to them alone
        if isinstance(e, Func) or (isinstance(e, Const) and type(e.value) in (int, float) and e.value < 0):
            return "(" + self.atom(e) + ")"
        return self.atom(e)

    def expr(self, e: Expr) -> str:
        """Non-sequence position: anything that would swallow a `;` gets parens."""
        if isinstance(e, Let) and e.name == SEQ_NAME:
            return "(" + self.seq(e) + ")"
        return self.seq(e)

    def inner(self, e: Expr) -> str:
        """Position followed by more syntax (bound, then-branch, seq head)."""
        if isinstance(e, (Let, If, IfHasAttr)):
            return "(" + self.seq(e) + ")"
        return self.seq(e)

    def seq(self, e: Expr) -> str:
        match e:
            case Var() | Const() | Loc() | Func():
                return self.atom(e)
            case New():
                return "new"
            case PrimOp(op=op, args=args):
                if op in UNARY_OPS:
                    return f"{op} {self.operand(args[0])}"
                return f"{self.operand(args[0])} {op} {self.operand(args[1])}"
            case GetField(obj=o, field=f):
                return f"{self.operand(o)}.{f}"
            case SetField(obj=o, field=f, value=v):
                return f"{self.operand(o)}.{f} = {self.operand(v)}"
            case App(fn=fn, args=args):
                return f"{self.operand(fn)}({', '.join(self.operand(a) for a in args)})"
            case Let(name=x, bound=b, body=body):
                if x == SEQ_NAME:
                    return f"{self.inner(b)}; {self.seq(body)}"
                return f"let {self.name(x)} = {self.inner(b)} in {self.seq(body)}"
            case If(cond=c, then=t, else_=f):
                return f"if {self.operand(c)} then {self.inner(t)} else {self.expr(f)}"
            case IfHasAttr(obj=o, field=n, then=t, else_=f):
                return f"ifhasattr({self.operand(o)}, {n}) then {self.inner(t)} else {self.expr(f)}"
        raise TypeError(f"cannot print {e!r}")
