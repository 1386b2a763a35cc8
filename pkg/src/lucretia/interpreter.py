"""Small-step evaluation over (heap, control) configurations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union as _U

from .diagnostics import Diagnostic, LucretiaError
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
    Var,
    format_const,
    is_value,
    pretty,
    substitute,
    type_of_const,
)

DEFAULT_FUEL = 100_000
INT_MIN, INT_MAX = -(2**63), 2**63 - 1
EXCERPT_WIDTH = 80

Value = _U[Const, Loc, Func]


@dataclass(frozen=True)
class Heap:
    """Persistent heap: every write returns a new Heap and leaves the old one intact."""

    objects: dict = field(default_factory=dict)  # id -> dict[field, Value]
    next_id: int = 0

    def alloc(self) -> tuple["Heap", Loc]:
        objs = dict(self.objects)
        objs[self.next_id] = {}
        return Heap(objs, self.next_id + 1), Loc(self.next_id)

    def write(self, loc: int, name: str, value: Value) -> "Heap":
        objs = dict(self.objects)
        objs[loc] = {**objs[loc], name: value}
        return Heap(objs, self.next_id)

    def __len__(self) -> int:
        return len(self.objects)

    def digest(self) -> str:
        parts = [f"l{i}{{{','.join(sorted(o))}}}" for i, o in sorted(self.objects.items())]
        return f"{len(self.objects)} objects: " + " ".join(parts) if parts else "0 objects"

    def render(self) -> dict[str, dict[str, str]]:
        return {
            f"l{i}": {k: render_value(v) for k, v in sorted(o.items())}
            for i, o in sorted(self.objects.items())
        }


@dataclass(frozen=True)
class Config:
    heap: Heap
    control: Expr


@dataclass(frozen=True)
class Halt:
    value: Value
    heap: Heap


def render_value(v: Value) -> str:
    if isinstance(v, Const):
        return format_const(v.value)
    if isinstance(v, Loc):
        return f"@l{v.id}"
    return "<function>"


# -- errors -------------------------------------------------------------------

class RuntimeFault(LucretiaError):
    code_name = "R-TYPE-MISMATCH"

    def __init__(self, message: str, control: Optional[Expr] = None, heap: Optional[Heap] = None):
        self.heap = heap
        self.trace: list[TraceEntry] = []
        span = getattr(control, "span", None)
        notes = (f"heap: {heap.digest()}",) if heap is not None else ()
        super().__init__(Diagnostic(self.code_name, message, span, notes=notes))


class MessageNotUnderstood(RuntimeFault):
    code_name = "R-MESSAGE-NOT-UNDERSTOOD"


class TypeMismatch(RuntimeFault):
    code_name = "R-TYPE-MISMATCH"


class PrimOpError(RuntimeFault):
    code_name = "R-PRIMOP"

    def __init__(self, message: str, reason: str = "operand", **kw):
        self.reason = reason  # "operand" or "overflow"
        super().__init__(message, **kw)


class UnboundVariable(RuntimeFault):
    code_name = "R-UNBOUND"


class FuelExhausted(RuntimeFault):
    code_name = "R-FUEL"

    def __init__(self, fuel: int, **kw):
        self.fuel = fuel
        super().__init__(f"no result after {fuel} steps", **kw)


# -- primitive operations -------------------------------------------------------

_NUMERIC = ("int", "real")


def _check_int(n: int) -> int:
    if not INT_MIN <= n <= INT_MAX:
        raise PrimOpError(f"integer overflow: {n}", reason="overflow")
    return n


def delta(op: str, args: list[Const]) -> Const:
    """Meaning of a primitive operator on constant operands."""
    if not all(isinstance(a, Const) for a in args):
        raise PrimOpError(f"{op} applies to constants only")
    kinds = [type_of_const(a).name for a in args]
    vals = [a.value for a in args]
    shown = ", ".join(format_const(v) for v in vals)

    def bad() -> PrimOpError:
        return PrimOpError(f"{op} undefined on ({shown})")

    if op == "not":
        if kinds != ["bool"]:
            raise bad()
        return Const(not vals[0])
    if len(args) != 2:
        raise bad()
    (a, b), (ka, kb) = vals, kinds
    if op == "+":
        if not {ka, kb} <= {"int", "real", "bool"}:
            raise bad()
        if ka == kb == "bool":
            return Const(a or b)  # stays inside bool so the result type is bool
        if "real" in (ka, kb):
            return Const(float(a) + float(b))
        return Const(_check_int(int(a) + int(b)))
    if op in ("-", "*"):
        if ka not in _NUMERIC or kb not in _NUMERIC:
            raise bad()
        if "real" in (ka, kb):
            return Const(float(a) - float(b) if op == "-" else float(a) * float(b))
        return Const(_check_int(a - b if op == "-" else a * b))
    if op == "==":
        if ka != kb:
            raise bad()
        return Const(a == b)
    if op == "<":
        if ka != kb or ka not in ("int", "real", "string"):
            raise bad()
        return Const(a < b)
    raise bad()


# -- stepping ----------------------------------------------------------------------

def _require_closed(e: Expr, heap: Heap) -> None:
    if isinstance(e, Var):
        raise UnboundVariable(f"unbound variable {e.name}", control=e, heap=heap)


def reduce(c: Config) -> tuple[Config, str]:
    """One step; returns the successor and the name of the rule that fired."""
    e, heap = c.control, c.heap
    match e:
        case Let(name=x, bound=b, body=body):
            _require_closed(b, heap)
            if is_value(b):
                return Config(heap, substitute(body, {x: b})), "Let-Reduce"
            inner, rule = reduce(Config(heap, b))
            return Config(inner.heap, Let(x, inner.control, body, span=e.span)), rule
        case PrimOp(op=op, args=args):
            for a in args:
                _require_closed(a, heap)
            try:
                return Config(heap, delta(op, list(args))), "Op-Eval"
            except PrimOpError as err:
                raise PrimOpError(err.diagnostics[0].message, reason=err.reason, control=e, heap=heap) from None
        case App(fn=fn, args=args):
            _require_closed(fn, heap)
            for a in args:
                _require_closed(a, heap)
            if not isinstance(fn, Func):
                raise TypeMismatch(f"cannot call {render_value(fn)}", control=e, heap=heap)
            if len(fn.params) != len(args):
                raise TypeMismatch(
                    f"function of {len(fn.params)} parameters called with {len(args)} arguments",
                    control=e, heap=heap,
                )
            return Config(heap, substitute(fn.body, dict(zip(fn.params, args)))), "Beta-v"
        case If(cond=cond, then=t, else_=f):
            _require_closed(cond, heap)
            if not (isinstance(cond, Const) and type(cond.value) is bool):
                raise TypeMismatch(f"if condition {render_value(cond)} is not a boolean", control=e, heap=heap)
            return (Config(heap, t), "If-True") if cond.value else (Config(heap, f), "If-False")
        case IfHasAttr(obj=o, field=n, then=t, else_=f):
            _require_closed(o, heap)
            if not isinstance(o, Loc):
                raise TypeMismatch(f"ifhasattr on non-object {render_value(o)}", control=e, heap=heap)
            if n in heap.objects[o.id]:
                return Config(heap, t), "Ifhtr-True"
            return Config(heap, f), "Ifhtr-False"
        case New():
            heap2, loc = heap.alloc()
            return Config(heap2, loc), "New"
        case SetField(obj=o, field=n, value=v):
            _require_closed(o, heap)
            _require_closed(v, heap)
            if not isinstance(o, Loc):
                raise TypeMismatch(f"field update on non-object {render_value(o)}", control=e, heap=heap)
            return Config(heap.write(o.id, n, v), v), "SetAttr"
        case GetField(obj=o, field=n):
            _require_closed(o, heap)
            if not isinstance(o, Loc):
                raise TypeMismatch(f"field access on non-object {render_value(o)}", control=e, heap=heap)
            fields = heap.objects[o.id]
            if n not in fields:
                raise MessageNotUnderstood(f"object @l{o.id} has no field {n}", control=e, heap=heap)
            return Config(heap, fields[n]), "GetAttr"
        case Var():
            _require_closed(e, heap)
    raise TypeMismatch(f"no rule applies to {type(e).__name__}", control=e, heap=heap)


def step(c: Config) -> _U[Config, Halt]:
    if is_value(c.control):
        return Halt(c.control, c.heap)
    return reduce(c)[0]


def run(e: Expr, fuel: int = DEFAULT_FUEL, heap: Optional[Heap] = None) -> Halt:
    c = Config(heap or Heap(), e)
    for _ in range(fuel):
        if is_value(c.control):
            return Halt(c.control, c.heap)
        c, _rule = reduce(c)
    if is_value(c.control):
        return Halt(c.control, c.heap)
    raise FuelExhausted(fuel, control=c.control, heap=c.heap)


# -- tracing --------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceEntry:
    index: int
    rule: str
    control: str
    heap_size: int
    heap_delta: str

    def line(self) -> str:
        return f"#{self.index} {self.rule} | {self.control} | heap: {self.heap_size} objects"

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "rule": self.rule,
            "control": self.control,
            "heap_size": self.heap_size,
            "heap_delta": self.heap_delta,
        }


def excerpt(e: Expr, width: int = EXCERPT_WIDTH) -> str:
    text = " ".join(pretty(e).split())
    return text if len(text) <= width else text[: width - 3] + "..."


def _heap_delta(before: Heap, after: Heap) -> str:
    if after is before:
        return ""
    changes = []
    for i, obj in sorted(after.objects.items()):
        old = before.objects.get(i)
        if old is None:
            changes.append(f"+@l{i}")
            continue
        for k, v in sorted(obj.items()):
            if k not in old or old[k] is not v:
                changes.append(f"@l{i}.{k} := {render_value(v)}")
    return ", ".join(changes)


def trace(e: Expr, fuel: int = DEFAULT_FUEL) -> list[TraceEntry]:
    """Every step of a run; on failure the partial trace rides on the exception."""
    c = Config(Heap(), e)
    out: list[TraceEntry] = []
    try:
        for n in range(1, fuel + 1):
            if is_value(c.control):
                return out
            nxt, rule = reduce(c)
            out.append(TraceEntry(n, rule, excerpt(nxt.control), len(nxt.heap), _heap_delta(c.heap, nxt.heap)))
            c = nxt
        if is_value(c.control):
            return out
        raise FuelExhausted(fuel, control=c.control, heap=c.heap)
    except RuntimeFault as err:
        err.trace = out
        raise


# -- rule matching, independent of reduce ------------------------------------------

def _redex(e: Expr) -> Expr:
    while isinstance(e, Let) and not is_value(e.bound):
        e = e.bound
    return e


def _loc_has(heap: Heap, e, n: str, want: bool) -> bool:
    return isinstance(e, Loc) and e.id in heap.objects and (n in heap.objects[e.id]) == want


def _is_bool(e, want: bool) -> bool:
    return isinstance(e, Const) and type(e.value) is bool and e.value is want


def _op_defined(e: PrimOp) -> bool:
    try:
        delta(e.op, list(e.args))
        return True
    except PrimOpError:
        return False


_RULE_PATTERNS = {
    "Let-Reduce": lambda h, r: isinstance(r, Let) and is_value(r.bound),
    "Op-Eval": lambda h, r: isinstance(r, PrimOp) and _op_defined(r),
    "Beta-v": lambda h, r: isinstance(r, App) and isinstance(r.fn, Func)
    and len(r.fn.params) == len(r.args) and all(is_value(a) for a in r.args),
    "If-True": lambda h, r: isinstance(r, If) and _is_bool(r.cond, True),
    "If-False": lambda h, r: isinstance(r, If) and _is_bool(r.cond, False),
    "Ifhtr-True": lambda h, r: isinstance(r, IfHasAttr) and _loc_has(h, r.obj, r.field, True),
    "Ifhtr-False": lambda h, r: isinstance(r, IfHasAttr) and _loc_has(h, r.obj, r.field, False),
    "New": lambda h, r: isinstance(r, New),
    "SetAttr": lambda h, r: isinstance(r, SetField) and isinstance(r.obj, Loc)
    and r.obj.id in h.objects and is_value(r.value),
    "GetAttr": lambda h, r: isinstance(r, GetField) and _loc_has(h, r.obj, r.field, True),
}

RULES = tuple(_RULE_PATTERNS)


def applicable_rules(c: Config) -> list[str]:
    """Names of all rules whose premises hold at the configuration's redex."""
    if is_value(c.control):
        return []
    r = _redex(c.control)
    return [name for name, match in _RULE_PATTERNS.items() if match(c.heap, r)]
