"""Types, field types, records, constraint sets and function contracts.

All values here are immutable. Records and constraint sets are insertion-ordered
maps whose equality ignores order; field lists are sorted when rendered.
"""
from __future__ import annotations

import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from functools import cached_property
from typing import Union as _U


class FrozenMap(Mapping):
    """Hashable insertion-ordered mapping with order-insensitive equality."""

    __slots__ = ("_d", "_hash")

    def __init__(self, items: Mapping | Iterable[tuple] = ()):
        self._d = dict(items)
        self._hash = None

    def __getitem__(self, key):
        return self._d[key]

    def __iter__(self) -> Iterator:
        return iter(self._d)

    def __len__(self) -> int:
        return len(self._d)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mapping):
            return NotImplemented
        return self._d == dict(other)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._d.items()))
        return self._hash

    def set(self, key, value):
        d = dict(self._d)
        d[key] = value
        return type(self)(d)

    def without(self, key):
        return type(self)((k, v) for k, v in self._d.items() if k != key)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self._d!r})"


# -- types -------------------------------------------------------------------

BASE_NAMES = ("int", "bool", "string", "real", "unit")


@dataclass(frozen=True)
class Base:
    name: str

    def __post_init__(self) -> None:
        if self.name not in BASE_NAMES:
            raise ValueError(f"unknown base type {self.name!r}")

    def __str__(self) -> str:
        return self.name


INT = Base("int")
BOOL = Base("bool")
STRING = Base("string")
REAL = Base("real")
UNIT = Base("unit")


@dataclass(frozen=True)
class TVar:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, eq=False)
class Functions:
    """Intersection of one or more function contracts, in declaration order."""

    contracts: tuple[FunctionContract, ...]

    def __post_init__(self) -> None:
        if not self.contracts:
            raise ValueError("an intersection needs at least one contract")

    @cached_property
    def key(self) -> tuple:
        return tuple(c.key for c in self.contracts)

    def __eq__(self, other) -> bool:
        return isinstance(other, Functions) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __str__(self) -> str:
        return render_type(self)


@dataclass(frozen=True)
class Union:
    """Canonical union: at least two distinct, sorted, non-union members.

    Build unions with :func:`union` rather than the constructor.
    """

    members: tuple

    def __str__(self) -> str:
        return render_type(self)


Type = _U[Base, TVar, Functions, Union]


# -- field types, records, constraint sets ------------------------------------

@dataclass(frozen=True)
class Present:
    type: Type

    def __str__(self) -> str:
        return render_field(self)


@dataclass(frozen=True)
class Absent:
    def __str__(self) -> str:
        return "bot"


BOT = Absent()


@dataclass(frozen=True)
class Maybe:
    type: Type

    def __str__(self) -> str:
        return render_field(self)


FieldType = _U[Present, Absent, Maybe]


class Record(FrozenMap):
    """Field name -> field type."""

    def __str__(self) -> str:
        return render_record(self)


class ConstraintSet(FrozenMap):
    """Type variable name -> record (the lower bound on that object's fields)."""

    def __str__(self) -> str:
        return render_constraints(self)


EMPTY = ConstraintSet()


def record(**fields: FieldType | Type) -> Record:
    """Convenience constructor; bare types are taken as present fields."""
    return Record((k, as_field(v)) for k, v in fields.items())


def as_field(q: FieldType | Type) -> FieldType:
    if isinstance(q, (Present, Absent, Maybe)):
        return q
    return Present(q)


def constraints(*entries: tuple[str, Record | Mapping]) -> ConstraintSet:
    return ConstraintSet(
        (x, r if isinstance(r, Record) else Record((k, as_field(v)) for k, v in r.items()))
        for x, r in entries
    )


@dataclass(frozen=True, eq=False)
class FunctionContract:
    """forall quantified. [args; pre] => [result; post].

    Equality is alpha-equivalence over the quantified variables.
    """

    quantified: tuple[str, ...]
    pre: ConstraintSet
    args: tuple
    result: Type
    post: ConstraintSet

    def __post_init__(self) -> None:
        if len(set(self.quantified)) != len(self.quantified):
            raise ValueError(f"duplicate quantified variable in {self.quantified}")

    @property
    def nonlocals(self) -> frozenset[str]:
        return ftv(self)

    @cached_property
    def key(self) -> tuple:
        return _contract_key(self)

    def __eq__(self, other) -> bool:
        return isinstance(other, FunctionContract) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __str__(self) -> str:
        return render_contract(self)


# -- unions and normalization -------------------------------------------------

def _order_key(t: Type) -> tuple:
    if isinstance(t, Base):
        return (0, BASE_NAMES.index(t.name), "")
    if isinstance(t, TVar):
        return (1, 0, t.name)
    if isinstance(t, Functions):
        return (2, 0, repr(t.key))
    raise TypeError(f"not a union member: {t!r}")


def disjuncts(t: Type) -> tuple:
    if isinstance(t, Union):
        return tuple(d for m in t.members for d in disjuncts(m))
    return (t,)


def union(*types: Type) -> Type:
    """Flattened, de-duplicated, sorted union; a singleton collapses to its member."""
    seen: dict = {}
    for t in types:
        for m in disjuncts(t):
            seen.setdefault(m, None)
    if not seen:
        raise ValueError("empty union")
    members = tuple(sorted(seen, key=_order_key))
    return members[0] if len(members) == 1 else Union(members)


def normalize(x):
    """Canonical form of a type or field type."""
    if isinstance(x, (Base, TVar)):
        return x
    if isinstance(x, Union):
        return union(*(normalize(m) for m in x.members))
    if isinstance(x, Functions):
        return Functions(tuple(_normalize_contract(c) for c in x.contracts))
    if isinstance(x, Present):
        return Present(normalize(x.type))
    if isinstance(x, Maybe):
        return Maybe(normalize(x.type))
    if isinstance(x, Absent):
        return x
    if isinstance(x, Record):
        return Record((k, normalize(q)) for k, q in x.items())
    if isinstance(x, ConstraintSet):
        return ConstraintSet((k, normalize(r)) for k, r in x.items())
    if isinstance(x, FunctionContract):
        return _normalize_contract(x)
    raise TypeError(f"cannot normalize {x!r}")


def _normalize_contract(c: FunctionContract) -> FunctionContract:
    return FunctionContract(
        c.quantified,
        normalize(c.pre),
        tuple(normalize(t) for t in c.args),
        normalize(c.result),
        normalize(c.post),
    )


def field_union(*qs: FieldType) -> FieldType:
    """Least field type above all arguments (bot counts as a disjunct)."""
    payload = [q.type for q in qs if not isinstance(q, Absent)]
    has_bot = any(isinstance(q, (Absent, Maybe)) for q in qs)
    if not payload:
        return BOT
    t = union(*payload)
    return Maybe(t) if has_bot else Present(t)


# -- free type variables ------------------------------------------------------

def ftv(x) -> frozenset[str]:
    if isinstance(x, Base) or isinstance(x, Absent):
        return frozenset()
    if isinstance(x, TVar):
        return frozenset({x.name})
    if isinstance(x, Union):
        return frozenset().union(*(ftv(m) for m in x.members))
    if isinstance(x, Functions):
        return frozenset().union(*(ftv(c) for c in x.contracts))
    if isinstance(x, (Present, Maybe)):
        return ftv(x.type)
    if isinstance(x, Record):
        return frozenset().union(*(ftv(q) for q in x.values()))
    if isinstance(x, ConstraintSet):
        out = set(x.keys())
        for r in x.values():
            out |= ftv(r)
        return frozenset(out)
    if isinstance(x, FunctionContract):
        return _contract_vars(x) - frozenset(x.quantified)
    if isinstance(x, (tuple, list, set, frozenset)):
        return frozenset().union(*(ftv(y) for y in x))
    raise TypeError(f"ftv of {x!r}")


def _contract_vars(c: FunctionContract) -> frozenset[str]:
    return ftv(c.pre) | ftv(tuple(c.args)) | ftv(c.result) | ftv(c.post)


# -- substitution and renaming --------------------------------------------------

_TRAILING_DIGITS = re.compile(r"\d+$")


def fresh_name(base: str, avoid: Iterable[str]) -> str:
    avoid = set(avoid)
    if base not in avoid:
        return base
    stem = _TRAILING_DIGITS.sub("", base) or "X"
    i = 1
    while f"{stem}{i}" in avoid:
        i += 1
    return f"{stem}{i}"


def substitute(mapping: Mapping[str, Type], x):
    """Capture-avoiding simultaneous substitution of type variables.

    Constraint-set keys may only be sent to type variables, and two keys may not
    be sent to the same variable.
    """
    if not mapping:
        return x
    if isinstance(x, (Base, Absent)):
        return x
    if isinstance(x, TVar):
        return mapping.get(x.name, x)
    if isinstance(x, Union):
        return union(*(substitute(mapping, m) for m in x.members))
    if isinstance(x, Functions):
        return Functions(tuple(_subst_contract(mapping, c) for c in x.contracts))
    if isinstance(x, Present):
        return Present(substitute(mapping, x.type))
    if isinstance(x, Maybe):
        return Maybe(substitute(mapping, x.type))
    if isinstance(x, Record):
        return Record((k, substitute(mapping, q)) for k, q in x.items())
    if isinstance(x, ConstraintSet):
        out: dict[str, Record] = {}
        for k, r in x.items():
            target = mapping.get(k, TVar(k))
            if not isinstance(target, TVar):
                raise ValueError(f"constraint variable {k} sent to non-variable {target}")
            if target.name in out:
                raise ValueError(f"substitution merges constraints on {target.name}")
            out[target.name] = substitute(mapping, r)
        return ConstraintSet(out)
    if isinstance(x, FunctionContract):
        return _subst_contract(mapping, x)
    if isinstance(x, tuple):
        return tuple(substitute(mapping, y) for y in x)
    raise TypeError(f"cannot substitute into {x!r}")


def _subst_contract(mapping: Mapping[str, Type], c: FunctionContract) -> FunctionContract:
    bound = set(c.quantified)
    free = ftv(c)
    inner = {k: v for k, v in mapping.items() if k in free}
    if not inner:
        return c
    incoming = ftv(tuple(inner.values()))
    clash = bound & incoming
    quantified = list(c.quantified)
    if clash:
        avoid = set(incoming) | set(_contract_vars(c)) | set(inner)
        for i, q in enumerate(quantified):
            if q in clash:
                new = fresh_name(q, avoid)
                avoid.add(new)
                inner[q] = TVar(new)
                quantified[i] = new
    return FunctionContract(
        tuple(quantified),
        substitute(inner, c.pre),
        tuple(substitute(inner, t) for t in c.args),
        substitute(inner, c.result),
        substitute(inner, c.post),
    )


@dataclass(frozen=True)
class Renaming:
    """A finite bijection between type variable names."""

    mapping: FrozenMap

    def __init__(self, mapping: Mapping[str, str] | Iterable[tuple[str, str]] = ()):
        m = FrozenMap(mapping)
        if len(set(m.values())) != len(m):
            raise ValueError(f"renaming is not injective: {dict(m)}")
        object.__setattr__(self, "mapping", m)

    @property
    def dom(self) -> frozenset[str]:
        return frozenset(self.mapping.keys())

    @property
    def img(self) -> frozenset[str]:
        return frozenset(self.mapping.values())

    def inverse(self) -> Renaming:
        return Renaming((v, k) for k, v in self.mapping.items())

    def __call__(self, x):
        return apply_renaming(self, x)


def apply_renaming(theta: Renaming, x):
    return substitute({k: TVar(v) for k, v in theta.mapping.items()}, x)


def parallel_ok(a: Iterable[str], theta: Renaming) -> bool:
    """A || theta: A shares nothing with img(theta) - dom(theta)."""
    return not (set(a) & (theta.img - theta.dom))


# -- alpha-canonical keys --------------------------------------------------------

def _contract_key(c: FunctionContract) -> tuple:
    bound = set(c.quantified)
    names: dict[str, str] = {}

    def visit_ordered(t) -> None:
        # first-occurrence order; nested contracts contribute in name order
        if isinstance(t, TVar):
            if t.name in bound and t.name not in names:
                names[t.name] = f"#{len(names)}"
        elif isinstance(t, Union):
            for m in t.members:
                visit_ordered(m)
        elif isinstance(t, Functions):
            for v in sorted(ftv(t) & bound):
                visit_ordered(TVar(v))

    for t in c.args:
        visit_ordered(t)
    visit_ordered(c.result)
    changed = True
    while changed:
        changed = False
        for cs in (c.pre, c.post):
            for k in sorted(cs, key=lambda k: names.get(k, "~" + k)):
                if k in names:
                    for f in sorted(cs[k]):
                        q = cs[k][f]
                        if not isinstance(q, Absent):
                            before = len(names)
                            visit_ordered(q.type)
                            changed |= len(names) != before
    leftovers = sorted(bound - names.keys())
    for k in leftovers:
        names[k] = f"#{len(names)}"
    bare = FunctionContract((), c.pre, c.args, c.result, c.post)
    renamed = substitute({k: TVar(v) for k, v in names.items()}, bare)
    return (
        len(c.quantified),
        tuple(render_type(t) for t in renamed.args),
        render_type(renamed.result),
        render_constraints(renamed.pre, sort=True),
        render_constraints(renamed.post, sort=True),
    )


# -- canonical text ---------------------------------------------------------------

def render_type(t: Type, nonlocals: frozenset[str] = frozenset()) -> str:
    if isinstance(t, Base):
        return t.name
    if isinstance(t, TVar):
        return ("^" if t.name in nonlocals else "") + t.name
    if isinstance(t, Union):
        return " | ".join(render_type(m, nonlocals) for m in t.members)
    if isinstance(t, Functions):
        return "(" + " & ".join(render_contract(c, nested=True, nonlocals=nonlocals) for c in t.contracts) + ")"
    raise TypeError(f"not a type: {t!r}")


def render_field(q: FieldType, nonlocals: frozenset[str] = frozenset()) -> str:
    if isinstance(q, Absent):
        return "bot"
    if isinstance(q, Maybe):
        return render_type(q.type, nonlocals) + " | bot"
    return render_type(q.type, nonlocals)


def render_record(r: Record, nonlocals: frozenset[str] = frozenset()) -> str:
    if not r:
        return "{}"
    return "{" + ", ".join(f"{k}: {render_field(r[k], nonlocals)}" for k in sorted(r)) + "}"


def render_constraints(cs: ConstraintSet, sort: bool = False, nonlocals: frozenset[str] = frozenset()) -> str:
    if not cs:
        return "{}"
    keys = sorted(cs) if sort else list(cs)
    mark = lambda k: ("^" if k in nonlocals else "") + k
    return ", ".join(f"{mark(k)} <# {render_record(cs[k], nonlocals)}" for k in keys)


def render_contract(c: FunctionContract, nested: bool = False, nonlocals: frozenset[str] = frozenset()) -> str:
    """Surface syntax for a contract; top-level form marks nonlocals with ^."""
    if nested:
        marks = nonlocals - set(c.quantified)
        prefix = f"forall {', '.join(c.quantified)}. " if c.quantified else ""
    else:
        marks = (nonlocals | ftv(c)) - set(c.quantified)
        prefix = ""
    args = ", ".join(render_type(t, marks) for t in c.args)
    pre = render_constraints(c.pre, nonlocals=marks) if c.pre else ""
    post = render_constraints(c.post, nonlocals=marks) if c.post else ""
    left = f"[{args}; {pre}]" if pre else f"[{args}]"
    res = render_type(c.result, marks)
    right = f"[{res}; {post}]" if post else f"[{res}]"
    return f"{prefix}{left} => {right}"
