"""Update, entailment, definiteness and branch join over constraint sets."""
from __future__ import annotations

from collections.abc import Iterable

from .typemodel import (
    BOT,
    Absent,
    ConstraintSet,
    FieldType,
    Functions,
    Maybe,
    Present,
    Record,
    Type,
    Base,
    TVar,
    Union,
    disjuncts,
    field_union,
    ftv,
)


class JoinError(Exception):
    def __init__(self, var: str, field: str | None, lacking: str, message: str):
        self.var = var
        self.field = field
        self.lacking = lacking
        super().__init__(message)


# -- update -----------------------------------------------------------------------

def update(lhs, rhs):
    """Right-biased merge of two records or two constraint sets.

    Records are merged field by field; constraint sets merge the records of
    shared variables and keep variables that occur on one side only.
    """
    if isinstance(lhs, Record) and isinstance(rhs, Record):
        out = dict(lhs)
        out.update(rhs)
        return Record(out)
    if isinstance(lhs, ConstraintSet) and isinstance(rhs, ConstraintSet):
        out = dict(lhs)
        for x, r in rhs.items():
            out[x] = update(out[x], r) if x in out else r
        return ConstraintSet(out)
    raise TypeError(f"cannot update {type(lhs).__name__} with {type(rhs).__name__}")


# -- entailment ---------------------------------------------------------------------

def _field_disjuncts(q: FieldType) -> frozenset:
    if isinstance(q, Absent):
        return frozenset({BOT})
    base = frozenset(disjuncts(q.type))
    return base | {BOT} if isinstance(q, Maybe) else base


def type_entails(t: Type, u: Type) -> bool:
    """t is weaker-or-equal to u at the type level: every disjunct of t occurs in u."""
    return set(disjuncts(t)) <= set(disjuncts(u))


def entails(lhs, rhs) -> bool:
    """Decide lhs ⊑ rhs for field types, records or constraint sets (inputs normalized)."""
    if isinstance(lhs, (Present, Maybe, Absent)):
        return _field_disjuncts(lhs) <= _field_disjuncts(rhs)
    if isinstance(lhs, Record):
        if set(lhs) != set(rhs):
            return False
        return all(entails(lhs[f], rhs[f]) for f in lhs)
    if isinstance(lhs, ConstraintSet):
        if not set(lhs) <= set(rhs):
            return False
        if not all(entails(lhs[x], rhs[x]) for x in lhs):
            return False
        lhs_vars = ftv(lhs)
        return all(x not in lhs_vars for x in rhs if x not in lhs)
    if isinstance(lhs, (Base, TVar, Functions, Union)):
        return type_entails(lhs, rhs)
    raise TypeError(f"entails on {type(lhs).__name__}")


def explain_entailment(lhs: ConstraintSet, rhs: ConstraintSet) -> str | None:
    """First reason lhs ⊑ rhs fails, or None when it holds."""
    for x in lhs:
        if x not in rhs:
            return f"constraint on {x} would be forgotten"
    lhs_vars = ftv(lhs)
    for x in rhs:
        if x not in lhs:
            if x in lhs_vars:
                return f"{x} is mentioned but has no constraint to evolve from"
            continue
        left, right = lhs[x], rhs[x]
        for f in left:
            if f not in right:
                return f"field {x}.{f} would be forgotten"
        for f in right:
            if f not in left:
                return f"field {x}.{f} is not known on the left"
            if not entails(left[f], right[f]):
                return f"{x}.{f}: {left[f]} does not entail {right[f]}"
    return None


# -- definiteness update --------------------------------------------------------------

def plus(q: FieldType) -> FieldType | None:
    """(q)+ : strip bot; undefined (None) on bare bot."""
    if isinstance(q, Absent):
        return None
    if isinstance(q, Maybe):
        return Present(q.type)
    return q


def definiteness(psi: ConstraintSet, var: str, field: str, sign: str) -> ConstraintSet | None:
    """Psi[var <-± {field}], or None where no clause applies."""
    if sign not in ("+", "-", "plus", "minus"):
        raise ValueError(f"bad sign {sign!r}")
    if var not in psi:
        return psi
    r = psi[var]
    if field not in r:
        return None
    if sign in ("+", "plus"):
        q = plus(r[field])
        if q is None:
            return None
    else:
        q = BOT
    return psi.set(var, r.set(field, q))


# -- branch join --------------------------------------------------------------------

def bot_extend(psi: ConstraintSet, fresh: Iterable[str], target: ConstraintSet) -> ConstraintSet:
    """Mark fields of freshly created objects as absent where target mentions them.

    Sound for objects created in the current scope: every field they may hold is
    already listed in their record.
    """
    fresh = set(fresh)
    out = dict(psi)
    for x in fresh & set(psi) & set(target):
        missing = [f for f in target[x] if f not in psi[x]]
        if missing:
            out[x] = Record({**psi[x], **{f: BOT for f in missing}})
    return ConstraintSet(out)


def join(psi1: ConstraintSet, psi2: ConstraintSet, fresh: Iterable[str] = ()) -> ConstraintSet:
    """Smallest common weakening of two branch postconditions.

    Raises JoinError when some non-fresh knowledge exists on one side only.
    """
    fresh = frozenset(fresh)
    out: dict[str, Record] = {}
    for x in list(psi1) + [y for y in psi2 if y not in psi1]:
        if x in psi1 and x in psi2:
            r1, r2 = psi1[x], psi2[x]
            fields: dict[str, FieldType] = {}
            for f in list(r1) + [g for g in r2 if g not in r1]:
                if f in r1 and f in r2:
                    fields[f] = field_union(r1[f], r2[f])
                    continue
                if x not in fresh:
                    side = "else" if f in r1 else "then"
                    raise JoinError(
                        x, f, side,
                        f"field {x}.{f} is set in one branch only and {x} was not created "
                        f"in this scope, so the {side} branch cannot claim it absent",
                    )
                fields[f] = field_union(r1.get(f, BOT), r2.get(f, BOT))
            out[x] = Record(fields)
        else:
            present, other, side = (psi1, psi2, "else") if x in psi1 else (psi2, psi1, "then")
            if x not in fresh and x in ftv(other):
                raise JoinError(x, None, side, f"constraint on {x} is missing from the {side} branch")
            out[x] = present[x]
    joined = ConstraintSet(out)
    for side, psi in (("then", psi1), ("else", psi2)):
        reason = explain_entailment(bot_extend(psi, fresh, joined), joined)
        if reason is not None:
            raise JoinError("?", None, side, f"{side} branch does not entail the join: {reason}")
    return joined
