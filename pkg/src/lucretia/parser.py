"""Surface syntax for programs and contracts, lowered to A-normal form.

Grammar (see docs/grammar.md for the full EBNF)::

    seq      ::= "let" IDENT "=" expr ("in" | ";") seq | expr [";" seq]
    expr     ::= "if" expr "then" seq "else" expr
               | "ifhasattr" "(" expr "," IDENT ")" "then" seq "else" expr
               | "let" IDENT "=" expr ("in" | ";") seq
               | postfix "." IDENT "=" expr | compare
    contract ::= ["forall" TVARS "."] "[" [types] [";" entries] "]" "=>" "[" type [";" entries] "]"
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from itertools import accumulate
from typing import Optional

from .diagnostics import Diagnostic, ParseError, SourceSpan
from .syntax import (
    RESERVED,
    SEQ_NAME,
    TEMP_PREFIX,
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
    UNIT_VALUE,
    Var,
    is_atom,
    validate,
)
from .typemodel import (
    BASE_NAMES,
    BOT,
    Base,
    ConstraintSet,
    FieldType,
    FunctionContract,
    Functions,
    Maybe,
    Present,
    Record,
    TVar,
    Type,
    disjuncts,
    union,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<real>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>=>|==|<\#|[()\[\]{},;.=<+\-*^|&:])
    """,
    re.VERBOSE,
)

CONTRACT_WORDS = frozenset({"bot", "forall"})


@dataclass(frozen=True)
class Token:
    kind: str  # ident, kw, int, real, string, sym, eof
    text: str
    span: SourceSpan


def _line_starts(src: str) -> list[int]:
    return [0] + [i + 1 for i, ch in enumerate(src) if ch == "\n"]


class _Source:
    def __init__(self, src: str):
        self.src = src
        self.byte_at = [0] + list(accumulate(len(ch.encode("utf-8")) for ch in src))
        self.starts = _line_starts(src)

    def pos(self, i: int) -> tuple[int, int]:
        lo, hi = 0, len(self.starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.starts[mid] <= i:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, i - self.starts[lo] + 1

    def span(self, i: int, j: int) -> SourceSpan:
        (l1, c1), (l2, c2) = self.pos(i), self.pos(j)
        return SourceSpan(self.byte_at[i], self.byte_at[j], l1, c1, l2, c2)


def tokenize(src: str) -> list[Token]:
    source = _Source(src)
    out: list[Token] = []
    i = 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if not m:
            bad = src[i]
            hint = " (names starting with $ are reserved for the compiler)" if bad == "$" else ""
            raise ParseError(Diagnostic("E-SYNTAX", f"unexpected character {bad!r}{hint}", source.span(i, i + 1)))
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            if kind == "ident" and text in RESERVED:
                kind = "kw"
            out.append(Token(kind, text, source.span(i, m.end())))
        i = m.end()
    out.append(Token("eof", "", source.span(len(src), len(src))))
    return out


def _join_spans(a: Optional[SourceSpan], b: Optional[SourceSpan]) -> Optional[SourceSpan]:
    if a is None or b is None:
        return a or b
    return SourceSpan(a.start, b.end, a.line, a.column, b.end_line, b.end_column)


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = tokenize(src)
        self.i = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("kw", "sym") and t.text in texts

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def fail(self, expected: list[str]) -> ParseError:
        t = self.tok
        got = "end of input" if t.kind == "eof" else repr(t.text)
        return ParseError(
            Diagnostic(
                "E-SYNTAX",
                f"expected {' or '.join(expected)}, got {got}",
                t.span,
                expected=", ".join(expected),
                actual=got,
            )
        )

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.fail([repr(text)])
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.fail(["identifier"])
        return self.advance()

    # -- expressions
    def seq(self) -> Expr:
        start = self.tok.span
        if self.at("let"):
            return self.let()
        e = self.expr()
        if self.at(";"):
            self.advance()
            rest = self.seq()
            return Let(SEQ_NAME, e, rest, span=_join_spans(start, rest.span))
        return e

    def let(self) -> Expr:
        start = self.expect("let").span
        name = self.ident().text
        self.expect("=")
        bound = self.expr()
        if not self.at("in", ";"):
            raise self.fail(["'in'", "';'"])
        self.advance()
        body = self.seq()
        return Let(name, bound, body, span=_join_spans(start, body.span))

    def expr(self) -> Expr:
        start = self.tok.span
        if self.at("let"):
            return self.let()
        if self.at("if"):
            self.advance()
            cond = self.expr()
            self.expect("then")
            then = self.seq()
            self.expect("else")
            else_ = self.expr()
            return If(cond, then, else_, span=_join_spans(start, else_.span))
        if self.at("ifhasattr"):
            self.advance()
            self.expect("(")
            obj = self.expr()
            self.expect(",")
            fld = self.ident().text
            self.expect(")")
            self.expect("then")
            then = self.seq()
            self.expect("else")
            else_ = self.expr()
            return IfHasAttr(obj, fld, then, else_, span=_join_spans(start, else_.span))
        lhs = self.compare()
        if self.at("="):
            if not isinstance(lhs, GetField):
                raise self.fail(["a field access before '='"])
            self.advance()
            rhs = self.expr()
            return SetField(lhs.obj, lhs.field, rhs, span=_join_spans(start, rhs.span))
        return lhs

    def compare(self) -> Expr:
        lhs = self.additive()
        if self.at("==", "<"):
            op = self.advance().text
            rhs = self.additive()
            return PrimOp(op, (lhs, rhs), span=_join_spans(lhs.span, rhs.span))
        return lhs

    def additive(self) -> Expr:
        lhs = self.mult()
        while self.at("+", "-"):
            op = self.advance().text
            rhs = self.mult()
            lhs = PrimOp(op, (lhs, rhs), span=_join_spans(lhs.span, rhs.span))
        return lhs

    def mult(self) -> Expr:
        lhs = self.unary()
        while self.at("*"):
            self.advance()
            rhs = self.unary()
            lhs = PrimOp("*", (lhs, rhs), span=_join_spans(lhs.span, rhs.span))
        return lhs

    def unary(self) -> Expr:
        if self.at("not"):
            start = self.advance().span
            arg = self.unary()
            return PrimOp("not", (arg,), span=_join_spans(start, arg.span))
        if self.at("-") and self.peek().kind in ("int", "real"):
            start = self.advance().span
            num = self.advance()
            value = -int(num.text) if num.kind == "int" else -float(num.text)
            return Const(value, span=_join_spans(start, num.span))
        return self.postfix()

    def postfix(self) -> Expr:
        e = self.primary()
        while True:
            if self.at("."):
                self.advance()
                f = self.ident()
                e = GetField(e, f.text, span=_join_spans(e.span, f.span))
            elif self.at("("):
                self.advance()
                args = []
                if not self.at(")"):
                    args.append(self.expr())
                    while self.at(","):
                        self.advance()
                        args.append(self.expr())
                end = self.expect(")").span
                e = App(e, tuple(args), span=_join_spans(e.span, end))
            else:
                return e

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "ident":
            self.advance()
            return Var(t.text, span=t.span)
        if t.kind == "int":
            self.advance()
            return Const(int(t.text), span=t.span)
        if t.kind == "real":
            self.advance()
            return Const(float(t.text), span=t.span)
        if t.kind == "string":
            self.advance()
            return Const(json.loads(t.text), span=t.span)
        if self.at("true", "false"):
            self.advance()
            return Const(t.text == "true", span=t.span)
        if self.at("new"):
            self.advance()
            return New(span=t.span)
        if self.at("("):
            self.advance()
            if self.at(")"):
                end = self.advance().span
                return Const(UNIT_VALUE, span=_join_spans(t.span, end))
            e = self.seq()
            self.expect(")")
            return e
        if self.at("contract", "func"):
            return self.function()
        raise self.fail(["an expression"])

    def function(self) -> Func:
        start = self.tok.span
        contracts = []
        while self.at("contract"):
            self.advance()
            contracts.append(_ContractParser(self).contract(top=True))
        self.expect("func")
        self.expect("(")
        params = []
        if not self.at(")"):
            params.append(self.ident().text)
            while self.at(","):
                self.advance()
                params.append(self.ident().text)
        self.expect(")")
        self.expect("{")
        body = self.seq()
        end = self.expect("}").span
        return Func(tuple(params), tuple(contracts), body, span=_join_spans(start, end))

    def eof(self) -> None:
        if self.tok.kind != "eof":
            raise self.fail(["end of input"])


class _ContractParser:
    """Contract sub-grammar; shares the token stream of its host parser."""

    def __init__(self, host: _Parser):
        self.p = host

    def tvar(self) -> tuple[str, bool]:
        nonlocal_ = False
        if self.p.at("^"):
            self.p.advance()
            nonlocal_ = True
        t = self.p.tok
        if t.kind != "ident" or t.text in BASE_NAMES or t.text in CONTRACT_WORDS:
            raise self.p.fail(["type variable"])
        self.p.advance()
        if nonlocal_:
            self.nonlocals.add(t.text)
        self._note(t.text)
        return t.text, nonlocal_

    def _note(self, name: str) -> None:
        if name not in self.order:
            self.order.append(name)

    def contract(self, top: bool) -> FunctionContract:
        self.order: list[str] = []
        self.nonlocals: set[str] = set()
        start = self.p.tok.span
        explicit: Optional[list[str]] = None
        if self.p.tok.kind == "ident" and self.p.tok.text == "forall":
            self.p.advance()
            explicit = []
            if not self.p.at("."):
                explicit.append(self.tvar()[0])
                while self.p.at(","):
                    self.p.advance()
                    explicit.append(self.tvar()[0])
            self.p.expect(".")
            if len(set(explicit)) != len(explicit):
                raise self._error("duplicate variable in forall", start)
        self.p.expect("[")
        args: list[Type] = []
        if not self.p.at(";", "]"):
            args.append(self.type())
            while self.p.at(","):
                self.p.advance()
                args.append(self.type())
        pre_entries = self.entries() if self.p.at(";") else []
        self.p.expect("]")
        self.p.expect("=>")
        self.p.expect("[")
        result = self.type()
        post_entries = self.entries() if self.p.at(";") else []
        end = self.p.expect("]").span
        span = _join_spans(start, end)

        pre = self._complete_pre(args, pre_entries, span)
        post = self._complete_post(pre, post_entries, span)
        if explicit is not None:
            quantified = tuple(explicit)
        elif top:
            quantified = tuple(v for v in self.order if v not in self.nonlocals)
        else:
            quantified = ()
        return FunctionContract(quantified, pre, tuple(args), result, post)

    def _error(self, message: str, span) -> ParseError:
        return ParseError(Diagnostic("E-CONTRACT-SYNTAX", message, span))

    def entries(self) -> list[tuple]:
        self.p.expect(";")
        out = []
        if self.p.at("]"):
            return out
        out.append(self.entry())
        while self.p.at(","):
            self.p.advance()
            out.append(self.entry())
        return out

    def entry(self) -> tuple:
        start = self.p.tok.span
        var, _ = self.tvar()
        if self.p.at("<#"):
            self.p.advance()
            self.p.expect("{")
            fields: dict[str, FieldType] = {}
            if not self.p.at("}"):
                while True:
                    f = self.p.ident()
                    self.p.expect(":")
                    if f.text in fields:
                        raise self._error(f"duplicate field {f.text} in record for {var}", f.span)
                    fields[f.text] = self.field_type()
                    if not self.p.at(","):
                        break
                    self.p.advance()
            self.p.expect("}")
            return ("record", var, Record(fields), start)
        self.p.expect(".")
        f = self.p.ident()
        self.p.expect(":")
        return ("field", var, (f.text, self.field_type()), f.span)

    def _group(self, entries: list[tuple]) -> tuple[dict[str, Record], dict[str, str]]:
        records: dict[str, dict] = {}
        kinds: dict[str, str] = {}
        for kind, var, payload, span in entries:
            if var in kinds and (kind == "record" or kinds[var] == "record"):
                raise self._error(f"duplicate constraint for {var}", span)
            kinds[var] = kind
            if kind == "record":
                records[var] = dict(payload)
            else:
                name, q = payload
                fields = records.setdefault(var, {})
                if name in fields:
                    raise self._error(f"duplicate field {name} in record for {var}", span)
                fields[name] = q
        return {v: Record(r) for v, r in records.items()}, kinds

    def _complete_pre(self, args: list[Type], entries: list[tuple], span) -> ConstraintSet:
        given, _ = self._group(entries)
        out: dict[str, Record] = {}
        for t in args:
            for d in disjuncts(t):
                if isinstance(d, TVar) and d.name not in out:
                    out[d.name] = given.get(d.name, Record())
        for v, r in given.items():
            out.setdefault(v, r)
        return ConstraintSet(out)

    def _complete_post(self, pre: ConstraintSet, entries: list[tuple], span) -> ConstraintSet:
        given, kinds = self._group(entries)
        out = dict(pre)
        for v, r in given.items():
            if kinds[v] == "record" or v not in out:
                out[v] = r
            else:
                out[v] = Record({**out[v], **r})
        return ConstraintSet(out)

    def type(self) -> Type:
        parts = [self.type_atom()]
        while self.p.at("|"):
            self.p.advance()
            parts.append(self.type_atom())
        return union(*parts)

    def field_type(self) -> FieldType:
        parts: list[Type] = []
        bot = False
        while True:
            if self.p.tok.kind == "ident" and self.p.tok.text == "bot":
                self.p.advance()
                bot = True
            else:
                parts.append(self.type_atom())
            if not self.p.at("|"):
                break
            self.p.advance()
        if not parts:
            return BOT
        t = union(*parts)
        return Maybe(t) if bot else Present(t)

    def type_atom(self) -> Type:
        t = self.p.tok
        if t.kind == "ident" and t.text in BASE_NAMES:
            self.p.advance()
            return Base(t.text)
        if t.kind == "ident" and t.text == "str":
            self.p.advance()
            return Base("string")
        if self.p.at("("):
            self.p.advance()
            saved = (self.order, self.nonlocals)
            inner = []
            while True:
                sub = _ContractParser(self.p)
                inner.append(sub.contract(top=False))
                for v in sub.order:
                    if v not in inner[-1].quantified:
                        self._note(v)
                self.nonlocals |= sub.nonlocals
                if not self.p.at("&"):
                    break
                self.p.advance()
            self.order, self.nonlocals = saved[0], saved[1] | self.nonlocals
            self.p.expect(")")
            return Functions(tuple(inner))
        if self.p.at("^") or t.kind == "ident":
            return TVar(self.tvar()[0])
        raise self.p.fail(["a type"])


# -- ANF lowering ---------------------------------------------------------------------

class _Lowerer:
    def __init__(self):
        self.counter = 0

    def fresh(self) -> str:
        name = f"{TEMP_PREFIX}{self.counter}"
        self.counter += 1
        return name

    def atomize(self, e: Expr, binds: list) -> Expr:
        e = self.lower(e)
        # hoist temporaries so lowered operands do not nest lets inside let-bound positions
        while isinstance(e, Let) and e.name.startswith(TEMP_PREFIX):
            binds.append((e.name, e.bound, e.span))
            e = e.body
        if is_atom(e):
            return e
        name = self.fresh()
        binds.append((name, e, e.span))
        return Var(name, span=e.span)

    @staticmethod
    def wrap(binds: list, e: Expr) -> Expr:
        for name, bound, span in reversed(binds):
            e = Let(name, bound, e, span=span)
        return e

    def lower(self, e: Expr) -> Expr:
        binds: list = []
        match e:
            case Var() | Const() | Loc() | New():
                return e
            case Func(params=ps, contracts=cs, body=body):
                return Func(ps, cs, self.lower(body), span=e.span)
            case PrimOp(op=op, args=args):
                atoms = tuple(self.atomize(a, binds) for a in args)
                return self.wrap(binds, PrimOp(op, atoms, span=e.span))
            case GetField(obj=o, field=f):
                return self.wrap(binds, GetField(self.atomize(o, binds), f, span=e.span))
            case SetField(obj=o, field=f, value=v):
                obj = self.atomize(o, binds)
                val = self.atomize(v, binds)
                return self.wrap(binds, SetField(obj, f, val, span=e.span))
            case App(fn=fn, args=args):
                callee = self.atomize(fn, binds)
                atoms = tuple(self.atomize(a, binds) for a in args)
                return self.wrap(binds, App(callee, atoms, span=e.span))
            case Let(name=x, bound=b, body=body):
                return Let(x, self.lower(b), self.lower(body), span=e.span)
            case If(cond=c, then=t, else_=f):
                cond = self.atomize(c, binds)
                return self.wrap(binds, If(cond, self.lower(t), self.lower(f), span=e.span))
            case IfHasAttr(obj=o, field=n, then=t, else_=f):
                obj = self.atomize(o, binds)
                return self.wrap(binds, IfHasAttr(obj, n, self.lower(t), self.lower(f), span=e.span))
        raise TypeError(f"cannot lower {e!r}")


def lower(e: Expr) -> Expr:
    """A-normal form: operand positions hold atoms, bound by fresh lets left to right."""
    return _Lowerer().lower(e)


def parse_surface(src: str) -> Expr:
    """Parse without lowering or validation."""
    p = _Parser(src)
    e = p.seq()
    p.eof()
    return e


def parse_program(src: str) -> Expr:
    """Parse, lower to A-normal form and validate; raises ParseError with diagnostics."""
    e = lower(parse_surface(src))
    problems = validate(e)
    if problems:
        raise ParseError(problems)
    return e


def parse_contract(src: str) -> FunctionContract:
    p = _Parser(src)
    c = _ContractParser(p).contract(top=True)
    p.eof()
    return c
