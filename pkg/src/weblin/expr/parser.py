"""Pratt parser for the input expression language.

Grammar: rational and decimal literals, the coordinates ``x1`` and ``x2``,
declared parameters, ``+ - * / ^`` with the usual precedence (``^`` is
right-associative and binds tighter than unary minus), parentheses and the
functions ``exp log sin cos``.  Exponents must evaluate to integers.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .core import COORDINATES, FUNCTIONS, Expr, SingularEvaluation, apply_function


class ParseError(ValueError):
    """Malformed input; ``position`` is the 0-based character offset."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


@dataclass
class Token:
    kind: str  # num, name, op, lpar, rpar, comma, end
    text: str
    pos: int


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^])|(?P<lpar>\()|(?P<rpar>\))|(?P<comma>,))"
)


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        start = m.start(kind)
        tok = m.group(kind)
        if tok == "**":
            tok = "^"
        out.append(Token(kind, tok, start))
        pos = m.end()
    out.append(Token("end", "", len(text)))
    return out


_BINARY = {"+": (10, 11), "-": (10, 11), "*": (20, 21), "/": (20, 21), "^": (41, 40)}
_PREFIX = 30  # unary minus: below ^, above * and /


class _Parser:
    def __init__(self, text: str, params: Iterable[str]):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.params = set(params)

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str, what: str) -> Token:
        t = self.next()
        if t.kind != kind:
            found = t.text or "end of input"
            raise ParseError(f"expected {what}, found {found!r}", t.pos, self.text)
        return t

    def parse(self) -> Expr:
        if self.peek().kind == "end":
            raise ParseError("empty expression", 0, self.text)
        e = self.expr(0)
        t = self.peek()
        if t.kind != "end":
            raise ParseError(f"unexpected {t.text!r}", t.pos, self.text)
        return e

    def expr(self, rbp: int) -> Expr:
        left = self.nud(self.next())
        while True:
            t = self.peek()
            if t.kind != "op":
                break
            lbp, nbp = _BINARY[t.text]
            if lbp <= rbp:
                break
            self.next()
            right = self.expr(nbp)
            left = self.led(t, left, right)
        return left

    def nud(self, t: Token) -> Expr:
        if t.kind == "num":
            return Expr.const(Fraction(t.text))
        if t.kind == "op" and t.text in "+-":
            operand = self.expr(_PREFIX)
            return -operand if t.text == "-" else operand
        if t.kind == "lpar":
            e = self.expr(0)
            self.expect("rpar", "')'")
            return e
        if t.kind == "name":
            if t.text in FUNCTIONS:
                self.expect("lpar", f"'(' after {t.text}")
                arg = self.expr(0)
                self.expect("rpar", "')'")
                try:
                    return apply_function(t.text, arg)
                except SingularEvaluation as exc:
                    raise ParseError(str(exc), t.pos, self.text) from None
            if t.text in COORDINATES or t.text in self.params:
                return Expr.symbol(t.text)
            raise ParseError(f"unknown identifier {t.text!r}", t.pos, self.text)
        found = t.text or "end of input"
        raise ParseError(f"unexpected {found!r}", t.pos, self.text)

    def led(self, t: Token, left: Expr, right: Expr) -> Expr:
        op = t.text
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            if right.is_zero():
                raise ParseError("division by zero", t.pos, self.text)
            return left / right
        if not right.is_constant() or right.as_fraction().denominator != 1:
            raise ParseError(f"non-integer exponent {right}", t.pos, self.text)
        k = right.as_fraction().numerator
        if k < 0 and left.is_zero():
            raise ParseError("zero raised to a negative power", t.pos, self.text)
        return left ** k


def parse(text: str, params: Iterable[str] = ()) -> Expr:
    """Parse ``text`` into a canonical :class:`Expr`.

    Identifiers other than ``x1``, ``x2`` and the function names must be
    listed in ``params``.
    """
    if not isinstance(text, str):
        raise TypeError("parse expects a string")
    return _Parser(text, params).parse()
