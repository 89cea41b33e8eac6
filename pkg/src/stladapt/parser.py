"""Recursive-descent parser for the STL/PSTL text grammar.

Grammar (whitespace-insensitive)::

    phi    := "(" phi ")" | "!" phi | phi "&&" phi | phi "||" phi | phi "->" phi
            | "G[" num "," num "]" phi | "F[" num "," num "]" phi
            | phi "U[" num "," num "]" phi | atom
    atom   := term cmp num
    term   := linear expression over identifiers with "+", "-", "*" const

Precedence: ! > temporal > && > || > "->" (right-associative). Predicate
bounds and interval endpoints may be "$name" parameter slots (PSTL).
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .formula import (
    And,
    Eventually,
    Formula,
    Globally,
    Implies,
    Interval,
    Not,
    Or,
    Param,
    Pred,
    Term,
    Until,
    is_concrete,
    parameters,
)


class StlSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(\.\d+)?([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?)
  | (?P<param>\$[A-Za-z_][A-Za-z_0-9]*)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>&&|\|\||->|>=|<=|[-+*<>!(),\[\]])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise StlSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup or ""
        value = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message: str):
        raise StlSyntaxError(message, self.cur.line, self.cur.column)

    def accept(self, kind: str, text: str | None = None) -> _Tok | None:
        t = self.cur
        if t.kind == kind and (text is None or t.text == text):
            self.i += 1
            return t
        return None

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        t = self.accept(kind, text)
        if t is None:
            want = text or kind
            self.error(f"expected {want!r}, found {self.cur.text or 'end of input'!r}")
        return t

    # phi := implies-level
    def parse_formula(self) -> Formula:
        left = self.parse_or()
        if self.accept("op", "->"):
            return Implies(left, self.parse_formula())  # right-associative
        return left

    def parse_or(self) -> Formula:
        node = self.parse_and()
        while self.accept("op", "||"):
            node = Or(node, self.parse_and())
        return node

    def parse_and(self) -> Formula:
        node = self.parse_until()
        while self.accept("op", "&&"):
            node = And(node, self.parse_until())
        return node

    def parse_until(self) -> Formula:
        node = self.parse_unary()
        while self.cur.kind == "ident" and self.cur.text == "U" \
                and self.toks[self.i + 1].text == "[":
            self.i += 1
            interval = self.parse_interval()
            node = Until(interval, node, self.parse_unary())
        return node

    def parse_unary(self) -> Formula:
        if self.accept("op", "!"):
            return Not(self.parse_unary())
        if self.cur.kind == "ident" and self.cur.text in ("G", "F") \
                and self.toks[self.i + 1].text == "[":
            op = self.cur.text
            self.i += 1
            interval = self.parse_interval()
            arg = self.parse_unary()
            return Globally(interval, arg) if op == "G" else Eventually(interval, arg)
        if self.cur.text == "(":
            # A "(" can only open a sub-formula; terms never start with one.
            self.i += 1
            node = self.parse_formula()
            self.expect("op", ")")
            return node
        return self.parse_atom()

    def parse_interval(self) -> Interval:
        self.expect("op", "[")
        lo = self.parse_bound(allow_param=False)
        self.expect("op", ",")
        hi = self.parse_bound(allow_param=True)
        self.expect("op", "]")
        try:
            return Interval(lo, hi)
        except ValueError as exc:
            self.error(str(exc))
            raise AssertionError  # unreachable

    def parse_bound(self, allow_param: bool):
        sign = 1.0
        if self.accept("op", "-"):
            sign = -1.0
        if allow_param and self.cur.kind == "param":
            if sign < 0:
                self.error("parameter slots cannot be negated")
            name = self.cur.text[1:]
            self.i += 1
            return Param(name)
        t = self.expect("num")
        return sign * float(t.text)

    def parse_atom(self) -> Pred:
        term = self.parse_term()
        opt = None
        for cand in (">=", "<=", ">", "<"):
            if self.accept("op", cand):
                opt = cand
                break
        if opt is None:
            self.error(f"expected a comparator, found {self.cur.text or 'end of input'!r}")
        if self.cur.kind == "param":
            bound: object = Param(self.cur.text[1:])
            self.i += 1
        else:
            bound = self.parse_bound(allow_param=False)
        return Pred(term, opt, bound)  # type: ignore[arg-type]

    def parse_term(self) -> Term:
        coeffs: dict[str, float] = {}
        const = 0.0
        first = True
        while True:
            sign = 1.0
            if self.accept("op", "-"):
                sign = -1.0
            elif self.accept("op", "+"):
                pass
            elif not first:
                break
            first = False
            if self.cur.kind == "num":
                value = float(self.expect("num").text)
                if self.accept("op", "*"):
                    name = self.expect("ident").text
                    coeffs[name] = coeffs.get(name, 0.0) + sign * value
                else:
                    const += sign * value
            elif self.cur.kind == "ident":
                name = self.expect("ident").text
                coef = sign
                if self.accept("op", "*"):
                    coef *= float(self.expect("num").text)
                coeffs[name] = coeffs.get(name, 0.0) + coef
            else:
                self.error(
                    f"expected a variable or number, found {self.cur.text or 'end of input'!r}"
                )
            nxt = self.cur
            if nxt.kind != "op" or nxt.text not in ("+", "-"):
                break
        return Term.make(coeffs, const)


def parse_pstl(text: str) -> Formula:
    """Parse STL text that may contain ``$name`` parameter slots."""
    p = _Parser(text)
    phi = p.parse_formula()
    p.expect("eof")
    parameters(phi)  # enforce single-position rule
    return phi


def parse_stl(text: str) -> Formula:
    """Parse parameter-free STL text into a formula tree."""
    phi = parse_pstl(text)
    if not is_concrete(phi):
        names = ", ".join(f"${n}" for n in parameters(phi))
        raise StlSyntaxError(f"formula has unbound parameters: {names}", 1, 1)
    return phi
