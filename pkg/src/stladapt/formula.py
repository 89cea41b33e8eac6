"""STL / PSTL formula trees.

A formula is concrete (plain STL) when every predicate bound and interval
endpoint is a number; PSTL formulas carry ``Param`` slots in those positions
instead. Value parameters sit in predicate bounds, time parameters in
interval endpoints.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Union


class FormulaError(ValueError):
    pass


@dataclass(frozen=True)
class Param:
    """A named parameter slot, written ``$name`` in text form."""

    name: str

    def __str__(self):
        return f"${self.name}"


BoundLike = Union[float, Param]


class ParamKind(enum.Enum):
    VALUE = "value"
    TIME = "time"


def _fmt_num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _fmt_bound(b: BoundLike) -> str:
    return str(b) if isinstance(b, Param) else _fmt_num(b)


@dataclass(frozen=True)
class Term:
    """An affine expression over signal variables: sum(coef * var) + const."""

    coeffs: tuple[tuple[str, float], ...]
    const: float = 0.0

    @classmethod
    def make(cls, coeffs: Mapping[str, float], const: float = 0.0) -> "Term":
        items = tuple(sorted((v, float(c)) for v, c in coeffs.items() if c != 0.0))
        return cls(items, float(const))

    @classmethod
    def var(cls, name: str) -> "Term":
        return cls(((name, 1.0),))

    def evaluate(self, values: Mapping[str, float]) -> float:
        total = self.const
        for v, c in self.coeffs:
            try:
                total += c * values[v]
            except KeyError:
                raise FormulaError(f"unbound variable {v!r}") from None
        return total

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.coeffs)

    def __str__(self):
        parts: list[str] = []
        for v, c in self.coeffs:
            if c == 1.0:
                piece = v
            elif c == -1.0:
                piece = f"-{v}"
            else:
                piece = f"{_fmt_num(c)}*{v}"
            if parts and not piece.startswith("-"):
                parts.append(f"+ {piece}")
            elif parts:
                parts.append(f"- {piece[1:]}")
            else:
                parts.append(piece)
        if self.const != 0.0 or not parts:
            c = self.const
            if parts:
                parts.append(f"+ {_fmt_num(c)}" if c >= 0 else f"- {_fmt_num(-c)}")
            else:
                parts.append(_fmt_num(c))
        return " ".join(parts)


@dataclass(frozen=True)
class Interval:
    lo: BoundLike
    hi: BoundLike

    def __post_init__(self):
        if isinstance(self.lo, Param):
            raise FormulaError(
                f"time parameter {self.lo} may only appear as an interval upper endpoint"
            )
        if not isinstance(self.hi, Param) and self.lo > self.hi:
            raise FormulaError(f"interval [{self.lo}, {self.hi}] is inverted")
        if self.lo < 0:
            raise FormulaError("interval endpoints must be nonnegative")

    @property
    def concrete(self) -> bool:
        return not isinstance(self.hi, Param)

    def __str__(self):
        return f"[{_fmt_bound(self.lo)},{_fmt_bound(self.hi)}]"


class Formula:
    """Base class; subclasses are frozen dataclasses and safe to share."""

    __slots__ = ()


COMPARATORS = (">", "<", ">=", "<=")


@dataclass(frozen=True)
class Pred(Formula):
    term: Term
    op: str
    bound: BoundLike

    def __post_init__(self):
        if self.op not in COMPARATORS:
            raise FormulaError(f"unknown comparator {self.op!r}")

    def __str__(self):
        return f"{self.term} {self.op} {_fmt_bound(self.bound)}"


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula

    def __str__(self):
        return f"!({self.arg})"


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def __str__(self):
        return f"({self.left}) && ({self.right})"


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    def __str__(self):
        return f"({self.left}) || ({self.right})"


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula

    def __str__(self):
        return f"({self.left}) -> ({self.right})"


@dataclass(frozen=True)
class Globally(Formula):
    interval: Interval
    arg: Formula

    def __str__(self):
        return f"G{self.interval}({self.arg})"


@dataclass(frozen=True)
class Eventually(Formula):
    interval: Interval
    arg: Formula

    def __str__(self):
        return f"F{self.interval}({self.arg})"


@dataclass(frozen=True)
class Until(Formula):
    interval: Interval
    left: Formula
    right: Formula

    def __str__(self):
        return f"({self.left}) U{self.interval} ({self.right})"


def children(phi: Formula) -> tuple[Formula, ...]:
    if isinstance(phi, Pred):
        return ()
    if isinstance(phi, Not):
        return (phi.arg,)
    if isinstance(phi, (Globally, Eventually)):
        return (phi.arg,)
    if isinstance(phi, (And, Or, Implies, Until)):
        return (phi.left, phi.right)
    raise FormulaError(f"unknown formula node {type(phi).__name__}")


def iter_nodes(phi: Formula):
    stack = [phi]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def signal_variables(phi: Formula) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for node in iter_nodes(phi):
        if isinstance(node, Pred):
            for v in node.term.variables:
                seen.setdefault(v)
    return tuple(seen)


def parameters(phi: Formula) -> dict[str, ParamKind]:
    """Parameter slots in tree order; each name may occupy one position only."""
    found: dict[str, ParamKind] = {}

    def note(name: str, kind: ParamKind):
        if name in found:
            raise FormulaError(f"parameter ${name} appears in more than one position")
        found[name] = kind

    for node in iter_nodes(phi):
        if isinstance(node, Pred) and isinstance(node.bound, Param):
            note(node.bound.name, ParamKind.VALUE)
        elif isinstance(node, (Globally, Eventually, Until)):
            if isinstance(node.interval.hi, Param):
                note(node.interval.hi.name, ParamKind.TIME)
    return found


def is_concrete(phi: Formula) -> bool:
    return not parameters(phi)


def formula_horizon(phi: Formula) -> float:
    """Lookahead (seconds) needed to evaluate ``phi``: a signal covering
    [t, t + horizon] makes robustness at t defined. Requires a concrete tree."""
    if isinstance(phi, Pred):
        return 0.0
    if isinstance(phi, Not):
        return formula_horizon(phi.arg)
    if isinstance(phi, (And, Or, Implies)):
        return max(formula_horizon(phi.left), formula_horizon(phi.right))
    if isinstance(phi, (Globally, Eventually)):
        if not phi.interval.concrete:
            raise FormulaError("horizon of a parametric interval is undefined")
        return float(phi.interval.hi) + formula_horizon(phi.arg)
    if isinstance(phi, Until):
        if not phi.interval.concrete:
            raise FormulaError("horizon of a parametric interval is undefined")
        return float(phi.interval.hi) + max(
            formula_horizon(phi.left), formula_horizon(phi.right)
        )
    raise FormulaError(f"unknown formula node {type(phi).__name__}")


def to_text(phi: Formula) -> str:
    """Canonical text form; re-parsing yields a structurally equal tree."""
    return str(phi)
