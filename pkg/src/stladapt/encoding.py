"""Linearization of robustness and of transition-system dynamics.

`RobustnessEncoder` turns a formula's robustness at a given sample index into
an affine expression over MILP variables, introducing one-hot selector
binaries for every min/max subterm (big-M constants derived from declared
variable bounds plus formula constants, so the gadgets pin the robustness
value exactly for every feasible assignment).

`DecisionSignal` materializes a signal whose prefix is pinned to observed
samples and whose future samples are decision variables tied to the
transition system's dynamics and to per-step one-hot action binaries.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .envmodel import Action, TransitionSystem
from .formula import (
    And,
    Eventually,
    Formula,
    FormulaError,
    Globally,
    Implies,
    Not,
    Or,
    Param,
    Pred,
    Until,
)
from .milp import MilpProblem
from .semantics import window_offsets
from .signal import Signal


class EncodingError(ValueError):
    pass


class LinExpr:
    """Affine expression over MILP variable indices."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs: dict[int, float] | None = None, const: float = 0.0):
        self.coeffs = dict(coeffs) if coeffs else {}
        self.const = float(const)

    @classmethod
    def of_var(cls, idx: int) -> "LinExpr":
        return cls({idx: 1.0})

    @classmethod
    def constant(cls, value: float) -> "LinExpr":
        return cls(None, value)

    def copy(self) -> "LinExpr":
        return LinExpr(self.coeffs, self.const)

    def add(self, other: "LinExpr", scale: float = 1.0) -> "LinExpr":
        out = self.copy()
        for j, v in other.coeffs.items():
            out.coeffs[j] = out.coeffs.get(j, 0.0) + scale * v
        out.const += scale * other.const
        return out

    def add_term(self, idx: int, coef: float) -> "LinExpr":
        out = self.copy()
        out.coeffs[idx] = out.coeffs.get(idx, 0.0) + coef
        return out

    def scaled(self, k: float) -> "LinExpr":
        return LinExpr({j: k * v for j, v in self.coeffs.items()}, k * self.const)

    def negated(self) -> "LinExpr":
        return self.scaled(-1.0)

    @property
    def is_constant(self) -> bool:
        return not self.coeffs


def add_expr_constraint(prob: MilpProblem, expr: LinExpr, sense: str, rhs: float = 0.0):
    prob.add_constraint(expr.coeffs, sense, rhs - expr.const)


@dataclass(frozen=True)
class BoundedExpr:
    expr: LinExpr
    lo: float
    hi: float


class SignalValues:
    """Accessor for per-step signal values as bounded affine expressions."""

    length: int
    sample_period: float

    def value(self, name: str, step: int) -> BoundedExpr:  # pragma: no cover
        raise NotImplementedError


class PinnedSignal(SignalValues):
    """Every sample fixed to a concrete signal (used for encoder checks)."""

    def __init__(self, s: Signal):
        self.signal = s
        self.length = len(s)
        self.sample_period = s.sample_period

    def value(self, name: str, step: int) -> BoundedExpr:
        v = self.signal.value_at(name, step)
        return BoundedExpr(LinExpr.constant(v), v, v)


class RobustnessEncoder:
    """Encodes robustness values of formulas over a `SignalValues` grid."""

    def __init__(self, prob: MilpProblem, signal: SignalValues,
                 param_vars: Mapping[str, tuple[int, float, float]] | None = None,
                 label: str = "r"):
        self.prob = prob
        self.signal = signal
        self.param_vars = dict(param_vars or {})
        self.label = label
        self.min_gadgets = 0
        self.max_gadgets = 0
        self.selector_binaries = 0
        self._counter = 0

    # -- gadgets ---------------------------------------------------------------

    def _fresh(self, lo: float, hi: float) -> int:
        self._counter += 1
        return self.prob.add_var(f"{self.label}_{self._counter}", lo, hi)

    def _extreme(self, children: Sequence[BoundedExpr], is_min: bool) -> BoundedExpr:
        if len(children) == 1:
            return children[0]
        los = [c.lo for c in children]
        his = [c.hi for c in children]
        lo = min(los) if is_min else max(los)
        hi = min(his) if is_min else max(his)
        r = self._fresh(lo, hi)
        r_expr = LinExpr.of_var(r)
        if is_min:
            self.min_gadgets += 1
        else:
            self.max_gadgets += 1
        selectors = []
        for c in children:
            z = self.prob.add_binary(f"{self.label}_z{self._counter}_{len(selectors)}")
            selectors.append(z)
            self.selector_binaries += 1
            if is_min:
                # r <= e_c ; r >= e_c - M (1 - z)
                add_expr_constraint(self.prob, r_expr.add(c.expr, -1.0), "<=", 0.0)
                M = max(0.0, c.hi - lo)
                bigm = r_expr.add(c.expr, -1.0).add_term(z, -M)
                add_expr_constraint(self.prob, bigm, ">=", -M)
            else:
                # r >= e_c ; r <= e_c + M (1 - z)
                add_expr_constraint(self.prob, r_expr.add(c.expr, -1.0), ">=", 0.0)
                M = max(0.0, hi - c.lo)
                bigm = r_expr.add(c.expr, -1.0).add_term(z, M)
                add_expr_constraint(self.prob, bigm, "<=", M)
        self.prob.add_constraint({z: 1.0 for z in selectors}, "=", 1.0)
        return BoundedExpr(r_expr, lo, hi)

    # -- recursion ---------------------------------------------------------------

    def encode(self, phi: Formula, step: int) -> BoundedExpr:
        """Affine expression equal to rho(phi, s, step) for every feasible
        assignment; predicates stay affine (no binaries)."""
        if isinstance(phi, Pred):
            expr = LinExpr.constant(phi.term.const)
            lo = hi = phi.term.const
            for v, c in phi.term.coeffs:
                be = self.signal.value(v, step)
                expr = expr.add(be.expr, c)
                lo += c * (be.lo if c > 0 else be.hi)
                hi += c * (be.hi if c > 0 else be.lo)
            if isinstance(phi.bound, Param):
                try:
                    p_idx, p_lo, p_hi = self.param_vars[phi.bound.name]
                except KeyError:
                    raise EncodingError(f"no decision variable for ${phi.bound.name}")
                b_expr, b_lo, b_hi = LinExpr.of_var(p_idx), p_lo, p_hi
            else:
                b = float(phi.bound)
                b_expr, b_lo, b_hi = LinExpr.constant(b), b, b
            if phi.op in (">", ">="):
                return BoundedExpr(expr.add(b_expr, -1.0), lo - b_hi, hi - b_lo)
            return BoundedExpr(b_expr.add(expr, -1.0), b_lo - hi, b_hi - lo)
        if isinstance(phi, Not):
            c = self.encode(phi.arg, step)
            return BoundedExpr(c.expr.negated(), -c.hi, -c.lo)
        if isinstance(phi, And):
            return self._extreme([self.encode(phi.left, step),
                                  self.encode(phi.right, step)], is_min=True)
        if isinstance(phi, Or):
            return self._extreme([self.encode(phi.left, step),
                                  self.encode(phi.right, step)], is_min=False)
        if isinstance(phi, Implies):
            left = self.encode(phi.left, step)
            neg = BoundedExpr(left.expr.negated(), -left.hi, -left.lo)
            return self._extreme([neg, self.encode(phi.right, step)], is_min=False)
        if isinstance(phi, (Globally, Eventually)):
            ia, ib = window_offsets(phi.interval, self.signal.sample_period)
            if step + ib >= self.signal.length:
                raise EncodingError(
                    f"horizon overflow: {phi} at step {step} needs sample "
                    f"{step + ib} of {self.signal.length}"
                )
            children = [self.encode(phi.arg, k)
                        for k in range(step + ia, step + ib + 1)]
            return self._extreme(children, is_min=isinstance(phi, Globally))
        if isinstance(phi, Until):
            ia, ib = window_offsets(phi.interval, self.signal.sample_period)
            if step + ib >= self.signal.length:
                raise EncodingError(
                    f"horizon overflow: {phi} at step {step} needs sample "
                    f"{step + ib} of {self.signal.length}"
                )
            left = {k: self.encode(phi.left, k) for k in range(step, step + ib + 1)}
            stages = []
            for k in range(step + ia, step + ib + 1):
                parts = [self.encode(phi.right, k)]
                parts.extend(left[m] for m in range(step, k + 1))
                stages.append(self._extreme(parts, is_min=True))
            return self._extreme(stages, is_min=False)
        raise FormulaError(f"unknown formula node {type(phi).__name__}")


def encode_robustness(phi: Formula, prob: MilpProblem, signal: SignalValues,
                      step: int = 0,
                      param_vars: Mapping[str, tuple[int, float, float]] | None = None,
                      label: str = "r") -> tuple[BoundedExpr, RobustnessEncoder]:
    """Encode rho(phi, signal, step); returns the bounded expression and the
    encoder (which carries gadget statistics)."""
    enc = RobustnessEncoder(prob, signal, param_vars, label)
    return enc.encode(phi, step), enc


# -- decision signals ------------------------------------------------------------


def dependency_closure(ts: TransitionSystem, seeds: set[str],
                       plan_actions: Sequence[Action]) -> set[str]:
    """State variables whose dynamics can influence the seed variables."""
    deps: dict[str, set[str]] = {}
    for v in ts.var_names:
        if v in ts.derived:
            deps[v] = set(ts.derived[v].variables)
        elif v in ts.updates:
            deps[v] = set(ts.updates[v].variables)
        else:
            deps[v] = {v}
    needed = set(seeds)
    for a in plan_actions:
        if a.guard is not None:
            needed.update(a.guard.variables)
    frontier = list(needed)
    while frontier:
        v = frontier.pop()
        for d in deps.get(v, ()):
            if d not in needed:
                needed.add(d)
                frontier.append(d)
    return needed


class DecisionSignal(SignalValues):
    """Observed prefix pinned; future samples tied to dynamics and actions.

    Each future step carries a one-hot row over ``plan_actions``; environment
    actions scheduled for a step are folded in first (event-then-action
    order), deterministically.
    """

    def __init__(self, prob: MilpProblem, ts: TransitionSystem,
                 observed: Sequence[Mapping[str, float]], n_pred: int,
                 plan_actions: Sequence[Action],
                 env_schedule: Mapping[int, Sequence[Action]] | None = None,
                 needed: set[str] | None = None):
        if not observed:
            raise EncodingError("need at least one observed sample")
        for a in plan_actions:
            if a.kind != "sys":
                raise EncodingError(f"plan action {a.name!r} is not a system action")
        self.prob = prob
        self.ts = ts
        self.observed = [dict(s) for s in observed]
        self.n_obs = len(observed)
        self.length = self.n_obs + n_pred
        self.sample_period = ts.sample_period
        self.plan_actions = list(plan_actions)
        env_schedule = dict(env_schedule or {})

        seeds = set(needed) if needed is not None else set(ts.var_names)
        for acts in env_schedule.values():
            for a in acts:
                if a.guard is not None:
                    seeds.update(a.guard.variables)
        self.needed = dependency_closure(ts, seeds, self.plan_actions)

        self.var_idx: dict[tuple[str, int], int] = {}
        self.action_binaries: dict[int, dict[str, int]] = {}

        for i in range(self.n_obs, self.length):
            row = {
                a.name: prob.add_binary(f"act[{i}]_{a.name}")
                for a in self.plan_actions
            }
            self.action_binaries[i] = row
            prob.add_constraint({j: 1.0 for j in row.values()}, "=", 1.0)
            self._encode_step(i, env_schedule.get(i, ()))

    # -- helpers ----------------------------------------------------------------

    def value(self, name: str, step: int) -> BoundedExpr:
        if step < 0 or step >= self.length:
            raise EncodingError(f"signal step {step} out of range 0..{self.length - 1}")
        if step < self.n_obs:
            try:
                v = float(self.observed[step][name])
            except KeyError:
                raise EncodingError(f"observed sample lacks variable {name!r}")
            return BoundedExpr(LinExpr.constant(v), v, v)
        if name not in self.needed:
            raise EncodingError(f"variable {name!r} was pruned from the encoding")
        idx = self.var_idx[(name, step)]
        sv = self.ts.var(name)
        return BoundedExpr(LinExpr.of_var(idx), sv.lo, sv.hi)

    def _expr_over(self, lin, values: dict[str, BoundedExpr]) -> tuple[LinExpr, float, float]:
        expr = LinExpr.constant(lin.const)
        lo = hi = lin.const
        for v, c in lin.coeffs:
            be = values[v]
            expr = expr.add(be.expr, c)
            lo += c * (be.lo if c > 0 else be.hi)
            hi += c * (be.hi if c > 0 else be.lo)
        return expr, lo, hi

    def _encode_step(self, i: int, env_actions: Sequence[Action]):
        prob, ts = self.prob, self.ts
        prev = {
            v: self.value(v, i - 1)
            for v in self.needed
        }
        row = self.action_binaries[i]

        # action guards: usable only when guard(prev) >= 0
        for a in self.plan_actions:
            if a.guard is None:
                continue
            g_expr, g_lo, _ = self._expr_over(a.guard, prev)
            M = max(0.0, -g_lo)
            guard_row = g_expr.add_term(row[a.name], -M)
            add_expr_constraint(prob, guard_row, ">=", -M)

        current: dict[str, BoundedExpr] = {}
        for name in self.needed:
            if name in ts.derived:
                continue
            sv = ts.var(name)
            upd = ts.updates.get(name)
            if upd is not None:
                base, b_lo, b_hi = self._expr_over(upd, prev)
            else:
                be = prev[name]
                base, b_lo, b_hi = be.expr.copy(), be.lo, be.hi
            env_set = None
            for a in env_actions:
                if a.guard is not None:
                    g_expr, g_lo, g_hi = self._expr_over(a.guard, prev)
                    if not g_expr.is_constant:
                        raise EncodingError(
                            f"guard of scheduled event {a.name!r} depends on "
                            "planned state; schedule events on observed steps "
                            "or drop the guard")
                    if g_expr.const < 0:
                        continue  # inapplicable event has no effect
                for e in a.effects:
                    if e.var != name:
                        continue
                    if e.op == "add":
                        if env_set is None:
                            base = base.add(LinExpr.constant(e.value))
                            b_lo += e.value
                            b_hi += e.value
                        else:
                            env_set += e.value
                    else:
                        env_set = e.value
            if env_set is not None:
                base, b_lo, b_hi = LinExpr.constant(env_set), env_set, env_set
            setters = []
            for a in self.plan_actions:
                for e in a.effects:
                    if e.var != name:
                        continue
                    if e.op == "add":
                        base = base.add_term(row[a.name], e.value)
                        b_lo += min(0.0, e.value)
                        b_hi += max(0.0, e.value)
                    else:
                        setters.append((a, e.value))
            idx = prob.add_var(f"{name}[{i}]", sv.lo, sv.hi)
            self.var_idx[(name, i)] = idx
            v_expr = LinExpr.of_var(idx)
            if not setters:
                add_expr_constraint(prob, v_expr.add(base, -1.0), "=", 0.0)
            else:
                set_sum = LinExpr()
                for a, _ in setters:
                    set_sum = set_sum.add_term(row[a.name], 1.0)
                M_hi = max(0.0, b_hi - sv.lo) + max(abs(b_lo), abs(b_hi)) * 1e-12
                M_lo = max(0.0, sv.hi - b_lo) + max(abs(b_lo), abs(b_hi)) * 1e-12
                # v = base unless a setter is active
                gap = v_expr.add(base, -1.0)
                add_expr_constraint(prob, gap.add(set_sum.scaled(-M_lo)), "<=", 0.0)
                add_expr_constraint(prob, gap.add(set_sum.scaled(M_hi)), ">=", 0.0)
                for a, value in setters:
                    z = row[a.name]
                    Ms_hi = max(0.0, sv.hi - value)
                    Ms_lo = max(0.0, value - sv.lo)
                    add_expr_constraint(
                        prob, v_expr.add_term(z, Ms_hi), "<=", value + Ms_hi)
                    add_expr_constraint(
                        prob, v_expr.add_term(z, -Ms_lo), ">=", value - Ms_lo)
            current[name] = BoundedExpr(v_expr, sv.lo, sv.hi)
        for name in self.needed:
            if name not in ts.derived:
                continue
            sv = ts.var(name)
            d_expr, _, _ = self._expr_over(ts.derived[name], current)
            idx = prob.add_var(f"{name}[{i}]", sv.lo, sv.hi)
            self.var_idx[(name, i)] = idx
            add_expr_constraint(prob, LinExpr.of_var(idx).add(d_expr, -1.0), "=", 0.0)

    def plan_from_solution(self, x: np.ndarray) -> list[str]:
        """Per-step chosen system action (highest binary, deterministic ties)."""
        plan = []
        for i in range(self.n_obs, self.length):
            row = self.action_binaries[i]
            best_name, best_val = None, -1.0
            for a in self.plan_actions:  # declaration order breaks ties
                v = x[row[a.name]]
                if v > best_val + 1e-9:
                    best_name, best_val = a.name, v
            plan.append(best_name)
        return plan
