"""Declarative affine transition-system environment models.

A model declares bounded state variables, affine per-step update rules over
the previous state, derived variables computed from the current state, and
system/environment actions whose effects are constant additive deltas or
constant assignments. This restriction keeps every rollout value an affine
function of the initial state and action-activation indicators, so the model
translates mechanically to linear constraints.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .signal import Signal


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class LinearExpr:
    """coeffs over state-variable names plus a constant."""

    coeffs: tuple[tuple[str, float], ...]
    const: float = 0.0

    @classmethod
    def make(cls, coeffs: Mapping[str, float], const: float = 0.0) -> "LinearExpr":
        return cls(tuple(sorted((k, float(v)) for k, v in coeffs.items() if v != 0.0)),
                   float(const))

    @classmethod
    def from_dict(cls, doc) -> "LinearExpr":
        if isinstance(doc, (int, float)):
            return cls((), float(doc))
        return cls.make(doc.get("coeffs", {}), doc.get("const", 0.0))

    def evaluate(self, values: Mapping[str, float]) -> float:
        total = self.const
        for v, c in self.coeffs:
            total += c * values[v]
        return total

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.coeffs)


@dataclass(frozen=True)
class Effect:
    var: str
    op: str  # "add" | "set"
    value: float

    def __post_init__(self):
        if self.op not in ("add", "set"):
            raise ModelError(f"unknown effect op {self.op!r}")


@dataclass(frozen=True)
class Action:
    name: str
    kind: str  # "sys" | "env"
    effects: tuple[Effect, ...] = ()
    guard: LinearExpr | None = None  # usable only when guard(prev state) >= 0


@dataclass(frozen=True)
class StateVar:
    name: str
    lo: float
    hi: float
    init: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ModelError(f"variable {self.name!r} needs finite bounds")
        if not self.lo <= self.init <= self.hi:
            raise ModelError(f"initial value of {self.name!r} outside its bounds")


NOOP = "noop"


@dataclass(frozen=True)
class TransitionSystem:
    """Deterministic affine environment model."""

    variables: tuple[StateVar, ...]
    actions: tuple[Action, ...]
    updates: dict[str, LinearExpr]          # next[var] = expr(prev state)
    derived: dict[str, LinearExpr] = field(default_factory=dict)  # var = expr(current)
    sample_period: float = 1.0

    def __post_init__(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ModelError("duplicate state variable names")
        name_set = set(names)
        sys_names = {a.name for a in self.actions if a.kind == "sys"}
        env_names = {a.name for a in self.actions if a.kind == "env"}
        if sys_names & env_names:
            raise ModelError("system and environment action sets must be disjoint")
        if len(sys_names) + len(env_names) != len(self.actions):
            raise ModelError("duplicate action names")
        for var, expr in {**self.updates, **self.derived}.items():
            for ref in (var, *expr.variables):
                if ref not in name_set:
                    raise ModelError(f"update rule references undeclared variable {ref!r}")
        if set(self.updates) & set(self.derived):
            raise ModelError("a variable cannot have both an update rule and a derived rule")
        for a in self.actions:
            for e in a.effects:
                if e.var not in name_set:
                    raise ModelError(f"action {a.name!r} touches undeclared variable {e.var!r}")
                if e.var in self.derived:
                    raise ModelError(f"action {a.name!r} cannot assign derived variable {e.var!r}")
            if a.guard is not None:
                for ref in a.guard.variables:
                    if ref not in name_set:
                        raise ModelError(f"guard of {a.name!r} references {ref!r}")
        if self.sample_period <= 0:
            raise ModelError("sample_period must be positive")

    # -- lookups ---------------------------------------------------------------

    @property
    def var_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def var(self, name: str) -> StateVar:
        for v in self.variables:
            if v.name == name:
                return v
        raise ModelError(f"unknown state variable {name!r}")

    def action(self, name: str) -> Action:
        for a in self.actions:
            if a.name == name:
                return a
        raise ModelError(f"undeclared action {name!r}")

    @property
    def sys_actions(self) -> tuple[Action, ...]:
        return tuple(a for a in self.actions if a.kind == "sys")

    @property
    def env_actions(self) -> tuple[Action, ...]:
        return tuple(a for a in self.actions if a.kind == "env")

    def initial_state(self) -> dict[str, float]:
        state = {v.name: v.init for v in self.variables}
        for var, expr in self.derived.items():
            state[var] = expr.evaluate(state)
        return state

    # -- dynamics ----------------------------------------------------------------

    def step(self, q: Mapping[str, float], actions: str | Iterable[str],
             clamp_log: list | None = None) -> dict[str, float]:
        """One transition: update rules, then action effects (in the given
        order), then derived variables; results clamped to declared bounds."""
        if isinstance(actions, str):
            actions = (actions,)
        nxt: dict[str, float] = {}
        for v in self.variables:
            if v.name in self.derived:
                continue
            expr = self.updates.get(v.name)
            nxt[v.name] = expr.evaluate(q) if expr is not None else q[v.name]
        for name in actions:
            act = self.action(name)
            if act.guard is not None and act.guard.evaluate(q) < 0:
                continue  # inapplicable action has no effect in simulation
            for e in act.effects:
                if e.op == "add":
                    nxt[e.var] += e.value
                else:
                    nxt[e.var] = e.value
        for v in self.variables:
            if v.name in self.derived:
                continue
            val = nxt[v.name]
            clamped = min(max(val, v.lo), v.hi)
            if clamped != val and clamp_log is not None:
                clamp_log.append((v.name, val, clamped))
            nxt[v.name] = clamped
        for var, expr in self.derived.items():
            v = self.var(var)
            val = expr.evaluate(nxt)
            clamped = min(max(val, v.lo), v.hi)
            if clamped != val and clamp_log is not None:
                clamp_log.append((var, val, clamped))
            nxt[var] = clamped
        return nxt

    def rollout(self, q0: Mapping[str, float],
                actions: Sequence[str | tuple[str, ...]],
                start_time: float = 0.0,
                clamp_log: list | None = None) -> Signal:
        """Signal of ``len(actions) + 1`` samples; sample i is the state after
        i steps. Each entry of ``actions`` is one step's action (or actions,
        applied in order, e.g. an environment event then the system action)."""
        state = dict(q0)
        for var, expr in self.derived.items():
            state.setdefault(var, expr.evaluate(state))
        names = self.var_names
        rows = [[state[n] for n in names]]
        for step_actions in actions:
            state = self.step(state, step_actions, clamp_log)
            rows.append([state[n] for n in names])
        return Signal(self.sample_period, names, np.asarray(rows, dtype=float),
                      start_time=start_time)


# -- model file format ----------------------------------------------------------

def transition_system_from_dict(doc: dict) -> TransitionSystem:
    def parse_actions(entries, kind):
        out = []
        for e in entries:
            effects = tuple(
                Effect(f["var"], f.get("op", "add"), float(f["value"]))
                for f in e.get("effects", ())
            )
            guard = LinearExpr.from_dict(e["guard"]) if "guard" in e else None
            out.append(Action(e["name"], kind, effects, guard))
        return out

    try:
        variables = tuple(
            StateVar(v["name"], float(v["lo"]), float(v["hi"]), float(v.get("init", 0.0)))
            for v in doc["vars"]
        )
    except KeyError as exc:
        raise ModelError(f"model missing field {exc}") from None
    actions = tuple(parse_actions(doc.get("sys_actions", ()), "sys")
                    + parse_actions(doc.get("env_actions", ()), "env"))
    updates = {k: LinearExpr.from_dict(v) for k, v in doc.get("updates", {}).items()}
    derived = {k: LinearExpr.from_dict(v) for k, v in doc.get("derived", {}).items()}
    return TransitionSystem(variables, actions, updates, derived,
                            sample_period=float(doc.get("dt", 1.0)))


def load_model(path: str) -> TransitionSystem:
    with open(path) as fh:
        return transition_system_from_dict(json.load(fh))
