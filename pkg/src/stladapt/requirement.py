"""Parametric requirements and the bounded space between minimal and optimal.

A requirement space pairs a PSTL template with three valuations: the minimal
requirement (weakest acceptable), the optimal requirement (strongest useful)
and the current one. Per-parameter polarity declares which direction
strengthens, which reduces the weaker-than relation on instantiations to a
componentwise order on valuations.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .formula import (
    And,
    Eventually,
    Formula,
    FormulaError,
    Globally,
    Implies,
    Interval,
    Not,
    Or,
    Param,
    ParamKind,
    Pred,
    Until,
    parameters,
    signal_variables,
)
from .parser import parse_pstl
from .semantics import robustness, satisfies
from .signal import Signal


class RequirementError(ValueError):
    pass


class Polarity(enum.Enum):
    STRENGTHENS_WHEN_INCREASED = "increase"
    STRENGTHENS_WHEN_DECREASED = "decrease"


Valuation = dict[str, float]


def _check_same_params(nu1: Mapping[str, float], nu2: Mapping[str, float]):
    if set(nu1) != set(nu2):
        raise RequirementError(
            f"valuations cover different parameters: {sorted(nu1)} vs {sorted(nu2)}"
        )


def instantiate(phi: Formula, nu: Mapping[str, float]) -> Formula:
    """Replace every parameter slot with its value; result is concrete STL."""
    params = parameters(phi)
    missing = [p for p in params if p not in nu]
    if missing:
        raise RequirementError(f"valuation missing parameters: {missing}")

    def subst(node: Formula) -> Formula:
        if isinstance(node, Pred):
            if isinstance(node.bound, Param):
                return Pred(node.term, node.op, float(nu[node.bound.name]))
            return node
        if isinstance(node, Not):
            return Not(subst(node.arg))
        if isinstance(node, And):
            return And(subst(node.left), subst(node.right))
        if isinstance(node, Or):
            return Or(subst(node.left), subst(node.right))
        if isinstance(node, Implies):
            return Implies(subst(node.left), subst(node.right))
        if isinstance(node, (Globally, Eventually, Until)):
            iv = node.interval
            if isinstance(iv.hi, Param):
                hi = float(nu[iv.hi.name])
                if hi < float(iv.lo):
                    raise RequirementError(
                        f"interval [{iv.lo}, {hi}] inverted after substitution"
                    )
                iv = Interval(iv.lo, hi)
            if isinstance(node, Globally):
                return Globally(iv, subst(node.arg))
            if isinstance(node, Eventually):
                return Eventually(iv, subst(node.arg))
            return Until(iv, subst(node.left), subst(node.right))
        raise FormulaError(f"unknown formula node {type(node).__name__}")

    return subst(phi)


def valuation_leq(nu1: Mapping[str, float], nu2: Mapping[str, float],
                  polarity: Mapping[str, Polarity]) -> bool:
    """True when ``nu1`` sits on the weaker side of (or equals) ``nu2``."""
    _check_same_params(nu1, nu2)
    for p, v1 in nu1.items():
        v2 = nu2[p]
        pol = polarity[p]
        if pol is Polarity.STRENGTHENS_WHEN_INCREASED:
            if v1 > v2 + 1e-12:
                return False
        else:
            if v1 < v2 - 1e-12:
                return False
    return True


def extract_valuation(phi_template: Formula, phi: Formula) -> Valuation:
    """Recover the valuation that instantiates ``phi`` from the template."""
    nu: Valuation = {}

    def walk(tpl: Formula, ins: Formula):
        if type(tpl) is not type(ins):
            raise RequirementError(f"{ins} is not an instantiation of {tpl}")
        if isinstance(tpl, Pred):
            assert isinstance(ins, Pred)
            if tpl.term != ins.term or tpl.op != ins.op:
                raise RequirementError(f"predicate mismatch: {ins} vs template {tpl}")
            if isinstance(tpl.bound, Param):
                nu[tpl.bound.name] = float(ins.bound)  # type: ignore[arg-type]
            elif float(tpl.bound) != float(ins.bound):  # type: ignore[arg-type]
                raise RequirementError(f"constant bound mismatch: {ins} vs {tpl}")
            return
        if isinstance(tpl, (Globally, Eventually, Until)):
            ti, ii = tpl.interval, ins.interval  # type: ignore[union-attr]
            if float(ti.lo) != float(ii.lo):
                raise RequirementError("interval lower endpoint mismatch")
            if isinstance(ti.hi, Param):
                nu[ti.hi.name] = float(ii.hi)  # type: ignore[arg-type]
            elif float(ti.hi) != float(ii.hi):  # type: ignore[arg-type]
                raise RequirementError("interval upper endpoint mismatch")
        if isinstance(tpl, (Not, Globally, Eventually)):
            walk(tpl.arg, ins.arg)  # type: ignore[union-attr]
        elif isinstance(tpl, (And, Or, Implies, Until)):
            walk(tpl.left, ins.left)  # type: ignore[union-attr]
            walk(tpl.right, ins.right)  # type: ignore[union-attr]

    walk(phi_template, phi)
    return nu


@dataclass(frozen=True)
class RequirementSpace:
    """A PSTL template bounded by minimal/optimal valuations, plus the
    currently enforced one."""

    formula: Formula
    polarity: dict[str, Polarity]
    nu_min: Valuation
    nu_opt: Valuation
    nu_curr: Valuation
    name: str = "requirement"
    time_grid: float | None = None  # time-parameter enumeration step (seconds)
    param_kinds: dict[str, ParamKind] = field(default_factory=dict)

    def __post_init__(self):
        kinds = parameters(self.formula)
        object.__setattr__(self, "param_kinds", kinds)
        for nu in (self.nu_min, self.nu_opt, self.nu_curr):
            if set(nu) != set(kinds):
                raise RequirementError(
                    f"valuation parameters {sorted(nu)} do not match formula "
                    f"parameters {sorted(kinds)}"
                )
        if set(self.polarity) != set(kinds):
            raise RequirementError("polarity must be declared for every parameter")
        if not valuation_leq(self.nu_min, self.nu_opt, self.polarity):
            raise RequirementError("nu_min must be weaker than (or equal to) nu_opt")
        if not valuation_leq(self.nu_min, self.nu_curr, self.polarity):
            raise RequirementError("nu_curr lies below the minimal requirement")
        if not valuation_leq(self.nu_curr, self.nu_opt, self.polarity):
            raise RequirementError("nu_curr lies above the optimal requirement")
        self._validate_polarity_empirically()

    # -- construction-time sanity --------------------------------------------

    def _validate_polarity_empirically(self, n_signals: int = 40, seed: int = 0):
        """Reject declared polarities that robustness monotonicity contradicts
        on randomized signals."""
        rng = np.random.default_rng(seed)
        variables = signal_variables(self.formula) or ("x",)
        widest = {
            k: max(self.nu_min[k], self.nu_opt[k]) for k in self.param_kinds
        }
        try:
            from .formula import formula_horizon

            horizon_steps = int(np.ceil(formula_horizon(
                instantiate(self.formula, widest)))) + 2
        except (FormulaError, RequirementError):
            horizon_steps = 8
        horizon_steps = max(horizon_steps, 4)
        for _ in range(n_signals):
            n = horizon_steps + rng.integers(1, 6)
            samples = rng.normal(0.0, 50.0, size=(int(n), len(variables)))
            s = Signal(1.0, tuple(variables), samples)
            for p in self.param_kinds:
                lo, hi = sorted((self.nu_min[p], self.nu_opt[p]))
                if hi - lo < 1e-12:
                    continue
                weak, strong = dict(self.nu_opt), dict(self.nu_opt)
                weak[p], strong[p] = self.nu_min[p], self.nu_opt[p]
                try:
                    r_weak = robustness(instantiate(self.formula, weak), s)
                    r_strong = robustness(instantiate(self.formula, strong), s)
                except (FormulaError, RequirementError):
                    continue
                if r_weak.defined and r_strong.defined \
                        and r_weak.value < r_strong.value - 1e-9:
                    raise RequirementError(
                        f"declared polarity of parameter ${p} contradicts robustness "
                        f"monotonicity on a sampled signal"
                    )

    # -- derived requirements -------------------------------------------------

    def minimal(self) -> Formula:
        return instantiate(self.formula, self.nu_min)

    def optimal(self) -> Formula:
        return instantiate(self.formula, self.nu_opt)

    def current(self) -> Formula:
        return instantiate(self.formula, self.nu_curr)

    def with_current(self, nu: Mapping[str, float]) -> "RequirementSpace":
        return RequirementSpace(self.formula, self.polarity, self.nu_min,
                                self.nu_opt, dict(nu), self.name, self.time_grid)

    def box(self, p: str) -> tuple[float, float]:
        """Numeric (lower, upper) bounds of parameter ``p`` regardless of
        polarity direction."""
        return (min(self.nu_min[p], self.nu_opt[p]),
                max(self.nu_min[p], self.nu_opt[p]))


def weaker_than(phi1: Formula, phi2: Formula, space: RequirementSpace) -> bool:
    """Is ``phi1`` weaker than ``phi2``? Both must instantiate the space's
    template; decided by the polarity order on their valuations."""
    nu1 = extract_valuation(space.formula, phi1)
    nu2 = extract_valuation(space.formula, phi2)
    return valuation_leq(nu1, nu2, space.polarity)


def degree_of_weakening(phi1: Formula, phi2: Formula, s: Signal, t: float = None) -> float:  # type: ignore[assignment]
    """rho(phi2) - rho(phi1); positive when phi2 is the weaker formula."""
    r1, r2 = robustness(phi1, s, t), robustness(phi2, s, t)
    if not (r1.defined and r2.defined):
        raise RequirementError("degree of weakening needs both robustnesses defined")
    return r2.value - r1.value


def degree_of_strengthening(phi1: Formula, phi2: Formula, s: Signal, t: float = None) -> float:  # type: ignore[assignment]
    """rho(phi1) - rho(phi2); the exact negation of the weakening degree."""
    return -degree_of_weakening(phi1, phi2, s, t)


def in_validity_domain(nu: Mapping[str, float], phi: Formula,
                       space: RequirementSpace, s: Signal, t: float = None) -> bool:  # type: ignore[assignment]
    """Membership of (t, nu) in the bounded validity domain d(s, phi)."""
    inst = instantiate(phi, nu)
    return (
        valuation_leq(space.nu_min, dict(nu), space.polarity)
        and valuation_leq(dict(nu), space.nu_opt, space.polarity)
        and satisfies(inst, s, t)
    )


# -- requirement-space file format --------------------------------------------

def load_requirement_space(path: str) -> RequirementSpace:
    """Load a requirement-space JSON file.

    Schema: ``{"name": ..., "formula": <PSTL text>, "time_grid": seconds?,
    "parameters": [{"name", "kind", "polarity", "min", "opt", "initial"}]}``
    """
    with open(path) as fh:
        doc = json.load(fh)
    return requirement_space_from_dict(doc)


def requirement_space_from_dict(doc: dict) -> RequirementSpace:
    try:
        phi = parse_pstl(doc["formula"])
        entries = doc["parameters"]
    except KeyError as exc:
        raise RequirementError(f"requirement space missing field {exc}") from None
    kinds = parameters(phi)
    polarity: dict[str, Polarity] = {}
    nu_min: Valuation = {}
    nu_opt: Valuation = {}
    nu_curr: Valuation = {}
    for e in entries:
        name = e["name"]
        if name not in kinds:
            raise RequirementError(f"parameter ${name} does not occur in the formula")
        declared = ParamKind(e.get("kind", kinds[name].value))
        if declared is not kinds[name]:
            raise RequirementError(
                f"parameter ${name} is a {kinds[name].value} parameter by position"
            )
        polarity[name] = (
            Polarity.STRENGTHENS_WHEN_INCREASED
            if str(e["polarity"]).lower() in ("increase", "strengthens_when_increased")
            else Polarity.STRENGTHENS_WHEN_DECREASED
        )
        nu_min[name] = float(e["min"])
        nu_opt[name] = float(e["opt"])
        nu_curr[name] = float(e.get("initial", e["opt"]))
    return RequirementSpace(
        formula=phi,
        polarity=polarity,
        nu_min=nu_min,
        nu_opt=nu_opt,
        nu_curr=nu_curr,
        name=doc.get("name", "requirement"),
        time_grid=doc.get("time_grid"),
    )
