"""Requirement adaptation: pick a weakened (or re-strengthened) valuation and
a system-action plan that keeps the adapted requirement satisfied on the
predicted continuation of the trace.

Both directions minimize ``rho(phi(nu')) - rho(phi(nu_curr))`` on the shared
predicted signal, subject to ``rho(phi(nu')) >= margin``:

* degradation searches the box between the minimal and the current valuation
  and reports the degree of weakening (the minimized difference);
* recovery searches the box between the current and the optimal valuation and
  reports the degree of strengthening (its negation).

Value parameters are continuous decision variables inside the MILP; time
parameters are enumerated over a grid (strongest candidate first) because a
window endpoint changes the encoding's structure, not its coefficients.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .encoding import DecisionSignal, encode_robustness
from .envmodel import NOOP, Action, TransitionSystem
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
    Pred,
    Until,
    formula_horizon,
    signal_variables,
)
from .milp import MilpError, MilpProblem, SolveStatus, branch_and_bound
from .requirement import (
    ParamKind,
    Polarity,
    RequirementSpace,
    Valuation,
    instantiate,
)
from .semantics import robustness
from .signal import Signal

FEAS_MARGIN = 1e-7

DEGRADE = "degrade"
RECOVER = "recover"
REPLAN = "replan"


class AdaptError(ValueError):
    pass


@dataclass
class SolveResult:
    """Outcome of one adaptation solve."""

    status: SolveStatus
    mode: str
    valuation: Valuation | None = None
    plan: list[str] | None = None
    objective_value: float | None = None  # degree of weakening/strengthening
    robustness_new: float | None = None   # rho of the adapted requirement
    predicted: Signal | None = None       # observed prefix + planned suffix
    solve_ms: float = 0.0
    nodes: int = 0
    lookahead: float = 0.0                # tie-break: rho one cycle ahead

    @property
    def ok(self) -> bool:
        return self.status != SolveStatus.INFEASIBLE and self.valuation is not None


def substitute_time_params(phi: Formula, nu: Mapping[str, float]) -> Formula:
    """Fix only the interval parameters named in ``nu``; predicate-bound
    parameters stay symbolic."""
    def walk(node: Formula) -> Formula:
        if isinstance(node, Pred):
            return node
        if isinstance(node, Not):
            return Not(walk(node.arg))
        if isinstance(node, And):
            return And(walk(node.left), walk(node.right))
        if isinstance(node, Or):
            return Or(walk(node.left), walk(node.right))
        if isinstance(node, Implies):
            return Implies(walk(node.left), walk(node.right))
        iv = node.interval
        if not isinstance(iv.hi, (int, float)) and iv.hi.name in nu:
            hi = float(nu[iv.hi.name])
            if hi < float(iv.lo):
                raise AdaptError(f"interval [{iv.lo}, {hi}] inverted")
            iv = Interval(iv.lo, hi)
        if isinstance(node, Globally):
            return Globally(iv, walk(node.arg))
        if isinstance(node, Eventually):
            return Eventually(iv, walk(node.arg))
        if isinstance(node, Until):
            return Until(iv, walk(node.left), walk(node.right))
        raise FormulaError(f"unknown formula node {type(node).__name__}")

    return walk(phi)


def mode_box(space: RequirementSpace, mode: str) -> dict[str, tuple[float, float]]:
    """Numeric (lo, hi) search interval per parameter for the given mode."""
    box = {}
    for p in space.param_kinds:
        if mode == DEGRADE:
            ends = (space.nu_min[p], space.nu_curr[p])
        elif mode == RECOVER:
            ends = (space.nu_curr[p], space.nu_opt[p])
        elif mode == REPLAN:
            ends = (space.nu_curr[p], space.nu_curr[p])
        else:
            raise AdaptError(f"unknown mode {mode!r}")
        box[p] = (min(ends), max(ends))
    return box


def strongest_value(space: RequirementSpace, p: str, lo: float, hi: float) -> float:
    return hi if space.polarity[p] is Polarity.STRENGTHENS_WHEN_INCREASED else lo


def weakest_value(space: RequirementSpace, p: str, lo: float, hi: float) -> float:
    return lo if space.polarity[p] is Polarity.STRENGTHENS_WHEN_INCREASED else hi


def time_candidates(space: RequirementSpace, mode: str,
                    dt: float) -> list[Valuation]:
    """Grid over the time parameters, strongest combination first."""
    box = mode_box(space, mode)
    step = space.time_grid if space.time_grid else dt
    per_param: list[list[tuple[str, float]]] = []
    for p, kind in space.param_kinds.items():
        if kind is not ParamKind.TIME:
            continue
        lo, hi = box[p]
        vals = [lo + k * step for k in range(int(math.floor((hi - lo) / step + 1e-9)) + 1)]
        if not vals or vals[-1] < hi - 1e-9:
            vals.append(hi)
        if space.polarity[p] is Polarity.STRENGTHENS_WHEN_INCREASED:
            vals = vals[::-1]
        per_param.append([(p, v) for v in vals])
    if not per_param:
        return [{}]
    return [dict(combo) for combo in itertools.product(*per_param)]


def horizon_steps(phi: Formula, dt: float) -> int:
    return int(math.floor(formula_horizon(phi) / dt + 1e-9))


def simulate_plan(ts: TransitionSystem, observed: Signal, plan: Sequence[str],
                  event: Action | None = None) -> Signal | None:
    """Observed prefix extended by rolling the plan forward (event applied at
    the first planned step). Returns None when the plan is inapplicable — a
    chosen action's guard fails or a state variable saturates — since such a
    trajectory is outside the optimizer's feasible set."""
    q = observed.sample_dict(len(observed) - 1)
    rows = [np.array([observed.value_at(v, i) for v in ts.var_names])
            for i in range(len(observed))]
    clamp_log: list = []
    for i, name in enumerate(plan):
        act = ts.action(name)
        if act.guard is not None and act.guard.evaluate(q) < 0:
            return None
        step_actions = (event.name, name) if (event is not None and i == 0) else name
        q = ts.step(q, step_actions, clamp_log)
        if clamp_log:
            return None
        rows.append(np.array([q[v] for v in ts.var_names]))
    return Signal(ts.sample_period, ts.var_names, np.array(rows),
                  start_time=observed.start_time)


def _delta(space: RequirementSpace, nu_new: Valuation, phi_curr: Formula,
           s: Signal) -> tuple[float, float] | None:
    """(rho(phi(nu_new)), weakening degree) on ``s``; None if undefined."""
    r_new = robustness(instantiate(space.formula, nu_new), s)
    r_curr = robustness(phi_curr, s)
    if not (r_new.defined and r_curr.defined):
        return None
    return r_new.value, r_new.value - r_curr.value


def _lookahead_score(space: RequirementSpace, nu: Valuation,
                     ts: TransitionSystem, s: Signal) -> float:
    """Robustness of the adapted requirement evaluated one cycle ahead,
    assuming the system then idles.

    Pinned observations cap robustness at the current instant, so candidates
    that differ only in how well they position the system for the next cycle
    would otherwise tie; this score orders them.
    """
    phi = instantiate(space.formula, nu)
    hs = horizon_steps(phi, ts.sample_period)
    if len(s) < 2 or hs == 0:
        return 0.0
    ext = simulate_plan(ts, s, [NOOP] * hs)
    if ext is None:
        return -math.inf
    r = robustness(phi, ext, t=ext.start_time + ext.sample_period)
    return r.value if r.defined else -math.inf


def _heuristic_incumbent(space, ts, observed, mode, event, tv, phi_curr,
                         n_pred, plan_actions, box,
                         margin) -> SolveResult | None:
    """Cheap feasible solutions: constant-action plans with the strongest
    feasible value parameters found by bisection."""
    value_params = [p for p, k in space.param_kinds.items()
                    if k is ParamKind.VALUE]
    best: SolveResult | None = None
    for act in plan_actions:
        plan = [act.name] * n_pred
        s = simulate_plan(ts, observed, plan, event)
        if s is None:
            continue
        nu = dict(tv)
        nu.update({p: space.nu_curr[p] for p in space.param_kinds if p not in nu})
        # start from the weakest corner, then tighten one parameter at a time
        for p in value_params:
            nu[p] = weakest_value(space, p, *box[p])
        ok = _delta(space, nu, phi_curr, s)
        if ok is None or ok[0] < margin:
            continue
        for p in value_params:
            weak, strong = nu[p], strongest_value(space, p, *box[p])
            probe = dict(nu, **{p: strong})
            res = _delta(space, probe, phi_curr, s)
            if res is not None and res[0] >= margin:
                nu[p] = strong
                continue
            for _ in range(50):
                mid = 0.5 * (weak + strong)
                probe = dict(nu, **{p: mid})
                res = _delta(space, probe, phi_curr, s)
                if res is not None and res[0] >= margin:
                    weak = mid
                else:
                    strong = mid
            nu[p] = weak
        scored = _delta(space, nu, phi_curr, s)
        if scored is None:
            continue
        cand = SolveResult(SolveStatus.OPTIMAL, mode, nu, list(plan),
                           scored[1], scored[0], s,
                           lookahead=_lookahead_score(space, nu, ts, s))
        if best is None or _better(cand, best, mode):
            best = cand
    return best


def solve_adaptation(space: RequirementSpace, ts: TransitionSystem,
                     observed: Signal, mode: str,
                     event: Action | None = None,
                     budget_ms: float | None = None,
                     plan_actions: Sequence[Action] | None = None,
                     margin: float = FEAS_MARGIN,
                     use_milp: bool = True,
                     first_feasible: bool = False) -> SolveResult:
    """One adaptation solve; see the module docstring for the objective.

    ``use_milp=False`` keeps only the cheap rollout heuristic (sound but
    possibly suboptimal); ``first_feasible`` stops the time-parameter
    enumeration at the first satisfiable candidate (optimal when the first
    candidate is the current valuation, a sound approximation otherwise)."""
    t_start = time.monotonic()
    deadline = None if budget_ms is None else t_start + budget_ms / 1000.0
    if plan_actions is None:
        plan_actions = list(ts.sys_actions)
    if not any(a.name == "noop" for a in plan_actions):
        raise AdaptError("plan actions must include the designated noop")
    box = mode_box(space, mode)
    phi_curr = space.current()
    dt = ts.sample_period
    n_obs = len(observed)

    best: SolveResult | None = None
    truncated = False
    total_nodes = 0
    for tv in time_candidates(space, mode, dt):
        if deadline is not None and time.monotonic() >= deadline:
            truncated = True
            break
        try:
            tpl = substitute_time_params(space.formula, tv)
        except AdaptError:
            continue  # grid point inverts an interval
        hs = max(horizon_steps(tpl, dt), horizon_steps(phi_curr, dt))
        n_pred = max(0, hs - (n_obs - 1))

        incumbent = _heuristic_incumbent(space, ts, observed, mode, event, tv,
                                         phi_curr, n_pred, plan_actions, box,
                                         margin)
        if not use_milp:
            if incumbent is not None and (best is None or _better(incumbent, best, mode)):
                best = incumbent
            if first_feasible and best is not None:
                break
            continue

        prob = MilpProblem()
        value_vars = {}
        for p, kind in space.param_kinds.items():
            if kind is ParamKind.VALUE:
                lo, hi = box[p]
                value_vars[p] = (prob.add_var(f"nu_{p}", lo, hi), lo, hi)
        needed = set(signal_variables(tpl)) | set(signal_variables(phi_curr))
        env_schedule = {n_obs: [event]} if (event is not None and n_pred > 0) else None
        dec = DecisionSignal(prob, ts, [observed.sample_dict(i) for i in range(n_obs)],
                             n_pred, plan_actions, env_schedule, needed)
        r_new, _ = encode_robustness(tpl, prob, dec, 0, value_vars, label="rn")
        prob.add_constraint(dict(r_new.expr.coeffs), ">=", margin - r_new.expr.const)
        if mode == REPLAN:
            delta_expr = r_new.expr.negated()  # minimize -rho == maximize rho
        else:
            r_curr, _ = encode_robustness(phi_curr, prob, dec, 0, label="rc")
            delta_expr = r_new.expr.add(r_curr.expr, -1.0)
        prob.set_objective(dict(delta_expr.coeffs), delta_expr.const, minimize=True)

        cutoff = None
        if incumbent is not None:
            inc_internal = (-incumbent.robustness_new if mode == REPLAN
                            else incumbent.objective_value)
            cutoff = inc_internal - delta_expr.const
        remaining = None
        if deadline is not None:
            remaining = max(1.0, (deadline - time.monotonic()) * 1000.0)
        try:
            bnb = branch_and_bound(prob, budget_ms=remaining, cutoff=cutoff)
        except MilpError:
            # numerically stuck relaxation: keep whatever the heuristic found
            truncated = True
            if incumbent is not None and (best is None or _better(incumbent, best, mode)):
                best = incumbent
            continue
        total_nodes += bnb.nodes
        if bnb.status == SolveStatus.BUDGET_EXCEEDED:
            truncated = True

        cand = incumbent
        if bnb.x is not None:
            nu = dict(tv)
            nu.update({p: space.nu_curr[p] for p in space.param_kinds if p not in nu})
            for p, (idx, lo, hi) in value_vars.items():
                nu[p] = float(min(max(bnb.x[idx], lo), hi))
            plan = dec.plan_from_solution(bnb.x)
            s = simulate_plan(ts, observed, plan, event)
            if s is not None:
                res = _delta(space, nu, phi_curr, s)
                if res is not None and res[0] >= -1e-9:
                    r_val, delta = res
                    cand_milp = SolveResult(SolveStatus.OPTIMAL, mode, nu, plan,
                                            delta, r_val, s,
                                            lookahead=_lookahead_score(space, nu, ts, s))
                    if cand is None or _better(cand_milp, cand, mode):
                        cand = cand_milp
        if cand is not None and (best is None or _better(cand, best, mode)):
            best = cand
        if first_feasible and best is not None:
            break

    ms = (time.monotonic() - t_start) * 1000.0
    if best is None:
        status = SolveStatus.BUDGET_EXCEEDED if truncated else SolveStatus.INFEASIBLE
        return SolveResult(status, mode, solve_ms=ms, nodes=total_nodes)
    if mode == RECOVER:
        best.objective_value = -best.objective_value  # degree of strengthening
    best.status = SolveStatus.BUDGET_EXCEEDED if truncated else SolveStatus.OPTIMAL
    best.solve_ms = ms
    best.nodes = total_nodes
    return best


def _better(a: SolveResult, b: SolveResult, mode: str) -> bool:
    """Strictly better internal objective (weakening degree, or -rho for
    replanning); ties go to the candidate better positioned one cycle ahead,
    and remaining ties keep the earlier — stronger — candidate."""
    if mode == REPLAN:
        primary = a.robustness_new - b.robustness_new
    else:
        primary = b.objective_value - a.objective_value
    if abs(primary) > 1e-9:
        return primary > 0
    return a.lookahead > b.lookahead + 1e-9


def solve_degradation(space, ts, observed, event=None, **kw) -> SolveResult:
    return solve_adaptation(space, ts, observed, DEGRADE, event, **kw)


def solve_recovery(space, ts, observed, event=None, **kw) -> SolveResult:
    return solve_adaptation(space, ts, observed, RECOVER, event, **kw)


def solve_replan(space, ts, observed, event=None, **kw) -> SolveResult:
    return solve_adaptation(space, ts, observed, REPLAN, event, **kw)


# -- brute-force reference --------------------------------------------------------


def enumerate_adaptation(space: RequirementSpace, ts: TransitionSystem,
                         observed: Signal, mode: str,
                         event: Action | None = None,
                         n_value: int = 9,
                         plan_actions: Sequence[Action] | None = None,
                         margin: float = 0.0) -> SolveResult:
    """Exhaustive search over value-parameter grids and all action plans,
    scored directly with the robustness evaluator. Exponential — a reference
    implementation for small instances, not a solver."""
    if plan_actions is None:
        plan_actions = list(ts.sys_actions)
    box = mode_box(space, mode)
    phi_curr = space.current()
    dt = ts.sample_period
    n_obs = len(observed)
    best: SolveResult | None = None
    for tv in time_candidates(space, mode, dt):
        try:
            tpl = substitute_time_params(space.formula, tv)
        except AdaptError:
            continue
        hs = max(horizon_steps(tpl, dt), horizon_steps(phi_curr, dt))
        n_pred = max(0, hs - (n_obs - 1))
        grids = []
        for p, kind in space.param_kinds.items():
            if kind is not ParamKind.VALUE:
                continue
            weak = weakest_value(space, p, *box[p])
            strong = strongest_value(space, p, *box[p])
            grids.append([(p, float(v))
                          for v in np.linspace(strong, weak, n_value)])
        value_combos = ([{}] if not grids else
                        [dict(c) for c in itertools.product(*grids)])
        names = [a.name for a in plan_actions]
        for plan in itertools.product(names, repeat=n_pred):
            s = simulate_plan(ts, observed, plan, event)
            if s is None:
                continue
            for combo in value_combos:
                nu = dict(tv)
                nu.update(combo)
                nu.update({p: space.nu_curr[p]
                           for p in space.param_kinds if p not in nu})
                res = _delta(space, nu, phi_curr, s)
                if res is None or res[0] < margin:
                    continue
                cand = SolveResult(SolveStatus.OPTIMAL, mode, nu, list(plan),
                                   res[1], res[0], s,
                                   lookahead=_lookahead_score(space, nu, ts, s))
                if best is None or _better(cand, best, mode):
                    best = cand
    if best is None:
        return SolveResult(SolveStatus.INFEASIBLE, mode)
    if mode == RECOVER:
        best.objective_value = -best.objective_value
    return best
