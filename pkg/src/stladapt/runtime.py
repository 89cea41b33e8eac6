"""The per-cycle adaptation loop.

Designated environment actions act as proxy triggers: members of ``a_degrade``
start a weakening solve, members of ``a_restore`` a strengthening solve;
between events the loop re-plans system actions under the unchanged
requirement in a receding horizon (first action emitted, remainder retained).
On solver failure the previous requirement is kept and a noop plan emitted.

``check_trigger`` additionally exposes the quantified trigger conditions
(can the environment force a violation / can the system always recover) as a
bounded enumeration — an offline validation tool, far too slow for the hot
path.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .adapt import (
    DEGRADE as MODE_DEGRADE,
    RECOVER as MODE_RECOVER,
    AdaptError,
    SolveResult,
    horizon_steps,
    simulate_plan,
    solve_adaptation,
    solve_replan,
)
from .envmodel import NOOP, TransitionSystem
from .milp import SolveStatus
from .requirement import RequirementSpace, Valuation
from .semantics import robustness
from .signal import Signal

DEGRADE = "DEGRADE"
RESTORE = "RESTORE"


@dataclass(frozen=True)
class AdaptationEvent:
    kind: str  # DEGRADE | RESTORE
    action_name: str
    timestamp: float


@dataclass
class AdaptationRecord:
    time: float
    event: str            # triggering env action, or "" for a plain re-plan
    nu_before: Valuation
    nu_after: Valuation
    delta: float | None   # degree of weakening/strengthening, None on failure
    robustness: float | None
    solve_ms: float
    status: str


def detect(events_in: Iterable[str], a_degrade: frozenset | set,
           a_restore: frozenset | set, timestamp: float = 0.0
           ) -> list[AdaptationEvent]:
    """Classify a FIFO queue of environment-action names into adaptation
    events; unregistered actions are ignored."""
    overlap = set(a_degrade) & set(a_restore)
    if overlap:
        raise AdaptError(f"actions registered as both kinds: {sorted(overlap)}")
    out = []
    for name in events_in:
        if name in a_degrade:
            out.append(AdaptationEvent(DEGRADE, name, timestamp))
        elif name in a_restore:
            out.append(AdaptationEvent(RESTORE, name, timestamp))
    return out


def check_trigger(space: RequirementSpace, ts: TransitionSystem,
                  q0: Mapping[str, float], mode: str, depth: int,
                  max_rollouts: int = 200_000) -> bool:
    """Quantified trigger conditions by bounded enumeration.

    DEGRADE: some environment sequence (up to ``depth`` steps) defeats every
    system response. RECOVER: every environment sequence admits a satisfying
    system response. Environment options per step are "no event" or any single
    environment action; system sequences run to the requirement horizon.
    """
    if mode not in (MODE_DEGRADE, MODE_RECOVER):
        raise AdaptError(f"unknown trigger mode {mode!r}")
    phi = space.current()
    n = max(depth, horizon_steps(phi, ts.sample_period))
    env_opts = [""] + [a.name for a in ts.env_actions]
    sys_opts = [a.name for a in ts.sys_actions] or [NOOP]
    total = (len(env_opts) ** depth) * (len(sys_opts) ** n)
    if total > max_rollouts:
        raise AdaptError(
            f"enumeration needs {total} rollouts (limit {max_rollouts}); "
            "reduce depth")

    def satisfied(env_seq, sys_seq) -> bool:
        steps = []
        for i in range(n):
            e = env_seq[i] if i < len(env_seq) else ""
            steps.append((e, sys_seq[i]) if e else sys_seq[i])
        s = ts.rollout(dict(q0), steps)
        r = robustness(phi, s)
        return r.defined and r.value >= 0.0

    for env_seq in itertools.product(env_opts, repeat=depth):
        some_sys_satisfies = any(
            satisfied(env_seq, sys_seq)
            for sys_seq in itertools.product(sys_opts, repeat=n))
        if mode == MODE_DEGRADE and not some_sys_satisfies:
            return True   # this environment behavior defeats every response
        if mode == MODE_RECOVER and not some_sys_satisfies:
            return False
    return mode == MODE_RECOVER


class AdaptationLoop:
    """Receding-horizon controller that owns the requirement space."""

    def __init__(self, space: RequirementSpace, ts: TransitionSystem,
                 a_degrade: Iterable[str] = (), a_restore: Iterable[str] = (),
                 budget_ms: float | None = None, buffer_len: int = 1,
                 plan_actions=None, solver_opts: dict | None = None,
                 replan_opts: dict | None = None, auto_recover: bool = True):
        self.space = space
        self.ts = ts
        self.a_degrade = frozenset(a_degrade)
        self.a_restore = frozenset(a_restore)
        if self.a_degrade & self.a_restore:
            raise AdaptError("degradation and restoration events must be disjoint")
        for name in self.a_degrade | self.a_restore:
            if ts.action(name).kind != "env":
                raise AdaptError(f"proxy event {name!r} is not an environment action")
        self.budget_ms = budget_ms
        self.buffer_len = max(1, buffer_len)
        self.plan_actions = plan_actions
        self.solver_opts = dict(solver_opts or {})
        self.replan_opts = dict(replan_opts or {})
        self.auto_recover = auto_recover
        self.phase = "nominal"  # nominal | degraded | recovering
        self.buffer: list[dict] = []
        self.buffer_start = 0.0
        self.pending_plan: list[str] = []
        self.log: list[AdaptationRecord] = []
        self.solve_times_ms: list[float] = []

    # -- helpers ------------------------------------------------------------------

    def _observed(self) -> Signal:
        names = self.ts.var_names
        rows = np.array([[q[v] for v in names] for q in self.buffer])
        return Signal(self.ts.sample_period, names, rows,
                      start_time=self.buffer_start)

    def _plan_still_works(self, obs: Signal) -> bool:
        """Receding-horizon shortcut: keep the pending plan when its noop-padded
        continuation still satisfies the current requirement."""
        n_pred = max(0, horizon_steps(self.space.current(), self.ts.sample_period)
                     - (len(obs) - 1))
        plan = (self.pending_plan + [NOOP] * n_pred)[:n_pred]
        s = simulate_plan(self.ts, obs, plan)
        if s is None:
            return False
        r = robustness(self.space.current(), s)
        if r.defined and r.value >= 0.0:
            self.pending_plan = plan
            return True
        return False

    def _record(self, now: float, event: str, nu_before: Valuation,
                res: SolveResult):
        self.log.append(AdaptationRecord(
            now, event, dict(nu_before), dict(self.space.nu_curr),
            res.objective_value, res.robustness_new, res.solve_ms,
            res.status.name))

    def _adapt(self, mode: str, event: AdaptationEvent, now: float):
        obs = self._observed()
        nu_before = dict(self.space.nu_curr)
        res = solve_adaptation(self.space, self.ts, obs, mode,
                               event=self.ts.action(event.action_name),
                               budget_ms=self.budget_ms,
                               plan_actions=self.plan_actions,
                               **self.solver_opts)
        self.solve_times_ms.append(res.solve_ms)
        self.phase = "degraded" if mode == MODE_DEGRADE else "recovering" 
        if res.ok:
            self.space = self.space.with_current(res.valuation)
            self.pending_plan = list(res.plan)
        else:
            self.pending_plan = []  # keep requirement; fall back to noop
        self._record(now, event.action_name, nu_before, res)

    def _at_optimum(self) -> bool:
        return all(abs(self.space.nu_curr[p] - self.space.nu_opt[p]) <= 1e-9
                   for p in self.space.nu_curr)

    def _replan(self, now: float):
        obs = self._observed()
        if self.auto_recover and self.phase == "recovering":
            if self._at_optimum():
                self.phase = "nominal"
            else:
                # keep strengthening after a restoration until back at optimum
                nu_before = dict(self.space.nu_curr)
                res = solve_adaptation(self.space, self.ts, obs, MODE_RECOVER,
                                       budget_ms=self.budget_ms,
                                       plan_actions=self.plan_actions,
                                       **self.solver_opts)
                self.solve_times_ms.append(res.solve_ms)
                if res.ok and res.objective_value > 1e-12:
                    self.space = self.space.with_current(res.valuation)
                    self.pending_plan = list(res.plan)
                    self._record(now, "", nu_before, res)
                    return
        # skip solving while the pending plan (or just idling) still satisfies
        if self._plan_still_works(obs):
            return
        res = solve_replan(self.space, self.ts, obs, budget_ms=self.budget_ms,
                           plan_actions=self.plan_actions, **self.replan_opts)
        self.solve_times_ms.append(res.solve_ms)
        self.pending_plan = list(res.plan) if res.ok else []
        if not res.ok:
            self._record(now, "", self.space.nu_curr, res)

    # -- the cycle ----------------------------------------------------------------

    def cycle(self, observation: Mapping[str, float], events: Sequence[str] = (),
              now: float = 0.0) -> str:
        """Ingest one observation and event queue; return the action to apply."""
        if not self.buffer:
            self.buffer_start = now
        self.buffer.append(dict(observation))
        if len(self.buffer) > self.buffer_len:
            drop = len(self.buffer) - self.buffer_len
            self.buffer = self.buffer[drop:]
            self.buffer_start += drop * self.ts.sample_period
        evts = detect(events, self.a_degrade, self.a_restore, now)
        # safety first: weakest point drives the requirement before any restore
        for e in sorted(evts, key=lambda e: 0 if e.kind == DEGRADE else 1):
            mode = MODE_DEGRADE if e.kind == DEGRADE else MODE_RECOVER
            self._adapt(mode, e, now)
        if not evts:
            self._replan(now)
        if self.pending_plan:
            action = self.pending_plan.pop(0)
        else:
            action = NOOP
        return action

    def write_log(self, path: str):
        params = sorted(self.space.nu_curr)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cycle_time", "event",
                        *[f"{p}_before" for p in params],
                        *[f"{p}_after" for p in params],
                        "delta", "robustness", "solve_ms", "status"])
            for r in self.log:
                w.writerow([r.time, r.event,
                            *[r.nu_before[p] for p in params],
                            *[r.nu_after[p] for p in params],
                            "" if r.delta is None else r.delta,
                            "" if r.robustness is None else r.robustness,
                            r.solve_ms, r.status])
