"""Desk-scale UUV pipeline-inspection simulation.

A point-mass vehicle follows a seabed pipeline. Forward speed is proportional
to total thrust; depth is adjusted by dive/ascend actions; water visibility is
exogenous. Two monitored features, each with its own requirement space:

* visibility — whenever visibility drops below the contact threshold, regain
  proximity to the pipeline within a deadline (the deadline is the adaptable
  parameter, 5 s optimal to 15 s minimal);
* thruster — keep total thrust above a floor (100 N optimal to 50 N minimal).

Scheduled visibility drops and thruster failures arrive as environment events;
the ADAPTIVE policy runs one adaptation loop per feature, the BASELINE policy
applies fixed design-time reactions (dive a preset amount on visibility loss;
switch in the next spare thruster on failure) and never touches the
requirement spaces.
"""
from __future__ import annotations

import csv
import os
import statistics
from dataclasses import dataclass, field

import numpy as np

from .envmodel import Action, Effect, LinearExpr, StateVar, TransitionSystem
from .parser import parse_pstl
from .requirement import Polarity, RequirementSpace, Valuation, instantiate
from .runtime import AdaptationLoop, AdaptationRecord
from .semantics import robustness_series
from .signal import Signal

CYCLE_PERIOD = 0.5          # seconds; 2 Hz controller
N_THRUSTERS = 6
THRUST_RATING = 30.0        # newtons per thruster
VIS_CONTACT = 20.0          # visual-contact threshold (unitless index)
DIST_CONTACT = 10.0         # proximity-contact threshold (m)
SPEED_PER_NEWTON = 0.02     # m/s of forward speed per newton of thrust
DIVE_STEP = 1.0             # m of depth change per cycle under dive/ascend
BASELINE_DIVE_CYCLES = 4    # fixed design-time dive on visibility loss,
                            # sized for the nominal survey altitude

ADAPTIVE = "adaptive"
BASELINE = "baseline"

VIS_LOW = "vis_low"
VIS_IMPROVED = "vis_improved"


def fail_name(i: int) -> str:
    return f"thruster_failure_{i}"


def repair_name(i: int) -> str:
    return f"thruster_repair_{i}"


def build_uuv_model() -> tuple[TransitionSystem, RequirementSpace, RequirementSpace]:
    """The combined affine planning model plus the two requirement spaces."""
    variables = [
        StateVar("visibility", 0.0, 40.0, 30.0),
        StateVar("distance_to_pipeline", 0.0, 60.0, 5.0),
        StateVar("thrust", 0.0, N_THRUSTERS * THRUST_RATING, 120.0),
    ]
    actions = [
        Action("noop", "sys"),
        Action("dive", "sys", (Effect("distance_to_pipeline", "add", -DIVE_STEP),)),
        Action("ascend", "sys", (Effect("distance_to_pipeline", "add", DIVE_STEP),)),
        Action(VIS_LOW, "env", (Effect("visibility", "set", 10.0),)),
        Action(VIS_IMPROVED, "env", (Effect("visibility", "set", 30.0),)),
    ]
    thrust_sum = {}
    for i in range(1, N_THRUSTERS + 1):
        init_on = THRUST_RATING if i <= 4 else 0.0
        variables.append(StateVar(f"t{i}", 0.0, THRUST_RATING, init_on))
        variables.append(StateVar(f"h{i}", 0.0, 1.0, 1.0))
        thrust_sum[f"t{i}"] = 1.0
        actions.append(Action(
            f"enable_{i}", "sys", (Effect(f"t{i}", "set", THRUST_RATING),),
            guard=LinearExpr.make({f"h{i}": 1.0}, -1.0)))
        actions.append(Action(fail_name(i), "env",
                              (Effect(f"t{i}", "set", 0.0),
                               Effect(f"h{i}", "set", 0.0))))
        actions.append(Action(repair_name(i), "env",
                              (Effect(f"h{i}", "set", 1.0),)))
    ts = TransitionSystem(tuple(variables), tuple(actions), {},
                          {"thrust": LinearExpr.make(thrust_sum)}, CYCLE_PERIOD)
    vis_space = RequirementSpace(
        parse_pstl("G[0,1]((visibility < 20) -> "
                   "F[0,$tau](distance_to_pipeline < 10))"),
        {"tau": Polarity.STRENGTHENS_WHEN_DECREASED},
        nu_min={"tau": 15.0}, nu_opt={"tau": 5.0}, nu_curr={"tau": 5.0},
        name="visibility", time_grid=5.0,
    )
    thr_space = RequirementSpace(
        parse_pstl("G[0,1](thrust > $p)"),
        {"p": Polarity.STRENGTHENS_WHEN_INCREASED},
        nu_min={"p": 50.0}, nu_opt={"p": 100.0}, nu_curr={"p": 100.0},
        name="thruster",
    )
    return ts, vis_space, thr_space


# -- scenarios --------------------------------------------------------------------


@dataclass(frozen=True)
class UuvScenario:
    seed: int
    duration: float                       # seconds
    initial_position: tuple[float, float, float]
    pipeline: tuple[tuple[float, float, float], ...]
    initial_on: tuple[int, ...]
    # (cycle, event_name, value): value is the new visibility index
    visibility_events: tuple[tuple[int, str, float], ...]
    # (cycle, event_name, thruster index)
    thruster_events: tuple[tuple[int, str, int], ...]
    cycle_period: float = CYCLE_PERIOD

    @property
    def n_cycles(self) -> int:
        return int(self.duration / self.cycle_period)

    def events_at(self, cycle: int) -> list[tuple[str, float | int]]:
        out = [(n, v) for c, n, v in self.visibility_events if c == cycle]
        out += [(n, i) for c, n, i in self.thruster_events if c == cycle]
        return out


def generate_scenario(seed: int) -> UuvScenario:
    """Deterministic failure schedule and geometry from the seed: drop/failure
    times uniform over the episode, repair/improvement delays geometric."""
    rng = np.random.default_rng(seed)
    duration = float(rng.uniform(40.0, 70.0))
    n_cycles = int(duration / CYCLE_PERIOD)
    xs = np.arange(9) * 15.0
    zs = np.clip(22.0 + np.cumsum(rng.uniform(-6.0, 6.0, size=9)), 15.0, 35.0)
    pipeline = tuple((float(x), 0.0, float(z)) for x, z in zip(xs, zs))
    z0 = float(pipeline[0][2] - rng.uniform(2.0, 16.0))
    vis_events: list[tuple[int, str, float]] = []
    c = int(rng.uniform(5.0, 15.0) / CYCLE_PERIOD)
    while c < n_cycles - 10:
        vis_events.append((c, VIS_LOW, float(rng.uniform(5.0, 15.0))))
        c += 1 + int(rng.geometric(0.05))
        if c >= n_cycles:
            break
        vis_events.append((c, VIS_IMPROVED, float(rng.uniform(25.0, 35.0))))
        c += int(rng.uniform(10.0, 25.0) / CYCLE_PERIOD)
    thr_events: list[tuple[int, str, int]] = []
    c = int(rng.uniform(5.0, 20.0) / CYCLE_PERIOD)
    while c < n_cycles - 10:
        idx = int(rng.integers(1, 5))  # fail one of the initially-on thrusters
        thr_events.append((c, fail_name(idx), idx))
        c += 1 + int(rng.geometric(0.1))
        if c >= n_cycles:
            break
        thr_events.append((c, repair_name(idx), idx))
        c += int(rng.uniform(10.0, 25.0) / CYCLE_PERIOD)
    return UuvScenario(seed, duration, (0.0, 0.0, z0), pipeline, (1, 2, 3, 4),
                       tuple(vis_events), tuple(thr_events))


# -- world ------------------------------------------------------------------------


def point_to_polyline(p: np.ndarray, polyline: np.ndarray) -> float:
    """Minimum distance from a point to a piecewise-linear curve."""
    best = float("inf")
    for a, b in zip(polyline[:-1], polyline[1:]):
        ab = b - a
        t = float(np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0))
        best = min(best, float(np.linalg.norm(p - (a + t * ab))))
    return best


class UuvWorld:
    """Ground-truth simulator; richer than the affine planning model."""

    def __init__(self, scenario: UuvScenario):
        self.scenario = scenario
        self.position = np.array(scenario.initial_position, dtype=float)
        self.polyline = np.array(scenario.pipeline, dtype=float)
        self.visibility = 30.0
        self.on = set(scenario.initial_on)
        self.healthy = set(range(1, N_THRUSTERS + 1))
        self.inspected_m = 0.0

    @property
    def thrust(self) -> float:
        return THRUST_RATING * len(self.on & self.healthy)

    @property
    def distance(self) -> float:
        return point_to_polyline(self.position, self.polyline)

    @property
    def in_contact(self) -> bool:
        return self.visibility >= VIS_CONTACT or self.distance < DIST_CONTACT

    def apply_event(self, name: str, value):
        if name == VIS_LOW or name == VIS_IMPROVED:
            self.visibility = float(value)
        elif name.startswith("thruster_failure_"):
            self.healthy.discard(int(value))
            self.on.discard(int(value))  # a failed unit powers off; repair
            # makes it available again but the system must re-enable it
        elif name.startswith("thruster_repair_"):
            self.healthy.add(int(value))

    def observation(self) -> dict[str, float]:
        obs = {"visibility": self.visibility,
               "distance_to_pipeline": min(self.distance, 60.0),
               "thrust": self.thrust}
        for i in range(1, N_THRUSTERS + 1):
            active = i in self.on and i in self.healthy
            obs[f"t{i}"] = THRUST_RATING if active else 0.0
            obs[f"h{i}"] = 1.0 if i in self.healthy else 0.0
        return obs

    def pipeline_depth_at(self, x: float) -> float:
        return float(np.interp(x, self.polyline[:, 0], self.polyline[:, 2]))

    def step(self, vis_action: str, thr_action: str):
        contact_before = self.in_contact
        if vis_action == "dive":
            self.position[2] += DIVE_STEP
        elif vis_action == "ascend":
            self.position[2] = max(self.position[2] - DIVE_STEP, 0.0)
        if thr_action.startswith("enable_"):
            i = int(thr_action.rsplit("_", 1)[1])
            if i in self.healthy:
                self.on.add(i)
        # cruise speed saturates at the nominal four-thruster output
        dx = SPEED_PER_NEWTON * min(self.thrust, 120.0) * CYCLE_PERIOD
        self.position[0] += dx
        # collision avoidance keeps the vehicle above the pipeline, so diving
        # always closes the vertical gap and ascending always opens it
        floor = self.pipeline_depth_at(self.position[0]) - 1.0
        self.position[2] = min(self.position[2], floor)
        if contact_before:
            self.inspected_m += dx


# -- policies ---------------------------------------------------------------------


class BaselinePolicy:
    """Fixed design-time reactions; never reads the requirement spaces."""

    def __init__(self, ts: TransitionSystem):
        self.ts = ts
        self.dive_budget = 0

    def act(self, world: UuvWorld, events) -> tuple[str, str]:
        thr_action = "noop"
        for name, value in events:
            if name == VIS_LOW:
                self.dive_budget = BASELINE_DIVE_CYCLES
            elif name.startswith("thruster_failure_"):
                spares = sorted(world.healthy - world.on)
                if spares:
                    thr_action = f"enable_{spares[0]}"
            elif name.startswith("thruster_repair_"):
                thr_action = f"enable_{int(value)}"
        vis_action = "noop"
        if self.dive_budget > 0:
            vis_action = "dive"
            self.dive_budget -= 1
        return vis_action, thr_action


class AdaptivePolicy:
    """One adaptation loop per feature over the shared planning model."""

    def __init__(self, ts: TransitionSystem, vis_space: RequirementSpace,
                 thr_space: RequirementSpace, budget_ms: float | None = None):
        replan_opts = {"use_milp": False, "first_feasible": True}
        # A 3-sample buffer keeps each instant of the 1 s always-window under
        # evaluation for a full cycle after conditions change, so deadlines
        # incurred during a visibility drop remain binding briefly after the
        # water clears instead of being dropped with the trigger condition.
        # (The thruster requirement has no nested deadline, and its 1 s horizon
        # leaves no planning room behind a longer buffer, so it evaluates at
        # the current instant.)
        # Deadline horizons up to 15 s make the visibility encodings too large
        # for exact search at 2 Hz; its loop uses the constant-plan heuristic.
        self.vis_loop = AdaptationLoop(
            vis_space, ts, a_degrade={VIS_LOW}, a_restore={VIS_IMPROVED},
            budget_ms=budget_ms, buffer_len=3,
            plan_actions=[ts.action("noop"), ts.action("dive"), ts.action("ascend")],
            solver_opts=replan_opts, replan_opts=replan_opts)
        thr_plan = [ts.action("noop")] + [ts.action(f"enable_{i}")
                                          for i in range(1, N_THRUSTERS + 1)]
        self.thr_loop = AdaptationLoop(
            thr_space, ts,
            a_degrade={fail_name(i) for i in range(1, N_THRUSTERS + 1)},
            a_restore={repair_name(i) for i in range(1, N_THRUSTERS + 1)},
            budget_ms=budget_ms, plan_actions=thr_plan,
            solver_opts={"first_feasible": True}, replan_opts=replan_opts)

    def act_loops(self, obs, event_names, now) -> tuple[str, str]:
        return (self.vis_loop.cycle(obs, event_names, now),
                self.thr_loop.cycle(obs, event_names, now))


# -- episodes ---------------------------------------------------------------------


@dataclass
class EpisodeMetrics:
    cumulative_robustness: dict[str, float]   # per feature name
    pipeline_inspected: float                  # meters
    mean_solve_overhead: float                 # seconds per solve
    median_solve_overhead: float
    n_solves: int


@dataclass
class EpisodeResult:
    metrics: EpisodeMetrics
    trace: Signal
    nu_history: dict[str, list[Valuation]]
    adaptation_log: dict[str, list[AdaptationRecord]]


def _degradation_windows(degrade_cycles, series_opt, n) -> list[int]:
    """Union of cycles inside open degradation windows: each opens at a
    degradation event and closes when the optimal requirement first holds."""
    inside: set[int] = set()
    for c in degrade_cycles:
        k = c
        while k < n:
            if k < series_opt.shape[0] and series_opt[k] >= 0.0 and k > c:
                break
            inside.add(k)
            k += 1
    return sorted(inside)


def run_episode(scenario: UuvScenario, policy: str,
                budget_ms: float | None = None) -> EpisodeResult:
    ts, vis_space, thr_space = build_uuv_model()
    world = UuvWorld(scenario)
    adaptive = policy == ADAPTIVE
    if adaptive:
        controller = AdaptivePolicy(ts, vis_space, thr_space, budget_ms)
    else:
        controller = BaselinePolicy(ts)
    rows = []
    nu_history = {"visibility": [], "thruster": []}
    degrade_cycles = {"visibility": [], "thruster": []}
    for k in range(scenario.n_cycles):
        now = k * CYCLE_PERIOD
        events = scenario.events_at(k)
        for name, value in events:
            world.apply_event(name, value)
            if name == VIS_LOW:
                degrade_cycles["visibility"].append(k)
            elif name.startswith("thruster_failure_"):
                degrade_cycles["thruster"].append(k)
        obs = world.observation()
        rows.append([obs[v] for v in ts.var_names])
        if adaptive:
            vis_action, thr_action = controller.act_loops(
                obs, [n for n, _ in events], now)
            nu_history["visibility"].append(dict(controller.vis_loop.space.nu_curr))
            nu_history["thruster"].append(dict(controller.thr_loop.space.nu_curr))
        else:
            vis_action, thr_action = controller.act(world, events)
            nu_history["visibility"].append(dict(vis_space.nu_curr))
            nu_history["thruster"].append(dict(thr_space.nu_curr))
        world.step(vis_action, thr_action)
    trace = Signal(CYCLE_PERIOD, ts.var_names, np.array(rows))

    cumulative = {}
    for space, feature in ((vis_space, "visibility"), (thr_space, "thruster")):
        series_min = robustness_series(space.minimal(), trace)
        series_opt = robustness_series(instantiate(space.formula, space.nu_opt),
                                       trace)
        inside = _degradation_windows(degrade_cycles[feature], series_opt,
                                      scenario.n_cycles)
        cumulative[feature] = float(sum(
            series_min[k] for k in inside if k < series_min.shape[0]
        ) * CYCLE_PERIOD)

    solve_ms: list[float] = []
    log = {"visibility": [], "thruster": []}
    if adaptive:
        solve_ms = (controller.vis_loop.solve_times_ms
                    + controller.thr_loop.solve_times_ms)
        log = {"visibility": controller.vis_loop.log,
               "thruster": controller.thr_loop.log}
    metrics = EpisodeMetrics(
        cumulative_robustness=cumulative,
        pipeline_inspected=float(world.inspected_m),
        mean_solve_overhead=(statistics.mean(solve_ms) / 1000.0 if solve_ms else 0.0),
        median_solve_overhead=(statistics.median(solve_ms) / 1000.0
                               if solve_ms else 0.0),
        n_solves=len(solve_ms),
    )
    return EpisodeResult(metrics, trace, nu_history, log)


SUMMARY_COLUMNS = ("seed", "policy", "cum_robustness_visibility",
                   "cum_robustness_thruster", "inspected_m", "n_solves",
                   "mean_solve_s", "median_solve_s")


def run_experiment(seeds, out_dir: str | None = None,
                   policies=(ADAPTIVE, BASELINE),
                   budget_ms: float | None = None) -> list[dict]:
    """Both policies on every seed; returns per-seed rows plus a mean row per
    policy, optionally writing summary.csv and per-episode traces."""
    if isinstance(seeds, int):
        seeds = range(seeds)
    rows = []
    for seed in seeds:
        scenario = generate_scenario(int(seed))
        for policy in policies:
            res = run_episode(scenario, policy, budget_ms)
            m = res.metrics
            rows.append({
                "seed": int(seed), "policy": policy,
                "cum_robustness_visibility": m.cumulative_robustness["visibility"],
                "cum_robustness_thruster": m.cumulative_robustness["thruster"],
                "inspected_m": m.pipeline_inspected,
                "n_solves": m.n_solves,
                "mean_solve_s": m.mean_solve_overhead,
                "median_solve_s": m.median_solve_overhead,
            })
            if out_dir:
                path = os.path.join(out_dir, f"trace_{seed}_{policy}.csv")
                _write_trace(path, res.trace)
    for policy in policies:
        sub = [r for r in rows if r["policy"] == policy and r["seed"] >= 0]
        mean_row = {"seed": -1, "policy": f"mean_{policy}"}
        for col in SUMMARY_COLUMNS[2:]:
            mean_row[col] = statistics.mean(r[col] for r in sub)
        rows.append(mean_row)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
            w.writeheader()
            w.writerows(rows)
    return rows


def _write_trace(path: str, trace: Signal):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("time", *trace.variables))
        for i in range(len(trace)):
            w.writerow((trace.time_of(i), *trace.samples[i]))
