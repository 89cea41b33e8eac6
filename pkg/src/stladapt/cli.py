"""Command-line interface.

Subcommands:

* ``monitor``    — robustness of a concrete formula over a CSV trace;
* ``solve``      — one adaptation solve on the built-in UUV model;
* ``simulate``   — one UUV episode under a policy;
* ``experiment`` — the full multi-seed UUV comparison.

Exit codes: 0 when the requirement is satisfied (or the solve/run succeeded),
1 when it is violated or infeasible, 2 on undefined results or usage errors.
``STLADAPT_BUDGET_MS`` sets the default solver budget.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .adapt import DEGRADE, RECOVER, REPLAN, horizon_steps, solve_adaptation
from .encoding import DecisionSignal, encode_robustness
from .formula import signal_variables
from .milp import MilpProblem
from .parser import StlSyntaxError, parse_pstl
from .requirement import instantiate, parameters
from .semantics import robustness
from .signal import Signal, SignalError
from .uuv import (
    ADAPTIVE,
    BASELINE,
    SUMMARY_COLUMNS,
    build_uuv_model,
    generate_scenario,
    run_episode,
    run_experiment,
)

SCHEMA_VERSION = 1

EXIT_SAT = 0
EXIT_UNSAT = 1
EXIT_UNDEFINED = 2


class CliError(Exception):
    pass


def _emit(args, payload: dict, text: str):
    if args.json:
        payload["schema_version"] = SCHEMA_VERSION
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def read_trace(path: str, period: float | None = None) -> Signal:
    """CSV trace: one column per variable, optional leading ``time`` column
    from which the sample period is inferred."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise CliError(f"{path}: need a header row and at least one sample")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array(rows[1:], dtype=float)
    except ValueError as exc:
        raise CliError(f"{path}: non-numeric sample: {exc}") from exc
    start = 0.0
    if "time" in header:
        ti = header.index("time")
        times = data[:, ti]
        start = float(times[0])
        if data.shape[0] > 1:
            steps = np.diff(times)
            if np.ptp(steps) > 1e-9 * max(1.0, abs(steps[0])):
                raise CliError(f"{path}: time column is not uniformly sampled")
            period = float(steps[0])
        keep = [i for i in range(len(header)) if i != ti]
        header = [header[i] for i in keep]
        data = data[:, keep]
    if period is None:
        period = 1.0
    return Signal(period, tuple(header), data, start)


# -- monitor ----------------------------------------------------------------------


def cmd_monitor(args) -> int:
    phi = parse_pstl(args.formula)
    free = parameters(phi)
    if free:
        raise CliError(f"formula has unbound parameters: "
                       f"{', '.join('$' + p for p in sorted(free))}")
    s = read_trace(args.trace, args.period)
    r = robustness(phi, s, t=args.at)
    verdict = "undefined" if not r.defined else ("sat" if r.value >= 0 else "unsat")
    _emit(args, {"robustness": None if not r.defined else r.value,
                 "verdict": verdict},
          f"robustness: {'undefined (trace too short)' if not r.defined else f'{r.value:g}'}"
          f"\nverdict: {verdict}")
    if not r.defined:
        return EXIT_UNDEFINED
    return EXIT_SAT if r.value >= 0 else EXIT_UNSAT


# -- solve ------------------------------------------------------------------------


def _uuv_feature(name: str):
    ts, vis_space, thr_space = build_uuv_model()
    if name == "visibility":
        plan = [ts.action(a) for a in ("noop", "dive", "ascend")]
        return ts, vis_space, plan
    plan = [ts.action("noop")] + [ts.action(f"enable_{i}") for i in range(1, 7)]
    return ts, thr_space, plan


def _parse_observation(ts, pairs: str) -> dict[str, float]:
    obs = ts.initial_state()
    if not pairs:
        return obs
    for item in pairs.split(","):
        try:
            key, value = item.split("=")
            key = key.strip()
            if key not in obs:
                raise CliError(f"unknown state variable {key!r}")
            obs[key] = float(value)
        except ValueError as exc:
            raise CliError(f"bad observation item {item!r} "
                           f"(expected var=value)") from exc
    for var, expr in ts.derived.items():
        obs[var] = expr.evaluate(obs)
    return obs


def _dump_lp(path: str, ts, space, obs, event, plan_actions):
    """The exact-solve encoding of the current requirement, for inspection."""
    prob = MilpProblem()
    phi = space.current()
    n_pred = max(0, horizon_steps(phi, ts.sample_period))
    schedule = {1: [event]} if (event is not None and n_pred > 0) else None
    needed = set(signal_variables(phi))
    dec = DecisionSignal(prob, ts, [obs], n_pred, plan_actions, schedule, needed)
    r, _ = encode_robustness(phi, prob, dec, 0, label="r")
    prob.set_objective(dict(r.expr.coeffs), r.expr.const, minimize=False)
    with open(path, "w") as fh:
        fh.write(prob.dump_lp())


def cmd_solve(args) -> int:
    ts, space, plan_actions = _uuv_feature(args.feature)
    obs = _parse_observation(ts, args.observe)
    event = ts.action(args.event) if args.event else None
    if event is not None and event.kind != "env":
        raise CliError(f"{args.event!r} is not an environment event")
    s = Signal(ts.sample_period, tuple(obs), np.array([[obs[k] for k in obs]]))
    if args.dump_lp:
        _dump_lp(args.dump_lp, ts, space, obs, event, plan_actions)
    res = solve_adaptation(space, ts, s, args.mode, event=event,
                           budget_ms=args.budget_ms, plan_actions=plan_actions)
    payload = {
        "mode": res.mode,
        "status": res.status.name,
        "valuation": res.valuation,
        "objective": res.objective_value,
        "robustness": res.robustness_new,
        "plan": res.plan,
        "solve_ms": res.solve_ms,
        "nodes": res.nodes,
    }
    if res.ok:
        nu = ", ".join(f"{k}={v:g}" for k, v in sorted(res.valuation.items()))
        text = (f"status: {res.status.name}\nvaluation: {nu}\n"
                f"objective: {res.objective_value:g}\n"
                f"robustness: {res.robustness_new:g}\n"
                f"plan: {' '.join(res.plan) if res.plan else '(empty)'}\n"
                f"solve_ms: {res.solve_ms:.1f}")
    else:
        text = (f"status: {res.status.name}\n"
                f"no valuation in [nu_min, nu_curr-or-opt] is enforceable\n"
                f"solve_ms: {res.solve_ms:.1f}")
    _emit(args, payload, text)
    return EXIT_SAT if res.ok else EXIT_UNSAT


# -- simulate / experiment --------------------------------------------------------


def cmd_simulate(args) -> int:
    scenario = generate_scenario(args.seed)
    res = run_episode(scenario, args.policy, budget_ms=args.budget_ms)
    m = res.metrics
    payload = {
        "seed": args.seed,
        "policy": args.policy,
        "cycles": scenario.n_cycles,
        "cumulative_robustness": m.cumulative_robustness,
        "inspected_m": m.pipeline_inspected,
        "n_solves": m.n_solves,
        "mean_solve_s": m.mean_solve_overhead,
        "median_solve_s": m.median_solve_overhead,
        "adaptations": {
            feature: [{"time": r.time, "event": r.event,
                       "nu_after": r.nu_after, "status": r.status}
                      for r in records]
            for feature, records in res.adaptation_log.items()
        },
    }
    rob = ", ".join(f"{k}={v:.2f}" for k, v in m.cumulative_robustness.items())
    text = (f"seed {args.seed} / {args.policy}: {scenario.n_cycles} cycles\n"
            f"cumulative robustness: {rob}\n"
            f"inspected: {m.pipeline_inspected:.2f} m\n"
            f"solves: {m.n_solves} (median {m.median_solve_overhead * 1000:.1f} ms)")
    _emit(args, payload, text)
    return EXIT_SAT


def cmd_experiment(args) -> int:
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
    rows = run_experiment(args.seeds, out_dir=args.out_dir,
                          budget_ms=args.budget_ms)
    means = [r for r in rows if r["seed"] == -1]
    if args.json:
        _emit(args, {"rows": rows}, "")
    else:
        widths = [max(len(c), 10) for c in SUMMARY_COLUMNS]
        print("  ".join(c.ljust(w) for c, w in zip(SUMMARY_COLUMNS, widths)))
        for r in rows:
            cells = [r.get(c, "") for c in SUMMARY_COLUMNS]
            cells = [f"{v:.3f}" if isinstance(v, float) else str(v)
                     for v in cells]
            print("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
        if args.out_dir:
            print(f"\nwrote {os.path.join(args.out_dir, 'summary.csv')}")
    adaptive = next(r for r in means if r["policy"] == f"mean_{ADAPTIVE}")
    baseline = next(r for r in means if r["policy"] == f"mean_{BASELINE}")
    better = (adaptive["cum_robustness_visibility"]
              >= baseline["cum_robustness_visibility"]
              and adaptive["cum_robustness_thruster"]
              >= baseline["cum_robustness_thruster"])
    return EXIT_SAT if better else EXIT_UNSAT


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stladapt",
        description="Requirement-driven self-adaptation for signal temporal "
                    "logic requirements.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    env_budget = os.environ.get("STLADAPT_BUDGET_MS")
    default_budget = float(env_budget) if env_budget else None
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("monitor", help="evaluate a formula over a CSV trace")
    p.add_argument("--formula", required=True,
                   help='e.g. "G[0,1](thrust > 100)"')
    p.add_argument("--trace", required=True, help="CSV file; optional time column")
    p.add_argument("--period", type=float, default=None,
                   help="sample period when the trace has no time column")
    p.add_argument("--at", type=float, default=None,
                   help="evaluation time (default: trace start)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("solve", help="one adaptation solve on the UUV model")
    p.add_argument("--feature", choices=("visibility", "thruster"),
                   required=True)
    p.add_argument("--mode", choices=(DEGRADE, RECOVER, REPLAN),
                   default=DEGRADE)
    p.add_argument("--event", default=None,
                   help="environment event name, e.g. vis_low")
    p.add_argument("--observe", default="",
                   help='comma-separated var=value overrides of the initial state')
    p.add_argument("--budget-ms", type=float, default=default_budget)
    p.add_argument("--dump-lp", default=None, metavar="PATH",
                   help="write the exact-solve encoding in LP format")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="run one UUV episode")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy", choices=(ADAPTIVE, BASELINE), default=ADAPTIVE)
    p.add_argument("--budget-ms", type=float, default=default_budget)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="multi-seed adaptive-vs-baseline run")
    p.add_argument("--seeds", type=int, default=20,
                   help="number of seeds (0..N-1)")
    p.add_argument("--out-dir", default=None,
                   help="write summary.csv and per-episode traces here")
    p.add_argument("--budget-ms", type=float, default=default_budget)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (CliError, StlSyntaxError, SignalError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED


if __name__ == "__main__":
    sys.exit(main())
