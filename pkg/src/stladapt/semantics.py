"""Quantitative (robustness) semantics over sampled signals.

Time is discrete: sup/inf range over the sample instants inside
[t + a, t + b], endpoints inclusive. Evaluations whose window reaches past
the final sample are reported as undefined rather than pessimistic.
"""
from __future__ import annotations

from dataclasses import dataclass

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
    Pred,
    Until,
    is_concrete,
)
from .signal import Signal

_ALIGN_TOL = 1e-9


class UndefinedRobustnessError(ValueError):
    """The signal is too short to decide the formula at the requested time."""


@dataclass(frozen=True)
class RobustnessValue:
    value: float
    defined: bool = True


def window_offsets(interval: Interval, sample_period: float) -> tuple[int, int]:
    """Sample-index offsets (ia, ib) covered by [t+a, t+b] relative to t."""
    if not interval.concrete:
        raise FormulaError("cannot evaluate a parametric interval")
    a, b = float(interval.lo), float(interval.hi)
    ia = int(np.ceil(a / sample_period - _ALIGN_TOL))
    ib = int(np.floor(b / sample_period + _ALIGN_TOL))
    if ia > ib:
        raise FormulaError(
            f"interval [{a},{b}] contains no sample instant at period {sample_period}"
        )
    return ia, ib


def _sliding_extreme(values: np.ndarray, width: int, take_max: bool) -> np.ndarray:
    if width == 1:
        return values.copy()
    if values.shape[0] < width:
        return np.empty(0)
    win = np.lib.stride_tricks.sliding_window_view(values, width)
    return win.max(axis=1) if take_max else win.min(axis=1)


def robustness_series(phi: Formula, s: Signal) -> np.ndarray:
    """Robustness of ``phi`` at every sample index where it is defined.

    Returns an array of length ``m <= len(s)``: entry j is the robustness at
    sample j; indices >= m are undefined (window would overrun the signal).
    """
    if not is_concrete(phi):
        raise FormulaError("robustness of a parametric formula is undefined")
    return _series(phi, s)


def _series(phi: Formula, s: Signal) -> np.ndarray:
    if isinstance(phi, Pred):
        vals = phi.term.const + np.zeros(len(s))
        for v, c in phi.term.coeffs:
            vals = vals + c * s.column(v)
        bound = float(phi.bound)  # type: ignore[arg-type]
        if phi.op in (">", ">="):
            return vals - bound
        return bound - vals
    if isinstance(phi, Not):
        return -_series(phi.arg, s)
    if isinstance(phi, And):
        left, right = _series(phi.left, s), _series(phi.right, s)
        n = min(left.shape[0], right.shape[0])
        return np.minimum(left[:n], right[:n])
    if isinstance(phi, Or):
        left, right = _series(phi.left, s), _series(phi.right, s)
        n = min(left.shape[0], right.shape[0])
        return np.maximum(left[:n], right[:n])
    if isinstance(phi, Implies):
        left, right = _series(phi.left, s), _series(phi.right, s)
        n = min(left.shape[0], right.shape[0])
        return np.maximum(-left[:n], right[:n])
    if isinstance(phi, (Globally, Eventually)):
        child = _series(phi.arg, s)
        ia, ib = window_offsets(phi.interval, s.sample_period)
        shifted = child[ia:]
        return _sliding_extreme(shifted, ib - ia + 1, isinstance(phi, Eventually))
    if isinstance(phi, Until):
        left, right = _series(phi.left, s), _series(phi.right, s)
        ia, ib = window_offsets(phi.interval, s.sample_period)
        n = min(left.shape[0] - ib, right.shape[0] - ib)
        if n <= 0:
            return np.empty(0)
        out = np.empty(n)
        for j in range(n):
            best = -np.inf
            prefix_min = np.inf
            for k in range(j, j + ib + 1):
                prefix_min = min(prefix_min, left[k])
                if k >= j + ia:
                    best = max(best, min(right[k], prefix_min))
            out[j] = best
        return out
    raise FormulaError(f"unknown formula node {type(phi).__name__}")


def robustness(phi: Formula, s: Signal, t: float = None) -> RobustnessValue:  # type: ignore[assignment]
    """Signed satisfaction margin of ``phi`` on ``s`` at time ``t``.

    ``t`` defaults to the signal start and must align with a sample instant.
    """
    if t is None:
        t = s.start_time
    idx = s.index_of(t)
    series = robustness_series(phi, s)
    if idx >= series.shape[0]:
        return RobustnessValue(float("nan"), defined=False)
    return RobustnessValue(float(series[idx]), defined=True)


def satisfies(phi: Formula, s: Signal, t: float = None) -> bool:  # type: ignore[assignment]
    """Boolean satisfaction from the robustness sign; 0 counts as satisfied."""
    r = robustness(phi, s, t)
    if not r.defined:
        raise UndefinedRobustnessError(
            f"signal ends before the evaluation window of {phi} at t={t}"
        )
    return r.value >= 0.0


def weakening_degree(phi_from: Formula, phi_to: Formula, s: Signal,
                     t: float = None) -> float:  # type: ignore[assignment]
    """Margin gained on ``s`` at ``t`` by replacing ``phi_from`` with
    ``phi_to``; negative when the replacement is a tightening."""
    a = robustness(phi_from, s, t)
    b = robustness(phi_to, s, t)
    if not (a.defined and b.defined):
        raise UndefinedRobustnessError(
            "signal ends before the evaluation window of one of the formulas"
        )
    return b.value - a.value


def strengthening_degree(phi_from: Formula, phi_to: Formula, s: Signal,
                         t: float = None) -> float:  # type: ignore[assignment]
    """Margin given up on ``s`` at ``t`` by replacing ``phi_from`` with
    ``phi_to``; the negation of the weakening degree."""
    return -weakening_degree(phi_from, phi_to, s, t)
