"""Bounded-variable LP interface over the dense simplex kernel.

The pivot loop is the hot spot of the whole solver stack; a compiled Cython
kernel is used when the extension built, with a NumPy implementation as the
import-time fallback (`stladapt.lp.BACKEND` says which one is active).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _simplex_py

try:  # pragma: no cover - depends on whether the extension compiled
    from . import _simplex_c as _kernel
except ImportError:  # pragma: no cover
    _kernel = _simplex_py

BACKEND = _kernel.BACKEND

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

_STATUS = {
    _simplex_py.OPTIMAL: OPTIMAL,
    _simplex_py.INFEASIBLE: INFEASIBLE,
    _simplex_py.UNBOUNDED: UNBOUNDED,
    _simplex_py.ITERATION_LIMIT: ITERATION_LIMIT,
}

LEQ, GEQ, EQ = "<=", ">=", "="


@dataclass
class LpResult:
    status: str
    x: np.ndarray | None
    objective: float | None


def solve_lp(c, A, senses, b, lo, hi, minimize: bool = True,
             pivot_loop=None) -> LpResult:
    """Solve min/max c.x s.t. A x (senses) b, lo <= x <= hi.

    All bounds must be finite; rows may mix "<=", ">=" and "=".
    """
    c = np.asarray(c, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = c.shape[0]
    A = np.asarray(A, dtype=float).reshape(-1, n) if np.size(A) else np.zeros((0, n))
    b = np.asarray(b, dtype=float)
    m = A.shape[0]
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("solve_lp requires finite variable bounds")
    if np.any(lo > hi + 1e-12):
        return LpResult(INFEASIBLE, None, None)

    if pivot_loop is None:
        pivot_loop = getattr(_kernel, "pivot_loop", _simplex_py._pivot_loop)

    sign = 1.0 if minimize else -1.0
    # shift x = lo + y, 0 <= y <= hi - lo; upper bounds become rows
    span = hi - lo
    ub_rows = np.nonzero(span < np.inf)[0]  # all, bounds are finite
    n_rows = m + ub_rows.shape[0]
    n_slack = 0
    senses = list(senses)

    # rewrite ">=" rows as "<=" with flipped sign; count slacks
    A_full = np.zeros((n_rows, n))
    b_full = np.zeros(n_rows)
    row_kinds: list[str] = []
    for i in range(m):
        coef, rhs, sense = A[i], b[i] - A[i] @ lo, senses[i]
        if sense == GEQ:
            coef, rhs, sense = -coef, -rhs, LEQ
        elif sense not in (LEQ, EQ):
            raise ValueError(f"unknown sense {sense!r}")
        A_full[i] = coef
        b_full[i] = rhs
        row_kinds.append(sense)
        if sense == LEQ:
            n_slack += 1
    for k, j in enumerate(ub_rows):
        A_full[m + k, j] = 1.0
        b_full[m + k] = span[j]
        row_kinds.append(LEQ)
        n_slack += 1

    A_std = np.zeros((n_rows, n + n_slack))
    A_std[:, :n] = A_full
    si = 0
    for i, kind in enumerate(row_kinds):
        if kind == LEQ:
            A_std[i, n + si] = 1.0
            si += 1
    c_std = np.zeros(n + n_slack)
    c_std[:n] = sign * c

    code, y, _ = _simplex_py.simplex_standard(A_std, b_full, c_std,
                                              pivot_loop=pivot_loop)
    status = _STATUS[code]
    if status != OPTIMAL:
        return LpResult(status, None, None)
    x = lo + y[:n]
    return LpResult(OPTIMAL, x, float(c @ x))
