"""Two-phase dense primal simplex, NumPy fallback kernel.

Solves min c.x s.t. A x = b, x >= 0 on a classic tableau. The compiled
extension `stladapt._simplex_c` implements the same routine with C loops;
`stladapt.lp` picks whichever is importable. Pivot selection is Dantzig's
rule with lowest-index tie-breaking, switching to Bland's rule after a run
of degenerate pivots so cycling cannot occur; both kernels pivot
identically.
"""
from __future__ import annotations

import numpy as np

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3

_TOL = 1e-9
_DEGENERATE_STREAK = 40

BACKEND = "python"


def _pivot_loop(T: np.ndarray, basis: np.ndarray, n_cols: int, max_iter: int) -> int:
    """Iterate the tableau in place. Last row is the reduced-cost row, last
    column the rhs. Returns a status code."""
    m = T.shape[0] - 1
    degenerate = 0
    for _ in range(max_iter):
        cost = T[m, :n_cols]
        bland = degenerate >= _DEGENERATE_STREAK
        if bland:
            neg = np.nonzero(cost < -_TOL)[0]
            if neg.size == 0:
                return OPTIMAL
            j = int(neg[0])
        else:
            j = int(np.argmin(cost))
            if cost[j] >= -_TOL:
                return OPTIMAL
        col = T[:m, j]
        pos = col > _TOL
        if not np.any(pos):
            return UNBOUNDED
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, n_cols][pos] / col[pos]
        best = ratios.min()
        # deterministic: smallest ratio, then lowest row index
        i = int(np.nonzero(ratios <= best + _TOL * (1.0 + abs(best)))[0][0])
        if T[i, n_cols] <= _TOL:
            degenerate += 1
        else:
            degenerate = 0
        piv = T[i, j]
        T[i, :] /= piv
        rows = np.arange(T.shape[0]) != i
        factors = T[rows, j].copy()
        T[rows, :] -= np.outer(factors, T[i, :])
        T[rows, j] = 0.0
        basis[i] = j
        T[i, j] = 1.0
    return ITERATION_LIMIT


def simplex_standard(A: np.ndarray, b: np.ndarray, c: np.ndarray,
                     max_iter: int = 0, pivot_loop=None):
    """Solve min c.x, A x = b, x >= 0.

    Returns (status, x, objective). ``max_iter`` of 0 picks a size-based cap.
    ``pivot_loop`` swaps in the compiled kernel; the NumPy loop is the default.
    """
    if pivot_loop is None:
        pivot_loop = _pivot_loop
    A = np.ascontiguousarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if max_iter <= 0:
        max_iter = 200 * (m + n + 10)

    neg = b < 0
    A = A.copy()
    A[neg] *= -1.0
    b[neg] *= -1.0

    # phase 1: artificial basis
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = np.arange(n, n + m)

    status = pivot_loop(T, basis, n + m, max_iter)
    if status == ITERATION_LIMIT:
        return ITERATION_LIMIT, None, None
    if -T[m, -1] > 1e-7 * (1.0 + abs(b).max(initial=0.0)):
        return INFEASIBLE, None, None

    # drive artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= n:
            row = T[i, :n]
            candidates = np.nonzero(np.abs(row) > 1e-7)[0]
            if candidates.size == 0:
                continue  # redundant row
            j = int(candidates[0])
            piv = T[i, j]
            T[i, :] /= piv
            rows = np.arange(T.shape[0]) != i
            factors = T[rows, j].copy()
            T[rows, :] -= np.outer(factors, T[i, :])
            T[rows, j] = 0.0
            T[i, j] = 1.0
            basis[i] = j

    # phase 2 tableau: original columns + rhs
    T2 = np.zeros((m + 1, n + 1))
    T2[:m, :n] = T[:m, :n]
    T2[:m, -1] = T[:m, -1]
    T2[m, :n] = c
    for i in range(m):
        if basis[i] < n:
            T2[m, :] -= c[basis[i]] * T2[i, :]

    status = pivot_loop(T2, basis, n, max_iter)
    if status == UNBOUNDED:
        return UNBOUNDED, None, None
    if status == ITERATION_LIMIT:
        return ITERATION_LIMIT, None, None

    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T2[i, -1]
    return OPTIMAL, x, float(c @ x)
