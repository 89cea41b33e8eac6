# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of the simplex pivot loop in `_simplex_py`.

Same pivot selection (Dantzig with lowest-index ties, Bland fallback after a
degenerate streak) so both backends walk identical pivot sequences.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF TOL = 1e-9
DEF DEGENERATE_STREAK = 40

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3

BACKEND = "cython"


def pivot_loop(double[:, ::1] T, long[::1] basis, int n_cols, long max_iter):
    cdef int m = T.shape[0] - 1
    cdef int width = T.shape[1]
    cdef int rhs = n_cols
    cdef long it
    cdef int i, j, r, k, degenerate = 0
    cdef double best_cost, ratio, best_ratio, piv, factor, tol_ratio

    for it in range(max_iter):
        # entering column
        j = -1
        if degenerate >= DEGENERATE_STREAK:
            for k in range(n_cols):
                if T[m, k] < -TOL:
                    j = k
                    break
        else:
            best_cost = -TOL
            for k in range(n_cols):
                if T[m, k] < best_cost:
                    best_cost = T[m, k]
                    j = k
        if j < 0:
            return 0  # OPTIMAL

        # ratio test: smallest ratio, lowest row index on ties
        best_ratio = -1.0
        i = -1
        for r in range(m):
            if T[r, j] > TOL:
                ratio = T[r, rhs] / T[r, j]
                if i < 0 or ratio < best_ratio:
                    best_ratio = ratio
                    i = r
        if i < 0:
            return 2  # UNBOUNDED
        # re-scan for the lowest row index within tolerance of the best ratio
        tol_ratio = best_ratio + TOL * (1.0 + (best_ratio if best_ratio > 0 else -best_ratio))
        for r in range(m):
            if T[r, j] > TOL and T[r, rhs] / T[r, j] <= tol_ratio:
                i = r
                break

        if T[i, rhs] <= TOL:
            degenerate += 1
        else:
            degenerate = 0

        piv = T[i, j]
        for k in range(width):
            T[i, k] /= piv
        for r in range(m + 1):
            if r == i:
                continue
            factor = T[r, j]
            if factor != 0.0:
                for k in range(width):
                    T[r, k] -= factor * T[i, k]
                T[r, j] = 0.0
        basis[i] = j
        T[i, j] = 1.0
    return 3  # ITERATION_LIMIT
