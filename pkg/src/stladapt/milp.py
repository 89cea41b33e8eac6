"""Mixed-integer linear programs and a self-contained branch-and-bound solver.

LP relaxations go through the dense simplex in `stladapt.lp`; branching is on
the most fractional binary (lowest index on ties) with best-first node order,
so identical inputs always produce identical results.
"""
from __future__ import annotations

import enum
import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from . import lp


class MilpError(ValueError):
    pass


class SolveStatus(enum.Enum):
    OPTIMAL = "OPTIMAL"
    INFEASIBLE = "INFEASIBLE"
    BUDGET_EXCEEDED = "BUDGET_EXCEEDED"


@dataclass
class Constraint:
    coeffs: dict[int, float]
    sense: str  # "<=", ">=", "="
    rhs: float


class MilpProblem:
    """Bounded continuous and binary variables, linear constraints, one
    linear objective."""

    def __init__(self):
        self.names: list[str] = []
        self.lo: list[float] = []
        self.hi: list[float] = []
        self.binary: list[bool] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.objective_const = 0.0
        self.minimize = True

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def add_var(self, name: str, lo: float, hi: float) -> int:
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise MilpError(f"variable {name!r} needs finite bounds")
        self.names.append(name)
        self.lo.append(float(lo))
        self.hi.append(float(hi))
        self.binary.append(False)
        return len(self.names) - 1

    def add_binary(self, name: str) -> int:
        idx = self.add_var(name, 0.0, 1.0)
        self.binary[idx] = True
        return idx

    def add_constraint(self, coeffs: dict[int, float], sense: str, rhs: float):
        for j in coeffs:
            if not 0 <= j < self.n_vars:
                raise MilpError(f"constraint references undeclared variable {j}")
        if sense not in (lp.LEQ, lp.GEQ, lp.EQ):
            raise MilpError(f"unknown sense {sense!r}")
        self.constraints.append(Constraint(dict(coeffs), sense, float(rhs)))

    def set_objective(self, coeffs: dict[int, float], const: float = 0.0,
                      minimize: bool = True):
        self.objective = dict(coeffs)
        self.objective_const = float(const)
        self.minimize = minimize

    # -- matrices ---------------------------------------------------------------

    def _matrices(self):
        n, m = self.n_vars, len(self.constraints)
        A = np.zeros((m, n))
        b = np.zeros(m)
        senses = []
        for i, con in enumerate(self.constraints):
            for j, v in con.coeffs.items():
                A[i, j] = v
            b[i] = con.rhs
            senses.append(con.sense)
        c = np.zeros(n)
        for j, v in self.objective.items():
            c[j] = v
        return c, A, senses, b, np.array(self.lo), np.array(self.hi)

    def dump_lp(self) -> str:
        """LP-style text dump of the problem for external cross-checking."""
        def expr(coeffs: dict[int, float]) -> str:
            parts = []
            for j in sorted(coeffs):
                v = coeffs[j]
                if v == 0:
                    continue
                sign = "-" if v < 0 else ("+" if parts else "")
                mag = abs(v)
                coef = "" if mag == 1 else f"{mag:g} "
                parts.append(f"{sign} {coef}{self.names[j]}".strip())
            return " ".join(parts) if parts else "0"

        out = ["Minimize" if self.minimize else "Maximize",
               f" obj: {expr(self.objective)}"]
        if self.objective_const:
            out[-1] += f" + {self.objective_const:g}"
        out.append("Subject To")
        for i, con in enumerate(self.constraints):
            out.append(f" c{i}: {expr(con.coeffs)} {con.sense} {con.rhs:g}")
        out.append("Bounds")
        for j, name in enumerate(self.names):
            out.append(f" {self.lo[j]:g} <= {name} <= {self.hi[j]:g}")
        binaries = [self.names[j] for j in range(self.n_vars) if self.binary[j]]
        if binaries:
            out.append("Binary")
            out.append(" " + " ".join(binaries))
        out.append("End")
        return "\n".join(out) + "\n"


@dataclass
class BnbResult:
    status: SolveStatus
    x: np.ndarray | None
    objective: float | None  # includes objective_const, in the stated sense
    nodes: int = 0
    proven_optimal: bool = False


_INT_TOL = 1e-6
_GAP = 1e-6


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    fixes: dict[int, float] = field(compare=False)


def branch_and_bound(problem: MilpProblem, budget_ms: float | None = None,
                     cutoff: float | None = None) -> BnbResult:
    """Exact branch-and-bound within absolute gap 1e-6.

    ``cutoff`` (in minimized orientation) prunes nodes that cannot beat an
    externally known incumbent. On budget exhaustion the best incumbent found
    so far is returned with status BUDGET_EXCEEDED.
    """
    c, A, senses, b, lo, hi = problem._matrices()
    sign = 1.0 if problem.minimize else -1.0
    c_min = sign * c  # minimized orientation throughout
    deadline = None if budget_ms is None else time.monotonic() + budget_ms / 1000.0
    bin_idx = [j for j in range(problem.n_vars) if problem.binary[j]]

    def solve_relaxation(fixes: dict[int, float]):
        node_lo, node_hi = lo.copy(), hi.copy()
        for j, v in fixes.items():
            node_lo[j] = node_hi[j] = v
        res = lp.solve_lp(c_min, A, senses, b, node_lo, node_hi, minimize=True)
        return res

    best_x = None
    best_obj = np.inf  # minimized orientation, without constant
    nodes = 0
    seq = 0
    root = solve_relaxation({})
    if root.status == lp.INFEASIBLE:
        return BnbResult(SolveStatus.INFEASIBLE, None, None)
    if root.status != lp.OPTIMAL:
        raise MilpError(f"LP relaxation failed: {root.status}")
    heap: list[_Node] = [_Node(root.objective, seq, {})]
    out_of_budget = False

    while heap:
        if deadline is not None and time.monotonic() > deadline:
            out_of_budget = True
            break
        node = heapq.heappop(heap)
        if node.bound >= best_obj - _GAP:
            continue
        if cutoff is not None and node.bound > cutoff + _GAP:
            continue
        res = solve_relaxation(node.fixes)
        nodes += 1
        if res.status == lp.INFEASIBLE:
            continue
        if res.status != lp.OPTIMAL:
            raise MilpError(f"LP relaxation failed: {res.status}")
        if res.objective >= best_obj - _GAP:
            continue
        x = res.x
        frac = [(abs(x[j] - round(x[j])), j) for j in bin_idx
                if j not in node.fixes and abs(x[j] - round(x[j])) > _INT_TOL]
        if not frac:
            xi = x.copy()
            for j in bin_idx:
                xi[j] = round(xi[j])
            if res.objective < best_obj - _GAP:
                best_obj = res.objective
                best_x = xi
            continue
        # most fractional binary; lowest index breaks ties
        frac.sort(key=lambda t: (-min(t[0], 1 - t[0]), t[1]))
        j = frac[0][1]
        for v in (0.0, 1.0):
            fixes = dict(node.fixes)
            fixes[j] = v
            seq += 1
            heapq.heappush(heap, _Node(res.objective, seq, fixes))

    if best_x is None:
        if out_of_budget:
            return BnbResult(SolveStatus.BUDGET_EXCEEDED, None, None, nodes)
        return BnbResult(SolveStatus.INFEASIBLE, None, None, nodes)
    objective = sign * best_obj + problem.objective_const
    status = SolveStatus.BUDGET_EXCEEDED if out_of_budget else SolveStatus.OPTIMAL
    return BnbResult(status, best_x, float(objective), nodes,
                     proven_optimal=not out_of_budget)
