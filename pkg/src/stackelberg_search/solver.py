"""Linear programs and a small branch-and-bound MILP solver.

The LP backend is scipy's HiGHS interface; everything integer is handled
here: most-fractional branching (ties by lowest variable id), best-bound node
selection with depth-first plunging, warm starts as initial incumbents, and
wall-clock limits with anytime incumbents.  All choices are deterministic, so
two runs on the same problem produce the same solution whenever no time limit
truncates the search.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

FEAS_TOL = 1e-6
INT_TOL = 1e-6
GAP_TOL = 1e-6
# Nodes whose relaxation bound cannot beat the incumbent by more than this
# are pruned; smaller than GAP_TOL so proven gaps stay honest.
PRUNE_EPS = 1e-9

OPTIMAL = "Optimal"
INCUMBENT_TIME_LIMIT = "IncumbentTimeLimit"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"


class SolverError(RuntimeError):
    pass


@dataclass
class LinearProgram:
    """A maximization LP built incrementally.

    Variables are dense integer ids; constraints hold sparse coefficient
    lists.  Relations are "<=", ">=", "==".
    """

    names: list[str] = field(default_factory=list)
    lower: list[float] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    rows: list[tuple[list[int], list[float], str, float, str]] = \
        field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def add_var(self, name: str, lower: float = 0.0, upper: float = np.inf,
                objective: float = 0.0) -> int:
        if lower > upper:
            raise SolverError(f"variable {name}: lower {lower} > upper {upper}")
        self.names.append(name)
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.objective.append(float(objective))
        return len(self.names) - 1

    def set_objective(self, var: int, coeff: float) -> None:
        self.objective[var] = float(coeff)

    def add_constraint(self, coeffs: dict[int, float], relation: str,
                       rhs: float, name: str = "") -> None:
        if relation not in ("<=", ">=", "=="):
            raise SolverError(f"bad relation {relation!r}")
        idx, val = [], []
        for var, coef in coeffs.items():
            if not np.isfinite(coef):
                raise SolverError(f"constraint {name!r}: non-finite coefficient")
            if coef != 0.0:
                idx.append(var)
                val.append(float(coef))
        self.rows.append((idx, val, relation, float(rhs), name))

    def dump(self) -> str:
        """Fixed-format text rendering for debugging."""
        out = ["maximize"]
        terms = [f"{c:+.12g} {self.names[i]}"
                 for i, c in enumerate(self.objective) if c != 0.0]
        out.append("  " + (" ".join(terms) if terms else "0"))
        out.append("subject to")
        for idx, val, rel, rhs, name in self.rows:
            lhs = " ".join(f"{v:+.12g} {self.names[i]}"
                           for i, v in zip(idx, val)) or "0"
            tag = f"  [{name}] " if name else "  "
            out.append(f"{tag}{lhs} {rel} {rhs:.12g}")
        out.append("bounds")
        for i, nm in enumerate(self.names):
            out.append(f"  {self.lower[i]:.12g} <= {nm} <= {self.upper[i]:.12g}")
        return "\n".join(out) + "\n"


@dataclass(frozen=True)
class MilpProblem:
    lp: LinearProgram
    binaries: tuple[int, ...]

    def __post_init__(self) -> None:
        for var in self.binaries:
            if not (self.lp.lower[var] >= -FEAS_TOL
                    and self.lp.upper[var] <= 1.0 + FEAS_TOL):
                raise SolverError(
                    f"binary variable {self.lp.names[var]} lacks [0,1] bounds")


@dataclass
class MilpSolution:
    status: str
    objective: float
    assignment: Optional[np.ndarray]
    bound_gap: float
    wall_time: float

    def value(self, var: int) -> float:
        if self.assignment is None:
            raise SolverError("solution carries no assignment")
        return float(self.assignment[var])


# ---------------------------------------------------------------------------
# LP solving


def _split_rows(lp: LinearProgram):
    """COO triplets for the <= system (>= negated) and the == system."""
    ub_r, ub_c, ub_v, ub_rhs = [], [], [], []
    eq_r, eq_c, eq_v, eq_rhs = [], [], [], []
    for idx, val, rel, rhs, _ in lp.rows:
        if rel == "==":
            row = len(eq_rhs)
            eq_rhs.append(rhs)
            eq_r.extend([row] * len(idx))
            eq_c.extend(idx)
            eq_v.extend(val)
        else:
            sign = 1.0 if rel == "<=" else -1.0
            row = len(ub_rhs)
            ub_rhs.append(sign * rhs)
            ub_r.extend([row] * len(idx))
            ub_c.extend(idx)
            ub_v.extend([sign * v for v in val])
    n = lp.n_vars
    a_ub = sp.csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(ub_rhs), n)) \
        if ub_rhs else None
    a_eq = sp.csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(eq_rhs), n)) \
        if eq_rhs else None
    return a_ub, np.array(ub_rhs), a_eq, np.array(eq_rhs)


class _LpCore:
    """Pre-assembled matrices so branch-and-bound only swaps variable bounds."""

    def __init__(self, lp: LinearProgram):
        self.lp = lp
        self.a_ub, self.b_ub, self.a_eq, self.b_eq = _split_rows(lp)
        self.c = -np.array(lp.objective)  # linprog minimizes
        self.base_bounds = np.column_stack([lp.lower, lp.upper])

    def solve(self, overrides: Optional[dict[int, tuple[float, float]]] = None):
        bounds = self.base_bounds
        if overrides:
            bounds = bounds.copy()
            for var, (lo, hi) in overrides.items():
                bounds[var, 0] = lo
                bounds[var, 1] = hi
        res = linprog(self.c, A_ub=self.a_ub, b_ub=self.b_ub,
                      A_eq=self.a_eq, b_eq=self.b_eq, bounds=bounds,
                      method="highs")
        return res


def _status_from_linprog(res) -> str:
    if res.status == 0:
        return OPTIMAL
    if res.status == 2:
        return INFEASIBLE
    if res.status == 3:
        return UNBOUNDED
    raise SolverError(f"LP backend failure: {res.message}")


def solve_lp(lp: LinearProgram) -> MilpSolution:
    t0 = time.perf_counter()
    res = _LpCore(lp).solve()
    status = _status_from_linprog(res)
    if status != OPTIMAL:
        return MilpSolution(status, float("nan"), None, float("inf"),
                            time.perf_counter() - t0)
    return MilpSolution(OPTIMAL, float(-res.fun), np.array(res.x), 0.0,
                        time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Branch and bound


def _most_fractional(x: np.ndarray, binaries: tuple[int, ...]) -> Optional[int]:
    best, best_score = None, INT_TOL
    for var in binaries:  # ids ascending: ties resolve to the lowest id
        score = min(x[var] - np.floor(x[var]), np.ceil(x[var]) - x[var])
        if score > best_score + 1e-15:
            best, best_score = var, score
    return best


def solve_milp(problem: MilpProblem,
               warm: Optional[np.ndarray] = None,
               time_limit: Optional[float] = None) -> MilpSolution:
    """Branch and bound over the problem's binary variables.

    warm, if given, must be a feasible full assignment; its binary pattern is
    fixed and re-optimized to seed the incumbent.  On timeout the best
    incumbent is returned with the outstanding relaxation bound.
    """
    t0 = time.perf_counter()

    def time_left() -> float:
        if time_limit is None:
            return float("inf")
        return time_limit - (time.perf_counter() - t0)

    core = _LpCore(problem.lp)
    binaries = tuple(sorted(problem.binaries))
    incumbent: Optional[np.ndarray] = None
    incumbent_obj = -np.inf

    if warm is not None:
        fixed = {var: (round(float(warm[var])),) * 2 for var in binaries}
        res = core.solve(fixed)
        if _status_from_linprog(res) == OPTIMAL:
            incumbent = np.array(res.x)
            incumbent_obj = float(-res.fun)
        else:
            raise SolverError("warm start is infeasible")

    root = core.solve()
    root_status = _status_from_linprog(root)
    if root_status == INFEASIBLE:
        return MilpSolution(INFEASIBLE, float("nan"), None, float("inf"),
                            time.perf_counter() - t0)
    if root_status == UNBOUNDED:
        return MilpSolution(UNBOUNDED, float("nan"), None, float("inf"),
                            time.perf_counter() - t0)

    # Heap of open nodes: (-bound, insertion counter, fixings, relaxation x).
    counter = 0
    heap: list = [(-float(-root.fun), counter, {}, np.array(root.x))]

    def result(status: str, outstanding: float = -np.inf) -> MilpSolution:
        open_bound = max((-h[0] for h in heap), default=-np.inf)
        open_bound = max(open_bound, outstanding)
        gap = max(0.0, open_bound - incumbent_obj) \
            if incumbent is not None else float("inf")
        if incumbent is None:
            return MilpSolution(status, float("nan"), None, gap,
                                time.perf_counter() - t0)
        return MilpSolution(status, incumbent_obj, incumbent, gap,
                            time.perf_counter() - t0)

    while heap:
        if time_left() <= 0.0:
            return result(INCUMBENT_TIME_LIMIT)
        neg_bound, _, fixings, x = heapq.heappop(heap)
        bound = -neg_bound
        if bound <= incumbent_obj + PRUNE_EPS:
            continue
        if incumbent is not None and \
                bound - incumbent_obj <= GAP_TOL * (1.0 + abs(incumbent_obj)):
            return result(OPTIMAL, outstanding=bound)
        # Depth-first plunge from the popped node.
        while True:
            var = _most_fractional(x, binaries)
            if var is None:
                if bound > incumbent_obj + PRUNE_EPS:
                    incumbent = x
                    incumbent_obj = bound
                break
            children = []
            for value in (0.0, 1.0):
                child_fix = dict(fixings)
                child_fix[var] = (value, value)
                res = core.solve(child_fix)
                if _status_from_linprog(res) == OPTIMAL:
                    child_bound = float(-res.fun)
                    if child_bound > incumbent_obj + PRUNE_EPS:
                        children.append((child_bound, value, child_fix,
                                         np.array(res.x)))
            if time_left() <= 0.0:
                for child_bound, _, child_fix, child_x in children:
                    counter += 1
                    heapq.heappush(heap, (-child_bound, counter, child_fix,
                                          child_x))
                return result(INCUMBENT_TIME_LIMIT)
            if not children:
                break
            # Dive on the better-bound child (ties: follow the relaxation's
            # rounding, preferring 1); push the sibling for later.
            if len(children) == 2:
                a, b = children
                if abs(a[0] - b[0]) <= 1e-12:
                    prefer = 1.0 if x[var] >= 0.5 else 0.0
                    dive, other = (a, b) if a[1] == prefer else (b, a)
                else:
                    dive, other = (a, b) if a[0] > b[0] else (b, a)
                counter += 1
                heapq.heappush(heap, (-other[0], counter, other[2], other[3]))
            else:
                dive = children[0]
            bound, _, fixings, x = dive

    if incumbent is None:
        return MilpSolution(INFEASIBLE, float("nan"), None, float("inf"),
                            time.perf_counter() - t0)
    return result(OPTIMAL)
