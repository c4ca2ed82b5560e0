"""Makespan-minimisation solvers.

A solver is any object with ``solve(inst) -> SolverResult`` whose ``alpha``
truthfully bounds its approximation factor. The mechanisms use a solver to
compute the predicted assignment, and ratio measurements use
:func:`opt_oracle` as the baseline.

Exact solvers break ties between optimal schedules by returning the
lexicographically smallest assignment vector, so results do not depend on
the search order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import INF, Allocation, Instance, MechSchedError, makespan

ENUMERATION_CAP = 10**7
NODE_CAP = 5 * 10**6
_BAND = 1e-9  # relative width of the near-optimal band re-scored with exact sums


class CapacityError(MechSchedError):
    """Instance too large for exhaustive search."""


@dataclass(frozen=True)
class SolverResult:
    alloc: Allocation
    value: float
    alpha: float


class ExactSolver:
    """Branch-and-bound optimum (alpha = 1)."""

    name = "exact"

    def __init__(self, node_cap: int = NODE_CAP):
        self.node_cap = node_cap

    def solve(self, inst: Instance) -> SolverResult:
        return solve_exact(inst, node_cap=self.node_cap)


class GreedySolver:
    """Each job to its fastest machine (alpha = n)."""

    name = "greedy"

    def solve(self, inst: Instance) -> SolverResult:
        return solve_greedy(inst)


def get_solver(name: str):
    try:
        return {"exact": ExactSolver, "greedy": GreedySolver}[name]()
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; expected 'exact' or 'greedy'") from None


def solve_greedy(inst: Instance) -> SolverResult:
    # np.argmin returns the first minimiser, i.e. the smallest machine index
    alloc = tuple(int(i) for i in np.argmin(inst.p, axis=0))
    return SolverResult(alloc, makespan(inst, alloc), float(inst.n))


def solve_enumerate(inst: Instance, cap: int = ENUMERATION_CAP) -> SolverResult:
    """Exhaustive search over all n**m assignments (reference oracle)."""
    n, m = inst.shape
    if n**m > cap:
        raise CapacityError(f"{n}**{m} assignments exceeds enumeration cap {cap}")
    p = inst.p
    best_value, best_alloc = INF, None
    # chunk over the first jobs so memory stays bounded
    head = max(0, m - 6)
    tail_allocs = np.array(list(itertools.product(range(n), repeat=m - head)), dtype=np.intp)
    tail_cols = np.arange(head, m)
    tail_times = p[tail_allocs, tail_cols]  # (k, m - head)
    for prefix in itertools.product(range(n), repeat=head):
        base = np.zeros(n)
        for j, i in enumerate(prefix):
            base[i] += p[i, j]
        loads = np.tile(base, (len(tail_allocs), 1))
        rows = np.arange(len(tail_allocs))
        for c in range(m - head):
            loads[rows, tail_allocs[:, c]] += tail_times[:, c]
        approx = loads.max(axis=1)
        floor = approx.min()
        if floor == INF or floor > best_value * (1 + _BAND):
            continue
        for k in np.flatnonzero(approx <= floor * (1 + _BAND)):
            alloc = prefix + tuple(int(i) for i in tail_allocs[k])
            value = makespan(inst, alloc)
            if value < best_value or (value == best_value and alloc < best_alloc):
                best_value, best_alloc = value, alloc
    if best_alloc is None:
        raise MechSchedError("every assignment has infinite makespan")
    return SolverResult(best_alloc, best_value, 1.0)


def solve_exact(inst: Instance, node_cap: int = NODE_CAP) -> SolverResult:
    """Optimal makespan by branch and bound.

    Phase one finds the optimal value, branching on jobs in order of
    decreasing fastest time. Phase two walks assignments in lexicographic
    order inside a thin band above that value and re-scores each leaf with
    correctly rounded sums, returning the lexicographically smallest optimum.
    """
    n, m = inst.shape
    p = inst.p.tolist()
    fastest = [min(p[i][j] for i in range(n)) for j in range(m)]
    order = sorted(range(m), key=lambda j: (-fastest[j], j))

    # suffix bounds over the branching order
    rest_sum = [0.0] * (m + 1)
    rest_max = [0.0] * (m + 1)
    for k in range(m - 1, -1, -1):
        rest_sum[k] = rest_sum[k + 1] + fastest[order[k]]
        rest_max[k] = max(rest_max[k + 1], fastest[order[k]])

    # incumbent: list scheduling by resulting load
    loads = [0.0] * n
    for j in order:
        i = min(range(n), key=lambda i: (loads[i] + p[i][j], i))
        loads[i] += p[i][j]
    best = max(loads)
    nodes = 0

    def descend(k, loads, total):
        nonlocal best, nodes
        nodes += 1
        if nodes > node_cap:
            raise CapacityError(f"branch and bound exceeded {node_cap} nodes")
        if k == m:
            ms = max(loads)
            if ms < best:
                best = ms
            return
        bound = max(max(loads), (total + rest_sum[k]) / n, rest_max[k])
        if bound >= best:
            return
        j = order[k]
        for i in sorted(range(n), key=lambda i: loads[i] + p[i][j]):
            t = p[i][j]
            if loads[i] + t >= best:
                continue
            child = loads.copy()
            child[i] += t
            descend(k + 1, child, total + t)

    if m and best > 0:
        descend(0, [0.0] * n, 0.0)
    if best == INF:
        raise MechSchedError("every assignment has infinite makespan")

    limit = best * (1 + _BAND)
    best_alloc = None
    best_value = INF
    assign = [0] * m
    nodes = 0

    def sweep(j, loads):
        nonlocal best_alloc, best_value, nodes
        nodes += 1
        if nodes > node_cap:
            raise CapacityError(f"lexicographic sweep exceeded {node_cap} nodes")
        if j == m:
            value = makespan(inst, assign)
            if value < best_value:
                best_value, best_alloc = value, tuple(assign)
            return
        for jj in range(j + 1, m):
            if min(loads[i] + p[i][jj] for i in range(n)) > limit:
                return
        for i in range(n):
            t = p[i][j]
            if loads[i] + t > limit:
                continue
            child = loads.copy()
            child[i] += t
            assign[j] = i
            sweep(j + 1, child)

    sweep(0, [0.0] * n)
    if best_alloc is None:  # pragma: no cover - phase one value is always reachable
        raise MechSchedError("optimal assignment lost in lexicographic sweep")
    return SolverResult(best_alloc, best_value, 1.0)


def opt_oracle(inst: Instance) -> float:
    return solve_exact(inst).value
