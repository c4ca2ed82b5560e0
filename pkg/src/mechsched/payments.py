"""Critical-value payments for scaled-min allocation rules.

With a report-independent plan, machine ``i`` keeps job ``j`` exactly while
``r[i][j] * p[i][j]`` stays below ``t_j = min_{k != i} r[k][j] * p[k][j]``
(at equality, the plan's tie rule decides). Paying ``t_j / r[i][j]`` for each
won job is the supremum of winning reports, so the payment never depends on
the winner's own report. Losing machines are paid nothing.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .core import INF, Instance, MechSchedError, to_float
from .mechanisms import ScalarPlan, assign_scaled_min, scaled_times


class MonopolistJobError(MechSchedError):
    """A won job has no finite competitor, so its critical value is infinite."""

    def __init__(self, job: int, machine: int):
        super().__init__(f"job {job} has no finite competitor of machine {machine}; "
                         "critical payment is infinite")
        self.job = job
        self.machine = machine


def threshold(inst: Instance, plan: ScalarPlan, j: int, i: int) -> float:
    """``t_j``: the best scaled time of job ``j`` among machines other than ``i``."""
    if plan.follow_prediction:
        return INF
    values = scaled_times(inst, plan, j)
    return to_float(min((v for k, v in enumerate(values) if k != i), default=INF))


def wins_at_threshold(plan: ScalarPlan, j: int, i: int) -> bool:
    """Whether a tie at the threshold goes to ``i`` (the boundary is inclusive)."""
    if plan.predicted_machine(j) == i:
        return True
    return plan.tie_policy.value == "predicted-then-jset" and plan.j_owner(j) == i


def job_payment(inst: Instance, plan: ScalarPlan, j: int, i: int) -> float:
    if plan.follow_prediction:
        return INF
    values = scaled_times(inst, plan, j)
    t = min((v for k, v in enumerate(values) if k != i), default=INF)
    if t == INF:
        return INF
    r = plan.scalars[i][j]
    return float(t / r)


def critical_payments(inst: Instance, plan: ScalarPlan, alloc=None, monopolist: str = "error",
                      cap: Optional[float] = None) -> np.ndarray:
    """Per-machine payments, the sum of critical values of the jobs each machine wins.

    ``monopolist`` selects what happens when a won job's critical value is
    infinite: ``"error"`` raises :class:`MonopolistJobError`, ``"cap"`` pays
    ``cap`` for that job instead.
    """
    if monopolist not in ("error", "cap"):
        raise ValueError(f"monopolist policy must be 'error' or 'cap', got {monopolist!r}")
    if monopolist == "cap" and cap is None:
        raise ValueError("monopolist='cap' needs a cap value")
    if alloc is None:
        alloc = assign_scaled_min(inst, plan)
    pay = np.zeros(inst.n)
    for j, i in enumerate(alloc):
        amount = job_payment(inst, plan, j, i)
        if amount == INF:
            if monopolist == "error":
                raise MonopolistJobError(j, i)
            amount = cap
        pay[i] += amount
    return pay


def first_price_payments(inst: Instance, plan: ScalarPlan, alloc=None, **_) -> np.ndarray:
    """Pay each machine its reported load. Not truthful; a detector sanity fixture."""
    if alloc is None:
        alloc = assign_scaled_min(inst, plan)
    pay = np.zeros(inst.n)
    for j, i in enumerate(alloc):
        pay[i] += inst.p[i, j]
    return pay


def utility(true_inst: Instance, alloc, payments, i: int) -> float:
    """Payment minus the true cost of the jobs machine ``i`` received."""
    cost = sum(true_inst.p[i, j] for j, k in enumerate(alloc) if k == i)
    return float(payments[i] - cost)
