"""Allocation mechanisms built from report-independent scalars.

Every mechanism here works in two phases. The first phase looks only at the
prediction and produces a :class:`ScalarPlan`: a multiplier ``r[i][j]`` for
every machine/job pair, the predicted assignment and, for the scaled greedy
family, the sets ``J_i`` of jobs pre-committed to a machine other than their
predicted one. The second phase, :func:`assign_scaled_min`, sends each job to
the machine minimising ``r[i][j] * p[i][j]`` on the reported instance.

Because the plan never looks at the reports, the second phase decides each
job independently by a fixed weighted comparison; that is what makes these
rules monotone and lets :mod:`mechsched.payments` price each job separately.

Scalars are kept as exact rationals so the ties the mechanisms rely on
(``r[i][j] * p_hat[i][j] == p_hat[i_hat][j]``) are detected exactly.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import (
    INF,
    Allocation,
    Extended,
    InfeasibleError,
    Instance,
    Prediction,
    ShapeError,
    check_allocation,
    exact_makespan,
    exact_product,
    exact_ratio,
    to_float,
)
from .makespan import ExactSolver

GREEDY = "greedy"
FOLLOW_PREDICTION = "follow-prediction"
SIMPLE = "simple-scaled-greedy"
SCALED = "scaled-greedy"
ERROR_TOLERANT = "error-tolerant"
MECHANISMS = (GREEDY, FOLLOW_PREDICTION, SIMPLE, SCALED, ERROR_TOLERANT)


class TiePolicy(str, Enum):
    MIN_INDEX = "min-index"
    PREDICTED_FIRST = "predicted-first"
    PREDICTED_THEN_JSET = "predicted-then-jset"


class GammaRangeWarning(UserWarning):
    """gamma lies outside (0, n/2 - 1), where the combined guarantees are stated."""


@dataclass(frozen=True)
class ScalarPlan:
    scalars: Tuple[Tuple[Extended, ...], ...]
    predicted_alloc: Optional[Allocation]
    j_sets: Tuple[frozenset, ...]
    tie_policy: TiePolicy
    # report-independent rule: output the predicted assignment as is
    follow_prediction: bool = False
    predicted_makespan: Optional[float] = None

    @property
    def n(self) -> int:
        return len(self.scalars)

    @property
    def m(self) -> int:
        return len(self.scalars[0])

    @property
    def r(self) -> np.ndarray:
        return np.array([[to_float(v) for v in row] for row in self.scalars])

    def j_owner(self, j: int) -> Optional[int]:
        for i, js in enumerate(self.j_sets):
            if j in js:
                return i
        return None

    def predicted_machine(self, j: int) -> Optional[int]:
        return None if self.predicted_alloc is None else self.predicted_alloc[j]


@dataclass(frozen=True)
class MechanismOutcome:
    kind: str
    alloc: Allocation
    plan: ScalarPlan
    solver_alpha: float
    params: dict = field(default_factory=dict)


def _empty_sets(n: int) -> Tuple[frozenset, ...]:
    return tuple(frozenset() for _ in range(n))


def _check_prediction(pred: Instance, predicted_alloc: Sequence[int]) -> Allocation:
    if not isinstance(pred, Prediction):
        pred = Prediction(pred.p)
    return check_allocation(pred, predicted_alloc)


def scalars_greedy(n: int, m: int) -> ScalarPlan:
    ones = tuple(tuple(Fraction(1) for _ in range(m)) for _ in range(n))
    return ScalarPlan(ones, None, _empty_sets(n), TiePolicy.MIN_INDEX)


def scalars_follow(pred: Prediction, predicted_alloc: Sequence[int]) -> ScalarPlan:
    x_hat = _check_prediction(pred, predicted_alloc)
    plan = scalars_greedy(pred.n, pred.m)
    return ScalarPlan(plan.scalars, x_hat, plan.j_sets, TiePolicy.PREDICTED_FIRST,
                      follow_prediction=True,
                      predicted_makespan=to_float(exact_makespan(pred, x_hat)))


def scalars_simple(pred: Prediction, predicted_alloc: Sequence[int]) -> ScalarPlan:
    """Scalars ``max(1, min(p_hat[i_hat][j] / p_hat[i][j], n))``."""
    x_hat = _check_prediction(pred, predicted_alloc)
    n, m = pred.shape
    q = pred.p.tolist()
    cap = Fraction(n)
    scalars = tuple(
        tuple(max(Fraction(1), min(exact_ratio(q[x_hat[j]][j], q[i][j]), cap)) for j in range(m))
        for i in range(n)
    )
    return ScalarPlan(scalars, x_hat, _empty_sets(n), TiePolicy.PREDICTED_FIRST,
                      predicted_makespan=to_float(exact_makespan(pred, x_hat)))


def _warn_gamma(gamma: float, n: int) -> None:
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not gamma < n / 2 - 1:
        warnings.warn(
            f"gamma={gamma} is outside (0, {n / 2 - 1:g}); the individual guarantees still apply",
            GammaRangeWarning,
            stacklevel=3,
        )


def _scaled_loop(pred: Prediction, x_hat: Allocation, gamma: float, override: Fraction,
                 scope: str = "dominated"):
    """Scalar construction shared by scaled greedy and its error-tolerant variant.

    When job ``j*`` is committed to ``i*``, every machine whose predicted time
    for ``j*`` is at least ``p_hat[i*][j*]`` gets scalar ``override``. With
    ``scope="committed"`` only ``i*`` gets ``override`` and the others get 1.

    Returns ``(scalars, j_sets)`` with scalars as a mutable list of lists.
    """
    if scope not in ("dominated", "committed"):
        raise ValueError(f"scope must be 'dominated' or 'committed', got {scope!r}")
    n, m = pred.shape
    q = pred.p.tolist()
    ref = [q[x_hat[j]][j] for j in range(m)]
    ratio = [[exact_ratio(ref[j], q[i][j]) for j in range(m)] for i in range(n)]
    r = [[max(ratio[i][j], Fraction(1)) for j in range(m)] for i in range(n)]

    ms = exact_makespan(pred, x_hat)
    budget = INF if ms == INF else Fraction(gamma) * ms
    j_sets = [set() for _ in range(n)]
    j_load = [Fraction(0)] * n
    committed = set()
    open_machines = set(range(n))

    def candidates():
        pairs = []
        for j in range(m):
            if j in committed:
                continue
            faster = [i for i in open_machines if q[i][j] < ref[j]]
            if not faster:
                continue
            best = min(q[i][j] for i in faster)
            pairs.extend((i, j) for i in faster if q[i][j] == best)
        return pairs

    pairs = candidates()
    while pairs:
        # largest ratio first; ties to the smaller job, then the smaller machine
        i_star, j_star = max(pairs, key=lambda ij: (ratio[ij[0]][ij[1]], -ij[1], -ij[0]))
        j_sets[i_star].add(j_star)
        committed.add(j_star)
        j_load[i_star] += Fraction(q[i_star][j_star])
        for i in range(n):
            if q[i_star][j_star] <= q[i][j_star]:
                r[i][j_star] = override if scope == "dominated" or i == i_star else Fraction(1)
        open_machines = {i for i in range(n) if j_load[i] < budget}
        pairs = candidates()
    return r, tuple(frozenset(s) for s in j_sets)


def scalars_scaled(pred: Prediction, predicted_alloc: Sequence[int], gamma: float) -> ScalarPlan:
    x_hat = _check_prediction(pred, predicted_alloc)
    _warn_gamma(gamma, pred.n)
    r, j_sets = _scaled_loop(pred, x_hat, gamma, Fraction(1))
    return ScalarPlan(tuple(map(tuple, r)), x_hat, j_sets, TiePolicy.PREDICTED_THEN_JSET,
                      predicted_makespan=to_float(exact_makespan(pred, x_hat)))


def scalars_error_tolerant(pred: Prediction, predicted_alloc: Sequence[int],
                           gamma: float, eta_bar: float, scope: str = "dominated") -> ScalarPlan:
    """Scaled greedy scalars with the prediction-following entries lowered to 1/eta_bar**2.

    The default ``scope="dominated"`` lowers, for each committed job, the
    scalar of every machine predicted no faster than the committing one, the
    predicted machine included. Those machines are then compared on raw
    reported times, so a committed job can leave its ``J_i`` machine even
    when the prediction error is within ``eta_bar``. ``scope="committed"``
    lowers only the committing machine and keeps the others at 1, which
    preserves the committed assignment whenever ``eta <= eta_bar``.
    """
    x_hat = _check_prediction(pred, predicted_alloc)
    if not eta_bar > 0:
        raise ValueError(f"eta_bar must be positive, got {eta_bar}")
    _warn_gamma(gamma, pred.n)
    low = 1 / Fraction(eta_bar) ** 2
    r, j_sets = _scaled_loop(pred, x_hat, gamma, low, scope)
    committed = frozenset().union(*j_sets)
    for j in range(pred.m):
        if j not in committed:
            r[x_hat[j]][j] = low
    return ScalarPlan(tuple(map(tuple, r)), x_hat, j_sets, TiePolicy.PREDICTED_THEN_JSET,
                      predicted_makespan=to_float(exact_makespan(pred, x_hat)))


def scaled_times(inst: Instance, plan: ScalarPlan, j: int):
    return [exact_product(plan.scalars[i][j], inst.p[i, j]) for i in range(inst.n)]


def winner(plan: ScalarPlan, j: int, values: Sequence, tie_tol: float = 0.0) -> int:
    """Machine receiving job ``j`` given its scaled times, applying the plan's tie rule."""
    low = min(values)
    if low == INF:
        raise InfeasibleError(f"job {j} has infinite scaled time on every machine")
    if tie_tol:
        tied = [i for i, v in enumerate(values) if to_float(v) <= to_float(low) + tie_tol]
    else:
        tied = [i for i, v in enumerate(values) if v == low]
    if len(tied) == 1 or plan.tie_policy is TiePolicy.MIN_INDEX:
        return tied[0]
    predicted = plan.predicted_machine(j)
    if predicted in tied:
        return predicted
    if plan.tie_policy is TiePolicy.PREDICTED_THEN_JSET:
        owner = plan.j_owner(j)
        if owner in tied:
            return owner
    return tied[0]


def assign_scaled_min(inst: Instance, plan: ScalarPlan, tie_tol: float = 0.0) -> Allocation:
    """Each job to ``argmin_i r[i][j] * p[i][j]``; exact ties resolved by ``plan.tie_policy``."""
    if inst.shape != (plan.n, plan.m):
        raise ShapeError(f"instance shape {inst.shape} does not match plan {(plan.n, plan.m)}")
    if plan.follow_prediction:
        return plan.predicted_alloc
    return tuple(winner(plan, j, scaled_times(inst, plan, j), tie_tol) for j in range(inst.m))


def build_plan(kind: str, pred: Optional[Prediction], gamma: Optional[float] = None,
               eta_bar: Optional[float] = None, solver=None, shape=None):
    """Scalar-construction phase. Returns ``(plan, solver_alpha)``."""
    if kind not in MECHANISMS:
        raise ValueError(f"unknown mechanism {kind!r}; expected one of {', '.join(MECHANISMS)}")
    if kind == GREEDY:
        n, m = shape if pred is None else pred.shape
        return scalars_greedy(n, m), float(n)
    if pred is None:
        raise ValueError(f"mechanism {kind!r} needs a prediction")
    if not isinstance(pred, Prediction):
        pred = Prediction(pred.p)
    if kind in (SCALED, ERROR_TOLERANT) and gamma is None:
        raise ValueError(f"mechanism {kind!r} needs gamma")
    if kind == ERROR_TOLERANT and eta_bar is None:
        raise ValueError("mechanism 'error-tolerant' needs eta_bar")
    result = (solver or ExactSolver()).solve(pred)
    if kind == FOLLOW_PREDICTION:
        plan = scalars_follow(pred, result.alloc)
    elif kind == SIMPLE:
        plan = scalars_simple(pred, result.alloc)
    elif kind == SCALED:
        plan = scalars_scaled(pred, result.alloc, gamma)
    else:
        plan = scalars_error_tolerant(pred, result.alloc, gamma, eta_bar)
    return plan, float(result.alpha)


def run_mechanism(kind: str, inst: Instance, pred: Optional[Prediction] = None,
                  gamma: Optional[float] = None, eta_bar: Optional[float] = None,
                  solver=None) -> MechanismOutcome:
    if pred is not None and pred.shape != inst.shape:
        raise ShapeError(f"prediction shape {pred.shape} does not match instance {inst.shape}")
    plan, alpha = build_plan(kind, pred, gamma, eta_bar, solver, shape=inst.shape)
    params = {k: v for k, v in (("gamma", gamma), ("eta_bar", eta_bar)) if v is not None}
    return MechanismOutcome(kind, assign_scaled_min(inst, plan), plan, alpha, params)


def mechanism_runner(kind: str, pred: Optional[Prediction], gamma=None, eta_bar=None, solver=None,
                     shape=None):
    """Allocation rule ``inst -> alloc`` with the plan computed once from ``pred``."""
    plan, _ = build_plan(kind, pred, gamma, eta_bar, solver, shape=shape)
    return lambda inst: assign_scaled_min(inst, plan)
