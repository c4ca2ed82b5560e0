"""Executable checks of the mechanisms' guarantees.

Three kinds of checks live here:

* monotonicity of an allocation rule under unilateral report changes, and a
  payment-based truthfulness fuzzer built on :mod:`mechsched.payments`;
* ratio campaigns measuring makespan / OPT against the bound each mechanism
  is proved to satisfy (consistency, robustness, error-dependent);
* structural invariants of the scalar plans.

Every campaign derives the randomness of trial ``k`` from ``(seed, k)``, so
reports are identical however the trials are scheduled.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    INF,
    Allocation,
    Instance,
    Prediction,
    ShapeError,
    check_allocation,
    encode_vector,
    exact_makespan,
    makespan,
    prediction_error,
    to_float,
)
from .instances import gen_figure1, gen_figure2, gen_perturbed, gen_uniform
from .makespan import opt_oracle
from .mechanisms import (
    ERROR_TOLERANT,
    FOLLOW_PREDICTION,
    GREEDY,
    SCALED,
    SIMPLE,
    ScalarPlan,
    assign_scaled_min,
    build_plan,
)
from .payments import MonopolistJobError, critical_payments, utility

SLACK = 1e-9
CSV_COLUMNS = ("mechanism", "n", "m", "gamma", "eta_bar", "eta", "trials", "max_ratio", "bound",
               "violations")

Rule = Callable[[Instance], Allocation]
PairGenerator = Callable[[np.random.Generator], Tuple[Instance, Prediction]]


def _exceeds(value: float, bound: float) -> bool:
    return value > bound * (1 + SLACK)


def _trial_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng([seed, k])


def _map(fn, items, workers: int = 1):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _json_number(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


# -- monotonicity ----------------------------------------------------------

def monotonicity_sum(p: Instance, p_alt: Instance, machine: int, alloc, alloc_alt) -> float:
    """``sum_j (x[i,j] - x'[i,j]) * (p[i,j] - p'[i,j])`` for ``i = machine``; monotone rules give <= 0."""
    if p.shape != p_alt.shape:
        raise ShapeError(f"shape mismatch {p.shape} vs {p_alt.shape}")
    others = [k for k in range(p.n) if k != machine]
    if not np.array_equal(p.p[others], p_alt.p[others]):
        raise ValueError(f"instances differ outside machine {machine}")
    alloc = check_allocation(p, alloc)
    alloc_alt = check_allocation(p_alt, alloc_alt)
    total = 0.0
    for j in range(p.m):
        x = int(alloc[j] == machine)
        x_alt = int(alloc_alt[j] == machine)
        if x != x_alt:
            total += (x - x_alt) * (p.p[machine, j] - p_alt.p[machine, j])
    return total


@dataclass
class MonotonicityReport:
    holds: bool
    checked: int
    witness: Optional[dict] = None

    def to_dict(self) -> dict:
        return {"holds": self.holds, "checked": self.checked, "witness": self.witness}


def shift_transform(p: Instance, alloc, machine: int, delta) -> Instance:
    """Raise machine ``machine``'s unassigned entries and lower its assigned ones by ``delta``.

    ``delta`` is a scalar or a per-job vector. A monotone rule must return the
    same allocation on the result.
    """
    alloc = check_allocation(p, alloc)
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (p.m,))
    if (delta < 0).any():
        raise ValueError("delta must be nonnegative")
    row = p.p[machine].copy()
    won = np.array([k == machine for k in alloc])
    if (row[won] < delta[won]).any():
        raise ValueError("delta exceeds an assigned processing time")
    row = np.where(won, row - delta, row + delta)
    return p.with_row(machine, row)


def _deviate(base: Instance, rule: Rule, rng: np.random.Generator, alloc: Allocation):
    i = int(rng.integers(base.n))
    row = base.p[i].copy()
    finite = np.isfinite(row)
    if rng.random() < 0.25:
        won = [j for j, k in enumerate(alloc) if k == i and row[j] > 0]
        room = min((row[j] for j in won), default=1.0)
        delta = rng.uniform(0, room) if room > 0 else 0.0
        return i, shift_transform(base, alloc, i, delta)
    factors = np.exp(rng.uniform(math.log(0.1), math.log(10.0), size=base.m))
    row = np.where(finite, row * factors, row)
    row[finite & (rng.random(base.m) < 0.05)] = 0.0
    return i, base.with_row(i, row)


def check_monotone(rule: Rule, base: Instance, deviations: int = 1000, seed: int = 0) -> MonotonicityReport:
    """Probe ``rule`` with random unilateral deviations from ``base``.

    Deviations mix per-entry multiplicative misreports (log-uniform in
    [1/10, 10], occasionally zero) with targeted report-shifting transforms.
    """
    alloc = rule(base)
    for k in range(deviations):
        rng = _trial_rng(seed, k)
        i, alt = _deviate(base, rule, rng, alloc)
        alt_alloc = rule(alt)
        s = monotonicity_sum(base, alt, i, alloc, alt_alloc)
        if s > 0:
            return MonotonicityReport(False, k + 1, {
                "p": base.to_dict(), "p_alt": alt.to_dict(), "machine": i,
                "alloc": list(alloc), "alloc_alt": list(alt_alloc), "sum": s,
            })
    return MonotonicityReport(True, deviations)


def check_mechanism_monotone(kind: str, pred: Optional[Prediction], base: Instance,
                             deviations: int = 1000, seed: int = 0, gamma=None, eta_bar=None,
                             solver=None) -> MonotonicityReport:
    plan, _ = build_plan(kind, pred, gamma, eta_bar, solver, shape=base.shape)
    return check_monotone(lambda inst: assign_scaled_min(inst, plan), base, deviations, seed)


def max_reporter_rule(inst: Instance) -> Allocation:
    """Each job to the machine reporting the largest time. Anti-monotone fixture."""
    masked = np.where(np.isfinite(inst.p), inst.p, -1.0)
    return tuple(int(i) for i in np.argmax(masked, axis=0))


def monotonicity_campaign(kind: str, pairs: PairGenerator, bases: int, deviations: int, seed: int,
                          gamma=None, eta_bar=None, solver=None, rule: Optional[Rule] = None,
                          workers: int = 1) -> MonotonicityReport:
    """``bases`` random (instance, prediction) draws, ``deviations`` deviations each."""
    def one(k):
        rng = _trial_rng(seed, k)
        inst, pred = pairs(rng)
        if rule is not None:
            return check_monotone(rule, inst, deviations, seed=int(rng.integers(2**31)))
        return check_mechanism_monotone(kind, pred, inst, deviations, int(rng.integers(2**31)),
                                        gamma, eta_bar, solver)

    reports = _map(one, range(bases), workers)
    checked = sum(r.checked for r in reports)
    for r in reports:
        if not r.holds:
            return MonotonicityReport(False, checked, r.witness)
    return MonotonicityReport(True, checked)


# -- plan invariants -------------------------------------------------------

def simple_range_ok(plan: ScalarPlan) -> bool:
    return all(1 <= v <= plan.n for row in plan.scalars for v in row)


def observation_ok(plan: ScalarPlan, pred: Prediction) -> bool:
    """Scaled greedy scalars are >= 1 and equal 1 wherever p_hat[i][j] >= p_hat[i_hat][j]."""
    for i, row in enumerate(plan.scalars):
        for j, v in enumerate(row):
            if v < 1:
                return False
            if pred.p[i, j] >= pred.p[plan.predicted_alloc[j], j] and v != 1:
                return False
    return True


def scalar_sum(plan: ScalarPlan):
    """Sum over machines with some scalar > 1 of that machine's largest scalar."""
    total = Fraction(0)
    for row in plan.scalars:
        top = max(row)
        if top > 1:
            if top == INF:
                return INF
            total += top
    return total


def scalar_sum_ok(plan: ScalarPlan, gamma: float) -> bool:
    return not _exceeds(to_float(scalar_sum(plan)), plan.n / gamma)


def j_sets_disjoint(plan: ScalarPlan) -> bool:
    seen = set()
    for js in plan.j_sets:
        if seen & js:
            return False
        seen |= js
    return True


def j_budget_ok(plan: ScalarPlan, pred: Prediction, gamma: float) -> bool:
    """Predicted load of every ``J_i`` stays below ``(1 + gamma) * MS(p_hat, x_hat)``."""
    ms = exact_makespan(pred, plan.predicted_alloc)
    limit = (1 + Fraction(gamma)) * ms if ms != INF else INF
    for i, js in enumerate(plan.j_sets):
        if sum((Fraction(pred.p[i, j]) for j in js), Fraction(0)) >= limit:
            return False
    return True


def follows_plan(plan: ScalarPlan, alloc: Allocation) -> bool:
    """Jobs in ``J_i`` sit on ``i``; every other job sits on its predicted machine."""
    for j, i in enumerate(alloc):
        owner = plan.j_owner(j)
        if i != (plan.predicted_alloc[j] if owner is None else owner):
            return False
    return True


# -- ratio campaigns -------------------------------------------------------

def theoretical_bound(kind: str, n: int, alpha: float, gamma: Optional[float] = None,
                      eta_bar: Optional[float] = None, eta=1) -> float:
    """Proved approximation bound of ``kind`` at prediction error ``eta``.

    ``eta`` may be exact (Fraction); ``eta == 1`` selects the consistency bound.
    Following the prediction blindly is only certified at its consistency
    ``alpha``, which is the bound reported for it at every error level.
    """
    accurate = eta == 1
    if kind == GREEDY:
        return float(n)
    if kind == FOLLOW_PREDICTION:
        return alpha
    if kind == SIMPLE:
        return 2 * alpha if accurate else float(n * n)
    if kind == SCALED:
        return (2 + gamma) * alpha if accurate else (1 + 1 / gamma) * n
    if kind == ERROR_TOLERANT:
        if eta <= Fraction(eta_bar):
            return (2 + gamma) * alpha * to_float(eta) ** 2
        return (1 + 1 / gamma) * eta_bar**2 * n
    raise ValueError(f"unknown mechanism {kind!r}")


@dataclass
class RatioReport:
    label: str
    mechanism: str
    trials: int
    max_ratio: float
    bound: float
    violations: int
    records: List[dict] = field(default_factory=list)
    invariant_failures: Dict[str, int] = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.violations == 0 and not any(self.invariant_failures.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["max_ratio"] = _json_number(self.max_ratio)
        d["bound"] = _json_number(self.bound)
        d["records"] = [{k: _json_number(v) for k, v in r.items()} for r in self.records]
        return d

    def csv_row(self, eta="") -> dict:
        ns = sorted({r["n"] for r in self.records})
        ms = sorted({r["m"] for r in self.records})
        return {
            "mechanism": self.mechanism,
            "n": _span(ns), "m": _span(ms),
            "gamma": self.params.get("gamma", ""), "eta_bar": self.params.get("eta_bar", ""),
            "eta": eta, "trials": self.trials,
            "max_ratio": _json_number(self.max_ratio), "bound": _json_number(self.bound),
            "violations": self.violations,
        }


def _span(values):
    if not values:
        return ""
    return str(values[0]) if values[0] == values[-1] else f"{values[0]}-{values[-1]}"


def _plan_invariants(kind, plan, pred, alloc, gamma, eta_bar, eta) -> Dict[str, bool]:
    checks = {}
    if kind == SIMPLE:
        checks["scalar_range"] = simple_range_ok(plan)
    if kind == SCALED:
        checks["observation"] = observation_ok(plan, pred)
        checks["scalar_sum"] = scalar_sum_ok(plan, gamma)
        checks["j_budget"] = j_budget_ok(plan, pred, gamma)
        checks["j_disjoint"] = j_sets_disjoint(plan)
        if eta == 1:
            checks["follows_plan"] = follows_plan(plan, alloc)
    if kind == ERROR_TOLERANT:
        low = 1 / Fraction(eta_bar) ** 2
        checks["scalar_values"] = all(v == low or v >= 1 for row in plan.scalars for v in row)
        checks["j_budget"] = j_budget_ok(plan, pred, gamma)
        checks["j_disjoint"] = j_sets_disjoint(plan)
        if eta <= Fraction(eta_bar):
            checks["follows_plan"] = follows_plan(plan, alloc)
    return checks


def measure(kind: str, inst: Instance, pred: Prediction, gamma=None, eta_bar=None, solver=None,
            keep_plan: bool = False) -> dict:
    """One trial: run the mechanism, compare with OPT and the proved bound, check invariants."""
    plan, alpha = build_plan(kind, pred, gamma, eta_bar, solver, shape=inst.shape)
    alloc = assign_scaled_min(inst, plan)
    eta = prediction_error(inst, pred, exact_value=True) if pred is not None else Fraction(1)
    ms = makespan(inst, alloc)
    opt = opt_oracle(inst)
    if opt == 0:
        ratio = 1.0 if ms == 0 else INF
    else:
        ratio = ms / opt
    bound = theoretical_bound(kind, inst.n, alpha, gamma, eta_bar, eta)
    record = {
        "n": inst.n, "m": inst.m, "eta": to_float(eta), "alpha": alpha,
        "makespan": ms, "opt": opt, "ratio": ratio, "bound": bound,
        "violated": _exceeds(ratio, bound),
        "invariants": _plan_invariants(kind, plan, pred, alloc, gamma, eta_bar, eta),
    }
    if keep_plan:
        record["plan"] = plan
        record["alloc"] = alloc
    return record


def _campaign(label: str, kind: str, pairs: PairGenerator, trials: int, seed: int, gamma, eta_bar,
              solver, workers: int, keep_plans: bool, fixtures=()) -> RatioReport:
    if trials < 1:
        raise ValueError("trials must be at least 1")

    def one(k):
        inst, pred = pairs(_trial_rng(seed, k))
        record = measure(kind, inst, pred, gamma, eta_bar, solver, keep_plans)
        record["trial"] = k
        return record

    records = _map(one, range(trials), workers)
    for name, inst, pred in fixtures:
        record = measure(kind, inst, pred, gamma, eta_bar, solver, keep_plans)
        record["trial"] = name
        records.append(record)
    failures: Dict[str, int] = {}
    for r in records:
        for name, good in r["invariants"].items():
            failures[name] = failures.get(name, 0) + (not good)
    params = {k: v for k, v in (("gamma", gamma), ("eta_bar", eta_bar)) if v is not None}
    return RatioReport(
        label=label, mechanism=kind, trials=len(records),
        max_ratio=max(r["ratio"] for r in records),
        bound=max(r["bound"] for r in records),
        violations=sum(r["violated"] for r in records),
        records=records, invariant_failures=failures, params=params,
    )


def evaluate_consistency(kind: str, instances: Callable[[np.random.Generator], Instance],
                         trials: int, seed: int = 0, gamma=None, eta_bar=None, solver=None,
                         workers: int = 1, keep_plans: bool = False) -> RatioReport:
    """Ratio with an exact prediction (``pred = inst``) on generated instances."""
    def pairs(rng):
        inst = instances(rng)
        return inst, Prediction(inst.p)

    return _campaign("consistency", kind, pairs, trials, seed, gamma, eta_bar, solver, workers,
                     keep_plans)


def evaluate_robustness(kind: str, pairs: PairGenerator, trials: int, seed: int = 0, gamma=None,
                        eta_bar=None, solver=None, workers: int = 1, keep_plans: bool = False,
                        fixtures: Sequence = ()) -> RatioReport:
    """Ratio over arbitrary (instance, prediction) pairs plus named fixture pairs."""
    return _campaign("robustness", kind, pairs, trials, seed, gamma, eta_bar, solver, workers,
                     keep_plans, fixtures)


def evaluate_error_curve(gamma: float, eta_bar: float, levels: Sequence[float],
                         instances: Callable[[np.random.Generator], Instance], trials: int,
                         seed: int = 0, solver=None, workers: int = 1,
                         keep_plans: bool = False) -> Dict[float, RatioReport]:
    """Error-tolerant mechanism at predictions perturbed to each error level."""
    reports = {}
    for level in levels:
        def pairs(rng, level=level):
            inst = instances(rng)
            return inst, gen_perturbed(inst, level, rng)

        reports[level] = _campaign(f"error-curve eta={level:g}", ERROR_TOLERANT, pairs, trials,
                                   seed, gamma, eta_bar, solver, workers, keep_plans)
    return reports


# -- generators for campaigns ----------------------------------------------

def random_instances(nmin: int = 2, nmax: int = 4, mmin: int = 2, mmax: int = 6, lo: float = 1.0,
                     hi: float = 10.0):
    def draw(rng):
        n = int(rng.integers(nmin, nmax + 1))
        m = int(rng.integers(mmin, mmax + 1))
        return gen_uniform(n, m, lo, hi, rng)
    return draw


def exact_pairs(instances):
    def draw(rng):
        inst = instances(rng)
        return inst, Prediction(inst.p)
    return draw


def adversarial_pairs(instances, etas: Sequence[float] = (2.0, 10.0, 100.0), lo: float = 1.0,
                      hi: float = 10.0):
    """Independent uniform predictions, or perturbations at one of ``etas``, with equal odds."""
    def draw(rng):
        inst = instances(rng)
        mode = int(rng.integers(len(etas) + 1))
        if mode == 0:
            return inst, Prediction(rng.uniform(lo, hi, size=inst.shape))
        return inst, gen_perturbed(inst, etas[mode - 1], rng)
    return draw


def fixture_pairs(eps: float = 0.01, figure2_ns: Sequence[int] = (3, 4, 5),
                  figure1_ks: Sequence[float] = (10.0, 100.0, 1000.0)):
    """Named extremal (label, instance, prediction) triples."""
    out = []
    for K in figure1_ks:
        pred, inst = gen_figure1(K, eps)
        out.append((f"figure1 K={K:g}", inst, pred))
    for n in figure2_ns:
        pred, inst = gen_figure2(n, eps)
        out.append((f"figure2 n={n}", inst, pred))
    return out


# -- truthfulness fuzzing --------------------------------------------------

@dataclass
class FuzzReport:
    mechanism: str
    trials: int
    checks: int
    skipped: int
    violations: List[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return asdict(self)


def _misreport(inst: Instance, i: int, rng: np.random.Generator) -> Instance:
    row = inst.p[i].copy()
    finite = np.isfinite(row)
    factors = np.exp(rng.uniform(math.log(0.1), math.log(10.0), size=inst.m))
    return inst.with_row(i, np.where(finite, row * factors, row))


def fuzz_strategyproofness(kind: str, pairs: PairGenerator, trials: int, misreports: int = 10,
                           seed: int = 0, gamma=None, eta_bar=None, solver=None,
                           payment_rule=critical_payments, monopolist: str = "error",
                           cap: Optional[float] = None, workers: int = 1) -> FuzzReport:
    """Compare truthful utility with the utility of random single-machine misreports.

    Misreports either rescale the machine's row log-uniformly in [1/10, 10]
    or apply the report-shifting transform around its truthful allocation.
    Utilities are measured at true costs. Runs whose payments hit an
    infinite critical value are counted as skipped.
    """
    def one(k):
        rng = _trial_rng(seed, k)
        inst, pred = pairs(rng)
        plan, _ = build_plan(kind, pred, gamma, eta_bar, solver, shape=inst.shape)
        alloc = assign_scaled_min(inst, plan)
        try:
            pay = payment_rule(inst, plan, alloc, monopolist=monopolist, cap=cap)
        except MonopolistJobError:
            return 0, misreports, []
        found, checks, skipped = [], 0, 0
        for _ in range(misreports):
            i = int(rng.integers(inst.n))
            if rng.random() < 0.25:
                won = [j for j, w in enumerate(alloc) if w == i and inst.p[i, j] > 0]
                room = min((inst.p[i, j] for j in won), default=1.0)
                lie = shift_transform(inst, alloc, i, rng.uniform(0, room) if room else 0.0)
            else:
                lie = _misreport(inst, i, rng)
            lie_alloc = assign_scaled_min(lie, plan)
            try:
                lie_pay = payment_rule(lie, plan, lie_alloc, monopolist=monopolist, cap=cap)
            except MonopolistJobError:
                skipped += 1
                continue
            checks += 1
            u_truth = utility(inst, alloc, pay, i)
            u_lie = utility(inst, lie_alloc, lie_pay, i)
            if u_lie > u_truth + SLACK * max(1.0, abs(u_truth), abs(u_lie)):
                found.append({
                    "trial": k, "machine": i, "truth": inst.to_dict(), "report": lie.to_dict(),
                    "prediction": None if pred is None else pred.to_dict(),
                    "alloc": list(alloc), "alloc_lie": list(lie_alloc),
                    "u_truth": u_truth, "u_lie": u_lie,
                    "payments": encode_vector(pay), "payments_lie": encode_vector(lie_pay),
                })
        return checks, skipped, found

    results = _map(one, range(trials), workers)
    report = FuzzReport(kind, trials, 0, 0)
    for checks, skipped, found in results:
        report.checks += checks
        report.skipped += skipped
        report.violations.extend(found)
    return report
