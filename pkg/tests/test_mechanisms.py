from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mechsched.core import INF, InfeasibleError, Instance, Prediction, ShapeError, makespan, prediction_error
from mechsched.instances import gen_figure1, gen_figure2, gen_perturbed, gen_uniform
from mechsched.makespan import GreedySolver, opt_oracle, solve_exact
from mechsched.mechanisms import (
    ERROR_TOLERANT,
    FOLLOW_PREDICTION,
    GREEDY,
    MECHANISMS,
    SCALED,
    SIMPLE,
    GammaRangeWarning,
    ScalarPlan,
    TiePolicy,
    assign_scaled_min,
    build_plan,
    mechanism_runner,
    run_mechanism,
    scalars_error_tolerant,
    scalars_follow,
    scalars_greedy,
    scalars_scaled,
    scalars_simple,
)
from mechsched.verify import follows_plan, j_budget_ok, j_sets_disjoint, observation_ok, scalar_sum_ok

from conftest import predictions

pytestmark = pytest.mark.filterwarnings("ignore::mechsched.mechanisms.GammaRangeWarning")


def reference_scaled(q, x_hat, gamma, low=Fraction(1)):
    """Literal re-implementation of the J/I/T loop, written independently of the library."""
    n, m = len(q), len(q[0])
    F = lambda v: v if v == INF else Fraction(v)

    def ratio(a, b):
        if a == INF and b == INF:
            return Fraction(1)
        if b == INF:
            return Fraction(0)
        return F(a) / F(b)

    r = [[max(ratio(q[x_hat[j]][j], q[i][j]), Fraction(1)) for j in range(m)] for i in range(n)]
    loads = [Fraction(0)] * n
    for j in range(m):
        loads[x_hat[j]] += F(q[x_hat[j]][j])
    ms = max(loads)
    J = [set() for _ in range(n)]
    while True:
        I = [i for i in range(n) if sum((F(q[i][j]) for j in J[i]), Fraction(0)) < gamma * ms]
        taken = set().union(*J)
        T = []
        for j in range(m):
            if j in taken:
                continue
            cands = [i for i in I if q[i][j] < q[x_hat[j]][j]]
            if cands:
                best = min(q[i][j] for i in cands)
                T += [(i, j) for i in cands if q[i][j] == best]
        if not T:
            break
        top = max(ratio(q[x_hat[j]][j], q[i][j]) for i, j in T)
        i_s, j_s = min((j, i) for i, j in T if ratio(q[x_hat[j]][j], q[i][j]) == top)[::-1]
        J[i_s].add(j_s)
        for i in range(n):
            if q[i_s][j_s] <= q[i][j_s]:
                r[i][j_s] = low
    return r, J


def plan_matrix(plan):
    return [list(row) for row in plan.scalars]


class TestSimple:
    def test_formula_examples(self):
        # n = 3 machines, job 0 predicted on machine 0 at 6
        pred = Prediction([[6, 1], [1, 2], [INF, 1]])
        plan = scalars_simple(pred, (0, 0))
        assert plan.scalars[0][0] == 1            # predicted machine
        assert plan.scalars[1][0] == 3            # 6/1 capped at n = 3
        assert plan.scalars[1][1] == 1            # 1/2 floored at 1
        assert plan.scalars[2][0] == 1            # finite/inf = 0, floored
        assert plan.tie_policy is TiePolicy.PREDICTED_FIRST
        assert all(not s for s in plan.j_sets)

    @settings(max_examples=80, deadline=None)
    @given(predictions(allow_inf=True))
    def test_range(self, pred):
        plan = scalars_simple(pred, solve_exact(pred).alloc)
        assert all(1 <= v <= pred.n for row in plan.scalars for v in row)

    def test_figure2_sends_small_jobs_to_last_machine(self):
        pred, inst = gen_figure2(3, 0.01)
        out = run_mechanism(SIMPLE, inst, pred)
        assert out.alloc[:2] == (2, 2)
        # r(i, i) = n on the small jobs' own machines
        assert out.plan.scalars[0][0] == 3 and out.plan.scalars[1][1] == 3


class TestScaled:
    def test_no_faster_machine(self):
        pred = Prediction([[1, 5], [2, 3]])
        plan = scalars_scaled(pred, (0, 1), 1.0)
        assert all(v == 1 for row in plan.scalars for v in row)
        assert all(not s for s in plan.j_sets)

    def test_single_iteration_example(self):
        pred = Prediction([[1, 1], [1.5, 1.5]])
        plan = scalars_scaled(pred, (0, 1), 1.0)
        assert all(v == 1 for row in plan.scalars for v in row)
        assert plan.j_sets == (frozenset({1}), frozenset())
        assert plan.tie_policy is TiePolicy.PREDICTED_THEN_JSET

    def test_small_gamma_closes_machine(self):
        pred = Prediction([[1, 1, 1], [4, 4, 4]])
        x_hat = (1, 1, 1)
        plan = scalars_scaled(pred, x_hat, 0.01)
        # 0.01 * MS(=12) < 1, so machine 0 leaves I after its first J job
        assert plan.j_sets[0] == frozenset({0})
        assert plan.scalars[0][1] == 4 and plan.scalars[0][2] == 4

    def test_pipeline_example(self):
        inst = Instance([[1, 1], [1.5, 1.5]])
        out = run_mechanism(SCALED, inst, Prediction(inst.p), gamma=1.0)
        assert out.alloc == (0, 0)
        assert makespan(inst, out.alloc) == 2
        assert makespan(inst, out.alloc) / opt_oracle(inst) == pytest.approx(4 / 3)

    def test_gamma_validation(self):
        pred = Prediction([[1, 1], [2, 2]])
        with pytest.raises(ValueError):
            scalars_scaled(pred, (0, 0), 0)
        with pytest.warns(GammaRangeWarning):
            scalars_scaled(pred, (0, 0), 5)

    @settings(max_examples=150, deadline=None)
    @given(predictions(nmax=4, mmax=5, allow_inf=True), st.sampled_from([0.1, 0.5, 1.0, 2.0]))
    def test_matches_reference_loop(self, pred, gamma):
        x_hat = solve_exact(pred).alloc
        plan = scalars_scaled(pred, x_hat, gamma)
        r, J = reference_scaled(pred.p.tolist(), x_hat, Fraction(gamma))
        assert plan_matrix(plan) == r
        assert [set(s) for s in plan.j_sets] == J

    @settings(max_examples=150, deadline=None)
    @given(predictions(nmax=4, mmax=5), st.sampled_from([0.25, 1.0, 3.0]))
    def test_structural_invariants(self, pred, gamma):
        x_hat = solve_exact(pred).alloc
        plan = scalars_scaled(pred, x_hat, gamma)
        assert observation_ok(plan, pred)
        assert all(plan.scalars[x_hat[j]][j] == 1 for j in range(pred.m))
        assert j_sets_disjoint(plan)
        assert j_budget_ok(plan, pred, gamma)
        assert scalar_sum_ok(plan, gamma)
        # with an exact prediction the committed jobs move and nothing else does
        alloc = assign_scaled_min(Instance(pred.p), plan)
        assert follows_plan(plan, alloc)

    def test_argmax_tie_prefers_smaller_job(self):
        pred = Prediction([[1, 1], [2, 2]])
        plan = scalars_scaled(pred, (1, 1), 0.01)
        assert plan.j_sets[0] == frozenset({0})


class TestErrorTolerant:
    def test_eta_bar_one_matches_scaled(self):
        pred = Prediction(gen_uniform(3, 5, seed=1).p)
        x_hat = solve_exact(pred).alloc
        assert scalars_error_tolerant(pred, x_hat, 1.0, 1.0).scalars == scalars_scaled(pred, x_hat, 1.0).scalars

    def test_loop_and_post_loop_overrides(self):
        pred = Prediction([[1, 1], [1.5, 1.5]])
        plan = scalars_error_tolerant(pred, (0, 1), 1.0, 2.0)
        q = Fraction(1, 4)
        assert plan_matrix(plan) == [[q, q], [1, q]]
        assert plan.j_sets == (frozenset({1}), frozenset())

    def test_only_predicted_machine_changes_without_competitor(self):
        pred = Prediction([[2, 1], [INF, 1]])
        plan = scalars_error_tolerant(pred, (0, 0), 1.0, 2.0)
        assert plan.scalars[0][0] == Fraction(1, 4)
        assert plan.scalars[1][0] == 1

    @settings(max_examples=100, deadline=None)
    @given(predictions(nmax=4, mmax=5, allow_inf=True), st.sampled_from([1.5, 2.0, 4.0]))
    def test_matches_reference_loop(self, pred, eta_bar):
        x_hat = solve_exact(pred).alloc
        plan = scalars_error_tolerant(pred, x_hat, 1.0, eta_bar)
        low = 1 / Fraction(eta_bar) ** 2
        r, J = reference_scaled(pred.p.tolist(), x_hat, Fraction(1), low)
        for j in range(pred.m):
            if not any(j in s for s in J):
                r[x_hat[j]][j] = low
        assert plan_matrix(plan) == r
        assert all(v == low or v >= 1 for row in plan.scalars for v in row)

    def test_committed_scope_keeps_other_machines_at_one(self):
        pred = Prediction([[1, 1], [1.5, 1.5]])
        plan = scalars_error_tolerant(pred, (0, 1), 1.0, 2.0, scope="committed")
        q = Fraction(1, 4)
        assert plan_matrix(plan) == [[q, q], [1, 1]]
        with pytest.raises(ValueError):
            scalars_error_tolerant(pred, (0, 1), 1.0, 2.0, scope="all")

    def test_committed_scope_preserves_plan_under_bounded_error(self):
        rng = np.random.default_rng(0)
        for k in range(200):
            inst = gen_uniform(int(rng.integers(2, 5)), int(rng.integers(2, 7)), 1, 10, rng)
            pred = gen_perturbed(inst, 2.0, rng)
            plan = scalars_error_tolerant(pred, solve_exact(pred).alloc, 1.0, 2.0, scope="committed")
            assert follows_plan(plan, assign_scaled_min(inst, plan))

    def test_eta_bar_validation(self):
        with pytest.raises(ValueError):
            scalars_error_tolerant(Prediction([[1]]), (0,), 1.0, 0)


class TestAssignment:
    def test_unit_scalars_reduce_to_greedy(self):
        plan = scalars_greedy(2, 2)
        assert assign_scaled_min(Instance([[1, 2], [3, 1]]), plan) == (0, 1)

    def test_predicted_first_tie(self):
        plan = ScalarPlan(((Fraction(2),), (Fraction(1),)), (0,), (frozenset(), frozenset()),
                          TiePolicy.PREDICTED_FIRST)
        assert assign_scaled_min(Instance([[1], [2]]), plan) == (0,)
        min_index = ScalarPlan(plan.scalars, (1,), plan.j_sets, TiePolicy.PREDICTED_FIRST)
        assert assign_scaled_min(Instance([[1], [2]]), min_index) == (1,)

    def test_jset_tie_second(self):
        ones = ((Fraction(1),),) * 3
        plan = ScalarPlan(ones, (0,), (frozenset(), frozenset(), frozenset({0})),
                          TiePolicy.PREDICTED_THEN_JSET)
        assert assign_scaled_min(Instance([[2], [1], [1]]), plan) == (2,)
        assert assign_scaled_min(Instance([[1], [1], [1]]), plan) == (0,)
        plain = ScalarPlan(ones, (0,), plan.j_sets, TiePolicy.PREDICTED_FIRST)
        assert assign_scaled_min(Instance([[2], [1], [1]]), plain) == (1,)

    def test_zero_job_with_finite_scalar(self):
        plan = ScalarPlan(((Fraction(5),), (Fraction(1),)), (1,), (frozenset(), frozenset()),
                          TiePolicy.PREDICTED_FIRST)
        assert assign_scaled_min(Instance([[0], [1]]), plan) == (0,)

    def test_infeasible(self):
        plan = ScalarPlan(((INF,), (INF,)), (0,), (frozenset(), frozenset()), TiePolicy.MIN_INDEX)
        with pytest.raises(InfeasibleError):
            assign_scaled_min(Instance([[1], [1]]), plan)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            assign_scaled_min(Instance([[1, 1]]), scalars_greedy(2, 2))

    def test_tie_tolerance(self):
        plan = scalars_greedy(2, 1)
        plan = ScalarPlan(plan.scalars, (1,), plan.j_sets, TiePolicy.PREDICTED_FIRST)
        inst = Instance([[1.0], [1.0 + 1e-12]])
        assert assign_scaled_min(inst, plan) == (0,)
        assert assign_scaled_min(inst, plan, tie_tol=1e-9) == (1,)

    @settings(max_examples=60, deadline=None)
    @given(predictions(nmax=3, mmax=4), st.data())
    def test_unassigned_up_assigned_down_keeps_allocation(self, pred, data):
        inst = Instance(pred.p)
        plan = scalars_scaled(pred, solve_exact(pred).alloc, 1.0)
        alloc = assign_scaled_min(inst, plan)
        i = data.draw(st.integers(0, inst.n - 1))
        row = inst.p[i].copy()
        for j in range(inst.m):
            f = data.draw(st.floats(0.1, 1.0))
            row[j] = row[j] * f if alloc[j] == i else row[j] / f
        assert assign_scaled_min(inst.with_row(i, row), plan) == alloc


class TestRunMechanism:
    def test_greedy(self):
        out = run_mechanism(GREEDY, Instance([[1, 2], [3, 1]]))
        assert out.alloc == (0, 1)
        assert out.solver_alpha == 2

    def test_follow_prediction_figure1(self):
        pred, inst = gen_figure1(100, 0.01)
        out = run_mechanism(FOLLOW_PREDICTION, inst, pred)
        assert out.alloc == (0, 1)
        assert makespan(inst, out.alloc) == 100
        assert makespan(inst, out.alloc) / opt_oracle(inst) == pytest.approx(100 / 1.01)

    def test_follow_prediction_ignores_reports(self):
        pred = Prediction([[1, 5], [5, 1]])
        plan = scalars_follow(pred, (0, 1))
        assert assign_scaled_min(Instance([[9, 0], [0, 9]]), plan) == (0, 1)

    def test_missing_parameters(self):
        inst = Instance([[1, 2], [2, 1]])
        with pytest.raises(ValueError):
            run_mechanism(SCALED, inst, Prediction(inst.p))
        with pytest.raises(ValueError):
            run_mechanism(ERROR_TOLERANT, inst, Prediction(inst.p), gamma=1)
        with pytest.raises(ValueError):
            run_mechanism(SIMPLE, inst)
        with pytest.raises(ValueError):
            run_mechanism("bogus", inst)
        with pytest.raises(ShapeError):
            run_mechanism(SIMPLE, inst, Prediction([[1, 2, 3], [1, 2, 3]]))

    def test_solver_alpha_propagates(self):
        inst = gen_uniform(3, 4, seed=0)
        _, alpha = build_plan(SCALED, Prediction(inst.p), 1.0, solver=GreedySolver())
        assert alpha == 3

    @pytest.mark.parametrize("kind", MECHANISMS)
    def test_runner_matches_run(self, kind):
        inst = gen_uniform(3, 4, seed=2)
        pred = gen_perturbed(inst, 2, 3)
        rule = mechanism_runner(kind, pred, 1.0, 2.0, shape=inst.shape)
        assert rule(inst) == run_mechanism(kind, inst, pred, 1.0, 2.0).alloc

    @pytest.mark.parametrize("kind", [SIMPLE, SCALED, ERROR_TOLERANT])
    def test_exact_prediction_is_consistent(self, kind):
        rng = np.random.default_rng(9)
        for _ in range(50):
            inst = gen_uniform(3, 4, 1, 10, rng)
            out = run_mechanism(kind, inst, Prediction(inst.p), 1.0, 2.0)
            bound = 2 if kind == SIMPLE else 3
            assert makespan(inst, out.alloc) <= bound * opt_oracle(inst) * (1 + 1e-9)
