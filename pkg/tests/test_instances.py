import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mechsched.core import INF, Instance, Prediction, prediction_error
from mechsched.instances import (
    GeneratorSpec,
    gen_correlated,
    gen_figure1,
    gen_figure2,
    gen_perturbed,
    gen_uniform,
    generate,
)
from mechsched.makespan import opt_oracle, solve_exact
from mechsched.mechanisms import SIMPLE, run_mechanism
from mechsched.core import makespan


class TestUniform:
    def test_constant(self):
        assert (gen_uniform(2, 3, 4.0, 4.0, 0).p == 4.0).all()

    def test_deterministic(self):
        assert gen_uniform(3, 4, 1, 10, 5) == gen_uniform(3, 4, 1, 10, 5)
        assert gen_uniform(3, 4, 1, 10, 5) != gen_uniform(3, 4, 1, 10, 6)

    @given(st.integers(0, 2**32 - 1))
    def test_range(self, seed):
        p = gen_uniform(2, 2, 1, 2, seed).p
        assert ((1 <= p) & (p <= 2)).all()

    @pytest.mark.parametrize("lo,hi", [(0, 1), (2, 1), (1, INF)])
    def test_bad_range(self, lo, hi):
        with pytest.raises(ValueError):
            gen_uniform(2, 2, lo, hi)


def test_correlated_in_range():
    p = gen_correlated(4, 6, 1, 100, seed=1).p
    assert ((1 <= p) & (p <= 100)).all()
    assert gen_correlated(4, 6, 1, 100, seed=1) == gen_correlated(4, 6, 1, 100, seed=1)


class TestImpossibilityPair:
    def test_tables(self):
        pred, inst = gen_figure1(100, 0.01)
        assert pred.p.tolist() == [[100, 1], [INF, 100]]
        assert inst.p.tolist() == [[0, 1.01], [INF, 100]]

    def test_optimum(self):
        _, inst = gen_figure1(100, 0.01)
        assert opt_oracle(inst) == pytest.approx(1.01, rel=1e-12)

    @pytest.mark.parametrize("K,eps", [(1.0, 0.01), (1.005, 0.01), (10, 0)])
    def test_preconditions(self, K, eps):
        with pytest.raises(ValueError):
            gen_figure1(K, eps)


class TestQuadraticFamily:
    def test_tables_n3(self):
        pred, inst = gen_figure2(3, 0.01)
        assert pred.p.tolist() == [[1, INF, 6, INF], [INF, 1, INF, 6], [3, 3, INF, INF]]
        assert inst.p.tolist() == [[1.01, INF, 0, 0], [INF, 1.01, 0, 0], [3, 3, INF, INF]]

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_optima(self, n):
        pred, inst = gen_figure2(n, 0.01)
        assert opt_oracle(inst) == pytest.approx(1.01, rel=1e-12)
        res = solve_exact(pred)
        assert res.value == n * (n - 1)
        assert res.alloc[: n - 1] == (n - 1,) * (n - 1)

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_simple_mechanism_tightness(self, n):
        pred, inst = gen_figure2(n, 0.01)
        out = run_mechanism(SIMPLE, inst, pred)
        assert makespan(inst, out.alloc) == n * (n - 1)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            gen_figure2(1)
        with pytest.raises(ValueError):
            gen_figure2(3, 0)


class TestPerturbed:
    def test_identity(self):
        base = gen_uniform(3, 4, 1, 10, 0)
        assert gen_perturbed(base, 1, 0) == Prediction(base.p)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([1.5, 2.0, 10.0, 100.0]))
    def test_realised_error(self, seed, eta):
        base = gen_uniform(3, 4, 1, 10, seed)
        pred = gen_perturbed(base, eta, seed)
        assert prediction_error(base, pred) == pytest.approx(eta, rel=1e-12)
        assert prediction_error(base, pred) <= eta * (1 + 1e-12)

    def test_exact_two(self):
        base = gen_uniform(2, 3, 1, 10, 7)
        assert prediction_error(base, gen_perturbed(base, 2, 7)) == 2

    def test_deterministic(self):
        base = gen_uniform(2, 3, 1, 10, 7)
        assert gen_perturbed(base, 3, 11) == gen_perturbed(base, 3, 11)

    def test_copies_infinity(self):
        base = Instance([[1, INF], [2, 3]])
        pred = gen_perturbed(base, 2, 0)
        assert pred.p[0, 1] == INF

    def test_rejects_zeros(self):
        with pytest.raises(ValueError):
            gen_perturbed(Instance([[0, 1]]), 2)

    def test_rejects_eta_below_one(self):
        with pytest.raises(ValueError):
            gen_perturbed(gen_uniform(2, 2), 0.5)


class TestGeneratorSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            GeneratorSpec("figure1", n=3, m=2)
        with pytest.raises(ValueError):
            GeneratorSpec("figure2", n=3, m=5)
        with pytest.raises(ValueError):
            GeneratorSpec("nope")
        with pytest.raises(ValueError):
            GeneratorSpec("uniform", n=0)

    def test_generate_all_families(self):
        for setup in [GeneratorSpec("uniform", 2, 3, seed=1), GeneratorSpec("correlated", 2, 3, seed=1),
                     GeneratorSpec("figure1", params={"K": 10}), GeneratorSpec("figure2", 3, 4),
                     GeneratorSpec("perturbed", 2, 3, seed=1, params={"eta": 2})]:
            inst, pred = generate(setup)
            assert isinstance(inst, Instance) and isinstance(pred, Prediction)
            assert inst.shape == pred.shape == (setup.n, setup.m)

    def test_generate_deterministic(self):
        setup = GeneratorSpec("perturbed", 3, 3, seed=4, params={"eta": 5})
        assert generate(setup) == generate(setup)
        assert prediction_error(*generate(setup)) == pytest.approx(5)
