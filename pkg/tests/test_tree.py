import math

import numpy as np
import pytest

from fpplab import rng
from fpplab.measures import pushforward
from fpplab.tree import (
    BudgetExceededError,
    TreeEnvironment,
    enumerate_minimum,
    tree_empirical_measure,
    tree_min_monte_carlo,
    tree_minimum,
)
from fpplab.weights import Analytic, PiecewiseConstant, Shifted, constant


class TestTreeMinimum:
    def test_constant_weights(self):
        env = TreeEnvironment(3, 5, constant(0.4))
        rec = tree_minimum(env, 6)
        assert rec.value == pytest.approx(6 * 0.4, abs=1e-15)
        assert rec.leaf == (0,) * 6  # lexicographically smallest among all ties

    def test_small_case_equals_explicit_leaf_sweep(self):
        env = TreeEnvironment(2, 77, Analytic("uniform"))
        n = 3
        best = math.inf
        best_leaf = None
        for code in range(2**n):
            leaf = tuple((code >> (n - 1 - k)) & 1 for k in range(n))
            total = 0.0
            for w in env.path_values(leaf)[1]:
                total += float(w)
            if total < best:
                best, best_leaf = total, leaf
        rec = tree_minimum(env, n)
        assert rec.value == best
        assert rec.leaf == best_leaf

    def test_matches_enumeration_across_seeds_and_arities(self):
        tau = Analytic("uniform")
        for d, n in ((2, 10), (3, 7)):
            for seed in range(8):
                env = TreeEnvironment(d, seed, tau)
                a = tree_minimum(env, n)
                b = enumerate_minimum(env, n)
                assert a.value == b.value
                assert a.leaf == b.leaf

    def test_ties_resolve_to_lexicographic_argmin(self):
        # atomic law with massive degeneracy: many leaves share the minimum
        tau = PiecewiseConstant([0.5, 0.5], [0.0, 1.0])
        for seed in range(20):
            env = TreeEnvironment(2, seed, tau)
            a = tree_minimum(env, 9)
            b = enumerate_minimum(env, 9)  # np.argmin takes the first = lex smallest
            assert a.value == b.value
            assert a.leaf == b.leaf

    def test_value_never_exceeds_sampled_leaves(self):
        env = TreeEnvironment(2, 13, Analytic("uniform"))
        rec = tree_minimum(env, 14)
        gen = np.random.default_rng(3)
        for _ in range(100):
            leaf = tuple(int(v) for v in gen.integers(0, 2, size=14))
            total = 0.0
            for w in env.path_values(leaf)[1]:
                total += float(w)
            assert rec.value <= total

    def test_budget_exceeded_raises(self):
        env = TreeEnvironment(2, 1, Analytic("uniform"))
        with pytest.raises(BudgetExceededError):
            tree_minimum(env, 12, budget=10)

    def test_budget_env_var_override(self, monkeypatch):
        monkeypatch.setenv("FPP_LAB_BUDGET", "10")
        env = TreeEnvironment(2, 1, Analytic("uniform"))
        with pytest.raises(BudgetExceededError):
            tree_minimum(env, 12)
        monkeypatch.delenv("FPP_LAB_BUDGET")
        tree_minimum(env, 12)

    def test_depth_validation(self):
        env = TreeEnvironment(2, 1, constant(1.0), max_depth=8)
        with pytest.raises(ValueError):
            tree_minimum(env, 9)
        with pytest.raises(ValueError):
            tree_minimum(env, 0)


class TestNegativeShifts:
    def test_shifted_weights_still_exact(self):
        tau = Shifted(Analytic("uniform"), -0.4, "add")
        assert tau.lower_bound() == pytest.approx(-0.4)
        for seed in range(6):
            env = TreeEnvironment(2, seed, tau)
            a = tree_minimum(env, 10)
            b = enumerate_minimum(env, 10)
            assert a.value == b.value
            assert a.leaf == b.leaf
            assert a.value < 0  # minimum of shifted sums dips negative


class TestEmpiricalMeasures:
    def test_depth_one_is_point_mass(self):
        env = TreeEnvironment(2, 3, Analytic("uniform"))
        rec = tree_minimum(env, 1)
        sigma, nu = tree_empirical_measure(rec)
        assert len(sigma.atoms()) == 1 and sigma.total_mass == pytest.approx(1.0)
        assert nu.atoms()[0][0] == rec.weights[0]

    def test_constant_law_pushforward(self):
        env = TreeEnvironment(2, 3, constant(0.9))
        rec = tree_minimum(env, 12)
        _, nu = tree_empirical_measure(rec)
        assert nu.atoms() == [(0.9, pytest.approx(1.0))]

    def test_nu_is_pushforward_of_sigma(self):
        env = TreeEnvironment(2, 11, PiecewiseConstant([0.3, 0.7], [0.0, 2.0]))
        rec = tree_minimum(env, 15)
        sigma, nu = tree_empirical_measure(rec)
        assert pushforward(sigma, env.tau).allclose(nu, tol=0.0)

    def test_vertex_uniform_matches_path_values(self):
        env = TreeEnvironment(3, 21, Analytic("uniform"))
        label = (2, 0, 1, 1)
        us, ws = env.path_values(label)
        for k in range(len(label)):
            assert env.vertex_uniform(label[: k + 1]) == us[k]


class TestMonteCarlo:
    def test_constant_law_degenerate_ci(self):
        mc = tree_min_monte_carlo(2, constant(1.0), 8, 10, seed=5)
        assert mc.mean == pytest.approx(1.0, abs=1e-12)
        assert mc.sd == pytest.approx(0.0, abs=1e-12)
        lo, hi = mc.ci99
        assert lo == pytest.approx(hi, abs=1e-12)

    def test_replica_values_match_independent_runs(self):
        tau = Analytic("uniform")
        mc = tree_min_monte_carlo(2, tau, 10, 8, seed=42)
        for i, v in enumerate(mc.values):
            env = TreeEnvironment(2, rng.derive_seed(42, i), tau)
            assert v == tree_minimum(env, 10).value / 10

    def test_budget_failures_counted_not_fatal(self):
        mc = tree_min_monte_carlo(2, Analytic("uniform"), 12, 6, seed=1, budget=10)
        assert mc.failures == 6
        assert len(mc.values) == 0

    def test_requires_two_replicas(self):
        with pytest.raises(ValueError):
            tree_min_monte_carlo(2, constant(1.0), 5, 1, seed=0)

    def test_scaled_minimum_concentrates(self):
        # surrogate for superadditive convergence: replica SD shrinks with depth
        tau = Analytic("uniform")
        sds = [tree_min_monte_carlo(2, tau, n, 50, seed=77).sd for n in (10, 15, 20)]
        assert sds[0] > sds[1] > sds[2]

    def test_parallel_matches_serial(self):
        tau = Analytic("uniform")
        a = tree_min_monte_carlo(2, tau, 9, 6, seed=3, threads=1)
        b = tree_min_monte_carlo(2, tau, 9, 6, seed=3, threads=4)
        assert a.values == b.values
