import math

import numpy as np
import pytest
from scipy.optimize import brentq

from fpplab.measures import Grid
from fpplab.tree import tree_min_monte_carlo
from fpplab.variational import (
    MinimizerResidualError,
    lattice_concavity_probe,
    solve_minimizer,
    tree_derivative_identity,
    tree_time_constant,
)
from fpplab.weights import (
    Analytic,
    Combined,
    CountableAtoms,
    InverseCdf,
    PiecewiseConstant,
    Shifted,
    constant,
    dense_rational_atoms,
    positive_indicator,
)


def _g_uniform(alpha, d=2):
    # closed form for tau(u) = u: <e^{-alpha u}, Leb> = (1 - e^{-alpha}) / alpha
    return (math.log(d) + math.log((1 - math.exp(-alpha)) / alpha)) / alpha


class TestTreeTimeConstant:
    def test_constant_law_hits_boundary(self):
        tc = tree_time_constant(constant(0.7), 2)
        assert tc.boundary_flag
        assert tc.alpha_star is None
        assert tc.mu == 0.7

    def test_uniform_matches_dense_grid_oracle(self):
        # independent oracle: closed-form integrand on a dense alpha grid
        alphas = np.logspace(-6, 4, 100_000)
        g = np.array([_g_uniform(a) for a in alphas])
        mu_oracle = -g.min()
        tc = tree_time_constant(Analytic("uniform"), 2)
        assert tc.mu == pytest.approx(mu_oracle, abs=1e-6)

    def test_uniform_alpha_matches_kl_root_oracle(self):
        # independent characterization: at the optimal tilt the relative
        # entropy of the tilted density equals log d
        def kl_of(alpha, d=2):
            z = (1 - math.exp(-alpha)) / alpha
            mean = 1.0 / alpha - math.exp(-alpha) / (1 - math.exp(-alpha))
            return -alpha * mean - math.log(z) - math.log(d)

        alpha_oracle = brentq(kl_of, 1.0, 100.0, xtol=1e-12)
        tc = tree_time_constant(Analytic("uniform"), 2)
        assert tc.alpha_star == pytest.approx(alpha_oracle, rel=1e-6)

    def test_scan_consistency(self):
        for tau in (Analytic("uniform"), PiecewiseConstant([0.4, 0.6], [0.0, 1.0])):
            tc = tree_time_constant(tau, 2)
            if not tc.boundary_flag:
                assert -tc.mu <= tc.scan_minimum + 1e-15

    def test_monte_carlo_upper_approximation(self):
        # finite-depth minima approach mu from above, and the bias shrinks:
        # a cross-module direction check at reachable depths
        tau = Analytic("uniform")
        tc = tree_time_constant(tau, 2)
        m10 = tree_min_monte_carlo(2, tau, 10, 60, seed=2).mean
        m20 = tree_min_monte_carlo(2, tau, 20, 60, seed=2).mean
        assert m20 > tc.mu
        assert tc.mu < m20 < m10

    def test_homogeneity(self):
        tau = Analytic("uniform")
        base = tree_time_constant(tau, 2).mu
        for c in (0.5, 2.0, 10.0):
            scaled_mu = tree_time_constant(Combined(constant(0.0), tau, c), 2).mu
            assert scaled_mu == pytest.approx(c * base, abs=1e-8)

    def test_superadditivity_on_random_pairs(self):
        gen = np.random.default_rng(4)
        for _ in range(5):
            p = float(gen.uniform(0.2, 0.8))
            v = float(gen.uniform(0.5, 2.0))
            tau0 = PiecewiseConstant([p, 1 - p], [0.0, v])
            tau1 = Analytic("power", k=float(gen.uniform(1.0, 3.0)))
            mu0 = tree_time_constant(tau0, 2).mu
            mu1 = tree_time_constant(tau1, 2).mu
            mu_sum = tree_time_constant(Combined(tau0, tau1, 1.0), 2).mu
            assert mu_sum >= mu0 + mu1 - 1e-8

    def test_grid_refinement_stability(self):
        families = [
            Analytic("uniform"),
            Analytic("power", k=2.0),
            Analytic("exp"),
            PiecewiseConstant([0.4, 0.6], [0.0, 1.0]),
            PiecewiseConstant([0.2, 0.3, 0.5], [0.0, 0.5, 2.0]),
            CountableAtoms([0.3, 0.2, 0.1], [1.0, 0.5, 2.0], [2.0, 2.0, 2.0]),
            InverseCdf([(0.0, 0.0), (1.0, 1 - math.exp(-1)), (2.0, 1 - math.exp(-2))]),
            Shifted(Analytic("uniform"), 0.3, "add"),
        ]
        for tau in families:
            mu_a = tree_time_constant(tau, 2, grid=Grid.midpoint(4096, tau.breakpoints())).mu
            mu_b = tree_time_constant(tau, 2, grid=Grid.midpoint(16384, tau.breakpoints())).mu
            assert mu_a == pytest.approx(mu_b, abs=1e-6), type(tau).__name__


class TestSolveMinimizer:
    def test_constant_law_atom_case(self):
        m = solve_minimizer(constant(0.7), 2)
        assert m.atom_case
        assert m.mu == 0.7
        assert m.atom_pushforward.atoms() == [(0.7, 1.0)]

    def test_two_atom_dichotomy_across_p(self):
        for p in (0.40, 0.46, 0.49, 0.5, 0.51, 0.6):
            tau = PiecewiseConstant([p, 1 - p], [0.0, 1.0])
            m = solve_minimizer(tau, 2)
            if p >= 0.5:
                assert m.atom_case and m.mu == 0.0
            else:
                assert not m.atom_case and m.mu > 0.0

    def test_uniform_minimizer_certificates(self):
        m = solve_minimizer(Analytic("uniform"), 2)
        assert not m.atom_case
        assert abs(m.kl_value - math.log(2)) <= 1e-6
        mean_tau = m.density.expectation(Analytic("uniform"))
        assert abs(mean_tau - m.mu) <= 1e-6

    def test_two_atom_tilt_against_closed_form(self):
        # independent oracle: for the {0 w.p. p, 1 w.p. q} law the minimizer
        # is a two-point reweighting (m0, m1) with m0 + m1 = 1 whose relative
        # entropy equals log 2; the optimal m1 is the smaller root of the
        # entropy constraint, and mu = m1.
        p, q = 0.4, 0.6

        def kl(m1):
            m0 = 1 - m1
            return m0 * math.log(m0 / p) + m1 * math.log(m1 / q) - math.log(2)

        m1_star = brentq(kl, 1e-9, q - 1e-12, xtol=1e-14)
        tau = PiecewiseConstant([p, q], [0.0, 1.0])
        m = solve_minimizer(tau, 2)
        assert m.mu == pytest.approx(m1_star, abs=1e-8)
        push = m.pushforward_measure(tau)
        assert push.mass_at(1.0) == pytest.approx(m1_star, abs=1e-8)
        assert push.mass_at(0.0) == pytest.approx(1 - m1_star, abs=1e-8)

    def test_minimizer_suite_certificates(self):
        non_atom = [
            Analytic("uniform"),
            Analytic("power", k=2.0),
            Analytic("exp"),
            PiecewiseConstant([0.4, 0.6], [0.0, 1.0]),
            dense_rational_atoms(zero_mass=0.2, truncation=32),
        ]
        for tau in non_atom:
            m = solve_minimizer(tau, 2)
            assert not m.atom_case, type(tau).__name__
            assert abs(m.kl_value - math.log(2)) <= 1e-6
            assert m.residual_mean <= 1e-6

    def test_atom_case_with_positive_infimum(self):
        tau = Shifted(PiecewiseConstant([0.6, 0.4], [0.0, 1.0]), 0.3, "add")
        m = solve_minimizer(tau, 2)
        assert m.atom_case
        assert m.mu == 0.3
        assert m.atom_pushforward.atoms() == [(0.3, 1.0)]

    def test_identities_are_stationarity_facts_not_grid_facts(self):
        # the KL and mean identities hold at the optimum of the *discretized*
        # objective on any grid; a grid whose cells straddle a jump of tau
        # shows up as a shifted mu, which the refinement checks guard against
        tau = PiecewiseConstant([0.37, 0.63], [0.0, 1.0])
        coarse = solve_minimizer(tau, 2, grid=Grid.midpoint(8))
        fine = solve_minimizer(tau, 2)
        assert abs(coarse.kl_value - math.log(2)) <= 1e-9
        assert abs(fine.kl_value - math.log(2)) <= 1e-9
        assert abs(coarse.mu - fine.mu) > 1e-3


class TestDerivativeIdentity:
    def test_constant_direction_additivity(self):
        # adding h everywhere adds h to the time constant, so f' == 1 == <1, minimizer>
        report = tree_derivative_identity(Analytic("uniform"), constant(1.0), 2, [0.1 * k for k in range(1, 11)])
        assert report.max_derivative_gap <= 1e-4
        mu0 = tree_time_constant(Analytic("uniform"), 2).mu
        for h, f in zip(report.h_grid, report.f_values):
            assert f == pytest.approx(mu0 + h, abs=1e-9)
        assert report.midpoint_violations == 0
        assert all(abs(ip - 1.0) < 1e-9 for ip in report.inner_products)

    def test_indicator_direction(self):
        psi = PiecewiseConstant([0.5, 0.5], [0.0, 1.0])
        report = tree_derivative_identity(Analytic("uniform"), psi, 2, [0.2, 0.4, 0.6, 0.8])
        assert report.max_derivative_gap <= 1e-4
        assert report.midpoint_violations == 0
        # the minimizer avoids the expensive half more as h grows
        assert all(b < a for a, b in zip(report.inner_products, report.inner_products[1:]))

    def test_boundary_h_excluded(self):
        # tau constant: every tau + h psi with psi == 1 stays constant -> all excluded
        report = tree_derivative_identity(constant(1.0), constant(1.0), 2, [0.1, 0.2])
        assert report.h_grid == ()
        assert set(report.excluded_h) == {0.1, 0.2}


class TestLatticeProbe:
    def test_coupled_monotonicity_and_fields(self):
        report = lattice_concavity_probe(
            2, (1.0, 0.0), Analytic("uniform"), constant(1.0), [0.25, 0.5, 0.75], 20, 8, seed=3
        )
        assert report.extras["monotone_violations"] == 0
        assert report.midpoint_violations == 0
        assert len(report.f_values) == 3 and len(report.ci_half) == 3
        # mu is monotone in h, so the mean curve must be strictly increasing
        assert report.f_values[0] < report.f_values[1] < report.f_values[2]
        rows = report.csv_rows()
        assert rows[0] == "h,f,f_fd,inner_product,ci_half"
