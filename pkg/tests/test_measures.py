import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from fpplab.experiments import wasserstein_lp_oracle
from fpplab.measures import (
    DiscreteMeasure,
    Grid,
    GriddedDensity,
    kl_divergence,
    pushforward,
    pushforward_positive,
    total_variation,
    wasserstein,
    wasserstein_extended,
)
from fpplab.weights import Analytic, PiecewiseConstant, constant


def measure_strategy(max_atoms=5, prob=True):
    @st.composite
    def build(draw):
        k = draw(st.integers(1, max_atoms))
        locs = draw(st.lists(st.floats(0, 1, allow_nan=False), min_size=k, max_size=k))
        masses = draw(st.lists(st.floats(0.01, 1, allow_nan=False), min_size=k, max_size=k))
        m = DiscreteMeasure(locs, masses)
        return m.normalize() if prob else m

    return build()


class TestDiscreteMeasure:
    def test_canonicalize_merges_and_sorts(self):
        m = DiscreteMeasure([0.5, 0.2, 0.5], [1.0, 3.0, 2.0])
        assert m.atoms() == [(0.2, 3.0), (0.5, 3.0)]
        assert m.total_mass == 6.0

    def test_rejects_nonpositive_mass(self):
        with pytest.raises(ValueError):
            DiscreteMeasure([0.1], [0.0])
        with pytest.raises(ValueError):
            DiscreteMeasure([0.1], [-1.0])

    def test_integrate_single_atom(self):
        assert DiscreteMeasure.point(3.0).integrate(lambda t: t) == 3.0

    def test_integrate_symmetric_pair(self):
        m = DiscreteMeasure([0.0, 2.0], [0.5, 0.5])
        assert m.integrate(lambda t: t) == 1.0

    def test_integrate_recovers_passage_time(self):
        weights = [0.1, 0.4, 0.2, 0.3]
        nu_hat = DiscreteMeasure.from_samples(weights)
        assert nu_hat.integrate(lambda t: t) * 4 == pytest.approx(1.0, abs=1e-14)

    def test_normalize(self):
        assert DiscreteMeasure([0.5], [2.0]).normalize().atoms() == [(0.5, 1.0)]
        assert DiscreteMeasure.zero().normalize().is_zero
        m = DiscreteMeasure([0.0, 1.0], [1.0, 3.0]).normalize()
        assert m.atoms() == [(0.0, 0.25), (1.0, 0.75)]

    def test_immutability(self):
        m = DiscreteMeasure.point(0.5)
        with pytest.raises(AttributeError):
            m.total_mass = 2.0
        with pytest.raises(ValueError):
            m.locations[0] = 0.1


class TestWasserstein:
    def test_identical_points(self):
        for a in (0.0, 0.3, 1.0):
            assert wasserstein(DiscreteMeasure.point(a), DiscreteMeasure.point(a)) == 0.0

    def test_unit_transport(self):
        assert wasserstein(DiscreteMeasure.point(0.0), DiscreteMeasure.point(1.0)) == 1.0

    def test_two_atom_case(self):
        a = DiscreteMeasure([0.0, 1.0], [0.5, 0.5])
        b = DiscreteMeasure([0.0, 0.5], [0.5, 0.5])
        # brute-force transport-plan minimum over the 2x2 support is 0.25
        assert wasserstein(a, b) == pytest.approx(0.25, abs=1e-14)
        assert wasserstein_lp_oracle(a, b) == pytest.approx(0.25, abs=1e-9)

    def test_rejects_non_probability(self):
        with pytest.raises(ValueError):
            wasserstein(DiscreteMeasure.point(0.0, 2.0), DiscreteMeasure.point(0.0))

    def test_matches_lp_oracle_on_random_pairs(self):
        gen = np.random.default_rng(5)
        for _ in range(50):
            a = DiscreteMeasure(gen.random(3), gen.random(3) + 0.1).normalize()
            b = DiscreteMeasure(gen.random(4), gen.random(4) + 0.1).normalize()
            assert abs(wasserstein(a, b) - wasserstein_lp_oracle(a, b)) < 1e-10


class TestWassersteinExtended:
    def test_equal_measures(self):
        m = DiscreteMeasure.point(0.5, 2.0)
        assert wasserstein_extended(m, m) == 0.0

    def test_mass_term_only(self):
        assert wasserstein_extended(DiscreteMeasure.point(0.0), DiscreteMeasure.point(0.0, 2.0)) == 1.0

    def test_mass_and_transport(self):
        got = wasserstein_extended(DiscreteMeasure.point(0.0, 2.0), DiscreteMeasure.point(1.0))
        assert got == 2.0

    def test_rejects_small_mass(self):
        with pytest.raises(ValueError):
            wasserstein_extended(DiscreteMeasure.point(0.0, 0.5), DiscreteMeasure.point(0.0))


class TestTotalVariation:
    def test_examples(self):
        d0 = DiscreteMeasure.point(0.0)
        d1 = DiscreteMeasure.point(1.0)
        assert total_variation(d0, d0) == 0.0
        assert total_variation(d0, d1) == 1.0
        a = DiscreteMeasure([0.0, 1.0], [0.5, 0.5])
        b = DiscreteMeasure([0.0, 1.0], [0.25, 0.75])
        assert total_variation(a, b) == pytest.approx(0.25, abs=1e-15)


@settings(max_examples=150, deadline=None)
@given(measure_strategy(), measure_strategy())
def test_wasserstein_symmetric_and_below_tv(a, b):
    assert wasserstein(a, b) == wasserstein(b, a)
    assert wasserstein(a, b) <= total_variation(a, b) + 1e-12
    assert 0.0 <= total_variation(a, b) <= 1.0 + 1e-12


@settings(max_examples=80, deadline=None)
@given(measure_strategy(), measure_strategy(), measure_strategy())
def test_wasserstein_triangle(a, b, c):
    assert wasserstein(a, c) <= wasserstein(a, b) + wasserstein(b, c) + 1e-12


@settings(max_examples=80, deadline=None)
@given(measure_strategy(prob=False), measure_strategy(prob=False))
def test_extended_metric_axioms(a, b):
    a = DiscreteMeasure(a.locations, a.masses / a.total_mass * 1.5)
    b = DiscreteMeasure(b.locations, b.masses / b.total_mass * 2.5)
    assert wasserstein_extended(a, b) == wasserstein_extended(b, a)
    assert wasserstein_extended(a, a) == 0.0


def test_shared_atom_tv_bound():
    gen = np.random.default_rng(11)
    for _ in range(300):
        i, j, k = int(gen.integers(0, 5)), int(gen.integers(0, 5)), int(gen.integers(1, 5))
        shared = gen.random(k)
        v = np.concatenate([gen.random(i), shared])
        w = np.concatenate([gen.random(j), shared])
        s1 = DiscreteMeasure.from_samples(v)
        s2 = DiscreteMeasure.from_samples(w)
        bound = k * abs(1 / (i + k) - 1 / (j + k)) + i / (i + k) + j / (j + k)
        assert 2 * total_variation(s1, s2) <= bound + 1e-12


class TestKl:
    def test_uniform_density_zero(self):
        assert kl_divergence(GriddedDensity.uniform()) == 0.0

    def test_half_interval_density(self):
        grid = Grid.midpoint(4096)
        vals = np.where(grid.nodes < 0.5, 2.0, 0.0)
        assert kl_divergence(GriddedDensity(grid, vals)) == pytest.approx(math.log(2), abs=1e-14)

    def test_exponential_density_vs_quadrature_oracle(self):
        z = 1 - math.exp(-1)
        oracle, err = quad(lambda u: (math.exp(-u) / z) * math.log(math.exp(-u) / z), 0, 1, epsabs=1e-13)
        assert err < 1e-10
        grid = Grid.midpoint(4096)
        vals = np.exp(-grid.nodes) / z
        vals = vals / grid.integrate(vals)
        assert kl_divergence(GriddedDensity(grid, vals)) == pytest.approx(oracle, abs=1e-7)

    def test_nonnegative_and_zero_only_at_uniform(self):
        gen = np.random.default_rng(3)
        grid = Grid.midpoint(512)
        for _ in range(20):
            vals = gen.random(grid.size) + 0.05
            vals = vals / grid.integrate(vals)
            kl = kl_divergence(GriddedDensity(grid, vals))
            assert kl >= -1e-8
            if np.max(np.abs(vals - 1.0)) > 1e-3:
                assert kl > 0.0

    def test_normalization_enforced(self):
        grid = Grid.midpoint(64)
        with pytest.raises(ValueError):
            GriddedDensity(grid, np.full(grid.size, 1.5))


class TestPushforward:
    def test_constant_map(self):
        got = pushforward(DiscreteMeasure.point(0.5), constant(7.0))
        assert got.atoms() == [(7.0, 1.0)]

    def test_indicator_map(self):
        m = DiscreteMeasure([0.25, 0.75], [0.5, 0.5])
        tau = PiecewiseConstant([0.5, 0.5], [0.0, 1.0])
        assert pushforward(m, tau).atoms() == [(0.0, 0.5), (1.0, 0.5)]
        assert pushforward_positive(m, tau).atoms() == [(1.0, 0.5)]

    def test_square_map_mean(self):
        gen = np.random.default_rng(17)
        sample = gen.random(100)
        m = DiscreteMeasure.from_samples(sample)
        got = pushforward(m, Analytic("power", k=2.0)).integrate(lambda t: t)
        sigma = math.sqrt(4.0 / 45.0) / 10.0  # sd of the mean of U^2 over 100 draws
        assert abs(got - 1.0 / 3.0) < 3 * sigma

    def test_zero_map_gives_zero_measure(self):
        m = DiscreteMeasure([0.2, 0.8], [0.5, 0.5])
        assert pushforward_positive(m, constant(0.0)).is_zero

    def test_positive_part_matches_direct_enumeration(self):
        gen = np.random.default_rng(23)
        tau = PiecewiseConstant([0.3, 0.3, 0.4], [0.0, 0.5, 2.0])
        for _ in range(25):
            locs = gen.random(6)
            m = DiscreteMeasure.from_samples(locs)
            vals = [tau(u) for u in locs]
            expected = DiscreteMeasure(
                [v for v in vals if v != 0.0], [1 / 6] * sum(1 for v in vals if v != 0.0)
            ) if any(v != 0.0 for v in vals) else DiscreteMeasure.zero()
            got = pushforward_positive(m, tau)
            normalized = got.normalize()
            assert normalized.allclose(expected.normalize(), tol=1e-12)

    def test_integrate_transfer_identity(self):
        gen = np.random.default_rng(29)
        tau = Analytic("power", k=3.0)  # injective: no atom merging, identity is exact
        for _ in range(25):
            m = DiscreteMeasure.from_samples(gen.random(5))
            lhs = pushforward(m, tau).integrate(lambda t: 2.0 * t)
            rhs = m.integrate(lambda u: 2.0 * tau(u))
            assert lhs == rhs


class TestGrid:
    def test_midpoint_default(self):
        g = Grid.midpoint(8)
        assert np.allclose(g.nodes, (np.arange(8) + 0.5) / 8)
        assert np.allclose(g.weights, 1 / 8)

    def test_breakpoint_refinement(self):
        g = Grid.midpoint(16, breakpoints=[0.3])
        assert g.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert not np.any(np.isclose(g.nodes, 0.3))
        # all cells lie strictly inside one side of the breakpoint
        assert np.all((g.nodes < 0.3) | (g.nodes > 0.3))

    def test_csv_serialization(self, tmp_path):
        m = DiscreteMeasure([0.25, 0.5], [0.4, 0.6])
        path = tmp_path / "m.csv"
        m.write_csv(path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "location,mass"
        assert len(lines) == 3
        d = GriddedDensity.uniform(Grid.midpoint(4))
        path2 = tmp_path / "d.csv"
        d.write_csv(path2)
        assert path2.read_text().startswith("node,density\n")
