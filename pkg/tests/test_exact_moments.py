import numpy as np
import pytest

from chainconc import chain_core as core
from chainconc import exact_moments as em
from chainconc.errors import BudgetExceeded, NotLattice, OddExponent


def _random_lattice_instance(rng, max_states=4, max_n=8):
    """Chain plus lattice observable with |f| <= 2, for oracle cross-checks."""
    n_states = int(rng.integers(2, max_states + 1))
    roll = rng.random()
    if roll < 0.4:
        chain = core.random_stochastic(n_states, rng)
    elif roll < 0.8:
        chain = core.random_reversible(n_states, rng)
    else:
        chain = core.iid_chain(rng.dirichlet(np.ones(n_states)) * 0.9 + 0.1 / n_states)
    step = float(rng.choice([0.5, 1.0]))
    top = int(round(2.0 / step))
    values = step * rng.integers(-top, top + 1, size=n_states).astype(float)
    n = int(rng.integers(1, max_n + 1))
    return chain, core.observable(values), n


class TestMomentRecursion:
    def test_iid_pm1_fourth_step_variance(self):
        chain = core.iid_chain([0.5, 0.5])
        f = core.observable([1.0, -1.0])
        table = em.exact_raw_moments(chain, f, 4, 2)
        assert table.raw[2] == pytest.approx(4.0, abs=1e-12)

    def test_order_zero_is_one(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            chain, f, n = _random_lattice_instance(rng)
            table = em.exact_raw_moments(chain, f, n, 3)
            assert table.raw[0] == pytest.approx(1.0, abs=1e-12)
            expected_first = n * table.mean
            assert table.raw[1] == pytest.approx(
                expected_first, abs=max(1e-12, 1e-12 * n * abs(table.mean))
            )

    def test_two_state_second_moment(self):
        chain = core.two_state(0.5, 0.5)
        f = core.observable([1.0, -1.0])
        assert em.exact_raw_moments(chain, f, 2, 2).raw[2] == pytest.approx(3.0, abs=1e-12)

    def test_budget(self):
        chain = core.two_state(0.5, 0.5)
        f = core.observable([1.0, -1.0])
        with pytest.raises(BudgetExceeded):
            em.exact_raw_moments(chain, f, 10**9, 20)


class TestCentralAbsMoment:
    def test_two_state(self):
        chain = core.two_state(0.5, 0.5)
        f = core.observable([1.0, -1.0])
        assert em.exact_central_abs_moment(chain, f, 2, 2) == pytest.approx(0.75, abs=1e-12)

    def test_iid(self):
        chain = core.iid_chain([0.5, 0.5])
        f = core.observable([1.0, -1.0])
        assert em.exact_central_abs_moment(chain, f, 2, 2) == pytest.approx(0.5, abs=1e-12)

    def test_constant_observable_zero(self):
        chain = core.two_state(0.3, 0.25)
        f = core.observable([2.5, 2.5])
        for q in (2, 4):
            assert em.exact_central_abs_moment(chain, f, 3, q) == 0.0

    def test_odd_exponent_redirects(self):
        chain = core.two_state(0.5, 0.5)
        f = core.observable([1.0, -1.0])
        with pytest.raises(OddExponent):
            em.exact_central_abs_moment(chain, f, 2, 3)


class TestDistribution:
    def test_iid_two_steps(self):
        chain = core.iid_chain([0.5, 0.5])
        f = core.observable([1.0, -1.0])
        dist = em.exact_distribution(chain, f, 2)
        values, probs = dist.support()
        np.testing.assert_allclose(values, [-2.0, 0.0, 2.0])
        np.testing.assert_allclose(probs, [0.25, 0.5, 0.25], atol=1e-15)

    def test_two_state_two_steps(self):
        chain = core.two_state(0.5, 0.5)
        f = core.observable([1.0, -1.0])
        dist = em.exact_distribution(chain, f, 2)
        values, probs = dist.support()
        np.testing.assert_allclose(values, [-2.0, 0.0, 2.0])
        np.testing.assert_allclose(probs, [0.375, 0.25, 0.375], atol=1e-15)

    def test_single_step_is_pushforward(self):
        chain = core.two_state(0.4, 0.3)
        f = core.observable([1.0, 0.0])
        dist = em.exact_distribution(chain, f, 1)
        values, probs = dist.support()
        np.testing.assert_allclose(values, [0.0, 1.0])
        np.testing.assert_allclose(probs, [0.7, 0.3], atol=1e-15)

    def test_requires_lattice(self):
        chain = core.two_state(0.5, 0.5)
        f = core.Observable(values=np.array([0.0, 1.0, np.sqrt(2.0)]), lattice=None)
        chain3 = core.random_stochastic(3, np.random.default_rng(0))
        with pytest.raises(NotLattice):
            em.exact_distribution(chain3, f, 2)

    def test_mass_sums_to_one(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            chain, f, n = _random_lattice_instance(rng)
            dist = em.exact_distribution(chain, f, n)
            assert sum(dist.mass.values()) == pytest.approx(1.0, abs=1e-12)
            assert all(m >= 0 for m in dist.mass.values())


class TestEnumeration:
    def test_iid_cubed(self):
        chain = core.iid_chain([0.5, 0.5])
        f = core.observable([1.0, -1.0])
        result = em.enumeration_oracle(chain, f, 3, 3)
        assert result.abs_moment == pytest.approx(7.5, abs=1e-12)

    def test_single_step(self):
        chain = core.two_state(0.4, 0.25)
        f = core.observable([1.0, 0.0])
        result = em.enumeration_oracle(chain, f, 1, 2.0)
        mean = float(chain.pi @ f.values)
        expected = float(chain.pi @ np.abs(f.values - mean) ** 2)
        assert result.abs_moment == pytest.approx(expected, abs=1e-14)

    def test_budget(self):
        chain = core.random_stochastic(10, np.random.default_rng(0))
        f = core.observable(np.arange(10.0))
        with pytest.raises(BudgetExceeded):
            em.enumeration_oracle(chain, f, 9, 2.0)


class TestTail:
    def test_iid_pm1(self):
        chain = core.iid_chain([0.5, 0.5])
        f = core.observable([1.0, -1.0])
        dist = em.exact_distribution(chain, f, 2)
        assert em.tail_from_distribution(dist, 2, 0.0, 1.0) == pytest.approx(0.5, abs=1e-15)

    def test_tiny_threshold_counts_all_off_mean_mass(self):
        chain = core.two_state(0.5, 0.5)
        f = core.observable([1.0, -1.0])
        dist = em.exact_distribution(chain, f, 2)
        assert em.tail_from_distribution(dist, 2, 0.0, 1e-9) == pytest.approx(0.75, abs=1e-15)

    def test_beyond_range_is_zero(self):
        chain = core.iid_chain([0.5, 0.5])
        f = core.observable([1.0, -1.0])
        dist = em.exact_distribution(chain, f, 2)
        assert em.tail_from_distribution(dist, 2, 0.0, 1.5) == 0.0


class TestOracleEquivalence:
    def test_three_engines_agree(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            chain, f, n = _random_lattice_instance(rng, max_n=6)
            table = em.exact_raw_moments(chain, f, n, 8)
            dist = em.exact_distribution(chain, f, n)
            enum = em.enumeration_oracle(chain, f, n, 2.0)
            dist_values = em.distribution_as_values(dist)
            assert set(dist_values) == set(enum.distribution)
            for key, prob in dist_values.items():
                assert prob == pytest.approx(enum.distribution[key], rel=1e-10, abs=1e-12)
            for k in range(9):
                from_dist = em.raw_moment_from_distribution(dist, k)
                from_enum = sum(p * v**k for v, p in enum.distribution.items())
                assert table.raw[k] == pytest.approx(from_dist, rel=1e-10, abs=1e-12)
                assert table.raw[k] == pytest.approx(from_enum, rel=1e-10, abs=1e-12)

    def test_central_even_orders_agree(self):
        rng = np.random.default_rng(43)
        for _ in range(25):
            chain, f, n = _random_lattice_instance(rng, max_n=6)
            fc = core.center_observable(f, chain.pi)
            dist = em.exact_distribution(chain, fc, n)
            for q in (2, 4, 6, 8):
                a = em.exact_central_abs_moment(chain, f, n, q)
                b = em.abs_moment_from_distribution(dist, n, 0.0, q)
                c = em.enumeration_oracle(chain, f, n, q).abs_moment / n**q
                assert a == pytest.approx(b, rel=1e-10, abs=1e-12)
                assert a == pytest.approx(c, rel=1e-10, abs=1e-12)


class TestSequenceInvariants:
    def test_lyapunov_log_convexity(self):
        rng = np.random.default_rng(44)
        for _ in range(10):
            chain, f, n = _random_lattice_instance(rng, max_n=6)
            fc = core.center_observable(f, chain.pi)
            dist = em.exact_distribution(chain, fc, n)
            abs_moments = [em.abs_moment_from_distribution(dist, n, 0.0, k) for k in range(1, 9)]
            for k in range(1, 7):
                lhs = abs_moments[k] ** 2
                rhs = abs_moments[k - 1] * abs_moments[k + 1]
                assert lhs <= rhs * (1 + 1e-9)

    def test_q_norm_monotonicity(self):
        rng = np.random.default_rng(45)
        for _ in range(10):
            chain, f, n = _random_lattice_instance(rng, max_n=6)
            norms = [
                em.exact_central_abs_moment(chain, f, n, q) ** (1 / q) for q in (2, 4, 6, 8)
            ]
            assert all(a <= b * (1 + 1e-9) for a, b in zip(norms, norms[1:]))

    def test_triangle_inequality_against_single_step(self):
        rng = np.random.default_rng(46)
        for _ in range(10):
            chain, f, n = _random_lattice_instance(rng, max_n=6)
            for q in (2, 4, 8):
                total = em.exact_raw_moments(chain, f, n, q).raw[q] ** (1 / q)
                single = float(chain.pi @ np.abs(f.values) ** q) ** (1 / q)
                assert total <= n * single * (1 + 1e-9)


class TestVectorEngine:
    def test_joint_law_matches_enumeration(self):
        rng = np.random.default_rng(47)
        for _ in range(8):
            n_states = int(rng.integers(2, 4))
            chain = core.random_stochastic(n_states, rng)
            values = rng.integers(-2, 3, size=(n_states, 2)).astype(float)
            f = core.observable(values)
            n = int(rng.integers(1, 5))
            vdist = em.exact_vector_distribution(chain, f, n)
            mean = core.stationary_mean(f, chain.pi)
            for q, p in ((2.0, 2.0), (3.0, 2.0), (2.0, np.inf)):
                exact = em.vector_abs_moment(vdist, n, mean, q, p)
                brute = em.enumeration_oracle(chain, f, n, q, p=p).abs_moment / n**q
                assert exact == pytest.approx(brute, rel=1e-10, abs=1e-12)

    def test_mass_total(self):
        chain = core.two_state(0.3, 0.5)
        f = core.observable([[1.0, 0.0], [0.0, 1.0]])
        vdist = em.exact_vector_distribution(chain, f, 4)
        assert vdist.mass.sum() == pytest.approx(1.0, abs=1e-12)

    def test_dimension_cap(self):
        chain = core.two_state(0.3, 0.5)
        f = core.observable(np.eye(2).repeat(2, axis=1))  # d = 4
        with pytest.raises(BudgetExceeded):
            em.exact_vector_distribution(chain, f, 2)
