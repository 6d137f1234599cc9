import math

import numpy as np
import pytest

from chainconc import chain_core as core
from chainconc import proof_lab as pl
from chainconc import spectral
from chainconc.errors import BudgetExceeded, NotCentered, ParamOutOfRange, PreconditionViolated


def fib_ending_in_one(width: int) -> int:
    """Independent string-counting oracle: bit strings of the given width
    with no "00" substring that end in 1, by an append-a-bit recursion."""
    end0, end1 = 1, 1  # width-1 strings "0" and "1"
    for _ in range(width - 1):
        end0, end1 = end1, end0 + end1  # a 0 may only follow a 1
    return end1


class TestPatterns:
    def test_m1(self):
        pats = pl.admissible_patterns(1)
        assert [p.bits for p in pats] == [(1,)]

    def test_m2(self):
        pats = pl.admissible_patterns(2)
        assert [p.bits for p in pats] == [(0, 1, 1), (1, 0, 1), (1, 1, 1)]

    def test_m3_count(self):
        assert len(pl.admissible_patterns(3)) == 8

    @pytest.mark.parametrize("m", range(1, 9))
    def test_count_matches_string_oracle(self, m):
        assert len(pl.admissible_patterns(m)) == fib_ending_in_one(2 * m - 1)

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            pl.admissible_patterns(9)

    def test_boundary_bits_read_zero(self):
        s = pl.admissible_patterns(2)[2]  # (1, 1, 1)
        assert s.bit(0) == 0
        assert s.bit(4) == 0
        assert s.run_of(2) == (1, 3)


class TestHolderExponents:
    def test_all_ones_m2(self):
        s = pl.RunPattern(m=2, bits=(1, 1, 1))
        terms = {t.j: t for t in pl.holder_exponents(s)}
        assert terms[2].i1 == 1 and terms[2].i2 == 3
        assert terms[2].p == pytest.approx(2.0)
        assert terms[2].beta == pytest.approx(1.0)
        assert terms[1].p == pytest.approx(4.0 / 3.0)
        assert terms[1].beta == pytest.approx(0.5)
        assert terms[1].beta == pytest.approx(2 * min(3 / 4, 1 / 4))

    def test_singleton_run(self):
        s = pl.RunPattern(m=2, bits=(1, 0, 1))
        terms = {t.j: t for t in pl.holder_exponents(s)}
        assert terms[3].i1 == 3 and terms[3].i2 == 3
        assert terms[3].p == pytest.approx(2.0)
        assert terms[3].beta == pytest.approx(1.0)

    @pytest.mark.parametrize("m", range(1, 7))
    def test_beta_consistency(self, m):
        for s in pl.admissible_patterns(m):
            for t in pl.holder_exponents(s):
                implied = 2 * min(1 / t.p, 1 - 1 / t.p)
                assert abs(t.beta - implied) <= 1e-12
                assert 0 < t.beta <= 1

    @pytest.mark.parametrize("m", range(1, 7))
    def test_run_exponents_telescope(self, m):
        # within a maximal run of ones, the reciprocals 1/p sum to len/2
        for s in pl.admissible_patterns(m):
            terms = {t.j: t for t in pl.holder_exponents(s)}
            seen = set()
            for t in terms.values():
                run = (t.i1, t.i2)
                if run in seen:
                    continue
                seen.add(run)
                total = sum(1 / terms[j].p for j in range(t.i1, t.i2 + 1))
                assert total == pytest.approx((t.i2 - t.i1 + 1) / 2, abs=1e-12)


class TestProductBound:
    def test_m2_max_product(self):
        max_prod, pattern, implied = pl.pattern_product_stats(2)
        assert max_prod == pytest.approx(4.0, abs=1e-12)
        assert pattern.bits == (1, 1, 1)
        assert implied == pytest.approx(math.log(4.0) / 2, abs=1e-12)

    @pytest.mark.parametrize("m", range(1, 9))
    def test_ceiling(self, m):
        report = pl.verify_product_bound(m)
        assert report.passed
        assert report.lhs <= pl.PRODUCT_BOUND_CEILING


class TestExpansion:
    def test_worked_two_state(self):
        chain = core.two_state(0.5, 0.5)
        f = core.observable([1.0, -1.0])
        assert pl.expansion_rhs(chain, f, 2, 1) == pytest.approx(5.0, abs=1e-12)

    def test_zero_observable(self):
        chain = core.two_state(0.5, 0.5)
        f = core.observable([0.0, 0.0])
        assert pl.expansion_rhs(chain, f, 3, 1) == 0.0

    def test_iid_kills_positive_powers(self):
        # with A = E_pi every factor A^v with v >= 1 annihilates centered vectors
        chain = core.iid_chain([0.5, 0.5])
        f = core.observable([1.0, -1.0])
        u2_l1 = float(chain.pi @ np.abs(f.values * f.values))
        assert pl.expansion_rhs(chain, f, 2, 1) == pytest.approx(2 * 2 * u2_l1, abs=1e-12)

    def test_rejects_uncentered(self):
        chain = core.two_state(0.5, 0.25)
        f = core.observable([1.0, 0.0])
        with pytest.raises(NotCentered):
            pl.expansion_sum(chain, f, 2, 1)

    def test_budget(self):
        chain = core.two_state(0.5, 0.5)
        f = core.observable([1.0, -1.0])
        with pytest.raises(BudgetExceeded):
            pl.expansion_rhs(chain, f, 5000, 8)


class TestIncreasing:
    def test_worked_instance(self):
        chain = core.two_state(0.5, 0.5)
        f = core.observable([1.0, -1.0])
        report = pl.verify_increasing(chain, f, 2, 1)
        assert report.lhs == pytest.approx(3.0, abs=1e-12)
        assert report.rhs == pytest.approx(5.0, abs=1e-12)
        assert report.passed and not report.conservative

    def test_seeded_batch(self):
        rng = np.random.default_rng(123)
        for _ in range(40):
            inst = pl.random_increasing_instance(rng)
            report = pl.verify_lemma("increasing", inst)
            assert report.passed, report


class TestAlternate:
    def test_tautological_k0(self):
        pi = np.array([0.3, 0.7])
        u = np.array([2.0, -1.0])
        report = pl.verify_alternate(pi, u, [], q=3.0)
        assert report.lhs == pytest.approx(spectral.lp_vector_norm(u, pi, 1.0))
        assert report.rhs == pytest.approx(spectral.lp_vector_norm(u, pi, 3.0))
        assert report.passed

    def test_exponent_schedule(self):
        assert pl.alternate_exponents(4.0, 3) == pytest.approx([8 / 6, 2.0, 4.0])
        with pytest.raises(PreconditionViolated):
            pl.alternate_exponents(3.0, 3)

    def test_seeded_batch(self):
        rng = np.random.default_rng(7)
        for _ in range(15):
            inst = pl.random_alternate_instance(rng)
            report = pl.verify_lemma("alternate", inst)
            assert report.passed, report
            assert not report.conservative  # two states: certified norms

    def test_larger_state_space_is_conservative(self):
        rng = np.random.default_rng(8)
        inst = pl.random_alternate_instance(rng, n_states=3)
        while len(inst["mats"]) == 0:
            inst = pl.random_alternate_instance(rng, n_states=3)
        report = pl.verify_lemma("alternate", inst)
        assert report.passed
        assert report.conservative


class TestSplitting:
    def test_m1_reduces_to_alternate(self):
        rng = np.random.default_rng(10)
        pi = np.array([0.4, 0.6])
        u = np.array([1.0, -1.0])
        u = u - pi @ u
        T = rng.uniform(-1, 1, size=(2, 2))
        report = pl.verify_splitting(pi, u, [T], m=1)
        # single pattern (1,): rhs = ||u||_2^2 ||T||_2 with a certified norm
        norm2 = spectral.lp_norm_bracket(T, pi, 2.0).upper
        expected = spectral.lp_vector_norm(u, pi, 2.0) ** 2 * norm2
        assert report.rhs == pytest.approx(expected, rel=1e-6)
        assert report.passed

    def test_seeded_batch(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            inst = pl.random_splitting_instance(rng)
            report = pl.verify_lemma("splitting", inst)
            assert report.passed, report

    def test_needs_centered_u(self):
        pi = np.array([0.4, 0.6])
        with pytest.raises(NotCentered):
            pl.verify_splitting(pi, np.array([1.0, 1.0]), [np.eye(2)], m=1)

    def test_matrix_count_checked(self):
        pi = np.array([0.5, 0.5])
        u = np.array([1.0, -1.0])
        with pytest.raises(ParamOutOfRange):
            pl.verify_splitting(pi, u, [np.eye(2)], m=2)


class TestFinb:
    def test_grid_ratios_recorded(self):
        for inst in pl.finb_grid():
            report = pl.verify_lemma("finb", inst)
            assert report.lhs > 0
            assert report.rhs > 0
            assert 0.1 < report.ratio < 10.0

    def test_precondition(self):
        chain = core.two_state(0.9, 0.5)
        f = core.observable([1.0, -1.0])
        with pytest.raises(PreconditionViolated):
            pl.verify_finb(chain, f, n=5, m=1)  # e * 1 > 5 * 0.1


class TestCertifiedNorm:
    @pytest.mark.parametrize("p", [1.0, 2.0, math.inf])
    def test_matches_exact_endpoints(self, p):
        rng = np.random.default_rng(12)
        for _ in range(10):
            M = rng.uniform(-1, 1, size=(2, 2))
            pi = rng.uniform(0.2, 0.8, size=2)
            pi = pi / pi.sum()
            achieved, upper = pl._certified_norm_2state(M, pi, p)
            exact = spectral.lp_norm_bracket(M, pi, p).upper
            assert achieved <= exact + 1e-9
            assert upper >= exact - 1e-9
            assert upper - achieved <= 1e-6

    def test_inside_bracket_for_general_p(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            M = rng.uniform(-1, 1, size=(2, 2))
            pi = rng.uniform(0.2, 0.8, size=2)
            pi = pi / pi.sum()
            p = float(rng.uniform(1.1, 6.0))
            achieved, upper = pl._certified_norm_2state(M, pi, p)
            bracket = spectral.lp_norm_bracket(M, pi, p)
            assert achieved >= bracket.lower - 1e-7
            assert upper <= bracket.upper + 1e-7


def test_verify_lemma_rejects_unknown_id():
    with pytest.raises(ParamOutOfRange):
        pl.verify_lemma("nonsense", {})
