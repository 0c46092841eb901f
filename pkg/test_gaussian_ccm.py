"""
Unit tests for the Gaussian CIFC-CCM model.

Validates:
- cap(), outer bounds and the outer region
- Costa scaling, the closed-form f expression and the exact dirty-paper rate
- Closed-form scheme E rates against the log-det oracle
- Inner, scheme D and time-division regions (containment, collapse cases)
- Regime predicates and classification
"""

import cmath
import math
import logging

import numpy as np
import pytest

from gaussian_ccm import (
    GaussianChannelParams, GaussianModelError, RegimeLabel, SchemeEAssignment, SchemeERates,
    best_inner_region, cap, dpc_rate, f_term, gaussian_mi_oracle, inner_bounds_scheme_e,
    inner_region, is_pdc, is_very_strong, lambda_costa, oracle_rates, outer_bounds, outer_region,
    parse_complex, pdc_margins, pentagon_union, regime_classify, regime_value_vsi, scheme_d_region,
    scheme_e_covariance, time_division_region,
)
from gaussian_mi import check_psd
from rate_region import RateRegion, contains, equivalent, max_gap, max_ratio, union_hull

logger = logging.getLogger(__name__)

STEPS = 201


def _random_params(rng: np.random.Generator, b_max: float = 3.0) -> GaussianChannelParams:
    a = rng.uniform(0.0, 3.0) * cmath.exp(1j * rng.uniform(0.0, 2.0 * math.pi))
    b = rng.uniform(0.0, b_max) * cmath.exp(1j * rng.uniform(0.0, 2.0 * math.pi))
    return GaussianChannelParams(a, b, rng.uniform(0.0, 20.0), rng.uniform(0.0, 20.0))


@pytest.fixture
def reference_params():
    return GaussianChannelParams(1.0, 2.0, 10.0, 10.0)


class TestParams:
    """Parameter and assignment validation."""

    def test_pair_notation(self):
        params = GaussianChannelParams([1.0, -2.0], 0.5, 1.0, 2.0)
        assert params.a == complex(1.0, -2.0)
        assert params.b == complex(0.5, 0.0)
        assert parse_complex([0.0, 1.0]) == 1j

    def test_negative_power_rejected(self):
        with pytest.raises(GaussianModelError, match="nonnegative"):
            GaussianChannelParams(1.0, 1.0, -1.0, 1.0)

    def test_infinite_gain_rejected(self):
        with pytest.raises(GaussianModelError, match="finite"):
            GaussianChannelParams(float("inf"), 1.0, 1.0, 1.0)

    def test_power_budget_checked(self, reference_params):
        bad = SchemeEAssignment(0.5, 0.5, 2.0)
        with pytest.raises(GaussianModelError, match="differs"):
            bad.validate(reference_params)

    def test_costa_assignment_meets_budget(self, reference_params):
        assignment = SchemeEAssignment.costa(reference_params, 0.3)
        assignment.validate(reference_params)
        assert assignment.superposition_gain ** 2 * 10.0 == pytest.approx(7.0, abs=1e-12)
        assert assignment.lam == pytest.approx(3.0 / 4.0)

    def test_silent_x2_gets_zero_gain(self):
        params = GaussianChannelParams(1.0, 2.0, 5.0, 0.0)
        assert SchemeEAssignment.costa(params, 0.2).superposition_gain == 0.0

    def test_alpha_range(self):
        with pytest.raises(GaussianModelError, match="alpha"):
            SchemeEAssignment(1.5, 0.0, 0.0)


class TestOuterBound:
    """cap() and the outer region."""

    def test_cap(self):
        assert cap(3.0) == pytest.approx(2.0)
        assert cap(0.0) == 0.0
        with pytest.raises(GaussianModelError, match="nonnegative"):
            cap(-0.1)

    def test_outer_bounds_example(self):
        params = GaussianChannelParams(0.0, 1.0, 3.0, 12.0)
        assert outer_bounds(params, 1.0) == pytest.approx((2.0, 4.0))

    def test_zero_power(self):
        assert outer_bounds(GaussianChannelParams(1.0, 1.0, 0.0, 0.0), 0.4) == (0.0, 0.0)

    def test_outer_region_extremes(self):
        region = outer_region(GaussianChannelParams(0.0, 1.0, 3.0, 12.0), STEPS)
        assert region.max_r1() == pytest.approx(2.0, abs=1e-12)
        assert region.max_sum_rate() == pytest.approx(math.log2(28.0), abs=1e-12)
        logger.info("✅ Outer region endpoints at alpha = 1 and alpha = 0")

    def test_no_cognitive_power(self):
        region = outer_region(GaussianChannelParams(0.7, 1.5, 0.0, 4.0), STEPS)
        assert equivalent(region, RateRegion.box(0.0, cap(4.0)))

    def test_depends_on_gain_moduli_only(self):
        base = outer_region(GaussianChannelParams(1.0 + 1.0j, 2.0, 5.0, 3.0), STEPS)
        for theta in (0.4, 1.7, 3.0):
            turn = cmath.exp(1j * theta)
            rotated = outer_region(GaussianChannelParams((1.0 + 1.0j) * turn, 2.0 * turn, 5.0, 3.0), STEPS)
            assert equivalent(base, rotated)

    def test_monotone_in_powers(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            params = _random_params(rng)
            alpha = rng.uniform()
            r1, total = outer_bounds(params, alpha)
            more_p1 = outer_bounds(GaussianChannelParams(params.a, params.b, params.p1 + 1.0, params.p2), alpha)
            more_p2 = outer_bounds(GaussianChannelParams(params.a, params.b, params.p1, params.p2 + 1.0), alpha)
            assert more_p1[0] >= r1 and more_p1[1] >= total
            assert more_p2[0] >= r1 and more_p2[1] >= total


class TestDirtyPaper:
    """Costa scaling, the closed-form f expression and the exact rate."""

    def test_lambda_costa(self):
        assert lambda_costa(2.0, 1.0, 1.0, 3.0) == pytest.approx(1.5)
        assert lambda_costa(2.0, 1.0, 0.0, 3.0) == 0.0
        assert lambda_costa(0.0, 1.0, 0.5, 3.0) == 0.0

    def test_f_term_at_costa_is_clean(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            params = _random_params(rng)
            h = complex(rng.normal(), rng.normal())
            sigma2, alpha = rng.uniform(0.1, 3.0), rng.uniform(0.01, 1.0)
            lam = lambda_costa(h, sigma2, alpha, params.p1)
            expected = math.log2((sigma2 + alpha * params.p1) / sigma2)
            assert f_term(h, sigma2, lam, alpha, params) == pytest.approx(expected, abs=1e-12)
            assert dpc_rate(h, sigma2, lam, alpha, params) == pytest.approx(expected, abs=1e-12)

    def test_f_term_costa_example(self):
        params = GaussianChannelParams(0.0, 1.0, 3.0, 2.0)
        assert f_term(1.0, 1.0, lambda_costa(1.0, 1.0, 1.0, 3.0), 1.0, params) == pytest.approx(2.0)

    def test_f_term_zero_alpha(self):
        params = GaussianChannelParams(0.0, 1.0, 3.0, 2.0)
        assert f_term(1.0, 1.0, 0.0, 0.0, params) == 0.0

    def test_f_term_undefined_ratio(self):
        params = GaussianChannelParams(0.0, 1.0, 3.0, 2.0)
        with pytest.raises(GaussianModelError, match="pre-coding ratio undefined"):
            f_term(0.0, 1.0, 0.3, 0.5, params)

    def test_f_expression_off_costa(self):
        # h1 = a + g = 0.5 + 0.5 = 1, lambda = 0 means U1c = Xh
        params = GaussianChannelParams(0.5, 2.0, 2.0, 4.0)
        assert f_term(1.0, 1.0, 0.0, 0.5, params) == pytest.approx(math.log2(10.0 / 9.0), abs=1e-12)
        assert dpc_rate(1.0, 1.0, 0.0, 0.5, params) == pytest.approx(math.log2(1.2), abs=1e-12)

        oracle = gaussian_mi_oracle(params, SchemeEAssignment(0.5, 0.0, 0.5))
        assert oracle.r1 == pytest.approx(math.log2(1.2), abs=1e-9)
        logger.info("✅ Exact dirty-paper rate agrees with the oracle off the Costa point")


class TestSchemeE:
    """Closed forms against the log-det oracle."""

    def test_reference_point(self, reference_params):
        assignment = SchemeEAssignment.costa(reference_params, 0.5)
        closed = inner_bounds_scheme_e(reference_params, assignment)
        oracle = gaussian_mi_oracle(reference_params, assignment)
        assert closed.as_tuple() == pytest.approx(oracle.as_tuple(), abs=1e-9)
        assert closed.sum_y1 == pytest.approx(oracle.sum_y1, abs=1e-9)

    def test_full_power_split(self, reference_params):
        rates = inner_bounds_scheme_e(reference_params, SchemeEAssignment.costa(reference_params, 1.0))
        assert rates.r1 == pytest.approx(cap(10.0))
        assert rates.sum_b == pytest.approx(cap(4.0 * 10.0 + 10.0))

    def test_no_fresh_signal(self, reference_params):
        rates = inner_bounds_scheme_e(reference_params, SchemeEAssignment.costa(reference_params, 0.0))
        assert rates.r1 == 0.0

    @pytest.mark.timeout(60)
    def test_random_agreement(self):
        rng = np.random.default_rng(20110501)
        for _ in range(200):
            params = _random_params(rng)
            assignment = SchemeEAssignment.costa(params, rng.uniform())
            closed = inner_bounds_scheme_e(params, assignment)
            oracle = gaussian_mi_oracle(params, assignment)
            assert oracle.r1 == pytest.approx(closed.r1, abs=1e-9)
            assert oracle.sum_b == pytest.approx(closed.sum_b, abs=1e-9)
            assert oracle.sum_a == pytest.approx(closed.sum_a, abs=1e-9)
        logger.info("✅ 200 random assignments agree between closed form and oracle")

    def test_costa_removes_interference(self):
        params = GaussianChannelParams(1.3, 1.5, 4.0, 6.0)
        oracle = gaussian_mi_oracle(params, SchemeEAssignment.costa(params, 1.0))
        assert oracle.r1 == pytest.approx(cap(4.0), abs=1e-12)

    def test_silent_interferer(self):
        params = GaussianChannelParams(1.3, 1.5, 4.0, 0.0)
        oracle = gaussian_mi_oracle(params, SchemeEAssignment.costa(params, 0.6))
        assert oracle.r1 == pytest.approx(cap(0.6 * 4.0), abs=1e-12)

    def test_interference_as_noise(self):
        params = GaussianChannelParams(0.8, 2.0, 4.0, 6.0)
        oracle = gaussian_mi_oracle(params, SchemeEAssignment(1.0, 0.0, 0.0))
        assert oracle.r1 == pytest.approx(cap(4.0 / (1.0 + 0.64 * 6.0)), abs=1e-12)

    def test_covariance_is_psd(self, reference_params):
        cov = scheme_e_covariance(reference_params, SchemeEAssignment.costa(reference_params, 0.25))
        assert cov.shape == (6, 6)
        assert check_psd(cov).min() > -1e-9

    def test_batched_oracle_matches_single(self, reference_params):
        alphas = np.array([0.0, 0.3, 1.0])
        batched = oracle_rates(reference_params, alphas)
        for i, alpha in enumerate(alphas):
            single = gaussian_mi_oracle(reference_params, SchemeEAssignment.costa(reference_params, alpha))
            assert batched["r1"][i] == pytest.approx(single.r1, abs=1e-12)
            assert batched["sum_a"][i] == pytest.approx(single.sum_a, abs=1e-12)

    def test_rates_tuple(self):
        assert SchemeERates(1.0, 2.0, 3.0, 2.5).as_tuple() == (1.0, 2.0, 3.0)


class TestRegions:
    """Inner, scheme D and time-division regions."""

    @pytest.mark.timeout(120)
    def test_inner_inside_outer(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            params = _random_params(rng)
            outer = outer_region(params, STEPS)
            assert contains(outer, inner_region(params, STEPS), 1e-9)
            assert contains(outer, scheme_d_region(params, STEPS), 1e-9)

    @pytest.mark.parametrize("b", [5.0, 10.0])
    def test_inner_inside_outer_large_p1(self, b):
        params = GaussianChannelParams(2.0, b, 1000.0, 1.0)
        outer = outer_region(params, 1001)
        inner = inner_region(params, 1001)
        assert contains(outer, inner, 1e-9)
        assert math.isfinite(max_gap(outer, inner))

    @pytest.mark.parametrize("bad", [float("nan"), -math.inf, math.inf])
    def test_pentagon_union_rejects_non_finite(self, bad):
        with pytest.raises(GaussianModelError):
            pentagon_union(np.array([1.0, bad]), np.array([2.0, 2.0]))
        with pytest.raises(GaussianModelError):
            pentagon_union(np.array([1.0, 1.0]), np.array([2.0, bad]))

    def test_pentagon_union_clips_negative_rates(self):
        region = pentagon_union(np.array([-0.5, 1.0]), np.array([2.0, -1.0]))
        assert equivalent(region, pentagon_union(np.array([0.0, 1.0]), np.array([2.0, 0.0])))
        assert region.max_sum_rate() == pytest.approx(2.0)

    @pytest.mark.timeout(120)
    def test_pdc_regime_is_tight(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            params = _random_params(rng, b_max=1.0)
            assert max_gap(outer_region(params, STEPS), inner_region(params, STEPS)) < 1e-3
        logger.info("✅ Inner region meets the outer region for |b| <= 1")

    @pytest.mark.timeout(120)
    def test_very_strong_regime_is_tight(self):
        rng = np.random.default_rng(13)
        checked = 0
        while checked < 20:
            params = _random_params(rng)
            if not is_very_strong(params):
                continue
            assert max_gap(outer_region(params, STEPS), scheme_d_region(params, STEPS)) < 1e-3
            checked += 1

    def test_b_zero_collapse(self):
        params = GaussianChannelParams(1.2, 0.0, 5.0, 3.0)
        expected = RateRegion.box(0.0, cap(3.0))
        assert equivalent(outer_region(params, STEPS), expected)
        assert equivalent(inner_region(params, STEPS), expected)

    def test_no_cognitive_power_inner(self):
        params = GaussianChannelParams(0.7, 1.5, 0.0, 4.0)
        assert equivalent(inner_region(params, STEPS), RateRegion.box(0.0, cap(4.0)))

    def test_time_division_endpoints(self):
        params = GaussianChannelParams(0.0, 0.5, 4.0, 3.0)
        region = time_division_region(params, STEPS)
        assert region.max_r1() == pytest.approx(cap(0.25 * 4.0), abs=1e-12)
        assert region.max_r2() == pytest.approx(cap(3.0), abs=1e-12)

    def test_time_division_within_factor_two(self):
        params = GaussianChannelParams(0.0, 3.0, 1.0, 1.0)
        outer = outer_region(params, STEPS)
        hulled = union_hull([time_division_region(params, STEPS), inner_region(params, STEPS)])
        assert max_ratio(outer, hulled) <= 2.0 + 1e-6
        assert max_ratio(outer, time_division_region(params, cooperative=True)) <= 2.0 + 1e-6

    def test_constant_gap_example(self):
        params = GaussianChannelParams(0.0, 2.0, 10.0, 10.0)
        gap = max_gap(outer_region(params, STEPS), best_inner_region(params, STEPS, STEPS))
        assert 0.0 <= gap <= 1.87
        logger.info(f"✅ Gap at a=0, b=2, P=10: {gap:.4f} bits")


class TestRegimes:
    """Very strong interference and primary-decodes-cognitive predicates."""

    def test_very_strong_examples(self):
        assert regime_value_vsi(GaussianChannelParams(2.0, 1.0, 1.0, 1.0)) == pytest.approx(1.0)
        assert is_very_strong(GaussianChannelParams(2.0, 1.0, 1.0, 1.0))
        assert regime_value_vsi(GaussianChannelParams(1.0, 2.0, 1.0, 1.0)) == pytest.approx(-5.0)
        assert not is_very_strong(GaussianChannelParams(1.0, 2.0, 1.0, 1.0))

    def test_very_strong_without_cognitive_power(self):
        assert is_very_strong(GaussianChannelParams(1.5, 1.5, 0.0, 2.0))
        assert not is_very_strong(GaussianChannelParams(0.5, 0.5, 0.0, 2.0))

    def test_weak_cognitive_link_is_pdc(self):
        rng = np.random.default_rng(99)
        for _ in range(10_000):
            assert is_pdc(_random_params(rng, b_max=1.0))

    def test_strong_cognitive_link_is_not_pdc(self):
        params = GaussianChannelParams(1.0, 1e3, 1.0, 1.0)
        assert not is_pdc(params)
        assert min(pdc_margins(params)) < 0.0

    def test_aligned_gain_case(self):
        # a |b| = 1 zeroes the left side
        params = GaussianChannelParams(0.5, 2.0, 1.0, 1.0)
        assert not is_pdc(params)

    def test_classification(self):
        assert regime_classify(GaussianChannelParams(2.0, 1.0, 1.0, 1.0)) is RegimeLabel.BOTH
        assert regime_classify(GaussianChannelParams(0.0, 0.5, 1.0, 1.0)) is RegimeLabel.PDC
        assert regime_classify(GaussianChannelParams(5.0, 1.5, 1.0, 1.0)) is RegimeLabel.VERY_STRONG
        label = regime_classify(GaussianChannelParams(0.0, 3.0, 1.0, 1.0))
        assert label in (RegimeLabel.GAP_ONLY, RegimeLabel.PDC)
