"""Closed-form asymptotic quantities against hand-derived arithmetic and
brute-force oracles."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from bernipw.bernstein import basis_matrix
from bernipw.special import beta_cdf
from bernipw.theory import (
    CellModel,
    TheoryContext,
    beta_mar_context,
    covariance_sum,
    feasible_variance,
    mise_expansion,
    mse_expansion,
    optimal_degree_global,
    optimal_degree_pointwise,
    propensity_estimation_gain,
    pseudo_variance,
    smoothing_bias,
    smoothing_variance_reduction,
    uniform_context,
)

# point where the Beta(2, 5) CDF equals one half
YSTAR = brentq(lambda y: beta_cdf(y, 2, 5) - 0.5, 0.01, 0.99, xtol=1e-15)


@pytest.fixture(scope="module")
def ctx():
    return beta_mar_context()


class TestContextValidation:
    def test_mixture_consistency_enforced(self):
        flat = lambda y: min(max(y, 0.0), 1.0)
        bad = lambda y: flat(y) ** 2
        with pytest.raises(ValueError, match="inconsistent"):
            TheoryContext(
                cdf=flat, pdf=lambda y: 1.0, pdf_prime=lambda y: 0.0,
                cells=(CellModel(1.0, 0.5, bad, lambda y: 2 * y),),
            )

    def test_cell_probabilities_sum(self):
        flat = lambda y: min(max(y, 0.0), 1.0)
        with pytest.raises(ValueError, match="sum to 1"):
            TheoryContext(
                cdf=flat, pdf=lambda y: 1.0, pdf_prime=lambda y: 0.0,
                cells=(CellModel(0.7, 0.5, flat, lambda y: 1.0),),
            )

    def test_propensity_range(self):
        flat = lambda y: min(max(y, 0.0), 1.0)
        with pytest.raises(ValueError, match="propensities"):
            TheoryContext(
                cdf=flat, pdf=lambda y: 1.0, pdf_prime=lambda y: 0.0,
                cells=(CellModel(1.0, 0.0, flat, lambda y: 1.0),),
            )


class TestClosedForms:
    def test_bias_at_endpoints(self, ctx):
        assert smoothing_bias(ctx, 0.0) == 0.0
        assert smoothing_bias(ctx, 1.0) == 0.0

    def test_bias_at_half(self, ctx):
        # f'(y) = 30 (1-y)^3 (1-5y); at 0.5: -5.625; times y(1-y)/2 = 0.125
        assert smoothing_bias(ctx, 0.5) == pytest.approx(-0.703125, abs=1e-12)

    def test_bias_flat_density(self):
        flat = uniform_context()
        for y in np.linspace(0, 1, 11):
            assert smoothing_bias(flat, float(y)) == 0.0

    def test_pseudo_variance_hand_value(self, ctx):
        # E[1/pi] = (1/0.6 + 1/0.9)/2 = 25/18; at F = 1/2:
        # 25/36 - 1/4 = 0.444444...
        assert pseudo_variance(ctx, YSTAR) == pytest.approx(0.4444444444, abs=1e-9)

    def test_pseudo_variance_collapses_when_fully_observed(self):
        full = beta_mar_context(propensities=(1.0, 1.0))
        for y in (0.2, 0.5, 0.8):
            F = beta_cdf(y, 2, 5)
            assert pseudo_variance(full, y) == pytest.approx(F * (1 - F), abs=1e-12)

    def test_pseudo_variance_zero_at_origin(self, ctx):
        assert pseudo_variance(ctx, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_reduction_hand_value(self, ctx):
        # sqrt(0.25/pi) * f(0.5) * E[1/pi], f(0.5) = 0.9375
        expected = math.sqrt(0.25 / math.pi) * 0.9375 * (25 / 18)
        assert smoothing_variance_reduction(ctx, 0.5) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.36731, abs=1e-5)

    def test_reduction_vanishes_at_endpoints(self, ctx):
        assert smoothing_variance_reduction(ctx, 0.0) == 0.0
        assert smoothing_variance_reduction(ctx, 1.0) == 0.0

    def test_gain_hand_value(self, ctx):
        # C = [0.5*(0.4/0.6) + 0.5*(0.1/0.9)] * F^2 at F = 1/2
        assert propensity_estimation_gain(ctx, YSTAR) == pytest.approx(
            0.0972222222, abs=1e-9)

    def test_gain_zero_when_fully_observed(self):
        full = beta_mar_context(propensities=(1.0, 1.0))
        for y in (0.3, 0.7):
            assert propensity_estimation_gain(full, y) == 0.0
            assert feasible_variance(full, y) == pytest.approx(
                pseudo_variance(full, y), abs=1e-15)

    def test_gain_nonnegative_everywhere(self, ctx):
        rng = np.random.default_rng(20)
        for _ in range(50):
            probs = rng.dirichlet(np.ones(3))
            pis = rng.uniform(0.05, 1.0, 3)
            random_ctx = beta_mar_context(cell_probs=tuple(probs), propensities=tuple(pis))
            for y in rng.random(5):
                assert propensity_estimation_gain(random_ctx, float(y)) >= 0.0

    def test_feasible_variance_hand_value(self, ctx):
        assert feasible_variance(ctx, YSTAR) == pytest.approx(0.3472222222, abs=1e-9)
        assert feasible_variance(ctx, YSTAR) / pseudo_variance(ctx, YSTAR) == pytest.approx(
            0.78125, abs=1e-9)

    def test_feasible_variance_alternative_form(self, ctx):
        # nu^2 = E[F_x (1-F_x)/pi] + E[F_x^2] - F^2
        for y in np.linspace(0.05, 0.95, 19):
            y = float(y)
            alt = (
                ctx.expect(lambda c: c.cond_cdf(y) * (1 - c.cond_cdf(y)) / c.propensity)
                + ctx.expect(lambda c: c.cond_cdf(y) ** 2)
                - ctx.cdf(y) ** 2
            )
            assert feasible_variance(ctx, y) == pytest.approx(alt, abs=1e-10)


class TestOptimalDegree:
    def test_scaling_law(self, ctx):
        base = optimal_degree_pointwise(ctx, 0.5, 1000)
        assert optimal_degree_pointwise(ctx, 0.5, 8000) / base == pytest.approx(4.0, rel=1e-12)

    def test_uniform_degenerate(self):
        with pytest.raises(ValueError, match="undefined"):
            optimal_degree_pointwise(uniform_context(), 0.3, 100)
        with pytest.raises(ValueError, match="undefined"):
            optimal_degree_global(uniform_context(), 100)

    def test_pointwise_value_composition(self, ctx):
        expected = 1000 ** (2 / 3) * (4 * 0.703125 ** 2
                                      / smoothing_variance_reduction(ctx, 0.5)) ** (2 / 3)
        assert optimal_degree_pointwise(ctx, 0.5, 1000) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("n", [10 ** 3, 10 ** 4, 10 ** 5])
    def test_brute_force_minimizer_matches(self, ctx, n):
        # integer minimization of the pointwise expansion vs the closed form
        y = 0.5
        m_opt = optimal_degree_pointwise(ctx, y, n)
        lo, hi = 1, int(3 * m_opt) + 4
        values = [mse_expansion(ctx, y, n, m, "pseudo") for m in range(lo, hi + 1)]
        best = lo + int(np.argmin(values))
        assert abs(best - round(m_opt)) <= 1

    def test_global_integrals_match_quadrature(self, ctx):
        bias_sq, _ = quad(lambda y: smoothing_bias(ctx, y) ** 2, 0, 1, epsabs=1e-12)
        reduction, _ = quad(lambda y: smoothing_variance_reduction(ctx, y), 0, 1,
                            epsabs=1e-12)
        expected = 1000 ** (2 / 3) * (4 * bias_sq / reduction) ** (2 / 3)
        assert optimal_degree_global(ctx, 1000) == pytest.approx(expected, rel=1e-7)


class TestExpansions:
    def test_feasible_minus_pseudo(self, ctx):
        for y, n, m in [(0.3, 100, 5), (0.6, 2000, 40)]:
            gap = mse_expansion(ctx, y, n, m, "feasible") - mse_expansion(ctx, y, n, m, "pseudo")
            assert gap == pytest.approx(-propensity_estimation_gain(ctx, y) / n, abs=1e-15)

    def test_large_degree_limit(self, ctx):
        value = mse_expansion(ctx, 0.4, 500, 10 ** 12, "pseudo")
        assert value == pytest.approx(pseudo_variance(ctx, 0.4) / 500, rel=1e-5)

    def test_mise_local_optimality(self, ctx):
        for n in (500, 5000):
            m_opt = max(1, round(optimal_degree_global(ctx, n)))
            at_opt = mise_expansion(ctx, n, m_opt)
            assert at_opt <= mise_expansion(ctx, n, max(1, m_opt // 2))
            assert at_opt <= mise_expansion(ctx, n, 2 * m_opt)

    def test_variant_validation(self, ctx):
        with pytest.raises(ValueError):
            mse_expansion(ctx, 0.5, 10, 10, "oracle")


class TestCovarianceSum:
    def test_degree_one_exact(self):
        # 4-term enumeration at y = 1/2 gives -1/4
        assert covariance_sum(1, 0.5) == pytest.approx(-0.25, abs=1e-15)

    def test_matches_brute_force_double_sum(self):
        for m, y in [(5, 0.3), (40, 0.62), (120, 0.11)]:
            row = basis_matrix(m, np.array([y]))[0]
            brute = 0.0
            for k in range(m + 1):
                for l in range(m + 1):
                    brute += (min(k, l) / m - y) * row[k] * row[l]
            assert covariance_sum(m, y) == pytest.approx(brute, abs=1e-13)

    def test_symmetry_in_y(self):
        for m in (3, 21, 200):
            for y in (0.1, 0.25, 0.4):
                assert covariance_sum(m, y) == pytest.approx(
                    covariance_sum(m, 1 - y), abs=1e-12)

    def test_limit_at_large_degree(self):
        for y in (0.25, 0.5):
            target = -math.sqrt(y * (1 - y) / math.pi)
            value = covariance_sum(10 ** 4, y) * 100.0
            assert value == pytest.approx(target, rel=0.02)

    def test_scaled_error_shrinks(self):
        # |sqrt(m) * sum - limit| decreases along m = 1e2, 1e3, 1e4
        for y in (0.25, 0.5):
            target = -math.sqrt(y * (1 - y) / math.pi)
            errors = [abs(covariance_sum(m, y) * math.sqrt(m) - target)
                      for m in (100, 1000, 10_000)]
            assert errors[0] > errors[1] > errors[2]

    def test_domain(self):
        with pytest.raises(ValueError):
            covariance_sum(5, 0.0)
        with pytest.raises(ValueError):
            covariance_sum(0, 0.5)
