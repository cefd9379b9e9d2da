"""Degree-selection criterion: closed forms vs quadrature oracles, the
rank-one leave-one-out update vs from-scratch recomputation, and selector
behavior."""

import numpy as np
import pytest
from scipy.integrate import quad

from bernipw.bernstein import BernsteinCdf, bernstein_basis
from bernipw.data import Dataset
from bernipw.ipw import WeightedEcdf, estimate_propensity, ipw_weights
from bernipw.lscv import (
    DegreeGrid,
    basis_tail_integral,
    lscv_criterion,
    lscv_term1,
    lscv_term2,
    select_degree,
    tail_integral_rows,
)
from bernipw.simulate import MarBetaDgp, generate


def _term2_oracle(data, weights, m):
    """From-scratch leave-one-out: rebuild each reduced step CDF."""
    n = data.n
    knots = np.arange(m + 1) / m
    total = 0.0
    for i in np.flatnonzero(weights > 0):
        keep = np.ones(n, bool)
        keep[i] = False
        w = weights[keep]
        y = data.y[keep]
        observed = w > 0
        loo = WeightedEcdf(y[observed], w[observed], n - 1).evaluate(knots)
        tails = np.array([basis_tail_integral(m, k, float(data.y[i])) for k in range(m + 1)])
        total += weights[i] * float(loo @ tails)
    return 2.0 / n * total


class TestDegreeGrid:
    def test_small_n(self):
        assert DegreeGrid().resolve(25) == list(range(1, 26))

    def test_cap_binds(self):
        grid = DegreeGrid().resolve(3200)
        assert grid[-1] == 300
        assert grid[0] == 1

    def test_growth_term(self):
        # floor(3 * 100^(2/3)) = floor(64.6...) = 64
        assert DegreeGrid().resolve(100)[-1] == 64

    def test_validation(self):
        with pytest.raises(ValueError):
            DegreeGrid(m_min=0)
        with pytest.raises(ValueError):
            DegreeGrid(m_min=5, m_cap=4)


class TestTerm1:
    def test_all_ones_integrates_to_one(self):
        assert lscv_term1(BernsteinCdf(m=5, coeffs=np.ones(6))) == pytest.approx(1.0, abs=1e-12)

    def test_linear_case(self):
        cdf = BernsteinCdf(m=1, coeffs=np.array([0.0, 1.0]))
        assert lscv_term1(cdf) == pytest.approx(1.0 / 3.0, abs=1e-13)

    def test_matches_riemann_quadrature(self):
        rng = np.random.default_rng(12)
        grid = (np.arange(100_000) + 0.5) / 100_000
        for m in (25, 60, 100):
            coeffs = np.sort(rng.random(m + 1))
            cdf = BernsteinCdf(m=m, coeffs=coeffs)
            reference = float(np.mean(cdf.evaluate(grid) ** 2))
            assert lscv_term1(cdf) == pytest.approx(reference, abs=1e-7)


class TestTailIntegral:
    def test_full_integral(self):
        for m in (1, 6, 40):
            assert basis_tail_integral(m, m // 2, 0.0) == pytest.approx(1 / (m + 1), abs=1e-14)

    def test_empty_interval(self):
        assert basis_tail_integral(6, 3, 1.0) == 0.0

    def test_matches_adaptive_quadrature(self):
        cases = [(6, 3, 0.4), (12, 0, 0.2), (12, 12, 0.7), (80, 37, 0.55)]
        for m, k, y0 in cases:
            reference, _ = quad(lambda t: bernstein_basis(m, k, t), y0, 1.0,
                                epsabs=1e-13, epsrel=1e-12)
            assert basis_tail_integral(m, k, y0) == pytest.approx(reference, abs=1e-10)

    def test_rows_match_scalar_closed_form(self):
        rng = np.random.default_rng(6)
        ys = np.concatenate([[0.0, 1.0], rng.random(20)])
        for m in (1, 7, 33):
            rows = tail_integral_rows(m, ys)
            ref = np.array([[basis_tail_integral(m, k, float(y)) for k in range(m + 1)]
                            for y in ys])
            np.testing.assert_allclose(rows, ref, atol=1e-12)


class TestTerm2:
    def test_nothing_observed(self):
        data = Dataset([np.nan, np.nan], [0, 0], [0, 0])
        assert lscv_term2(data, np.zeros(2), 4) == 0.0

    def test_two_point_oracle(self):
        data = Dataset([0.25, 0.75], [0, 0], [1, 1])
        weights = np.ones(2)
        assert lscv_term2(data, weights, 1) == pytest.approx(
            _term2_oracle(data, weights, 1), abs=1e-14)

    def test_rank_one_update_vs_scratch_seeded(self):
        dgp = MarBetaDgp()
        data = generate(dgp, 50, 31)
        weights = ipw_weights(data, estimate_propensity(data))
        assert lscv_term2(data, weights, 8) == pytest.approx(
            _term2_oracle(data, weights, 8), abs=1e-12)

    def test_requires_two_units(self):
        data = Dataset([0.5], [0], [1])
        with pytest.raises(ValueError):
            lscv_term2(data, np.ones(1), 3)


class TestSelectDegree:
    def test_finite_on_default_grid_small_n(self):
        dgp = MarBetaDgp()
        data = generate(dgp, 25, 3)
        weights = ipw_weights(data, dgp.known_model())
        trace = select_degree(data, weights)
        assert len(trace.degrees) == 25
        assert np.isfinite(trace.criteria).all()
        assert trace.selected in trace.degrees

    def test_matches_pointwise_criterion(self):
        dgp = MarBetaDgp()
        data = generate(dgp, 40, 5)
        weights = ipw_weights(data, dgp.known_model())
        trace = select_degree(data, weights, DegreeGrid(m_cap=12))
        for m, value in zip(trace.degrees, trace.criteria):
            assert value == pytest.approx(lscv_criterion(data, weights, m), abs=1e-12)

    def test_workers_do_not_change_result(self):
        dgp = MarBetaDgp()
        data = generate(dgp, 120, 9)
        weights = ipw_weights(data, estimate_propensity(data))
        assert select_degree(data, weights, workers=1) == select_degree(
            data, weights, workers=3)

    def test_tie_breaks_to_smaller_degree(self):
        # degenerate data: all mass at 0 makes every knot coefficient equal,
        # so the criterion is flat across degrees and m_min must win
        data = Dataset([0.0, 0.0], [0, 0], [1, 1])
        result = select_degree(data, np.ones(2), DegreeGrid(m_cap=2))
        assert result.selected == result.degrees[0]

    def test_selected_degree_grows_with_n(self):
        # median selected degree increases across n (consistency with the
        # n^(2/3)-scaled optimum); 50 seeded replications per sample size
        dgp = MarBetaDgp()
        medians = []
        for n in (50, 400, 3200):
            picks = []
            for rep in range(50):
                data = generate(dgp, n, np.random.SeedSequence([77, n, rep]))
                weights = ipw_weights(data, dgp.known_model())
                picks.append(select_degree(data, weights, workers=2).selected)
            medians.append(np.median(picks))
        assert medians[0] < medians[1] < medians[2]
