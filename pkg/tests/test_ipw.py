"""Propensity estimation and the weighted empirical CDF."""

import numpy as np
import pytest

from bernipw.data import Dataset
from bernipw.ipw import (
    EstimationError,
    WeightedEcdf,
    estimate_propensity,
    ipw_ecdf,
    ipw_weights,
    known_propensity,
)
from bernipw.simulate import MarBetaDgp, generate
from bernipw.special import beta_cdf


def _dataset(y, x, delta):
    return Dataset(np.where(np.asarray(delta) == 1, y, np.nan), x, delta)


class TestPropensityModels:
    def test_estimate_single_cell(self):
        d = _dataset([0.1, 0.0, 0.2, 0.3], [0, 0, 0, 0], [1, 0, 1, 1])
        model = estimate_propensity(d)
        assert model.kind == "estimated"
        assert model.probs[0] == pytest.approx(0.75)
        assert model.observed_counts[0] == 3
        assert model.cell_counts[0] == 4

    def test_fully_observed(self):
        d = _dataset([0.1, 0.2], [0, 1], [1, 1])
        model = estimate_propensity(d)
        assert model.probs == {0: 1.0, 1: 1.0}

    def test_empty_cell_errors_with_name(self):
        d = _dataset([0.1, 0.0], [0, 1], [1, 0])
        with pytest.raises(EstimationError, match="code 1"):
            estimate_propensity(d)

    def test_monte_carlo_consistency(self):
        # estimated cell propensities approach the generating ones
        data = generate(MarBetaDgp(), 100_000, 12345)
        model = estimate_propensity(data)
        assert model.probs[0] == pytest.approx(0.6, abs=0.01)
        assert model.probs[1] == pytest.approx(0.9, abs=0.01)

    def test_known_model(self):
        model = known_propensity({0: 0.6, 1: 0.9})
        assert model.kind == "known"
        assert model.floor == pytest.approx(0.6)

    def test_known_degenerate(self):
        assert known_propensity({0: 1.0}).probs[0] == 1.0

    def test_known_rejects_zero(self):
        with pytest.raises(ValueError):
            known_propensity({0: 0.0})
        with pytest.raises(ValueError):
            known_propensity({0: 1.5})


class TestWeights:
    def test_weights_zero_for_unobserved(self):
        d = _dataset([0.5, 0.0], [0, 0], [1, 0])
        w = ipw_weights(d, known_propensity({0: 0.5}))
        np.testing.assert_allclose(w, [2.0, 0.0])

    def test_uncovered_cell(self):
        d = _dataset([0.5], [3], [1])
        with pytest.raises(EstimationError, match="cell 3"):
            ipw_weights(d, known_propensity({0: 0.5}))


class TestWeightedEcdf:
    def test_plain_ecdf(self):
        d = _dataset([0.3, 0.7], [0, 0], [1, 1])
        e = ipw_ecdf(d, known_propensity({0: 1.0}))
        assert e.evaluate(0.5) == pytest.approx(0.5)
        assert e.evaluate(1.0) == pytest.approx(1.0)

    def test_known_half_propensity(self):
        d = _dataset([0.4, 0.0], [0, 0], [1, 0])
        e = ipw_ecdf(d, known_propensity({0: 0.5}))
        assert e.evaluate(1.0) == pytest.approx(1.0)

    def test_feasible_total_mass_exact(self):
        d = _dataset([0.1, 0.0, 0.2, 0.3], [0, 0, 0, 0], [1, 0, 1, 1])
        e = ipw_ecdf(d, estimate_propensity(d))
        assert e.evaluate(1.0) == pytest.approx(1.0, abs=1e-12)

    def test_empty_observed(self):
        e = WeightedEcdf(np.array([]), np.array([]), 5)
        assert e.evaluate(0.5) == 0.0
        assert e.total_mass == 0.0

    def test_below_all_points(self):
        e = WeightedEcdf(np.array([0.5]), np.array([1.0]), 1)
        assert e.evaluate(0.4) == 0.0

    def test_closed_on_the_right(self):
        e = WeightedEcdf(np.array([0.5]), np.array([1.0]), 1)
        assert e.evaluate(0.5) == pytest.approx(1.0)

    def test_monotone(self):
        rng = np.random.default_rng(3)
        vals = rng.random(200)
        weights = rng.uniform(0.5, 3.0, 200)
        e = WeightedEcdf(vals, weights, 200)
        q = np.sort(rng.random(500))
        out = e.evaluate(q)
        assert np.all(np.diff(out) >= 0)

    def test_ties_accumulate(self):
        e = WeightedEcdf(np.array([0.5, 0.5, 0.2]), np.array([1.0, 2.0, 1.0]), 4)
        assert e.evaluate(0.5) == pytest.approx(1.0)
        assert e.evaluate(0.49) == pytest.approx(0.25)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            WeightedEcdf(np.array([0.5]), np.array([-1.0]), 1)


class TestTotalMassProperty:
    def test_thousand_random_datasets(self):
        # feasible estimator integrates to exactly 1 whenever every cell
        # has at least one observed unit
        rng = np.random.default_rng(99)
        for _ in range(1000):
            n = int(rng.integers(2, 40))
            cells = int(rng.integers(1, 4))
            x = rng.integers(0, cells, n)
            delta = (rng.random(n) < rng.uniform(0.3, 1.0)).astype(int)
            for c in np.unique(x):
                members = np.flatnonzero(x == c)
                if delta[members].sum() == 0:
                    delta[members[0]] = 1  # guarantee the property's premise
            y = np.where(delta == 1, rng.random(n), np.nan)
            d = Dataset(y, x, delta)
            e = ipw_ecdf(d, estimate_propensity(d))
            assert abs(e.evaluate(1.0) - 1.0) < 1e-12


class TestPseudoUnbiasedness:
    def test_mean_matches_truth_within_mc_error(self):
        # mean of the known-propensity step estimator over many replications
        # matches the target CDF at fixed points to Monte Carlo accuracy
        dgp = MarBetaDgp()
        model = dgp.known_model()
        reps, n = 2000, 200
        points = np.array([0.25, 0.5, 0.75])
        draws = np.empty((reps, 3))
        for r in range(reps):
            data = generate(dgp, n, np.random.SeedSequence([515, n, r]))
            draws[r] = ipw_ecdf(data, model).evaluate(points)
        truth = np.array([beta_cdf(float(p), 2, 5) for p in points])
        se = draws.std(axis=0, ddof=1) / np.sqrt(reps)
        assert np.all(np.abs(draws.mean(axis=0) - truth) < 3 * se + 1e-12)
