"""Least-squares cross-validation for the Bernstein degree.

The criterion (up to an additive constant independent of the degree) is
an exact-integral term plus a leave-one-out term; both have closed forms,
so one candidate degree costs O(m^2 + n*m) with no numerical quadrature.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ._kernels import bernstein_loo_cross_term
from .bernstein import BernsteinCdf, basis_matrix
from .data import Dataset
from .ipw import WeightedEcdf
from .special import beta_cdf


@dataclass(frozen=True)
class DegreeGrid:
    """Candidate degrees {m_min, ..., m_max(n)} with
    m_max(n) = min(floor(growth * n^(2/3)), m_cap, n)."""

    m_min: int = 1
    m_cap: int = 300
    growth: float = 3.0

    def __post_init__(self):
        if self.m_min < 1:
            raise ValueError(f"m_min must be >= 1, got {self.m_min}")
        if self.m_cap < self.m_min:
            raise ValueError("m_cap must be >= m_min")
        if self.growth <= 0:
            raise ValueError("growth constant must be positive")

    def resolve(self, n: int) -> list[int]:
        if n < 1:
            raise ValueError(f"sample size must be >= 1, got {n}")
        m_max = min(math.floor(self.growth * n ** (2.0 / 3.0)), self.m_cap, n)
        m_max = max(m_max, self.m_min)
        return list(range(self.m_min, m_max + 1))


@dataclass(frozen=True)
class LscvTrace:
    """Criterion value per candidate degree and the selected minimizer.

    The criterion drops the constant integral of the squared target, so
    negative values are expected; ties break toward the smaller degree.
    """

    degrees: tuple[int, ...]
    criteria: tuple[float, ...]
    selected: int
    criterion: float


def lscv_term1(cdf: BernsteinCdf) -> float:
    """Exact integral of the squared smoothed CDF over [0, 1].

    Double sum over knot pairs of coefficient products times
    C(m,k) C(m,l) B(k+l+1, 2m-k-l+1); every factor is combined in log
    space since the binomials overflow individually for m in the
    hundreds while each product is O(1).
    """
    m = cdf.m
    coeffs = cdf.coeffs
    k = np.arange(m + 1)
    log_binom = gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1)
    s = np.arange(2 * m + 1)
    log_beta_s = gammaln(s + 1) + gammaln(2 * m - s + 1) - gammaln(2 * m + 2)
    log_weight = log_binom[:, None] + log_binom[None, :] + log_beta_s[k[:, None] + k[None, :]]
    return float(coeffs @ np.exp(log_weight) @ coeffs)


def basis_tail_integral(m: int, k: int, y0: float) -> float:
    """Integral of the basis function b_{m,k} over [y0, 1]:
    (1 - Beta(k+1, m-k+1) CDF at y0) / (m+1)."""
    if not 0 <= k <= m:
        raise ValueError(f"basis index k={k} outside 0..{m}")
    if not 0.0 <= y0 <= 1.0:
        raise ValueError(f"lower limit must lie in [0, 1], got {y0}")
    return (1.0 - beta_cdf(y0, k + 1, m - k + 1)) / (m + 1)


def tail_integral_rows(m: int, ys) -> np.ndarray:
    """Tail integrals for all indices at once: row i holds the integral
    of b_{m,k} over [ys_i, 1] for k = 0..m.

    Uses the binomial identity 1 - Beta(k+1, m-k+1) CDF at y
    = P(Bin(m+1, y) <= k), i.e., a cumulative sum along one degree-(m+1)
    basis row.
    """
    rows = basis_matrix(m + 1, ys)
    return np.cumsum(rows[:, : m + 1], axis=1) / (m + 1)


def _observed(data: Dataset, weights) -> tuple[np.ndarray, np.ndarray]:
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (data.n,):
        raise ValueError(f"expected one weight per unit ({data.n}), got shape {weights.shape}")
    keep = weights > 0
    return data.y[keep], weights[keep]


def _cross_term(yv, w, n: int, m: int, coeffs: np.ndarray) -> float:
    knots = np.arange(m + 1) / m
    first_knot = np.searchsorted(knots, yv, side="left")
    return float(bernstein_loo_cross_term(yv, w, np.asarray(coeffs, dtype=float),
                                          first_knot.astype(np.int64), float(n)))


def lscv_term2(data: Dataset, weights, m: int) -> float:
    """Leave-one-out cross term of the criterion, O(n*m).

    Per-unit coefficients come from the rank-one update
    (n F(k/m) - w_i 1{y_i <= k/m}) / (n-1); only observed units enter.
    """
    if m < 1:
        raise ValueError(f"degree m must be >= 1, got {m}")
    if data.n < 2:
        raise ValueError("leave-one-out requires n >= 2")
    yv, w = _observed(data, weights)
    if yv.size == 0:
        return 0.0
    coeffs = WeightedEcdf(yv, w, data.n).evaluate(np.arange(m + 1) / m)
    return _cross_term(yv, w, data.n, m, coeffs)


def lscv_criterion(data: Dataset, weights, m: int) -> float:
    """LSCV value for one candidate degree: exact square integral minus
    the leave-one-out cross term."""
    if m < 1:
        raise ValueError(f"degree m must be >= 1, got {m}")
    if data.n < 2:
        raise ValueError("leave-one-out requires n >= 2")
    yv, w = _observed(data, weights)
    coeffs = WeightedEcdf(yv, w, data.n).evaluate(np.arange(m + 1) / m)
    value = lscv_term1(BernsteinCdf(m=m, coeffs=coeffs))
    if yv.size:
        value -= _cross_term(yv, w, data.n, m, coeffs)
    return value


def select_degree(data: Dataset, weights, grid: DegreeGrid | None = None,
                  workers: int = 1) -> LscvTrace:
    """Evaluate the criterion over the candidate grid and pick the argmin.

    Candidates are independent; with ``workers`` > 1 they are evaluated
    concurrently and merged in degree order, so the trace is identical
    regardless of scheduling.  Ties go to the smaller degree.
    """
    if grid is None:
        grid = DegreeGrid()
    degrees = grid.resolve(data.n)
    if not degrees:
        raise ValueError("empty candidate degree grid")
    if data.n < 2:
        raise ValueError("leave-one-out requires n >= 2")
    yv, w = _observed(data, weights)
    ecdf = WeightedEcdf(yv, w, data.n)

    def criterion(m: int) -> float:
        coeffs = ecdf.evaluate(np.arange(m + 1) / m)
        value = lscv_term1(BernsteinCdf(m=m, coeffs=coeffs))
        if yv.size:
            value -= _cross_term(yv, w, data.n, m, coeffs)
        return value

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(criterion, degrees))
    else:
        values = [criterion(m) for m in degrees]
    best = int(np.argmin(values))
    return LscvTrace(
        degrees=tuple(degrees),
        criteria=tuple(values),
        selected=degrees[best],
        criterion=values[best],
    )
