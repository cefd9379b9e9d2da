"""Bernstein operator on weighted empirical CDFs: basis weights,
coefficient extraction, and polynomial evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .ipw import WeightedEcdf


def basis_matrix(m: int, y) -> np.ndarray:
    """Binomial basis rows b_{m,k}(y_i) for k = 0..m, shape (len(y), m+1).

    Each row is seeded at the modal index from one log-space evaluation
    and filled outward with the ratio recurrence
    b_{m,k+1}(y) = b_{m,k}(y) * ((m-k)/(k+1)) * (y/(1-y)).
    Ratios away from the mode never exceed 1, so there is no overflow and
    far tails underflow gracefully to 0; this stays stable for degrees up
    to 1e4 where endpoint-seeded recurrences would flush the whole row.
    """
    if m < 1:
        raise ValueError(f"degree m must be >= 1, got {m}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.size and (y.min() < 0.0 or y.max() > 1.0):
        raise ValueError("evaluation points must lie in [0, 1]")
    out = np.zeros((y.shape[0], m + 1))
    out[y == 0.0, 0] = 1.0
    out[y == 1.0, m] = 1.0
    interior_idx = np.flatnonzero((y > 0.0) & (y < 1.0))
    if interior_idx.size == 0:
        return out
    yi = y[interior_idx]
    mode = np.clip(np.floor((m + 1) * yi).astype(np.intp), 0, m)
    # sorting by modal index makes each sweep touch a contiguous slice
    order = np.argsort(mode, kind="stable")
    ys = yi[order]
    ms = mode[order]
    npts = ys.shape[0]
    log_coef = gammaln(m + 1) - gammaln(ms + 1) - gammaln(m - ms + 1)
    sub = np.zeros((m + 1, npts))
    sub[ms, np.arange(npts)] = np.exp(
        log_coef + ms * np.log(ys) + (m - ms) * np.log1p(-ys))
    # filled[k] = how many sorted points have their mode at or below k
    filled = np.searchsorted(ms, np.arange(m + 1), side="right")
    ratio_up = ys / (1.0 - ys)
    for k in range(m):
        c = filled[k]
        if c:
            sub[k + 1, :c] = sub[k, :c] * (((m - k) / (k + 1)) * ratio_up[:c])
    ratio_down = (1.0 - ys) / ys
    for k in range(m, 0, -1):
        c = filled[k - 1]
        if c < npts:
            sub[k - 1, c:] = sub[k, c:] * ((k / (m - k + 1)) * ratio_down[c:])
    # columns are probability mass functions; renormalizing removes the
    # common scale error the log-space seed carries at large degrees
    sub /= sub.sum(axis=0)
    out[interior_idx[order]] = sub.T
    return out


def bernstein_basis(m: int, k: int, y: float) -> float:
    """Single basis weight b_{m,k}(y) = C(m,k) y^k (1-y)^(m-k)."""
    if not 0 <= k <= m:
        raise ValueError(f"basis index k={k} outside 0..{m}")
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"evaluation point must lie in [0, 1], got {y}")
    return float(basis_matrix(m, y)[0, k])


@dataclass(frozen=True)
class BernsteinCdf:
    """Degree-m Bernstein-smoothed CDF: coeffs[k] holds the underlying
    step CDF at k/m, evaluation is the polynomial Σ_k coeffs[k] b_{m,k}(y)."""

    m: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if self.m < 1:
            raise ValueError(f"degree m must be >= 1, got {self.m}")
        if coeffs.shape != (self.m + 1,):
            raise ValueError(f"expected {self.m + 1} coefficients, got shape {coeffs.shape}")
        if coeffs[0] < 0.0:
            raise ValueError("coefficients must be nonnegative")
        if np.any(np.diff(coeffs) < 0):
            raise ValueError("coefficients must be non-decreasing")
        coeffs = coeffs.copy()
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def knots(self) -> np.ndarray:
        return np.arange(self.m + 1) / self.m

    def evaluate(self, y):
        """Polynomial value at y; scalar or ndarray, O(m) per point."""
        out = basis_matrix(self.m, y) @ self.coeffs
        return float(out[0]) if np.ndim(y) == 0 else out

    __call__ = evaluate


def smooth(ecdf: WeightedEcdf, m: int) -> BernsteinCdf:
    """Apply the degree-m Bernstein operator to a weighted step CDF.

    Materializes the m+1 knot values once (binary searches into the step
    function) so later evaluations never touch the data again.
    """
    if m < 1:
        raise ValueError(f"degree m must be >= 1, got {m}")
    knots = np.arange(m + 1) / m
    return BernsteinCdf(m=m, coeffs=ecdf.evaluate(knots))
