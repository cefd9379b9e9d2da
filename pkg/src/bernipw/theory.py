"""Closed-form asymptotic quantities for the smoothed IPW estimators,
evaluated from an analytic description of the data-generating process."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .bernstein import basis_matrix
from .special import beta_cdf, log_beta

_QUAD_TOL = 1e-9
_QUAD_DEPTH = 20


@dataclass(frozen=True)
class CellModel:
    """One covariate cell: its probability, observation propensity, and
    the conditional response CDF/density given the cell."""

    probability: float
    propensity: float
    cond_cdf: Callable[[float], float]
    cond_pdf: Callable[[float], float]


@dataclass(frozen=True)
class TheoryContext:
    """Analytic CDF/density/derivative of the response plus the per-cell
    conditional laws and propensities; input to every asymptotic formula."""

    cdf: Callable[[float], float]
    pdf: Callable[[float], float]
    pdf_prime: Callable[[float], float]
    cells: tuple[CellModel, ...]

    def __post_init__(self):
        if not self.cells:
            raise ValueError("at least one covariate cell is required")
        total = sum(c.probability for c in self.cells)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"cell probabilities must sum to 1, got {total}")
        for c in self.cells:
            if not 0.0 < c.propensity <= 1.0:
                raise ValueError(f"propensities must lie in (0, 1], got {c.propensity}")
            if c.probability < 0.0:
                raise ValueError("cell probabilities must be nonnegative")
        if abs(self.cdf(0.0)) > 1e-10 or abs(self.cdf(1.0) - 1.0) > 1e-10:
            raise ValueError("cdf must satisfy F(0)=0 and F(1)=1")
        grid = np.linspace(0.0, 1.0, 101)
        for y in grid:
            mix = sum(c.probability * c.cond_cdf(y) for c in self.cells)
            if abs(mix - self.cdf(y)) > 1e-10:
                raise ValueError(
                    f"conditional CDFs are inconsistent with the marginal at y={y}: "
                    f"mixture {mix} vs {self.cdf(y)}"
                )

    def expect(self, func: Callable[[CellModel], float]) -> float:
        """Expectation over the covariate cells."""
        return sum(c.probability * func(c) for c in self.cells)


def _beta_family(alpha: float, beta: float):
    log_norm = log_beta(alpha, beta)
    norm = math.exp(-log_norm)

    def pdf(y: float) -> float:
        if y <= 0.0:
            return norm if alpha == 1.0 else 0.0
        if y >= 1.0:
            return norm if beta == 1.0 else 0.0
        return norm * y ** (alpha - 1.0) * (1.0 - y) ** (beta - 1.0)

    def pdf_prime(y: float) -> float:
        # coefficient zero kills a term before its (possibly singular) power
        first = 0.0
        if alpha != 1.0:
            base = y ** (alpha - 2.0) if 0.0 < y else (1.0 if alpha == 2.0 else 0.0)
            first = (alpha - 1.0) * base * (1.0 - y) ** (beta - 1.0)
        second = 0.0
        if beta != 1.0:
            base = (1.0 - y) ** (beta - 2.0) if y < 1.0 else (1.0 if beta == 2.0 else 0.0)
            second = (beta - 1.0) * y ** (alpha - 1.0) * base
        return norm * (first - second)

    def cdf(y: float) -> float:
        return beta_cdf(min(max(y, 0.0), 1.0), alpha, beta)

    return cdf, pdf, pdf_prime


def beta_mar_context(alpha: float = 2.0, beta: float = 5.0,
                     cell_probs: Sequence[float] = (0.5, 0.5),
                     propensities: Sequence[float] = (0.6, 0.9)) -> TheoryContext:
    """Beta(alpha, beta) response independent of a discrete covariate,
    observed with per-cell propensities; the default parameters give the
    simulation design used throughout the test-suite."""
    if len(cell_probs) != len(propensities):
        raise ValueError("cell_probs and propensities must have equal length")
    cdf, pdf, pdf_prime = _beta_family(alpha, beta)
    cells = tuple(
        CellModel(probability=float(p), propensity=float(pi), cond_cdf=cdf, cond_pdf=pdf)
        for p, pi in zip(cell_probs, propensities)
    )
    return TheoryContext(cdf=cdf, pdf=pdf, pdf_prime=pdf_prime, cells=cells)


def uniform_context(cell_probs: Sequence[float] = (0.5, 0.5),
                    propensities: Sequence[float] = (0.6, 0.9)) -> TheoryContext:
    """Uniform(0, 1) response independent of the covariate; its flat
    density makes the leading smoothing bias vanish identically."""
    return beta_mar_context(1.0, 1.0, cell_probs, propensities)


def smoothing_bias(ctx: TheoryContext, y: float) -> float:
    """Leading coefficient of the O(1/m) smoothing bias:
    y(1-y) f'(y) / 2."""
    return 0.5 * y * (1.0 - y) * ctx.pdf_prime(y)


def pseudo_variance(ctx: TheoryContext, y: float) -> float:
    """Leading variance coefficient with known propensities:
    E[F_{Y|X}(y)/pi(X)] - F(y)^2."""
    return ctx.expect(lambda c: c.cond_cdf(y) / c.propensity) - ctx.cdf(y) ** 2


def smoothing_variance_reduction(ctx: TheoryContext, y: float) -> float:
    """Coefficient of the m^(-1/2) variance reduction from smoothing:
    sqrt(y(1-y)/pi) * E[f_{Y|X}(y)/pi(X)] (pi here is the circle constant)."""
    return math.sqrt(y * (1.0 - y) / math.pi) * ctx.expect(
        lambda c: c.cond_pdf(y) / c.propensity
    )


def propensity_estimation_gain(ctx: TheoryContext, y: float) -> float:
    """Nonnegative variance reduction from estimating the propensities:
    E[((1-pi)/pi) F_{Y|X}(y)^2]."""
    return ctx.expect(
        lambda c: (1.0 - c.propensity) / c.propensity * c.cond_cdf(y) ** 2
    )


def feasible_variance(ctx: TheoryContext, y: float) -> float:
    """Leading variance coefficient with estimated propensities: the
    known-propensity coefficient minus the estimation gain."""
    return pseudo_variance(ctx, y) - propensity_estimation_gain(ctx, y)


def _adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                      tol: float = _QUAD_TOL, max_depth: int = _QUAD_DEPTH) -> float:
    fa, fb = f(a), f(b)
    mid = 0.5 * (a + b)
    fm = f(mid)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        mid = 0.5 * (a + b)
        lm = 0.5 * (a + mid)
        rm = 0.5 * (mid + b)
        flm, frm = f(lm), f(rm)
        left = (mid - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - mid) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (recurse(a, mid, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(mid, b, fm, frm, fb, right, 0.5 * tol, depth - 1))

    return recurse(a, b, fa, fm, fb, whole, tol, max_depth)


@lru_cache(maxsize=64)
def _unit_integrals(ctx: TheoryContext) -> dict:
    return {
        "bias_sq": _adaptive_simpson(lambda y: smoothing_bias(ctx, y) ** 2, 0.0, 1.0),
        "reduction": _adaptive_simpson(
            lambda y: smoothing_variance_reduction(ctx, y), 0.0, 1.0),
        "pseudo": _adaptive_simpson(lambda y: pseudo_variance(ctx, y), 0.0, 1.0),
        "feasible": _adaptive_simpson(lambda y: feasible_variance(ctx, y), 0.0, 1.0),
    }


def optimal_degree_pointwise(ctx: TheoryContext, y: float, n: int) -> float:
    """Degree minimizing the pointwise MSE expansion:
    n^(2/3) * (4 B(y)^2 / V(y))^(2/3); reported as a real number."""
    bias = smoothing_bias(ctx, y)
    reduction = smoothing_variance_reduction(ctx, y)
    if bias == 0.0 or reduction == 0.0:
        raise ValueError(
            f"optimal degree undefined at y={y}: bias coefficient {bias}, "
            f"variance-reduction coefficient {reduction}"
        )
    return n ** (2.0 / 3.0) * (4.0 * bias ** 2 / reduction) ** (2.0 / 3.0)


def optimal_degree_global(ctx: TheoryContext, n: int) -> float:
    """Degree minimizing the MISE expansion, with the pointwise ratio
    replaced by integrals over [0, 1]."""
    parts = _unit_integrals(ctx)
    if parts["bias_sq"] * parts["reduction"] == 0.0:
        raise ValueError(
            "global optimal degree undefined: integrated bias or "
            "variance-reduction coefficient vanishes"
        )
    return n ** (2.0 / 3.0) * (4.0 * parts["bias_sq"] / parts["reduction"]) ** (2.0 / 3.0)


def _leading_variance(ctx: TheoryContext, y: float, variant: str) -> float:
    if variant == "pseudo":
        return pseudo_variance(ctx, y)
    if variant == "feasible":
        return feasible_variance(ctx, y)
    raise ValueError(f"variant must be 'pseudo' or 'feasible', got {variant!r}")


def mse_expansion(ctx: TheoryContext, y: float, n: int, m: int, variant: str = "pseudo") -> float:
    """Leading-order pointwise MSE:
    variance/n - reduction/(n sqrt(m)) + bias^2/m^2 (no remainder terms)."""
    if m < 1 or n < 1:
        raise ValueError("n and m must be >= 1")
    return (_leading_variance(ctx, y, variant) / n
            - smoothing_variance_reduction(ctx, y) / (n * math.sqrt(m))
            + smoothing_bias(ctx, y) ** 2 / m ** 2)


def mise_expansion(ctx: TheoryContext, n: int, m: int, variant: str = "pseudo") -> float:
    """Leading-order MISE: the pointwise expansion integrated over [0, 1]."""
    if m < 1 or n < 1:
        raise ValueError("n and m must be >= 1")
    parts = _unit_integrals(ctx)
    lead = parts["pseudo"] if variant == "pseudo" else parts["feasible"]
    if variant not in ("pseudo", "feasible"):
        raise ValueError(f"variant must be 'pseudo' or 'feasible', got {variant!r}")
    return lead / n - parts["reduction"] / (n * math.sqrt(m)) + parts["bias_sq"] / m ** 2


def covariance_sum(m: int, y: float) -> float:
    """Exact value of sum_{k,l} ((min(k,l)/m) - y) b_{m,k}(y) b_{m,l}(y).

    Scaled by sqrt(m), this converges to -sqrt(y(1-y)/pi); it is the sum
    behind the m^(-1/2) variance reduction.  Computed in O(m) through the
    distribution of the pairwise minimum: P(min = j) = b_j (2 - C_{j-1} - C_j)
    with C the basis cumulative sums.
    """
    if m < 1:
        raise ValueError(f"degree m must be >= 1, got {m}")
    if not 0.0 < y < 1.0:
        raise ValueError(f"interior point required, got y={y}")
    row = basis_matrix(m, y)[0]
    cum = np.cumsum(row)
    cum_prev = np.concatenate(([0.0], cum[:-1]))
    centered = np.arange(m + 1) / m - y
    return float(np.sum(centered * row * (2.0 - cum - cum_prev)))
