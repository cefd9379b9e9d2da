"""Propensity models for discrete covariates and the inverse-probability
weighted empirical CDF."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .data import Dataset


class EstimationError(RuntimeError):
    """Estimation cannot proceed with the given data (e.g., a covariate
    cell without a single observed response)."""


@dataclass(frozen=True)
class PropensityModel:
    """Per-cell observation probabilities, either declared or estimated.

    ``kind`` is "known" or "estimated"; estimated models keep the per-cell
    observed/total counts for audit.  Every probability is >= ``floor`` > 0.
    """

    kind: str
    probs: Mapping[int, float]
    floor: float
    observed_counts: Mapping[int, int] | None = field(default=None)
    cell_counts: Mapping[int, int] | None = field(default=None)

    def probability(self, cell: int) -> float:
        try:
            return self.probs[cell]
        except KeyError:
            raise EstimationError(f"no propensity available for cell {cell}") from None


def known_propensity(probs: Mapping[int, float]) -> PropensityModel:
    """Model with declared observation probabilities, each in (0, 1]."""
    if not probs:
        raise ValueError("at least one cell probability is required")
    clean: dict[int, float] = {}
    for cell, p in probs.items():
        p = float(p)
        if not 0.0 < p <= 1.0:
            raise ValueError(f"propensity for cell {cell} must lie in (0, 1], got {p}")
        clean[int(cell)] = p
    return PropensityModel(kind="known", probs=clean, floor=min(clean.values()))


def estimate_propensity(data: Dataset) -> PropensityModel:
    """Per-cell observed fraction: observed-in-cell / cell-size.

    A cell whose members are all unobserved would get probability 0 and
    infinite weights, so it raises :class:`EstimationError` naming the
    cell; merge cells or supply known propensities instead.
    """
    cells = np.fromiter(sorted(data.cells), dtype=np.intp)
    counts = {int(c): int(np.sum(data.x == c)) for c in cells}
    observed = {int(c): int(np.sum(data.delta[data.x == c])) for c in cells}
    for c in cells:
        if observed[int(c)] == 0:
            label = data.label_of(int(c))
            raise EstimationError(
                f"cell {label!r} (code {int(c)}) has no observed responses; "
                f"merge cells or supply known propensities"
            )
    probs = {c: observed[c] / counts[c] for c in counts}
    return PropensityModel(
        kind="estimated",
        probs=probs,
        floor=min(probs.values()),
        observed_counts=observed,
        cell_counts=counts,
    )


def ipw_weights(data: Dataset, prop: PropensityModel) -> np.ndarray:
    """Per-unit weights delta_i / pi(x_i); zero for unobserved units."""
    weights = np.zeros(data.n)
    observed = data.delta == 1
    obs_cells = data.x[observed]
    for cell in np.unique(obs_cells):
        pi = prop.probability(int(cell))
        weights[observed & (data.x == cell)] = 1.0 / pi
    return weights


class WeightedEcdf:
    """Right-continuous weighted step CDF: y ↦ n⁻¹ Σ w_i 1{Y_i ≤ y}.

    Atoms are sorted once at construction and evaluation is a binary
    search on the cumulative weights, so ties are handled naturally and
    queries cost O(log k).
    """

    def __init__(self, values, weights, n: int):
        values = np.asarray(values, dtype=float)
        weights = np.asarray(weights, dtype=float)
        if values.shape != weights.shape:
            raise ValueError("values and weights must have matching shapes")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if n < 1:
            raise ValueError("total sample count n must be >= 1")
        keep = weights > 0
        values = values[keep]
        weights = weights[keep]
        order = np.argsort(values, kind="stable")
        self.values = values[order]
        self.cumulative = np.cumsum(weights[order]) / n
        self.n = n
        self._steps = np.concatenate(([0.0], self.cumulative))
        for arr in (self.values, self.cumulative, self._steps):
            arr.flags.writeable = False

    @property
    def total_mass(self) -> float:
        return float(self.cumulative[-1]) if self.cumulative.size else 0.0

    def evaluate(self, y):
        """Step value at y (closed on the right); scalar or ndarray."""
        idx = np.searchsorted(self.values, y, side="right")
        out = self._steps[idx]
        return float(out) if np.ndim(y) == 0 else out

    __call__ = evaluate


def ipw_ecdf(data: Dataset, prop: PropensityModel) -> WeightedEcdf:
    """The IPW empirical CDF F(y) = n⁻¹ Σ (δ_i/π(X_i)) 1{Y_i ≤ y}.

    Pseudo version when ``prop`` is known, feasible version when it was
    estimated from the data; unobserved units contribute only through n.
    """
    weights = ipw_weights(data, prop)
    observed = weights > 0
    return WeightedEcdf(data.y[observed], weights[observed], data.n)
