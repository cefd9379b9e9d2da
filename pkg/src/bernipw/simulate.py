"""Monte Carlo harness: data generation for the MAR design, integrated
squared error, the replication study, and empirical normality checks."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bernstein import smooth
from .data import Dataset
from .ipw import (
    EstimationError,
    WeightedEcdf,
    estimate_propensity,
    ipw_ecdf,
    ipw_weights,
    known_propensity,
)
from .kde import IntegratedKde, default_bandwidth_grid, select_bandwidth
from .lscv import DegreeGrid, select_degree
from .special import beta_cdf, normal_cdf
from .theory import (
    TheoryContext,
    beta_mar_context,
    feasible_variance,
    pseudo_variance,
)

ESTIMATORS = (
    "pseudo-unsmoothed",
    "pseudo-bernstein",
    "pseudo-ikde",
    "feasible-unsmoothed",
    "feasible-bernstein",
    "feasible-ikde",
)

ROSTER_ALIASES = {
    "all": ESTIMATORS,
    "pseudo-all": tuple(e for e in ESTIMATORS if e.startswith("pseudo")),
    "feasible-all": tuple(e for e in ESTIMATORS if e.startswith("feasible")),
}


def resolve_roster(names) -> tuple[str, ...]:
    """Expand roster aliases and validate estimator names."""
    out: list[str] = []
    for name in names:
        if name in ROSTER_ALIASES:
            out.extend(ROSTER_ALIASES[name])
        elif name in ESTIMATORS:
            out.append(name)
        else:
            raise ValueError(f"unknown estimator {name!r}; choose from {ESTIMATORS}")
    seen: dict[str, None] = {}
    for name in out:
        seen.setdefault(name)
    return tuple(seen)


@dataclass(frozen=True)
class MarBetaDgp:
    """Beta-distributed response, Bernoulli-style discrete covariate, and
    missingness that depends on the covariate cell only."""

    alpha: float = 2.0
    beta: float = 5.0
    cell_probs: tuple[float, ...] = (0.5, 0.5)
    propensities: tuple[float, ...] = (0.6, 0.9)

    def __post_init__(self):
        if len(self.cell_probs) != len(self.propensities):
            raise ValueError("cell_probs and propensities must have equal length")
        if abs(sum(self.cell_probs) - 1.0) > 1e-12:
            raise ValueError("cell probabilities must sum to 1")
        for pi in self.propensities:
            if not 0.0 < pi <= 1.0:
                raise ValueError(f"propensities must lie in (0, 1], got {pi}")

    def cdf_values(self, ys) -> np.ndarray:
        return np.array([beta_cdf(float(v), self.alpha, self.beta) for v in np.atleast_1d(ys)])

    def known_model(self):
        return known_propensity({i: p for i, p in enumerate(self.propensities)})

    def theory_context(self) -> TheoryContext:
        return beta_mar_context(self.alpha, self.beta, self.cell_probs, self.propensities)

    def complete(self) -> "MarBetaDgp":
        """Same draws with every response observed (propensities all 1)."""
        return replace(self, propensities=tuple(1.0 for _ in self.propensities))


def _rep_seed(base_seed: int, n: int, rep: int) -> np.random.SeedSequence:
    # counter-based derivation: scheduling order can never change streams
    return np.random.SeedSequence([base_seed, n, rep])


def generate(dgp: MarBetaDgp, n: int, seed) -> Dataset:
    """Draw n iid units; y is recorded only where the observation flag is 1."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    x = rng.choice(len(dgp.cell_probs), size=n, p=np.asarray(dgp.cell_probs))
    y = rng.beta(dgp.alpha, dgp.beta, size=n)
    pi = np.asarray(dgp.propensities)[x]
    delta = (rng.random(n) < pi).astype(np.intp)
    return Dataset(np.where(delta == 1, y, np.nan), x, delta)


def midpoint_grid(grid_size: int) -> np.ndarray:
    """The grid (g - 1/2)/G, g = 1..G used for every Riemann sum here."""
    if grid_size < 2:
        raise ValueError("grid needs at least 2 points")
    return (np.arange(grid_size) + 0.5) / grid_size


def ise(estimate, truth, grid_size: int) -> float:
    """Integrated squared error by a uniform midpoint Riemann sum."""
    grid = midpoint_grid(grid_size)
    est = np.asarray(estimate(grid), dtype=float)
    ref = np.asarray(truth(grid), dtype=float)
    return float(np.mean((est - ref) ** 2))


@dataclass(frozen=True)
class SimConfig:
    """Study layout: sample sizes, replication count, seed, estimator
    roster, grids, and worker-pool size."""

    sample_sizes: tuple[int, ...]
    replications: int
    base_seed: int
    grid_size: int = 512
    estimators: tuple[str, ...] = ESTIMATORS
    dgp: MarBetaDgp = field(default_factory=MarBetaDgp)
    degree_grid: DegreeGrid = field(default_factory=DegreeGrid)
    bandwidth_count: int = 40
    bandwidth_lo: float = 1e-3
    bandwidth_hi: float = 1.0
    kde_grid_size: int = 2048
    workers: int = 1

    def __post_init__(self):
        if not self.sample_sizes:
            raise ValueError("at least one sample size is required")
        if self.replications < 1:
            raise ValueError("at least one replication is required")
        if self.grid_size < 2:
            raise ValueError("ISE grid needs at least 2 points")
        if self.base_seed < 0:
            raise ValueError("base seed must be a nonnegative integer")
        object.__setattr__(self, "estimators", resolve_roster(self.estimators))


@dataclass(frozen=True)
class IseSummary:
    """Distribution of the ISE across replications for one (n, estimator)."""

    n: int
    estimator: str
    reps: int
    failures: int
    median: float
    iqr: float
    mean: float
    variance: float


@dataclass(frozen=True)
class StudyResult:
    config: SimConfig
    summaries: tuple[IseSummary, ...]
    ises: dict
    failures: dict
    elapsed: float

    def summary(self, n: int, estimator: str) -> IseSummary:
        for row in self.summaries:
            if row.n == n and row.estimator == estimator:
                return row
        raise KeyError(f"no summary for n={n}, estimator={estimator!r}")


def _fit_curve(name: str, data: Dataset, weights, config: SimConfig):
    """One estimator's evaluable CDF given precomputed IPW weights."""
    kind = name.split("-", 1)[1]
    observed = weights > 0
    if kind == "unsmoothed":
        return WeightedEcdf(data.y[observed], weights[observed], data.n)
    if kind == "bernstein":
        ecdf = WeightedEcdf(data.y[observed], weights[observed], data.n)
        trace = select_degree(data, weights, config.degree_grid)
        return smooth(ecdf, trace.selected)
    if kind == "ikde":
        grid = default_bandwidth_grid(config.bandwidth_count,
                                      config.bandwidth_lo, config.bandwidth_hi)
        trace = select_bandwidth(data, weights, grid, config.kde_grid_size)
        return IntegratedKde(values=data.y[observed], weights=weights[observed],
                             h=trace.selected, n=data.n)
    raise ValueError(f"unknown estimator {name!r}")


def _study_task(args):
    config, n, rep = args
    data = generate(config.dgp, n, _rep_seed(config.base_seed, n, rep))
    grid = midpoint_grid(config.grid_size)
    truth = config.dgp.cdf_values(grid)
    results: dict[str, float] = {}
    errors: dict[str, str] = {}

    weight_sets: dict[str, np.ndarray] = {}
    if any(e.startswith("pseudo") for e in config.estimators):
        weight_sets["pseudo"] = ipw_weights(data, config.dgp.known_model())
    if any(e.startswith("feasible") for e in config.estimators):
        try:
            weight_sets["feasible"] = ipw_weights(data, estimate_propensity(data))
        except EstimationError as exc:
            for name in config.estimators:
                if name.startswith("feasible"):
                    errors[name] = str(exc)

    for name in config.estimators:
        if name in errors:
            continue
        variant = name.split("-", 1)[0]
        if variant not in weight_sets:
            continue
        try:
            curve = _fit_curve(name, data, weight_sets[variant], config)
            est = np.asarray(curve.evaluate(grid), dtype=float)
            results[name] = float(np.mean((est - truth) ** 2))
        except EstimationError as exc:
            errors[name] = str(exc)
    return n, rep, results, errors


def _run_tasks(task_fn, payloads, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(task_fn, payloads, chunksize=1))
    return [task_fn(p) for p in payloads]


def run_study(config: SimConfig) -> StudyResult:
    """Run the full replication study and reduce to summary statistics.

    Replications are independent work units seeded from (base_seed, n,
    replication index), so the result is identical for any worker count.
    Estimator failures inside a replication are counted and that
    replication is dropped from the failing estimator's summary only.
    """
    started = time.perf_counter()
    payloads = [(config, n, rep)
                for n in config.sample_sizes
                for rep in range(config.replications)]
    raw = _run_tasks(_study_task, payloads, config.workers)
    raw.sort(key=lambda item: (config.sample_sizes.index(item[0]), item[1]))

    ises: dict[tuple[int, str], list[float]] = {
        (n, e): [] for n in config.sample_sizes for e in config.estimators}
    failures: dict[tuple[int, str], int] = {
        (n, e): 0 for n in config.sample_sizes for e in config.estimators}
    for n, _rep, results, errors in raw:
        for name in config.estimators:
            if name in results:
                ises[(n, name)].append(results[name])
            elif name in errors:
                failures[(n, name)] += 1
    summaries = []
    for n in config.sample_sizes:
        for name in config.estimators:
            vals = np.asarray(ises[(n, name)], dtype=float)
            if vals.size == 0:
                summaries.append(IseSummary(n, name, 0, failures[(n, name)],
                                            math.nan, math.nan, math.nan, math.nan))
                continue
            q25, q50, q75 = np.percentile(vals, [25.0, 50.0, 75.0])
            variance = float(np.var(vals, ddof=1)) if vals.size > 1 else 0.0
            summaries.append(IseSummary(
                n=n, estimator=name, reps=int(vals.size),
                failures=failures[(n, name)],
                median=float(q50), iqr=float(q75 - q25),
                mean=float(vals.mean()), variance=variance,
            ))
    return StudyResult(
        config=config,
        summaries=tuple(summaries),
        ises={key: np.asarray(vals) for key, vals in ises.items()},
        failures=failures,
        elapsed=time.perf_counter() - started,
    )


def _draw_task(args):
    config, n, rep, ys, degrees, variant = args
    data = generate(config.dgp, n, _rep_seed(config.base_seed, n, rep))
    if variant == "pseudo":
        model = config.dgp.known_model()
    else:
        try:
            model = estimate_propensity(data)
        except EstimationError as exc:
            return rep, None, str(exc)
    ecdf = ipw_ecdf(data, model)
    ys = np.asarray(ys, dtype=float)
    out = np.empty((len(ys), len(degrees)))
    for j, m in enumerate(degrees):
        out[:, j] = smooth(ecdf, m).evaluate(ys)
    return rep, out, None


def smoothed_estimate_draws(config: SimConfig, ys, degrees, variant: str):
    """Per-replication smoothed estimates at fixed degrees.

    Returns (estimates, failures): estimates has shape
    (successful reps, len(ys), len(degrees)), in replication order.
    """
    if variant not in ("pseudo", "feasible"):
        raise ValueError(f"variant must be 'pseudo' or 'feasible', got {variant!r}")
    degrees = [int(m) for m in np.atleast_1d(degrees)]
    if any(m < 1 for m in degrees):
        raise ValueError("degrees must be >= 1")
    n = config.sample_sizes[0]
    payloads = [(config, n, rep, tuple(np.atleast_1d(ys)), tuple(degrees), variant)
                for rep in range(config.replications)]
    raw = _run_tasks(_draw_task, payloads, config.workers)
    raw.sort(key=lambda item: item[0])
    estimates = [est for _rep, est, _err in raw if est is not None]
    failures = sum(1 for _rep, est, _err in raw if est is None)
    return np.asarray(estimates), failures


def _anderson_darling(z: np.ndarray) -> float:
    """Anderson-Darling statistic of a sample against the standard normal."""
    z = np.sort(np.asarray(z, dtype=float))
    n = z.shape[0]
    u = np.clip(normal_cdf(z), 1e-300, 1.0 - 1e-16)
    i = np.arange(1, n + 1)
    return float(-n - np.mean((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1]))))


@dataclass(frozen=True)
class NormalityResult:
    """Standardized draws of the smoothed estimator at fixed points, with
    their first two moments and an Anderson-Darling statistic per point."""

    variant: str
    n: int
    m: int
    ys: tuple[float, ...]
    standardized: np.ndarray
    estimates: np.ndarray
    scales: tuple[float, ...]
    means: tuple[float, ...]
    variances: tuple[float, ...]
    ad_statistics: tuple[float, ...]
    failures: int


def normality_check(config: SimConfig, ys, variant: str, lam: float | None = None) -> NormalityResult:
    """Collect sqrt(n) (estimate(y) - F(y)) / scale across replications.

    The degree schedule is m = ceil(n^(2/3)) (so the bias drift vanishes
    asymptotically), or m = ceil(sqrt(n)/lam) when ``lam`` is given to
    probe the drift regime.  Pseudo draws are scaled by the
    known-propensity standard deviation, feasible draws by the smaller
    estimated-propensity one.
    """
    n = config.sample_sizes[0]
    m = math.ceil(n ** (2.0 / 3.0)) if lam is None else math.ceil(math.sqrt(n) / lam)
    ys = tuple(float(v) for v in np.atleast_1d(ys))
    ctx = config.dgp.theory_context()
    scales = []
    for y in ys:
        var = pseudo_variance(ctx, y) if variant == "pseudo" else feasible_variance(ctx, y)
        if var <= 0.0:
            raise ValueError(f"asymptotic variance vanishes at y={y}")
        scales.append(math.sqrt(var))
    estimates, failures = smoothed_estimate_draws(config, ys, [m], variant)
    truth = config.dgp.cdf_values(np.asarray(ys))
    draws = math.sqrt(n) * (estimates[:, :, 0] - truth[None, :]) / np.asarray(scales)[None, :]
    return NormalityResult(
        variant=variant,
        n=n,
        m=m,
        ys=ys,
        standardized=draws,
        estimates=estimates[:, :, 0],
        scales=tuple(scales),
        means=tuple(float(v) for v in draws.mean(axis=0)),
        variances=tuple(float(v) for v in draws.var(axis=0, ddof=1)),
        ad_statistics=tuple(_anderson_darling(draws[:, j]) for j in range(len(ys))),
        failures=failures,
    )
