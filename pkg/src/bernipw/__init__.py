"""CDF estimation from data missing at random.

Inverse-probability-weighted empirical CDFs smoothed with the Bernstein
operator, with least-squares cross-validation for the polynomial degree,
an integrated Gaussian-KDE benchmark, closed-form asymptotic quantities,
and a Monte Carlo harness.
"""

__version__ = "0.1.0"

from .data import (
    Dataset,
    RescaleSpec,
    Sample,
    SchemaError,
    cross_factor,
    ingest_csv,
    rescale,
    write_csv,
)
from .ipw import (
    EstimationError,
    PropensityModel,
    WeightedEcdf,
    estimate_propensity,
    ipw_ecdf,
    ipw_weights,
    known_propensity,
)
from .bernstein import BernsteinCdf, bernstein_basis, smooth
from .lscv import DegreeGrid, LscvTrace, select_degree
from .kde import BandwidthTrace, IntegratedKde, select_bandwidth
from .theory import TheoryContext, beta_mar_context, uniform_context
from .simulate import MarBetaDgp, SimConfig, generate, ise, normality_check, run_study

__all__ = [
    "BandwidthTrace",
    "BernsteinCdf",
    "Dataset",
    "DegreeGrid",
    "EstimationError",
    "IntegratedKde",
    "LscvTrace",
    "MarBetaDgp",
    "PropensityModel",
    "RescaleSpec",
    "Sample",
    "SchemaError",
    "SimConfig",
    "TheoryContext",
    "WeightedEcdf",
    "bernstein_basis",
    "beta_mar_context",
    "cross_factor",
    "estimate_propensity",
    "generate",
    "ingest_csv",
    "ipw_ecdf",
    "ipw_weights",
    "ise",
    "known_propensity",
    "normality_check",
    "rescale",
    "run_study",
    "select_bandwidth",
    "select_degree",
    "smooth",
    "uniform_context",
    "write_csv",
]
