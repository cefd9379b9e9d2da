"""Numerics shared by the estimators: log-Beta, the regularized incomplete
Beta function (Beta CDF), and the standard normal CDF."""

import math

import numpy as np
from scipy.special import gammaln, ndtr

_CF_MAX_ITER = 300
_CF_TOL = 1e-14
_CF_TINY = 1e-300


def log_beta(p, q):
    """ln B(p, q) = ln Γ(p) + ln Γ(q) − ln Γ(p+q) for p, q > 0.

    Accepts scalars or arrays; everything stays in log space so that
    binomial-coefficient/Beta products for degrees in the hundreds can be
    combined without overflow.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(p <= 0) or np.any(q <= 0):
        raise ValueError("log_beta requires strictly positive arguments")
    out = gammaln(p) + gammaln(q) - gammaln(p + q)
    return float(out) if out.ndim == 0 else out


def _beta_cont_frac(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete Beta function (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for it in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * it
        aa = it * (b - it) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + it) * (qab + it) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            return h
    raise RuntimeError(
        f"incomplete Beta continued fraction did not converge for "
        f"a={a}, b={b}, x={x} within {_CF_MAX_ITER} iterations"
    )


def beta_cdf(x: float, alpha: float, beta: float) -> float:
    """Regularized incomplete Beta function I_x(alpha, beta), the Beta CDF.

    The continued fraction is applied on whichever side of the symmetry
    point x = (alpha+1)/(alpha+beta+2) converges fastest; the other side
    follows from I_x(a, b) = 1 − I_{1−x}(b, a).
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("beta_cdf requires alpha > 0 and beta > 0")
    if x < 0.0 or x > 1.0:
        raise ValueError(f"beta_cdf requires x in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        alpha * math.log(x) + beta * math.log1p(-x) - log_beta(alpha, beta)
    )
    if x < (alpha + 1.0) / (alpha + beta + 2.0):
        return math.exp(ln_front) * _beta_cont_frac(alpha, beta, x) / alpha
    return 1.0 - math.exp(ln_front) * _beta_cont_frac(beta, alpha, 1.0 - x) / beta


def normal_cdf(z):
    """Standard normal CDF Φ(z); scalar or ndarray."""
    out = ndtr(z)
    return float(out) if np.ndim(out) == 0 else out
