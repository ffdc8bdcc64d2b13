"""Shared numerical routines.

Normal tail helpers, a Kolmogorov-Smirnov normality test, Gaussian kernel
density estimation, least squares with coefficient and overall p-values,
positive scale-mixing distributions, and the marginal likelihood of a
zero-mean Gaussian with a low-rank covariance update.

Everything is deterministic given its inputs; sampling helpers take an
explicit numpy Generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special, stats

__all__ = [
    "LOG_2PI",
    "MixingDistribution",
    "RegressionFit",
    "exponential_mixing",
    "gaussian_kde",
    "ks_normal_test",
    "ks_statistic",
    "kolmogorov_pvalue",
    "mixing_log_density",
    "normal_logpdf",
    "ols_with_pvalues",
    "sample_mixing",
    "silverman_bandwidth",
    "standard_normal_cdf",
    "zero_mean_gaussian_logpdf_lowrank",
    "zero_mean_gaussian_logpdf_gram",
]

LOG_2PI = float(np.log(2.0 * np.pi))


def standard_normal_cdf(x):
    """Standard normal CDF, vectorized, accurate in both tails."""
    return special.ndtr(x)


def normal_logpdf(x, mean=0.0, precision=1.0):
    """Log density of N(mean, 1/precision), vectorized."""
    if np.any(np.asarray(precision) <= 0.0):
        raise ValueError("precision must be positive")
    return 0.5 * (np.log(precision) - LOG_2PI) - 0.5 * precision * np.square(x - mean)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov test against the standard normal


def ks_statistic(standardized):
    """Sup-distance between the empirical CDF of `standardized` and the
    standard normal CDF.  The input is used as given; no centering or
    rescaling happens here."""
    z = np.sort(np.asarray(standardized, dtype=float))
    n = z.size
    if n == 0:
        raise ValueError("sample too small")
    cdf = standard_normal_cdf(z)
    grid = np.arange(1, n + 1) / n
    upper = np.max(np.abs(grid - cdf))
    lower = np.max(np.abs((grid - 1.0 / n) - cdf))
    return float(max(upper, lower))


def kolmogorov_pvalue(x, max_terms=100, tol=1e-10):
    """Asymptotic Kolmogorov tail probability Q(x) = 2 sum_k (-1)^(k-1) exp(-2 k^2 x^2).

    Truncates after `max_terms` terms or once a term falls below `tol`.
    """
    if x <= 0.0:
        return 1.0
    total = 0.0
    for k in range(1, max_terms + 1):
        term = np.exp(-2.0 * k * k * x * x)
        total += term if k % 2 == 1 else -term
        if term < tol:
            break
    return float(min(1.0, max(0.0, 2.0 * total)))


def ks_normal_test(sample):
    """KS test of normality with estimated location and scale.

    The sample is standardized (mean zero, unit sample standard deviation)
    and compared against the standard normal.  Returns (statistic, pvalue)
    where the p-value uses the asymptotic Kolmogorov distribution.
    """
    x = np.asarray(sample, dtype=float)
    n = x.size
    if n < 8:
        raise ValueError("sample too small")
    sd = np.std(x, ddof=1)
    if sd == 0.0 or not np.isfinite(sd):
        raise ValueError("degenerate sample")
    d = ks_statistic((x - np.mean(x)) / sd)
    return d, kolmogorov_pvalue(np.sqrt(n) * d)


# ---------------------------------------------------------------------------
# Kernel density estimation


def silverman_bandwidth(sample):
    """Silverman's rule of thumb, 1.06 * sd * n^(-1/5)."""
    x = np.asarray(sample, dtype=float)
    if x.size < 8:
        raise ValueError("sample too small")
    sd = np.std(x, ddof=1)
    if sd == 0.0 or not np.isfinite(sd):
        raise ValueError("degenerate sample")
    return float(1.06 * sd * x.size ** (-0.2))


def gaussian_kde(sample, eval_points, bandwidth=None):
    """Gaussian kernel density estimate of `sample` evaluated at `eval_points`.

    With bandwidth=None the Silverman rule is used, which requires at least
    8 observations with positive spread.  An explicit positive bandwidth
    works for any nonempty sample.
    """
    x = np.asarray(sample, dtype=float)
    t = np.atleast_1d(np.asarray(eval_points, dtype=float))
    if x.size == 0:
        raise ValueError("sample too small")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(x)
    h = float(bandwidth)
    if h <= 0.0 or not np.isfinite(h):
        raise ValueError("bandwidth must be positive")
    u = (t[:, None] - x[None, :]) / h
    dens = np.exp(-0.5 * u * u).sum(axis=1) / (x.size * h * np.sqrt(2.0 * np.pi))
    return dens


# ---------------------------------------------------------------------------
# Ordinary least squares with p-values


def log_reg_inc_beta(a, b, x):
    """log of the regularized incomplete beta function I_x(a, b).

    Used for far-tail t and F probabilities that underflow the direct
    scipy routines.  For x away from 0 the plain special.betainc value
    is representable and its log is returned; for small x the leading
    factor x^a (1-x)^b / (a B(a, b)) is carried in logs and the
    hypergeometric correction sum(k) [(a+b)_k / (a+1)_k] x^k converges
    in a few terms.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError("incomplete beta argument outside [0, 1]")
    if x == 0.0:
        return -math.inf
    direct = float(special.betainc(a, b, x))
    if direct > 1e-280:
        return math.log(direct)
    term, total = 1.0, 1.0
    for k in range(10_000):
        term *= (a + b + k) * x / (a + 1.0 + k)
        total += term
        if term < 1e-17 * total:
            break
    return (a * math.log(x) + b * math.log1p(-x) - math.log(a)
            - float(special.betaln(a, b)) + math.log(total))


def t_log_two_sided_p(tstat, df):
    """log of the two-sided t-test p-value, safe far into the tail."""
    t2 = float(tstat) * float(tstat)
    return log_reg_inc_beta(0.5 * df, 0.5, df / (df + t2))


def f_log_sf(fstat, d1, d2):
    """log survival function of the F distribution, safe far into the tail."""
    if fstat <= 0.0:
        return 0.0
    return log_reg_inc_beta(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * fstat))


@dataclass(frozen=True)
class RegressionFit:
    """Least-squares fit summary.

    coefficients, p_values, and log_p_values are aligned with the design
    columns; the overall p-value tests the non-intercept block (first
    column is taken to be the intercept).  The log quantities are
    computed on the log scale so they stay finite and ordered when the
    plain p-values underflow.
    """

    coefficients: np.ndarray
    p_values: np.ndarray
    log_p_values: np.ndarray
    overall_p: float
    overall_log_p: float
    residual_variance: float


def ols_with_pvalues(design, response):
    """Fit response ~ design by least squares.

    Returns a RegressionFit with per-coefficient two-sided t-test p-values
    and the overall F-test p-value for the non-intercept block.  Raises
    ValueError("singular design") when the design is rank deficient or
    leaves no residual degrees of freedom.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise ValueError("design and response shapes do not match")
    n, p = X.shape
    df = n - p
    if df < 1 or np.linalg.matrix_rank(X) < p:
        raise ValueError("singular design")

    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rss = float(resid @ resid)
    s2 = rss / df

    xtx_inv = np.linalg.inv(X.T @ X)
    se = np.sqrt(np.maximum(s2 * np.diag(xtx_inv), 0.0))
    pvals = np.empty(p)
    log_pvals = np.empty(p)
    for j in range(p):
        if se[j] == 0.0:
            # Exact fit along this coordinate: the null is either surely
            # false or surely indistinguishable.
            pvals[j] = 0.0 if coef[j] != 0.0 else 1.0
            log_pvals[j] = -math.inf if coef[j] != 0.0 else 0.0
        else:
            tstat = abs(coef[j] / se[j])
            pvals[j] = 2.0 * stats.t.sf(tstat, df)
            log_pvals[j] = t_log_two_sided_p(tstat, df)

    if p == 1:
        overall_p, overall_log_p = 1.0, 0.0
    else:
        centered = y - np.mean(y)
        rss0 = float(centered @ centered)
        if rss == 0.0:
            overall_p, overall_log_p = 0.0, float("-inf")
        else:
            fstat = max((rss0 - rss) / (p - 1), 0.0) / (rss / df)
            overall_p = float(stats.f.sf(fstat, p - 1, df))
            overall_log_p = f_log_sf(fstat, p - 1, df)
    return RegressionFit(coef, pvals, log_pvals, overall_p, overall_log_p, s2)


# ---------------------------------------------------------------------------
# Positive scale-mixing distributions


@dataclass(frozen=True)
class MixingDistribution:
    """Distribution of the positive scale factor attached to a node.

    family is "gamma" (shape-scale parameterization) or "inverse_gamma"
    (shape a, scale b with density b^a / Gamma(a) d^(-a-1) exp(-b/d)).
    An exponential with mean m is gamma with shape 1 and scale m.
    """

    family: str
    shape: float
    scale: float

    def __post_init__(self):
        if self.family not in ("gamma", "inverse_gamma"):
            raise ValueError(f"unknown mixing family: {self.family!r}")
        if self.shape <= 0.0 or self.scale <= 0.0:
            raise ValueError("mixing parameters must be positive")


def exponential_mixing(mean):
    """Exponential scale distribution with the given mean."""
    return MixingDistribution("gamma", 1.0, float(mean))


def mixing_log_density(dist, d):
    """Log density of the mixing distribution at scale values d > 0."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("scale values must be positive")
    a = dist.shape
    if dist.family == "gamma":
        theta = dist.scale
        return (a - 1.0) * np.log(d) - d / theta - a * np.log(theta) - special.gammaln(a)
    b = dist.scale
    return a * np.log(b) - special.gammaln(a) - (a + 1.0) * np.log(d) - b / d


def sample_mixing(dist, rng, size=None):
    """Draw from the mixing distribution using the given Generator."""
    if dist.family == "gamma":
        return rng.gamma(dist.shape, dist.scale, size)
    return 1.0 / rng.gamma(dist.shape, 1.0 / dist.scale, size)


# ---------------------------------------------------------------------------
# Zero-mean Gaussian marginal likelihood with low-rank covariance update
#
# y ~ N(0, (1/k) (I + X G X^T)) with G diagonal.  Writing
# M = X^T X + G^(-1), the log density is
#   -n/2 log 2pi + n/2 log k - 1/2 (logdet M + logdet G)
#   - k/2 (y^T y - y^T X M^(-1) X^T y)
# which avoids forming the n x n covariance.


def zero_mean_gaussian_logpdf_gram(yty, xty, xtx, prior_scale_inv, precision, n):
    """Gram-form core of the low-rank Gaussian log density.

    Takes y^T y, X^T y, X^T X precomputed; prior_scale_inv holds the
    diagonal of G^(-1), or a single scalar for an isotropic prior.  Rank
    0, 1, and 2 are handled with scalar arithmetic because samplers call
    this in a tight loop; for rank 1 xty and xtx may be plain scalars.
    Raises ValueError("numerical breakdown") when the inner system is not
    positive definite.
    """
    k = float(precision)
    if k <= 0.0:
        raise ValueError("precision and prior scales must be positive")
    base = -0.5 * n * LOG_2PI + 0.5 * n * math.log(k)
    iso = np.ndim(prior_scale_inv) == 0
    m = 1 if np.ndim(xtx) == 0 else np.shape(xtx)[0]
    if m == 0:
        return float(base - 0.5 * k * yty)
    if iso:
        if prior_scale_inv <= 0.0:
            raise ValueError("precision and prior scales must be positive")
        logdet_g = -m * math.log(prior_scale_inv)
    else:
        g_inv = np.asarray(prior_scale_inv, dtype=float)
        if g_inv.size != m or np.any(g_inv <= 0.0):
            raise ValueError("precision and prior scales must be positive")
        logdet_g = -float(np.sum(np.log(g_inv)))

    if m == 1:
        g0 = prior_scale_inv if iso else g_inv[0]
        d0 = float(xtx) + g0 if np.ndim(xtx) == 0 else float(xtx[0, 0]) + g0
        t0 = float(xty) if np.ndim(xty) == 0 else float(xty[0])
        if not d0 > 0.0:
            raise ValueError("numerical breakdown")
        quad = yty - t0 * t0 / d0
        return float(base - 0.5 * (math.log(d0) + logdet_g) - 0.5 * k * quad)
    if m == 2:
        g0, g1 = (prior_scale_inv, prior_scale_inv) if iso else (g_inv[0], g_inv[1])
        m00 = float(xtx[0, 0]) + g0
        m11 = float(xtx[1, 1]) + g1
        m01 = float(xtx[0, 1])
        det = m00 * m11 - m01 * m01
        if not (m00 > 0.0 and det > 0.0):
            raise ValueError("numerical breakdown")
        t0, t1 = float(xty[0]), float(xty[1])
        quad = yty - (m11 * t0 * t0 - 2.0 * m01 * t0 * t1 + m00 * t1 * t1) / det
        return float(base - 0.5 * (math.log(det) + logdet_g) - 0.5 * k * quad)

    M = np.asarray(xtx, dtype=float) + (
        prior_scale_inv * np.eye(m) if iso else np.diag(g_inv))
    try:
        cho = linalg.cho_factor(M, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise ValueError("numerical breakdown") from exc
    logdet_m = 2.0 * np.sum(np.log(np.diag(cho[0])))
    if not np.isfinite(logdet_m):
        raise ValueError("numerical breakdown")
    solved = linalg.cho_solve(cho, np.asarray(xty, dtype=float), check_finite=False)
    quad = yty - float(np.asarray(xty) @ solved)
    return float(base - 0.5 * (logdet_m + logdet_g) - 0.5 * k * quad)


def zero_mean_gaussian_logpdf_lowrank(residual, covariates, prior_scale_inv, precision):
    """Log density of residual ~ N(0, (1/k)(I + X G X^T)), G diagonal.

    `prior_scale_inv` is the diagonal of G^(-1) (length m) or a scalar;
    an empty covariate block reduces to independent N(0, 1/k) coordinates.
    """
    y = np.asarray(residual, dtype=float)
    X = np.asarray(covariates, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("residual and covariate shapes do not match")
    yty = float(y @ y)
    if X.shape[1] == 0:
        return zero_mean_gaussian_logpdf_gram(yty, np.empty(0), np.empty((0, 0)),
                                              prior_scale_inv, precision, y.size)
    return zero_mean_gaussian_logpdf_gram(yty, X.T @ y, X.T @ X,
                                          prior_scale_inv, precision, y.size)
