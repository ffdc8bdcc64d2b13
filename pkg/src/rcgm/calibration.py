"""Prior calibration from empirical marginals.

Each node gets a non-normality score H in [0, 1] from a KS normality
test, a Beta prior on its contamination probability derived from H, and
a mixing distribution for its positive scale factor chosen by regressing
the log kernel density of the standardized column on tail templates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (
    MixingDistribution,
    exponential_mixing,
    gaussian_kde,
    ks_normal_test,
    ols_with_pvalues,
    standard_normal_cdf,
)

__all__ = [
    "CalibrationResult",
    "NonNormalityModel",
    "beta_prior_params",
    "calibrate",
    "h_score",
    "select_mixing_distribution",
    "FALLBACK_MEAN",
]

MIN_PVALUE = 1e-300
MAX_PVALUE = 1.0 - 1e-16
DENSITY_FLOOR = 1e-12
MIN_TAIL_POINTS = 10
FALLBACK_MEAN = 2.5

SHAPE_RANGE = (0.5, 50.0)
RATE_RANGE = (0.05, 50.0)


def h_score(column):
    """Non-normality score H = 2 Phi(log(1 - p)) with p the KS normality
    p-value, clamped away from 0 and 1.  Near-normal columns score near
    0, clearly non-normal columns near 1."""
    _, pval = ks_normal_test(column)
    pval = min(max(pval, MIN_PVALUE), MAX_PVALUE)
    return float(2.0 * standard_normal_cdf(np.log1p(-pval)))


def beta_prior_params(h):
    """Beta(mu r, (1 - mu) r) hyperparameters for the contamination
    probability of a node with non-normality score h.

    The mean mu is h clamped into [0.01, 0.99]; the variance target xi is
    0.01, shrunk to 0.01 mu (1 - mu) when the mean sits near the ends so
    the Beta parameters stay positive.  Returns (mu, r, xi), where
    mu (1 - mu) / (r + 1) = xi.
    """
    mu = float(np.clip(h, 0.01, 0.99))
    spread = mu * (1.0 - mu)
    xi = 0.01 if spread > 0.01 else 0.01 * spread
    r = spread / xi - 1.0
    return mu, r, xi


def _fit_tail_templates(abs_tail, log_dens):
    """Classify the tail and return (category, distribution).

    One joint regression log f = a0 + a1 log|x| + a2 |x| is fit on the
    tail points.  Each category has a characteristic regressor: log|x|
    for polynomial decay, |x| for exponential decay.  The category whose
    coefficient is more significant (smaller log p-value; safe against
    underflow) wins.  Exponential category: Gamma with shape (a1 + 1)/2
    and rate a2^2 / 2 from the joint fit.  Polynomial category: the pure
    power-law slope is re-estimated without the |x| column and mapped to
    an inverse gamma with shape = scale = (1 - a1)/2.
    """
    ones = np.ones_like(abs_tail)
    logx = np.log(abs_tail)
    joint = ols_with_pvalues(np.column_stack([ones, logx, abs_tail]), log_dens)
    if joint.log_p_values[2] < joint.log_p_values[1]:
        a1, a2 = joint.coefficients[1], joint.coefficients[2]
        shape = float(np.clip(0.5 * (a1 + 1.0), *SHAPE_RANGE))
        rate = float(np.clip(0.5 * a2 * a2, *RATE_RANGE))
        return "exponential", MixingDistribution("gamma", shape, 1.0 / rate)
    fit_poly = ols_with_pvalues(np.column_stack([ones, logx]), log_dens)
    a1 = fit_poly.coefficients[1]
    half = 0.5 * (1.0 - a1)
    shape = float(np.clip(half, *SHAPE_RANGE))
    scale = float(np.clip(half, *RATE_RANGE))
    return "polynomial", MixingDistribution("inverse_gamma", shape, scale)


def select_mixing_distribution(column):
    """Choose the scale-mixing distribution for one data column.

    The column is standardized and re-centered at its median; a Gaussian
    KDE evaluated at the sample points supplies log-density targets on
    the tail region (points beyond the median absolute value).  Returns
    (distribution, category, fallback) where category is "exponential",
    "polynomial", or "fallback".  With fewer than 10 usable tail points,
    or a degenerate tail fit, falls back to an exponential with mean 2.5.
    """
    x = np.asarray(column, dtype=float)
    if x.size < 30:
        raise ValueError("sample too small")
    sd = np.std(x, ddof=1)
    if sd == 0.0 or not np.isfinite(sd):
        raise ValueError("degenerate sample")
    z = (x - np.mean(x)) / sd
    z = z - np.median(z)
    dens = gaussian_kde(z, z)
    absz = np.abs(z)
    tail = (absz > np.median(absz)) & (dens > DENSITY_FLOOR)
    if int(tail.sum()) < MIN_TAIL_POINTS:
        return exponential_mixing(FALLBACK_MEAN), "fallback", True
    try:
        category, dist = _fit_tail_templates(absz[tail], np.log(dens[tail]))
    except ValueError:
        return exponential_mixing(FALLBACK_MEAN), "fallback", True
    return dist, category, False


@dataclass(frozen=True)
class NonNormalityModel:
    """Calibrated per-node prior: non-normality score, Beta(mu r, (1-mu) r)
    hyperparameters with variance xi, and the scale-mixing distribution."""

    h: float
    mu: float
    r: float
    xi: float
    mixing: MixingDistribution
    category: str
    fallback: bool


@dataclass
class CalibrationResult:
    """Calibration of every node, in canonical node order."""

    nodes: list

    @property
    def h(self):
        return np.array([m.h for m in self.nodes])

    @property
    def mu(self):
        return np.array([m.mu for m in self.nodes])

    @property
    def r(self):
        return np.array([m.r for m in self.nodes])

    def mixing(self, v):
        return self.nodes[v].mixing

    def to_dict(self, names):
        out = []
        for name, m in zip(names, self.nodes):
            out.append({
                "node": name,
                "h": m.h,
                "mu": m.mu,
                "r": m.r,
                "xi": m.xi,
                "mixing_family": m.mixing.family,
                "mixing_shape": m.mixing.shape,
                "mixing_scale": m.mixing.scale,
                "category": m.category,
                "fallback": m.fallback,
            })
        return {"nodes": out}

    @classmethod
    def from_dict(cls, payload):
        nodes = []
        for rec in payload["nodes"]:
            mixing = MixingDistribution(rec["mixing_family"], rec["mixing_shape"],
                                        rec["mixing_scale"])
            nodes.append(NonNormalityModel(rec["h"], rec["mu"], rec["r"], rec["xi"],
                                           mixing, rec["category"], rec["fallback"]))
        return cls(nodes)

    @classmethod
    def forced(cls, q, mu, mixing=None):
        """Calibration that pins every node's prior mean at mu; used for
        degenerate-mode comparisons and tests."""
        mu, r, xi = beta_prior_params(mu)
        mixing = mixing if mixing is not None else exponential_mixing(FALLBACK_MEAN)
        node = NonNormalityModel(mu, mu, r, xi, mixing, "forced", False)
        return cls([node] * q)


def calibrate(dataset):
    """Calibrate every node of a DataSet from its empirical marginal."""
    data = dataset.standardized_copy()
    nodes = []
    for v in range(data.layer_map.n_nodes):
        col = data.x[:, v]
        h = h_score(col)
        mu, r, xi = beta_prior_params(h)
        mixing, category, fallback = select_mixing_distribution(col)
        nodes.append(NonNormalityModel(h, mu, r, xi, mixing, category, fallback))
    return CalibrationResult(nodes)
