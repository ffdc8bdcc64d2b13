"""Blocked MCMC for chain graph structure learning.

State per iteration: per-entry positive scale factors d (spike at 1,
slab from each node's mixing distribution), per-node contamination
probabilities pi, spike-and-slab indicators for directed (gamma) and
undirected (eta) edges, regression coefficients b (directed) and a
(within layer), and conditional precisions k_vv.

One iteration updates all scale entries, then sweeps layers in order
and nodes in a fresh random permutation, updating pi, the undirected
neighborhood, and the directed parent set of each node.  In gaussian
mode the scale machinery is frozen (d = 1, pi = 0) and only the edge
updates run.

Edge moves are Metropolis-Hastings with the coefficients integrated
out; coefficients and precisions are then refreshed by Gibbs draws.
All per-node quantities are read off cached residual Gram matrices, so
an update touches only small dense systems; active sets of size 0, 1,
and 2 (the bulk, since graphs are sparse) stay in scalar arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .numerics import (
    mixing_log_density,
    normal_logpdf,
    sample_mixing,
    zero_mean_gaussian_logpdf_gram,
)

__all__ = [
    "PosteriorSamples",
    "SamplerConfig",
    "run_chain",
    "scale_log_accept_ratio",
]

# Quadratic forms are capped here before entering exponents so a wild
# configuration degrades into a certain rejection instead of an overflow.
QUAD_CAP = 1e12

_EMPTY = np.empty(0)
_EMPTY2 = np.empty((0, 0))


@dataclass(frozen=True)
class SamplerConfig:
    """Run-length and prior settings for one chain.

    edge_prior_directed / edge_prior_undirected override the default
    per-node inclusion prior 2 / (candidate count) clamped into
    [0.005, 0.5].  slab_scale_directed is the slab variance multiplier
    c^2 for directed coefficients; None means 1 / shrinkage.
    """

    burnin: int = 2000
    samples: int = 10000
    thin: int = 1
    seed: int = 0
    gaussian_mode: bool = False
    shrinkage: float = 4.0
    prior_shape: float = 2.0
    edge_prior_directed: float | None = None
    edge_prior_undirected: float | None = None
    slab_scale_directed: float | None = None
    keep_trace: bool = False


def _default_edge_prior(n_candidates):
    if n_candidates <= 0:
        return 0.0
    return float(min(0.5, max(0.005, 2.0 / n_candidates)))


def scale_log_accept_ratio(x, d_new, d_old):
    """Log acceptance ratio for the per-entry scale move.

    Proposals come from the prior mixture, so prior and proposal cancel
    on every branch (atom and slab alike) and the ratio reduces to the
    likelihood ratio of the descaled values under a standard normal.
    """
    zn = x / d_new
    zo = x / d_old
    return 0.5 * (zo * zo - zn * zn)


def _draw_coefficients(G, xty, yty, active, g_inv, k, rng):
    """Gibbs draw of slab coefficients for one node.

    Conditional is N(M^-1 c, (1/k) M^-1) with M = X^T X + g_inv I read
    off the Gram matrix G and cross products xty.  Returns (draw, rss,
    draw^T draw) with rss the residual sum of squares at the draw, or
    None when the system is numerically unusable.
    """
    m = active.size
    if m == 0:
        return _EMPTY, float(yty), 0.0
    if m == 1:
        i = active[0]
        gii = G[i, i]
        d0 = gii + g_inv
        t0 = xty[i]
        if not d0 > 0.0:
            return None
        val = t0 / d0 + rng.standard_normal() / math.sqrt(d0 * k)
        if not math.isfinite(val):
            return None
        rss = yty - 2.0 * val * t0 + val * val * gii
        return np.array([val]), rss, val * val
    if m == 2:
        i, j = active[0], active[1]
        g00, g11, g01 = G[i, i], G[j, j], G[i, j]
        m00, m11 = g00 + g_inv, g11 + g_inv
        if not m00 > 0.0:
            return None
        l00 = math.sqrt(m00)
        l10 = g01 / l00
        s11 = m11 - l10 * l10
        if not s11 > 0.0:
            return None
        l11 = math.sqrt(s11)
        t0, t1 = xty[i], xty[j]
        u0 = t0 / l00
        u1 = (t1 - l10 * u0) / l11
        mean1 = u1 / l11
        mean0 = (u0 - l10 * mean1) / l00
        z = rng.standard_normal(2)
        sk = 1.0 / math.sqrt(k)
        w1 = z[1] / l11
        w0 = (z[0] - l10 * w1) / l00
        a0 = mean0 + w0 * sk
        a1 = mean1 + w1 * sk
        if not (math.isfinite(a0) and math.isfinite(a1)):
            return None
        rss = (yty - 2.0 * (a0 * t0 + a1 * t1)
               + a0 * a0 * g00 + 2.0 * a0 * a1 * g01 + a1 * a1 * g11)
        return np.array([a0, a1]), rss, a0 * a0 + a1 * a1
    sub = G[active[:, None], active]
    M = sub + g_inv * np.eye(m)
    try:
        low = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return None
    c = xty[active]
    mean = linalg.cho_solve((low, True), c, check_finite=False)
    z = rng.standard_normal(m)
    draw = mean + linalg.solve_triangular(
        low.T, z, lower=False, check_finite=False) / math.sqrt(k)
    if not np.all(np.isfinite(draw)):
        return None
    rss = float(yty - 2.0 * draw @ c + draw @ sub @ draw)
    return draw, rss, float(draw @ draw)


@dataclass
class PosteriorSamples:
    """Running reductions over retained iterations.

    Counts and sums are all that posterior summaries need; merging two
    objects from independent chains is plain addition.  The optional
    trace keeps thinned per-iteration records of (gamma, eta, pi, k).
    """

    layer_map: object
    gaussian_mode: bool
    retained: int = 0
    gamma_counts: np.ndarray = None
    eta_counts: np.ndarray = None
    b_sums: np.ndarray = None
    k_off_sums: np.ndarray = None
    pi_sums: np.ndarray = None
    trace: list = None
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, layer_map, gaussian_mode, keep_trace=False):
        q = layer_map.n_nodes
        return cls(layer_map, gaussian_mode, 0,
                   np.zeros((q, q)), np.zeros((q, q)), np.zeros((q, q)),
                   np.zeros((q, q)), np.zeros(q), [] if keep_trace else None)

    def merge(self, other):
        if other.layer_map.names != self.layer_map.names:
            raise ValueError("cannot merge samples over different graphs")
        self.retained += other.retained
        self.gamma_counts += other.gamma_counts
        self.eta_counts += other.eta_counts
        self.b_sums += other.b_sums
        self.k_off_sums += other.k_off_sums
        self.pi_sums += other.pi_sums
        if self.trace is not None and other.trace is not None:
            self.trace.extend(other.trace)
        for key, val in other.diagnostics.items():
            self.diagnostics[key] = self.diagnostics.get(key, 0) + val
        return self


class _Chain:
    """Mutable sampler state plus cached residuals and Gram matrices."""

    def __init__(self, x, layer_map, calibration, config):
        self.x = x
        self.layer_map = layer_map
        self.calibration = calibration
        self.cfg = config
        self.rng = np.random.default_rng(config.seed)
        self.n, self.q = x.shape

        self.d = np.ones_like(x)
        self.y = x.copy()
        self.k = np.ones(self.q)
        self.a = np.zeros((self.q, self.q))
        self.b = np.zeros((self.q, self.q))
        self.eta = np.zeros((self.q, self.q), dtype=np.int8)
        self.gamma = np.zeros((self.q, self.q), dtype=np.int8)
        if config.gaussian_mode:
            self.pi = np.zeros(self.q)
        else:
            self.pi = calibration.mu.copy()

        self.lam = config.shrinkage
        self.c2 = config.slab_scale_directed
        if self.c2 is None:
            self.c2 = 1.0 / self.lam
        self.layers = []
        for l in range(layer_map.n_layers):
            s, t = layer_map.members(l)
            size = t - s
            und = config.edge_prior_undirected
            if und is None:
                und = _default_edge_prior(size - 1)
            dire = config.edge_prior_directed
            if dire is None:
                dire = _default_edge_prior(s)
            self.layers.append({
                "s": s, "t": t, "size": size,
                "prior_und": und, "prior_dir": dire,
                "lp_und": math.log(und) if und > 0 else 0.0,
                "l1p_und": math.log1p(-und) if und > 0 else 0.0,
                "lp_dir": math.log(dire) if dire > 0 else 0.0,
                "l1p_dir": math.log1p(-dire) if dire > 0 else 0.0,
            })
        # same-layer neighbor candidates of each node, local indices
        self._others = []
        for v in range(self.q):
            l = layer_map.layer_of[v]
            s, t = layer_map.members(l)
            self._others.append(np.array([u - s for u in range(s, t) if u != v],
                                         dtype=int))

        self.eps = np.zeros_like(x)
        self.gram_eps = [None] * layer_map.n_layers
        self.gram_par = [None] * layer_map.n_layers
        self.counters = {"scale_accepts": 0, "pi_accepts": 0, "eta_accepts": 0,
                         "gamma_accepts": 0, "breakdowns": 0, "iterations": 0}
        self.refresh_residuals()

    # -- caches ------------------------------------------------------------

    def refresh_residuals(self):
        """Rebuild residual columns and Gram matrices from y and b."""
        for l, info in enumerate(self.layers):
            s, t = info["s"], info["t"]
            block = self.y[:, s:t] - self.y[:, :s] @ self.b[s:t, :s].T
            self.eps[:, s:t] = block
            self.gram_eps[l] = block.T @ block
            self.gram_par[l] = self.y[:, :s].T @ self.y[:, :s] if s else None

    def _refresh_eps_column(self, v, l):
        info = self.layers[l]
        s, t = info["s"], info["t"]
        self.eps[:, v] = self.y[:, v] - self.y[:, :s] @ self.b[v, :s]
        vec = self.eps[:, s:t].T @ self.eps[:, v]
        lv = v - s
        self.gram_eps[l][lv, :] = vec
        self.gram_eps[l][:, lv] = vec

    # -- scale and contamination updates -----------------------------------

    def update_scales(self):
        rng = self.rng
        for v in range(self.q):
            piv = self.pi[v]
            slab = rng.random(self.n) < piv
            prop = np.ones(self.n)
            n_slab = int(slab.sum())
            if n_slab:
                prop[slab] = sample_mixing(self.calibration.mixing(v), rng, n_slab)
            log_r = scale_log_accept_ratio(self.x[:, v], prop, self.d[:, v])
            accept = np.log(rng.random(self.n)) < log_r
            if accept.any():
                self.d[accept, v] = prop[accept]
                self.y[:, v] = self.x[:, v] / self.d[:, v]
                self.counters["scale_accepts"] += int(accept.sum())

    def update_nonnormality(self, v, l):
        node = self.calibration.nodes[v]
        prop = self.rng.beta(node.mu * node.r, (1.0 - node.mu) * node.r)
        cur = self.pi[v]
        info = self.layers[l]
        s, t = info["s"], info["t"]
        mean = (self.y[:, v] - self.eps[:, v]) + self.eps[:, s:t] @ self.a[v, s:t]
        lg_slab = (normal_logpdf(self.y[:, v], mean, self.k[v])
                   + mixing_log_density(node.mixing, self.d[:, v]))
        lg_spike = normal_logpdf(self.x[:, v], mean, self.k[v])

        def loglik(p):
            with np.errstate(divide="ignore"):
                return float(np.logaddexp(np.log(p) + lg_slab,
                                          np.log1p(-p) + lg_spike).sum())

        # Proposal equals the calibrated Beta prior, so both cancel and
        # the ratio is the likelihood ratio alone.
        log_r = loglik(prop) - loglik(cur)
        if np.isfinite(log_r) and math.log(self.rng.random()) < log_r:
            self.pi[v] = prop
            self.counters["pi_accepts"] += 1

    # -- undirected neighborhoods ------------------------------------------

    def _und_logf(self, G, lr, la, kr):
        yty = G[lr, lr]
        if yty > QUAD_CAP:
            yty = QUAD_CAP
        m = la.size
        if m == 0:
            return zero_mean_gaussian_logpdf_gram(yty, 0.0, _EMPTY2,
                                                  self.lam, kr, self.n)
        if m == 1:
            i = la[0]
            return zero_mean_gaussian_logpdf_gram(yty, G[i, lr], G[i, i],
                                                  self.lam, kr, self.n)
        return zero_mean_gaussian_logpdf_gram(yty, G[la, lr],
                                              G[la[:, None], la],
                                              self.lam, kr, self.n)

    def update_undirected(self, v, l):
        info = self.layers[l]
        s, t = info["s"], info["t"]
        size = info["size"]
        if size == 1:
            # no undirected candidates, but the conditional precision
            # still gets its conjugate refresh
            self._gibbs_undirected(v, l)
            return
        rng = self.rng
        G = self.gram_eps[l]
        lv = v - s
        others = self._others[v]
        mask = self.eta[v, s + others] == 1
        active = others[mask]
        inactive = others[~mask]

        swap = rng.random() >= 0.5 and active.size and inactive.size
        if swap:
            w_in = int(inactive[rng.integers(inactive.size)])
            w_out = int(active[rng.integers(active.size)])
            new_v = np.append(active[active != w_out], w_in)
            affected = ((lv, active, new_v),
                        (w_in, None, True), (w_out, None, False))
            toggles = ((v, s + w_in), (v, s + w_out))
        else:
            w = int(others[rng.integers(others.size)])
            adding = self.eta[v, s + w] == 0
            new_v = np.append(active, w) if adding else active[active != w]
            affected = ((lv, active, new_v), (w, None, adding))
            toggles = ((v, s + w),)

        lp, l1p = info["lp_und"], info["l1p_und"]
        cu = size - 1
        log_r = 0.0
        try:
            for entry in affected:
                r = entry[0]
                if entry[1] is not None:
                    old_set, new_set = entry[1], entry[2]
                else:
                    old_set = np.flatnonzero(self.eta[s + r, s:t])
                    if entry[2]:  # gains v
                        new_set = np.append(old_set, lv)
                    else:
                        new_set = old_set[old_set != lv]
                kr = self.k[s + r]
                log_r += (self._und_logf(G, r, new_set, kr)
                          + new_set.size * lp + (cu - new_set.size) * l1p)
                log_r -= (self._und_logf(G, r, old_set, kr)
                          + old_set.size * lp + (cu - old_set.size) * l1p)
        except ValueError:
            self.counters["breakdowns"] += 1
            log_r = -math.inf

        if log_r == math.inf or (
                not math.isnan(log_r) and math.log(rng.random()) < log_r):
            for (p1, p2) in toggles:
                flipped = 1 - self.eta[p1, p2]
                self.eta[p1, p2] = flipped
                self.eta[p2, p1] = flipped
            self.counters["eta_accepts"] += 1
        for entry in affected:
            self._gibbs_undirected(s + entry[0], l)

    def _gibbs_undirected(self, r, l):
        info = self.layers[l]
        s, t = info["s"], info["t"]
        size = info["size"]
        G = self.gram_eps[l]
        lr = r - s
        active = np.flatnonzero(self.eta[r, s:t])
        yty = G[lr, lr]
        if yty > QUAD_CAP:
            yty = QUAD_CAP
        result = _draw_coefficients(G, G[:, lr], yty, active,
                                    self.lam, self.k[r], self.rng)
        if result is None:
            self.counters["breakdowns"] += 1
            return
        draw, rss, a_sq = result
        self.a[r, s:t] = 0.0
        if active.size:
            self.a[r, s + active] = draw
        if rss < 0.0:
            rss = 0.0
        elif rss > QUAD_CAP:
            rss = QUAD_CAP
        b_row = self.b[r]
        b_sq = float(b_row @ b_row)
        shape = 0.5 * (self.n + self.cfg.prior_shape + size - 1 + active.size)
        rate = 0.5 * self.lam + 0.5 * (rss + b_sq / self.c2
                                       + (self.lam + size - 1) * a_sq)
        if math.isfinite(rate) and rate > 0.0:
            self.k[r] = self.rng.gamma(shape, 1.0 / rate)
        else:
            self.counters["breakdowns"] += 1

    # -- directed parent sets ----------------------------------------------

    def update_directed(self, v, l):
        info = self.layers[l]
        s, t = info["s"], info["t"]
        if s == 0:
            return
        rng = self.rng
        row = self.gamma[v, :s]
        active = np.flatnonzero(row)
        inactive = np.flatnonzero(row == 0)

        ytilde = self.y[:, v] - self.eps[:, s:t] @ self.a[v, s:t]
        yty = float(ytilde @ ytilde)
        if yty > QUAD_CAP:
            yty = QUAD_CAP
        xty = self.y[:, :s].T @ ytilde
        Gp = self.gram_par[l]
        ginv = 1.0 / self.c2
        kv = self.k[v]

        def logf(act):
            m = act.size
            if m == 0:
                return zero_mean_gaussian_logpdf_gram(yty, 0.0, _EMPTY2,
                                                      ginv, kv, self.n)
            if m == 1:
                i = act[0]
                return zero_mean_gaussian_logpdf_gram(yty, xty[i], Gp[i, i],
                                                      ginv, kv, self.n)
            return zero_mean_gaussian_logpdf_gram(yty, xty[act],
                                                  Gp[act[:, None], act],
                                                  ginv, kv, self.n)

        swap = rng.random() >= 0.5 and active.size and inactive.size
        if swap:
            w_in = int(inactive[rng.integers(inactive.size)])
            w_out = int(active[rng.integers(active.size)])
            new_active = np.append(active[active != w_out], w_in)
        else:
            w = int(rng.integers(s))
            if row[w]:
                new_active = active[active != w]
            else:
                new_active = np.append(active, w)

        lp, l1p = info["lp_dir"], info["l1p_dir"]
        try:
            log_r = (logf(new_active) + new_active.size * lp
                     + (s - new_active.size) * l1p
                     - logf(active) - active.size * lp
                     - (s - active.size) * l1p)
        except ValueError:
            self.counters["breakdowns"] += 1
            log_r = -math.inf
        if log_r == math.inf or (
                not math.isnan(log_r) and math.log(rng.random()) < log_r):
            self.gamma[v, :s] = 0
            if new_active.size:
                self.gamma[v, new_active] = 1
            self.counters["gamma_accepts"] += 1

        self._gibbs_directed(v, l, yty, xty)
        self._refresh_eps_column(v, l)

    def _gibbs_directed(self, v, l, yty, xty):
        info = self.layers[l]
        s = info["s"]
        size = info["size"]
        active = np.flatnonzero(self.gamma[v, :s])
        result = _draw_coefficients(self.gram_par[l], xty, yty, active,
                                    1.0 / self.c2, self.k[v], self.rng)
        if result is None:
            self.counters["breakdowns"] += 1
            return
        draw, rss, b_sq = result
        self.b[v, :s] = 0.0
        if active.size:
            self.b[v, active] = draw
        if rss < 0.0:
            rss = 0.0
        elif rss > QUAD_CAP:
            rss = QUAD_CAP
        a_row = self.a[v, s:info["t"]]
        a_sq = float(a_row @ a_row)
        shape = 0.5 * (self.n + self.cfg.prior_shape + size - 1 + active.size)
        rate = 0.5 * self.lam + 0.5 * (rss + b_sq / self.c2
                                       + (self.lam + size - 1) * a_sq)
        if math.isfinite(rate) and rate > 0.0:
            self.k[v] = self.rng.gamma(shape, 1.0 / rate)
        else:
            self.counters["breakdowns"] += 1

    # -- iteration driver ---------------------------------------------------

    def iterate(self):
        if not self.cfg.gaussian_mode:
            self.update_scales()
        self.refresh_residuals()
        for l, info in enumerate(self.layers):
            s, t = info["s"], info["t"]
            order = s + self.rng.permutation(t - s)
            for v in order:
                if not self.cfg.gaussian_mode:
                    self.update_nonnormality(v, l)
                self.update_undirected(v, l)
                if l > 0:
                    self.update_directed(v, l)
        self.counters["iterations"] += 1
        if self.cfg.gaussian_mode:
            if not (np.all(self.d == 1.0) and np.all(self.pi == 0.0)):
                raise AssertionError("gaussian mode touched the scale state")

    def accumulate(self, samples, iteration):
        samples.retained += 1
        samples.gamma_counts += self.gamma
        samples.eta_counts += self.eta
        samples.b_sums += self.b
        samples.pi_sums += self.pi
        for info in self.layers:
            s, t = info["s"], info["t"]
            sub = self.a[s:t, s:t]
            kk = self.k[s:t]
            block = -0.5 * (kk[:, None] * sub + kk[None, :] * sub.T)
            np.fill_diagonal(block, 0.0)
            samples.k_off_sums[s:t, s:t] += block
        if samples.trace is not None:
            samples.trace.append({
                "iteration": iteration,
                "pi": self.pi.copy(),
                "k": self.k.copy(),
                "gamma": np.argwhere(self.gamma == 1),
                "eta": np.argwhere(np.triu(self.eta) == 1),
            })


def run_chain(dataset, config, calibration=None):
    """Run one chain on a standardized DataSet and return PosteriorSamples.

    calibration is required unless config.gaussian_mode is set.  The
    returned object carries acceptance and breakdown counters in
    .diagnostics.
    """
    if not config.gaussian_mode and calibration is None:
        raise ValueError("calibration is required outside gaussian mode")
    data = dataset.standardized_copy()
    chain = _Chain(data.x, data.layer_map, calibration, config)
    samples = PosteriorSamples.empty(data.layer_map, config.gaussian_mode,
                                     config.keep_trace)
    total = config.burnin + config.samples
    for it in range(total):
        chain.iterate()
        if it >= config.burnin and (it - config.burnin) % config.thin == 0:
            chain.accumulate(samples, it)
    samples.diagnostics = dict(chain.counters)
    return samples
