"""Posterior edge summaries with Bayesian FDR control.

Edge inclusion probabilities come from retained-iteration counts; signs
from running means of the directed coefficients and the reconstructed
within-layer precision entries.  Selection either controls the Bayesian
FDR at a level alpha or applies an absolute inclusion threshold.

Undirected edges carry two signs: the sign of the precision entry itself
and the dependency sign (its negation, the sign of the partial
correlation).  Selected edges are classified as scale-driven (CSD) when
either endpoint looks contaminated (posterior contamination probability
above 0.5) and as conventional dependencies (CD) otherwise, with a
posterior probability of conditional sign independence (1 - g) and a
lower bound on full conditional independence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import directed_pairs, undirected_pairs

__all__ = [
    "PosteriorSummary",
    "classify_edge",
    "fdr_select",
    "inclusion_probabilities",
    "summarize",
]


def inclusion_probabilities(samples):
    """Posterior inclusion probabilities (directed, undirected) as q x q
    arrays.  Raises on an empty posterior."""
    if samples.retained == 0:
        raise ValueError("empty posterior")
    g_dir = samples.gamma_counts / samples.retained
    g_und = samples.eta_counts / samples.retained
    return g_dir, g_und


def fdr_select(g, alpha):
    """Bayesian FDR selection on a vector of inclusion probabilities.

    Sorts g in descending order (ties broken by index), finds the largest
    k whose top-k average of (1 - g) stays below alpha, and selects
    exactly those k edges.  Returns (threshold, selected_indices, k);
    with no feasible k the selection is empty and the threshold is 1.
    """
    g = np.asarray(g, dtype=float)
    order = np.argsort(-g, kind="stable")
    if g.size == 0:
        return 1.0, order[:0], 0
    cum = np.cumsum(1.0 - g[order]) / np.arange(1, g.size + 1)
    feasible = np.flatnonzero(cum < alpha)
    if feasible.size == 0:
        return 1.0, order[:0], 0
    k = int(feasible.max()) + 1
    return float(g[order[k - 1]]), order[:k], k


def classify_edge(g, pi_u, pi_v):
    """Label an edge and bound its independence probabilities.

    Returns (label, csi, ci_lower): label is "CSD" when either endpoint
    has posterior contamination probability above 0.5, else "CD"; csi is
    the posterior probability of conditional sign independence; ci_lower
    bounds the probability of full conditional independence.
    """
    label = "CSD" if (pi_u > 0.5 or pi_v > 0.5) else "CD"
    csi = 1.0 - g
    ci_lower = (1.0 - g) * (1.0 - pi_u) * (1.0 - pi_v)
    return label, csi, ci_lower


@dataclass
class PosteriorSummary:
    """Flat edge table plus node table and the selection rule that
    produced the `selected` flags."""

    nodes: list
    edges: list
    alpha: float
    threshold: float
    n_selected: int
    rule: str

    def to_dict(self):
        return {
            "rule": self.rule,
            "alpha": self.alpha,
            "threshold": self.threshold,
            "n_selected": self.n_selected,
            "nodes": self.nodes,
            "edges": self.edges,
        }


def _sign(x):
    return int(np.sign(x))


def summarize(samples, alpha=0.1, threshold=None, h=None):
    """Summarize PosteriorSamples into a PosteriorSummary.

    With threshold=None the selected set controls Bayesian FDR at alpha;
    otherwise edges with inclusion probability >= threshold are selected.
    h optionally carries per-node non-normality scores for the node table.
    """
    g_dir, g_und = inclusion_probabilities(samples)
    lm = samples.layer_map
    retained = samples.retained
    pi_hat = samples.pi_sums / retained
    b_mean = samples.b_sums / retained
    k_mean = samples.k_off_sums / retained

    records = []
    for (u, v) in directed_pairs(lm):
        g = float(g_dir[v, u])
        mean = float(b_mean[v, u])
        label, csi, ci = classify_edge(g, pi_hat[u], pi_hat[v])
        records.append({
            "u": lm.names[u], "v": lm.names[v], "type": "directed",
            "g": g, "mean": mean, "sign": _sign(mean),
            "dependency_sign": _sign(mean),
            "label": label, "csi": csi, "ci_lower": ci,
        })
    for (u, v) in undirected_pairs(lm):
        g = float(g_und[u, v])
        mean = float(k_mean[u, v])
        label, csi, ci = classify_edge(g, pi_hat[u], pi_hat[v])
        records.append({
            "u": lm.names[u], "v": lm.names[v], "type": "undirected",
            "g": g, "mean": mean, "sign": _sign(mean),
            "dependency_sign": _sign(-mean),
            "label": label, "csi": csi, "ci_lower": ci,
        })

    g_all = np.array([rec["g"] for rec in records])
    if threshold is None:
        cutoff, selected_idx, k = fdr_select(g_all, alpha)
        rule = "fdr"
    else:
        cutoff = float(threshold)
        selected_idx = np.flatnonzero(g_all >= cutoff)
        k = int(selected_idx.size)
        rule = "threshold"
    chosen = set(int(i) for i in selected_idx)
    for i, rec in enumerate(records):
        rec["selected"] = i in chosen

    nodes = []
    for i, name in enumerate(lm.names):
        nodes.append({
            "node": name,
            "layer": lm.layer_ids[lm.layer_of[i]],
            "pi_hat": float(pi_hat[i]),
            "h": float(h[i]) if h is not None else None,
        })
    return PosteriorSummary(nodes, records, float(alpha), cutoff, k, rule)
