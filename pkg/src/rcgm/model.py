"""Multilayered chain graph structures.

Nodes live in ordered layers.  Edges within a layer are undirected and
encoded by the off-diagonal support of that layer's precision block;
edges between layers are directed from lower to higher layers and encoded
by a coefficient matrix B with row v holding the regression of node v on
all nodes in strictly lower layers.

Nodes are kept in canonical order (sorted by layer, ties by input order),
so each layer occupies a contiguous block of columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ChainGraphParams",
    "DataSet",
    "LayerMap",
    "directed_pairs",
    "joint_precision",
    "nodewise_decomposition",
    "recompose_precision",
    "standardize",
    "undirected_pairs",
]


@dataclass(frozen=True)
class LayerMap:
    """Assignment of named nodes to ordered layers, in canonical order.

    layer_of holds the 0-based layer index of each node; layer_ids keeps
    the labels the layers had on input (ascending).  Layers are contiguous:
    layer l spans canonical columns starts[l]:starts[l+1].
    """

    names: tuple
    layer_of: np.ndarray
    layer_ids: tuple
    starts: np.ndarray

    @classmethod
    def from_assignments(cls, names, layers):
        """Build a LayerMap from parallel sequences of node names and
        integer layer labels, reordering nodes canonically."""
        names = list(names)
        layers = [int(l) for l in layers]
        if len(names) != len(layers) or not names:
            raise ValueError("need one layer label per node")
        if len(set(names)) != len(names):
            raise ValueError("duplicate node names")
        distinct = sorted(set(layers))
        rank = {lab: i for i, lab in enumerate(distinct)}
        order = sorted(range(len(names)), key=lambda i: (rank[layers[i]], i))
        layer_of = np.array([rank[layers[i]] for i in order], dtype=int)
        counts = np.bincount(layer_of, minlength=len(distinct))
        starts = np.concatenate(([0], np.cumsum(counts)))
        obj = cls(tuple(names[i] for i in order), layer_of, tuple(distinct), starts)
        object.__setattr__(obj, "_input_order", tuple(order))
        return obj

    @property
    def n_nodes(self):
        return len(self.names)

    @property
    def n_layers(self):
        return len(self.layer_ids)

    def members(self, l):
        """Canonical column range of layer l as a (start, stop) pair."""
        return int(self.starts[l]), int(self.starts[l + 1])

    def size(self, l):
        return int(self.starts[l + 1] - self.starts[l])

    def input_order(self):
        """Indices that map input-order columns to canonical order."""
        return getattr(self, "_input_order")


def undirected_pairs(layer_map):
    """All unordered within-layer pairs (u, v), u < v, canonical indices."""
    pairs = []
    for l in range(layer_map.n_layers):
        a, b = layer_map.members(l)
        for u in range(a, b):
            for v in range(u + 1, b):
                pairs.append((u, v))
    return pairs


def directed_pairs(layer_map):
    """All ordered cross-layer pairs (u, v) with layer(u) < layer(v),
    read as a candidate directed edge u -> v."""
    pairs = []
    for l in range(1, layer_map.n_layers):
        a, b = layer_map.members(l)
        for v in range(a, b):
            for u in range(a):
                pairs.append((u, v))
    return pairs


@dataclass
class ChainGraphParams:
    """Parameters of the chain graph distribution.

    b[v, u] is the coefficient of parent u (in a strictly lower layer) in
    the regression of node v; precision_blocks[l] is the within-layer
    precision of layer l given its parents.
    """

    layer_map: LayerMap
    b: np.ndarray
    precision_blocks: list

    def validate(self):
        q = self.layer_map.n_nodes
        if self.b.shape != (q, q):
            raise ValueError("coefficient matrix has wrong shape")
        for l in range(self.layer_map.n_layers):
            a, stop = self.layer_map.members(l)
            block = self.precision_blocks[l]
            if block.shape != (stop - a, stop - a):
                raise ValueError(f"precision block {l} has wrong shape")
            if not np.allclose(block, block.T):
                raise ValueError(f"precision block {l} is not symmetric")
            rows = self.b[a:stop]
            if np.any(rows[:, a:] != 0.0):
                raise ValueError("directed coefficients must point to lower layers")
        return self


def joint_precision(params):
    """Joint precision of all nodes: (I - B)^T K (I - B) with K the
    block-diagonal within-layer precision."""
    params.validate()
    q = params.layer_map.n_nodes
    K = np.zeros((q, q))
    for l in range(params.layer_map.n_layers):
        a, b = params.layer_map.members(l)
        K[a:b, a:b] = params.precision_blocks[l]
    ib = np.eye(q) - params.b
    return ib.T @ K @ ib


def nodewise_decomposition(params):
    """Per-node view of the parameters.

    Returns (a, b, kvv): a[v, u] = -K_l(v, u) / K_l(v, v) for u in the
    same layer as v (zero elsewhere), b the directed coefficient matrix,
    and kvv the conditional precision diagonal.
    """
    q = params.layer_map.n_nodes
    a = np.zeros((q, q))
    kvv = np.zeros(q)
    for l in range(params.layer_map.n_layers):
        s, t = params.layer_map.members(l)
        block = params.precision_blocks[l]
        diag = np.diag(block)
        if np.any(diag <= 0.0):
            raise ValueError("precision diagonal must be positive")
        kvv[s:t] = diag
        a[s:t, s:t] = -block / diag[:, None]
        np.fill_diagonal(a[s:t, s:t], 0.0)
    return a, params.b.copy(), kvv


def recompose_precision(a, kvv, layer_map):
    """Rebuild within-layer precision blocks from the node-wise view,
    symmetrizing by averaging the two directed estimates of each entry."""
    blocks = []
    for l in range(layer_map.n_layers):
        s, t = layer_map.members(l)
        k = kvv[s:t]
        sub = a[s:t, s:t]
        block = -0.5 * (k[:, None] * sub + (k[None, :] * sub.T))
        np.fill_diagonal(block, k)
        blocks.append(block)
    return blocks


def standardize(x, names=None):
    """Center and scale columns to mean zero, unit sample variance.

    Returns (standardized, means, sds).  Raises on a zero-variance column,
    citing its name when names are given.
    """
    x = np.asarray(x, dtype=float)
    means = x.mean(axis=0)
    sds = x.std(axis=0, ddof=1)
    bad = np.where((sds == 0.0) | ~np.isfinite(sds))[0]
    if bad.size:
        label = names[bad[0]] if names is not None else str(bad[0])
        raise ValueError(f"zero-variance column: {label}")
    return (x - means) / sds, means, sds


@dataclass
class DataSet:
    """Observed data in canonical node order."""

    x: np.ndarray
    layer_map: LayerMap
    standardized: bool = False

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 2 or self.x.shape[1] != self.layer_map.n_nodes:
            raise ValueError("data has wrong number of columns")

    @property
    def n(self):
        return self.x.shape[0]

    def standardized_copy(self):
        if self.standardized:
            return self
        xs, _, _ = standardize(self.x, self.layer_map.names)
        return DataSet(xs, self.layer_map, standardized=True)
