"""Layer bookkeeping, chain graph parameter algebra, standardization."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rcgm.model import (
    ChainGraphParams,
    DataSet,
    LayerMap,
    directed_pairs,
    joint_precision,
    nodewise_decomposition,
    recompose_precision,
    standardize,
    undirected_pairs,
)


def _random_params(seed, sizes):
    """Random valid ChainGraphParams with diagonally dominant blocks."""
    rng = np.random.default_rng(seed)
    names = [f"n{i}" for i in range(sum(sizes))]
    layers = [l + 1 for l, size in enumerate(sizes) for _ in range(size)]
    lm = LayerMap.from_assignments(names, layers)
    q = lm.n_nodes
    b = np.zeros((q, q))
    blocks = []
    for l, size in enumerate(sizes):
        s, t = lm.members(l)
        block = rng.uniform(-0.5, 0.5, size=(size, size))
        block = 0.5 * (block + block.T)
        np.fill_diagonal(block, 0.0)
        np.fill_diagonal(block, np.abs(block).sum(axis=1) + 1.0)
        blocks.append(block)
        if s:
            b[s:t, :s] = rng.uniform(-0.8, 0.8, size=(size, s))
    return ChainGraphParams(lm, b, blocks).validate()


# ---------------------------------------------------------------------------
# LayerMap


def test_layer_map_canonical_order():
    lm = LayerMap.from_assignments(["c", "a", "b", "d"], [2, 1, 2, 1])
    assert lm.names == ("a", "d", "c", "b")
    assert lm.layer_ids == (1, 2)
    assert list(lm.layer_of) == [0, 0, 1, 1]
    assert lm.members(0) == (0, 2)
    assert lm.members(1) == (2, 4)
    assert lm.n_nodes == 4 and lm.n_layers == 2
    # input_order maps canonical position -> original input position
    order = lm.input_order()
    assert [lm.names[i] for i in np.argsort(order)] == ["c", "a", "b", "d"]


def test_layer_map_noncontiguous_labels():
    lm = LayerMap.from_assignments(["a", "b", "c"], [10, 3, 10])
    assert lm.layer_ids == (3, 10)
    assert lm.names == ("b", "a", "c")


def test_layer_map_rejects_bad_input():
    with pytest.raises(ValueError, match="duplicate"):
        LayerMap.from_assignments(["a", "a"], [1, 2])
    with pytest.raises(ValueError, match="one layer label"):
        LayerMap.from_assignments(["a"], [1, 2])
    with pytest.raises(ValueError):
        LayerMap.from_assignments([], [])


def test_edge_universe_counts():
    lm = LayerMap.from_assignments(list("abcde"), [1, 1, 1, 2, 2])
    und = undirected_pairs(lm)
    dire = directed_pairs(lm)
    # C(3,2) + C(2,2) within layers; 3 * 2 across
    assert len(und) == 4
    assert len(dire) == 6
    for u, v in und:
        assert u < v and lm.layer_of[u] == lm.layer_of[v]
    for u, v in dire:
        assert lm.layer_of[u] < lm.layer_of[v]


@given(st.lists(st.integers(1, 4), min_size=1, max_size=4))
def test_edge_universe_is_exhaustive(sizes):
    q = sum(sizes)
    names = [f"x{i}" for i in range(q)]
    layers = [l for l, size in enumerate(sizes) for _ in range(size)]
    lm = LayerMap.from_assignments(names, layers)
    und = set(undirected_pairs(lm))
    dire = set(directed_pairs(lm))
    assert len(und & dire) == 0
    # every unordered node pair appears exactly once in one universe
    total = {(min(u, v), max(u, v)) for u, v in und | dire}
    assert len(total) == q * (q - 1) // 2


# ---------------------------------------------------------------------------
# parameter algebra


def test_joint_precision_frozen_hand_case():
    # one parent node feeding a two-node layer with coupling 0.3 and a
    # single directed coefficient 0.7; entries worked out by hand from
    # (I - B)^T K (I - B)
    lm = LayerMap.from_assignments(["x1", "x2", "x3"], [1, 2, 2])
    b = np.zeros((3, 3))
    b[1, 0] = 0.7
    blocks = [np.array([[2.0]]), np.array([[1.5, 0.3], [0.3, 1.2]])]
    params = ChainGraphParams(lm, b, blocks).validate()
    want = np.array([
        [2.735, -1.05, -0.21],
        [-1.05, 1.5, 0.3],
        [-0.21, 0.3, 1.2],
    ])
    np.testing.assert_allclose(joint_precision(params), want, atol=1e-12)


@given(st.integers(0, 1000), st.lists(st.integers(1, 3), min_size=1, max_size=3))
def test_joint_precision_is_spd(seed, sizes):
    params = _random_params(seed, sizes)
    omega = joint_precision(params)
    np.testing.assert_allclose(omega, omega.T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(omega) > 0)


def test_nodewise_decomposition_frozen():
    lm = LayerMap.from_assignments(["x1", "x2", "x3"], [1, 2, 2])
    b = np.zeros((3, 3))
    b[2, 0] = -0.4
    blocks = [np.array([[2.0]]), np.array([[1.5, 0.3], [0.3, 1.2]])]
    params = ChainGraphParams(lm, b, blocks).validate()
    a, bb, kvv = nodewise_decomposition(params)
    np.testing.assert_allclose(kvv, [2.0, 1.5, 1.2], atol=1e-14)
    assert a[1, 2] == pytest.approx(-0.3 / 1.5)
    assert a[2, 1] == pytest.approx(-0.3 / 1.2)
    np.testing.assert_allclose(bb, b, atol=0)


@given(st.integers(0, 1000), st.lists(st.integers(1, 4), min_size=1, max_size=3))
def test_decompose_recompose_roundtrip(seed, sizes):
    params = _random_params(seed, sizes)
    a, _, kvv = nodewise_decomposition(params)
    rebuilt = recompose_precision(a, kvv, params.layer_map)
    for l in range(params.layer_map.n_layers):
        np.testing.assert_allclose(rebuilt[l], params.precision_blocks[l],
                                   atol=1e-10)


def test_validate_rejects_upper_layer_coefficients():
    lm = LayerMap.from_assignments(["x1", "x2"], [1, 2])
    b = np.zeros((2, 2))
    b[0, 1] = 0.5  # layer-1 node regressed on layer-2 node
    params = ChainGraphParams(lm, b, [np.eye(1), np.eye(1)])
    with pytest.raises(ValueError, match="lower layers"):
        params.validate()


def test_validate_rejects_asymmetric_block():
    lm = LayerMap.from_assignments(["x1", "x2"], [1, 1])
    block = np.array([[1.0, 0.2], [0.4, 1.0]])
    with pytest.raises(ValueError, match="not symmetric"):
        ChainGraphParams(lm, np.zeros((2, 2)), [block]).validate()


# ---------------------------------------------------------------------------
# standardization


def test_standardize_moments():
    rng = np.random.default_rng(4)
    x = rng.normal(3.0, 2.5, size=(40, 3))
    z, means, sds = standardize(x)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=0, ddof=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(means, x.mean(axis=0), atol=0)
    np.testing.assert_allclose(sds, x.std(axis=0, ddof=1), atol=0)


def test_standardize_idempotent():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((25, 4)) * 3.0 + 1.0
    once, _, _ = standardize(x)
    again, _, _ = standardize(once)
    np.testing.assert_allclose(again, once, atol=1e-12)


def test_standardize_names_zero_variance():
    x = np.ones((10, 2))
    x[:, 0] = np.arange(10.0)
    with pytest.raises(ValueError, match="zero-variance column: g2"):
        standardize(x, names=["g1", "g2"])


def test_dataset_standardized_copy():
    lm = LayerMap.from_assignments(["a", "b"], [1, 1])
    x = np.random.default_rng(0).normal(5.0, 2.0, size=(30, 2))
    ds = DataSet(x, lm)
    z = ds.standardized_copy()
    assert z.standardized
    np.testing.assert_allclose(z.x.mean(axis=0), 0.0, atol=1e-12)
    # an already standardized copy returns itself unchanged
    assert z.standardized_copy() is z
    assert ds.n == 30
