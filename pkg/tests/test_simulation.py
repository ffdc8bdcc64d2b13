"""Truth generation, contamination, recovery metrics, benchmark driver."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rcgm.model import (
    ChainGraphParams,
    directed_pairs,
    joint_precision,
    undirected_pairs,
)
from rcgm.numerics import MixingDistribution, exponential_mixing
from rcgm.simulation import (
    METRIC_KEYS,
    BenchmarkConfig,
    SimulationConfig,
    _derived_seed,
    auc_trapezoid,
    confusion_metrics,
    contaminate,
    even_layer_map,
    generate_gaussian_data,
    generate_truth,
    partial_auc,
    roc_points,
    run_benchmark,
    simulate_dataset,
    true_edge_labels,
)


def _concordance(scores, labels):
    """Probability a random true edge outscores a random non-edge, ties
    counted half."""
    pos = scores[labels]
    neg = scores[~labels]
    wins = np.sum(pos[:, None] > neg[None, :])
    ties = np.sum(pos[:, None] == neg[None, :])
    return (wins + 0.5 * ties) / (pos.size * neg.size)


# ---------------------------------------------------------------------------
# layer map and truth generation


def test_even_layer_map_sizes():
    lm = even_layer_map(10, 4)
    sizes = [lm.size(l) for l in range(4)]
    assert sizes == [3, 3, 2, 2]
    assert lm.names[0] == "x1" and lm.names[-1] == "x10"
    with pytest.raises(ValueError):
        even_layer_map(3, 4)
    with pytest.raises(ValueError):
        even_layer_map(3, 0)


def test_generate_truth_structure():
    config = SimulationConfig(q=20, n_layers=3, edge_prob=0.3)
    for seed in range(5):
        params = generate_truth(config, np.random.default_rng(seed))
        lm = params.layer_map
        # blocks are SPD by diagonal dominance
        for l in range(lm.n_layers):
            np.linalg.cholesky(params.precision_blocks[l])
        # directed support respects layer order, magnitudes in [0.5, 1.5]
        for (u, v) in directed_pairs(lm):
            val = params.b[v, u]
            assert val == 0.0 or 0.5 <= abs(val) <= 1.5
        omega = joint_precision(params)
        assert np.all(np.linalg.eigvalsh(omega) > 0)


def test_generate_truth_edge_rate():
    # cross-layer pairs connect at half the within-layer rate
    config = SimulationConfig(q=40, n_layers=2, edge_prob=0.4)
    rng = np.random.default_rng(0)
    within = across = 0
    n_within = n_across = 0
    for _ in range(20):
        params = generate_truth(config, rng)
        lm = params.layer_map
        labels = true_edge_labels(params)
        n_dir = len(directed_pairs(lm))
        across += labels[:n_dir].sum()
        within += labels[n_dir:].sum()
        n_across += n_dir
        n_within += labels.size - n_dir
    assert within / n_within == pytest.approx(0.4, abs=0.03)
    assert across / n_across == pytest.approx(0.2, abs=0.03)


def test_gaussian_data_matches_implied_covariance():
    config = SimulationConfig(q=6, n_layers=2, edge_prob=0.5)
    rng = np.random.default_rng(3)
    params = generate_truth(config, rng)
    n = 100_000
    x = generate_gaussian_data(params, n, rng)
    want = np.linalg.inv(joint_precision(params))
    got = np.cov(x, rowvar=False)
    # elementwise three-sigma Monte Carlo band
    for i in range(6):
        for j in range(6):
            se = np.sqrt((want[i, i] * want[j, j] + want[i, j] ** 2) / n)
            assert abs(got[i, j] - want[i, j]) < 4 * se


# ---------------------------------------------------------------------------
# contamination


def test_contaminate_zero_probability_is_identity():
    x = np.random.default_rng(0).standard_normal((50, 4))
    out, d = contaminate(x, 0.0, exponential_mixing(2.5), np.random.default_rng(1))
    np.testing.assert_array_equal(out, x)
    np.testing.assert_array_equal(d, 1.0)


def test_contaminate_full_probability_scales_everything():
    x = np.ones((2000, 5))
    out, d = contaminate(x, 1.0, exponential_mixing(2.5),
                         np.random.default_rng(2))
    assert np.all(d > 0)
    assert not np.any(d == 1.0)
    np.testing.assert_allclose(out, d, atol=0)
    # mean scale approaches the mixing mean (10000 draws, se 0.025)
    assert d.mean() == pytest.approx(2.5, abs=0.1)


def test_contaminate_fattens_tails():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((4000, 1))
    out, _ = contaminate(x, 0.9, exponential_mixing(2.5),
                         np.random.default_rng(6))
    def kurt(v):
        z = (v - v.mean()) / v.std()
        return np.mean(z ** 4) - 3.0
    assert kurt(out[:, 0]) > kurt(x[:, 0]) + 1.0


def test_simulate_dataset_deterministic():
    config = SimulationConfig(q=10, n_layers=2, n=50, seed=123)
    p1, ds1, d1 = simulate_dataset(config)
    p2, ds2, d2 = simulate_dataset(config)
    np.testing.assert_array_equal(ds1.x, ds2.x)
    np.testing.assert_array_equal(d1, d2)
    np.testing.assert_array_equal(p1.b, p2.b)


def test_true_labels_align_with_edge_universe():
    config = SimulationConfig(q=12, n_layers=3, edge_prob=0.4)
    params = generate_truth(config, np.random.default_rng(11))
    labels = true_edge_labels(params)
    lm = params.layer_map
    universe = list(directed_pairs(lm)) + list(undirected_pairs(lm))
    assert labels.size == len(universe)
    n_dir = len(directed_pairs(lm))
    # zeroing the directed part makes the joint precision block diagonal,
    # so its support reads off the within-layer edges directly
    stripped = ChainGraphParams(lm, np.zeros_like(params.b),
                                params.precision_blocks)
    omega0 = joint_precision(stripped)
    for idx, (u, v) in enumerate(universe):
        if idx < n_dir:
            assert labels[idx] == (params.b[v, u] != 0.0)
        else:
            assert labels[idx] == (omega0[u, v] != 0.0)
    assert labels[:n_dir].sum() == np.count_nonzero(params.b)


# ---------------------------------------------------------------------------
# recovery metrics


def test_confusion_frozen_mcc():
    # TP=8 TN=80 FP=2 FN=10: MCC = 620 / sqrt(1328400) (mpmath)
    truth = np.array([True] * 18 + [False] * 82)
    selected = np.array([True] * 8 + [False] * 10 + [True] * 2 + [False] * 80)
    spec, sens, mcc = confusion_metrics(truth, selected)
    assert spec == pytest.approx(80 / 82)
    assert sens == pytest.approx(8 / 18)
    assert mcc == pytest.approx(0.5379318465051987, abs=5e-4)


def test_confusion_degenerate_fallbacks():
    spec, sens, mcc = confusion_metrics(np.array([True, True]),
                                        np.array([False, False]))
    assert (spec, sens, mcc) == (0.0, 0.0, 0.0)
    spec, sens, mcc = confusion_metrics(np.array([False, False]),
                                        np.array([True, True]))
    assert (spec, sens, mcc) == (0.0, 0.0, 0.0)


def test_roc_frozen_case():
    scores = np.array([0.9, 0.3, 0.5, 0.1])
    labels = np.array([True, True, False, False])
    fpr, tpr = roc_points(scores, labels)
    np.testing.assert_allclose(fpr, [0.0, 0.0, 0.5, 0.5, 1.0])
    np.testing.assert_allclose(tpr, [0.0, 0.5, 0.5, 1.0, 1.0])
    assert auc_trapezoid(scores, labels) == pytest.approx(0.75)


def test_roc_requires_both_classes():
    with pytest.raises(ValueError, match="both edge and non-edge"):
        roc_points(np.array([0.5, 0.6]), np.array([True, True]))


@given(st.integers(0, 20_000))
def test_auc_equals_concordance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 40))
    # quantize to force ties through the tie-handling path
    scores = np.round(rng.random(n), 2)
    labels = rng.random(n) < 0.4
    if labels.all() or not labels.any():
        labels[0] = True
        labels[-1] = False
    assert auc_trapezoid(scores, labels) == pytest.approx(
        _concordance(scores, labels), abs=1e-12)


def test_partial_auc_full_band_is_auc():
    rng = np.random.default_rng(9)
    scores = rng.random(50)
    labels = rng.random(50) < 0.5
    labels[0], labels[-1] = True, False
    assert partial_auc(scores, labels, 0.0) == pytest.approx(
        auc_trapezoid(scores, labels), abs=1e-12)


def test_partial_auc_perfect_classifier():
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    labels = np.array([True, True, False, False])
    assert partial_auc(scores, labels, 0.9) == pytest.approx(1.0)
    assert auc_trapezoid(scores, labels) == pytest.approx(1.0)


@given(st.integers(0, 20_000), st.sampled_from([0.8, 0.9]))
def test_partial_auc_bounded(seed, band):
    rng = np.random.default_rng(seed)
    scores = rng.random(30)
    labels = rng.random(30) < 0.5
    if labels.all() or not labels.any():
        labels[0] = True
        labels[-1] = False
    val = partial_auc(scores, labels, band)
    assert 0.0 <= val <= 1.0


def test_partial_auc_rejects_empty_band():
    with pytest.raises(ValueError, match="band is empty"):
        partial_auc(np.array([0.5, 0.2]), np.array([True, False]), 1.0)


# ---------------------------------------------------------------------------
# benchmark driver


def test_derived_seed_deterministic_and_distinct():
    a = _derived_seed(7, 1, 0)
    assert a == _derived_seed(7, 1, 0)
    assert a != _derived_seed(7, 1, 1)
    assert a != _derived_seed(7, 2, 0)
    assert a != _derived_seed(8, 1, 0)


def test_run_benchmark_smoke():
    config = BenchmarkConfig(
        sim=SimulationConfig(q=8, n_layers=2, n=60, edge_prob=0.3,
                             contamination=0.5),
        reps=2, burnin=40, samples=120, alpha=0.1, seed=3, jobs=1)
    out = run_benchmark(config)
    rows = out["rows"]
    assert len(rows) == 4  # 2 reps x 2 modes
    for row in rows:
        assert row["mode"] in ("rcgm", "gaussian")
        for key in METRIC_KEYS:
            assert np.isfinite(row[key])
        assert 0.0 <= row["auc"] <= 1.0
    summary = out["summary"]
    for mode in ("rcgm", "gaussian"):
        sub = [r for r in rows if r["mode"] == mode]
        assert summary[mode]["reps"] == 2
        assert summary[mode]["mean_auc"] == pytest.approx(
            np.mean([r["auc"] for r in sub]))
        assert summary[mode]["se_auc"] >= 0.0


def test_run_benchmark_parallel_matches_serial():
    config = BenchmarkConfig(
        sim=SimulationConfig(q=6, n_layers=2, n=50, edge_prob=0.3,
                             contamination=0.4),
        reps=2, burnin=30, samples=60, alpha=0.1, seed=5, jobs=1)
    serial = run_benchmark(config)
    parallel = run_benchmark(BenchmarkConfig(
        sim=config.sim, reps=config.reps, burnin=config.burnin,
        samples=config.samples, alpha=config.alpha, seed=config.seed, jobs=2))
    for a, b in zip(serial["rows"], parallel["rows"]):
        for key in METRIC_KEYS:
            assert a[key] == b[key]


def test_benchmark_gaussian_mode_unaffected_by_mixing():
    # the gaussian arm must ignore the mixing family entirely
    base = SimulationConfig(q=6, n_layers=2, n=50, edge_prob=0.3,
                            contamination=0.0, seed=2)
    alt = SimulationConfig(q=6, n_layers=2, n=50, edge_prob=0.3,
                           contamination=0.0,
                           mixing=MixingDistribution("inverse_gamma", 3.0, 6.0),
                           seed=2)
    rows1 = run_benchmark(BenchmarkConfig(sim=base, reps=1, burnin=30,
                                          samples=60, seed=1,
                                          modes=("gaussian",)))["rows"]
    rows2 = run_benchmark(BenchmarkConfig(sim=alt, reps=1, burnin=30,
                                          samples=60, seed=1,
                                          modes=("gaussian",)))["rows"]
    for key in METRIC_KEYS:
        assert rows1[0][key] == rows2[0][key]
