"""Clustering, APP combining, and index decisions."""

import numpy as np
import pytest

from dnastore.bcjr import BcjrDecoder
from dnastore.channel import EXPERIMENT_IDS, IdsParams, MultiDrawParams, channel_pass
from dnastore.cluster import (
    ClusterCalibration,
    assemble_outer_apps,
    calibrate_cluster,
    cluster_diagnostics,
    cluster_reads,
    combine_cluster_apps,
    decide_index,
    euclid_distance,
    index_groups,
    llr_from_app,
    singleton_clusters,
)
from dnastore.gf4 import random_symbols
from dnastore.inner_codes import bundled_codebook, even_marker_positions
from dnastore.strand import CodeConfig, encode_strand


def small_config() -> CodeConfig:
    return CodeConfig(n_strands=16, block_len=20, codebook=bundled_codebook("3_1"),
                      marker_positions=tuple(even_marker_positions(20, 2)))


def test_euclid_distance():
    assert euclid_distance(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        euclid_distance(np.zeros(3), np.zeros(4))


def test_calibration_threshold():
    cal = ClusterCalibration(mu=30.0, sigma=5.0, omega=2.5)
    assert cal.threshold == pytest.approx(42.5)


def test_calibrate_cluster_runs_and_is_deterministic():
    cfg = small_config()
    ids = EXPERIMENT_IDS
    decoder = BcjrDecoder(cfg, ids)
    c1 = calibrate_cluster(ids, cfg, 5.0, 40, np.random.default_rng(0), decoder=decoder)
    c2 = calibrate_cluster(ids, cfg, 5.0, 40, np.random.default_rng(0), decoder=decoder)
    assert (c1.mu, c1.sigma) == (c2.mu, c2.sigma)
    assert c1.mu > 0 and c1.sigma > 0


def test_calibrate_cluster_noiseless_distances_are_zero():
    cfg = small_config()
    ids = IdsParams()
    cal = calibrate_cluster(ids, cfg, 2.5, 30, np.random.default_rng(1))
    assert cal.mu == pytest.approx(0.0, abs=1e-9)
    assert cal.sigma == pytest.approx(0.0, abs=1e-9)


def test_calibrate_cluster_needs_enough_samples():
    cfg = small_config()
    with pytest.raises(ValueError):
        calibrate_cluster(EXPERIMENT_IDS, cfg, 2.5, 10, np.random.default_rng(2))


def test_cluster_reads_connected_components():
    cal = ClusterCalibration(mu=0.0, sigma=1.0, omega=1.0)  # threshold 1
    llrs = [np.array([0.0]), np.array([0.9]), np.array([1.8]), np.array([5.0])]
    # 0-1 and 1-2 are within threshold (single linkage chains them); 3 is alone.
    assert cluster_reads(llrs, cal) == [[0, 1, 2], [3]]
    assert cluster_reads([], cal) == []


def test_singleton_clusters():
    assert singleton_clusters(3) == [[0], [1], [2]]


def test_combine_cluster_apps_product_rule():
    a = np.array([[0.7, 0.1, 0.1, 0.1]])
    b = np.array([[0.4, 0.4, 0.1, 0.1]])
    out = combine_cluster_apps([a, b])
    expect = a * b
    expect /= expect.sum()
    assert np.allclose(out, expect, atol=1e-12)
    # Known value: combined mass on symbol 0 is 0.28/0.29722... = 0.9423...
    assert out[0, 0] == pytest.approx(0.28 / (0.28 + 0.04 + 0.01 + 0.01), abs=1e-12)


def test_combine_cluster_apps_permutation_invariant():
    rng = np.random.default_rng(3)
    apps = []
    for _ in range(4):
        m = rng.random((6, 4))
        apps.append(m / m.sum(axis=1, keepdims=True))
    out1 = combine_cluster_apps(apps)
    out2 = combine_cluster_apps(apps[::-1])
    assert np.allclose(out1, out2, atol=1e-12)
    with pytest.raises(ValueError):
        combine_cluster_apps([])


def test_combine_single_member_is_identity():
    rng = np.random.default_rng(4)
    m = rng.random((5, 4))
    m /= m.sum(axis=1, keepdims=True)
    assert np.allclose(combine_cluster_apps([m]), m, atol=1e-12)


def test_decide_index():
    cfg = small_config()
    app = np.full((cfg.v_len, 4), 0.05)
    app[0, 1] = 0.9  # head digit 1
    app[-1, 3] = 0.9  # tail digit 3
    est, overflow = decide_index(app, cfg)
    assert est == (1 << 2) | 3 == 7
    assert not overflow


def test_decide_index_overflow():
    book = bundled_codebook("3_1")
    cfg = CodeConfig(n_strands=8, block_len=20, codebook=book,
                     marker_positions=(10, 20))  # kix=2 addresses 16 > M=8
    app = np.full((cfg.v_len, 4), 0.05)
    app[0, 3] = 0.9
    app[-1, 3] = 0.9  # decoded value 15 >= 8
    est, overflow = decide_index(app, cfg)
    assert overflow
    assert est == 15 % 8


def test_assemble_outer_apps():
    cfg = small_config()
    app = np.full((cfg.v_len, 4), 0.25)
    app[1: 1 + cfg.block_len] = np.tile(np.array([0.7, 0.1, 0.1, 0.1]), (cfg.block_len, 1))
    out = assemble_outer_apps([app], [3], cfg)
    assert out.shape == (cfg.n_outer, 4)
    # Index 3's rows carry the data APPs, others stay uniform.
    assert np.allclose(out[3 * 20: 4 * 20, 0], 0.7)
    assert np.allclose(out[:20], 0.25)


def test_index_groups():
    groups = index_groups([2, 0, 2], 4)
    assert groups == {0: [1], 1: [], 2: [0, 2], 3: []}


def test_cluster_diagnostics_perfect():
    truth = np.array([0, 0, 1, 1])
    d = cluster_diagnostics([[0, 1], [2, 3]], truth)
    assert d["purity"] == 1.0
    assert d["pairwise_precision"] == 1.0
    assert d["pairwise_recall"] == 1.0


def test_cluster_diagnostics_merged():
    truth = np.array([0, 0, 1, 1])
    d = cluster_diagnostics([[0, 1, 2, 3]], truth)
    assert d["pairwise_recall"] == 1.0
    assert d["pairwise_precision"] == pytest.approx(2 / 6)
    assert d["purity"] == 0.5


def test_llr_from_app_anchored_at_zero():
    app = np.array([[0.5, 0.25, 0.125, 0.125]])
    llr = llr_from_app(app)
    assert llr[0, 0] == 0.0
    assert llr[0, 1] == pytest.approx(np.log(0.5))
    assert llr[0, 2] == pytest.approx(np.log(0.25))


def test_ground_truth_clustering_end_to_end():
    # Noisy reads cluster by true strand with a calibrated threshold.
    from dnastore.bcjr import app_to_binary_llr

    # Cluster separation needs realistic strand lengths; short LLR vectors
    # overlap and single linkage chains everything together.
    cfg = CodeConfig(n_strands=16, block_len=90, codebook=bundled_codebook("3_1"),
                     marker_positions=tuple(even_marker_positions(90, 9)))
    ids = EXPERIMENT_IDS
    rng = np.random.default_rng(5)
    decoder = BcjrDecoder(cfg, ids)
    cal = calibrate_cluster(ids, cfg, 2.5, 50, rng, decoder=decoder)
    blocks = [random_symbols(cfg.block_len, rng) for _ in range(cfg.n_strands)]
    offsets = [random_symbols(cfg.strand_len, rng) for _ in range(cfg.n_strands)]
    strands = [encode_strand(blocks[i], i, cfg, offsets[i]) for i in range(cfg.n_strands)]
    md = MultiDrawParams(n_strands=16, coverage=4.0)
    out = channel_pass(strands, ids, md, rng)
    llrs, truth = [], []
    for y, src in zip(out.reads, out.ground_truth):
        llrs.append(app_to_binary_llr(decoder.decode(y, offsets[src])))
        truth.append(int(src))
    clusters = cluster_reads(llrs, cal)
    d = cluster_diagnostics(clusters, np.array(truth))
    assert d["pairwise_precision"] > 0.95
    assert d["pairwise_recall"] > 0.95
