"""Clustering of reads via binary-LLR distance and multi-read APP combining.

Reads are clustered by thresholding pairwise Euclidean distances between
their binary LLR vectors (single linkage via connected components). APPs
are combined within a cluster, a hard index decision is made per cluster,
and the per-index combined data APPs are assembled in index order for the
outer decoder.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bcjr import LLR_CAP, PROB_FLOOR, BcjrDecoder, UndecodableRead, app_to_binary_llr
from .channel import IdsParams, transmit_ids
from .gf4 import random_symbols
from .strand import CodeConfig, encode_strand, offset_sequence


@dataclass(frozen=True)
class ClusterCalibration:
    """Fitted intra-strand LLR distance distribution N(mu, sigma^2) and the
    threshold multiplier omega."""

    mu: float
    sigma: float
    omega: float

    @property
    def threshold(self) -> float:
        return self.mu + self.omega * self.sigma


def euclid_distance(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) != len(b):
        raise ValueError("LLR vectors must have equal length")
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def calibrate_cluster(
    ids: IdsParams,
    cfg: CodeConfig,
    omega: float,
    samples: int,
    rng: np.random.Generator,
    decoder: BcjrDecoder | None = None,
) -> ClusterCalibration:
    """Sample intra-strand LLR distances and fit mean/std.

    Each sample draws a fresh random strand, transmits it twice through
    independent IDS channels, decodes both reads, and records the distance
    between their LLR vectors.
    """
    if samples < 30:
        raise ValueError("need at least 30 samples")
    if decoder is None:
        decoder = BcjrDecoder(cfg, ids)
    dists = []
    attempts = 0
    while len(dists) < samples and attempts < 4 * samples:
        attempts += 1
        block = random_symbols(cfg.block_len, rng)
        index = int(rng.integers(0, cfg.n_strands))
        offset = random_symbols(cfg.strand_len, rng)
        x = encode_strand(block, index, cfg, offset)
        try:
            llrs = [
                app_to_binary_llr(decoder.decode(transmit_ids(x, ids, rng), offset))
                for _ in range(2)
            ]
        except UndecodableRead:
            continue
        dists.append(euclid_distance(llrs[0], llrs[1]))
    if len(dists) < samples:
        raise RuntimeError("too few decodable calibration samples")
    arr = np.array(dists)
    return ClusterCalibration(mu=float(arr.mean()), sigma=float(arr.std(ddof=1)), omega=omega)


def cluster_reads(llrs: list, cal: ClusterCalibration) -> list:
    """Partition read ids into clusters: connected components of the
    threshold graph d_E(i,j) <= mu + omega*sigma."""
    n = len(llrs)
    if n == 0:
        return []
    mat = np.stack(llrs)
    # Pairwise Euclidean distances, O(N^2 L_B).
    sq = np.sum(mat**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * mat @ mat.T, 0.0)
    close = np.sqrt(d2) <= cal.threshold
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if close[i, j]:
                ra, rb = find(i), find(j)
                if ra != rb:
                    parent[rb] = ra
    groups: dict[int, list] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [sorted(g) for g in sorted(groups.values())]


def singleton_clusters(n_reads: int) -> list:
    """The no-clustering variant: every read its own cluster."""
    return [[i] for i in range(n_reads)]


def combine_cluster_apps(apps: list) -> np.ndarray:
    """Rowwise product of member APPs divided by the uniform prior to the
    power |C|-1, renormalized. Equivalently a sum of log-APPs."""
    if not apps:
        raise ValueError("empty cluster")
    logp = np.log(np.clip(apps[0], PROB_FLOOR, None))
    for a in apps[1:]:
        logp = logp + np.log(np.clip(a, PROB_FLOOR, None))
    logp -= logp.max(axis=1, keepdims=True)
    q = np.exp(logp)
    return q / q.sum(axis=1, keepdims=True)


def decide_index(app: np.ndarray, cfg: CodeConfig):
    """Hard index decision from the kix index info rows of a (combined)
    cluster APP matrix. Returns (index_estimate, overflow_flag)."""
    k_half = cfg.kix // 2
    rows = np.vstack([app[:k_half], app[k_half + cfg.block_len:]])
    digits = rows.argmax(axis=1)  # argmax ties resolve to the smallest symbol
    est = 0
    for d in digits:
        est = (est << 2) | int(d)
    overflow = est >= cfg.n_strands
    return est % cfg.n_strands, overflow


def assemble_outer_apps(cluster_apps: list, indices: list, cfg: CodeConfig) -> np.ndarray:
    """Ordered outer-code APPs q(w_t|Y), shape (no, 4).

    cluster_apps[k] is the combined APP matrix of cluster k and indices[k]
    its index decision. Clusters sharing an index are combined with the
    same product rule; indices with no cluster yield uniform rows.
    """
    k_half = cfg.kix // 2
    out = np.full((cfg.n_outer, 4), 0.25)
    by_index: dict[int, list] = {}
    for app, idx in zip(cluster_apps, indices):
        by_index.setdefault(idx, []).append(app[k_half: k_half + cfg.block_len])
    for idx, members in by_index.items():
        out[idx * cfg.block_len: (idx + 1) * cfg.block_len] = combine_cluster_apps(members)
    return out


def index_groups(indices: list, n_strands: int) -> dict:
    """S_i: set of cluster ids deciding on each index."""
    groups: dict[int, list] = {i: [] for i in range(n_strands)}
    for k, idx in enumerate(indices):
        groups[idx].append(k)
    return groups


def cluster_diagnostics(clusters: list, ground_truth: np.ndarray) -> dict:
    """Purity and pairwise precision/recall against true read provenance."""
    n = len(ground_truth)
    label = np.empty(n, dtype=np.int64)
    for k, members in enumerate(clusters):
        for m in members:
            label[m] = k
    same_cluster = label[:, None] == label[None, :]
    same_truth = ground_truth[:, None] == ground_truth[None, :]
    iu = np.triu_indices(n, k=1)
    sc, st = same_cluster[iu], same_truth[iu]
    tp = int(np.sum(sc & st))
    fp = int(np.sum(sc & ~st))
    fn = int(np.sum(~sc & st))
    purity = sum(
        int(np.bincount(ground_truth[m]).max()) for m in map(np.array, clusters)
    ) / max(n, 1)
    return {
        "n_reads": n,
        "n_clusters": len(clusters),
        "purity": purity,
        "pairwise_precision": tp / (tp + fp) if tp + fp else 1.0,
        "pairwise_recall": tp / (tp + fn) if tp + fn else 1.0,
    }


def diagnostics_json(clusters: list, ground_truth: np.ndarray) -> str:
    return json.dumps(cluster_diagnostics(clusters, ground_truth), indent=2, sort_keys=True)


def llr_from_app(app: np.ndarray) -> np.ndarray:
    """Per-symbol log-ratios ln p(v_t=a|y) / p(v_t=0|y), capped, shape (rows, 4).

    The symbol-level analogue of app_to_binary_llr, used by the rate
    estimators and the APP assembly.
    """
    logp = np.log(np.clip(app, PROB_FLOOR, None))
    llr = logp - logp[:, 0:1]
    return np.clip(llr, -LLR_CAP, LLR_CAP)
