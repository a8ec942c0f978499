"""Monte-Carlo estimators: BCJR-once achievable rates, instantaneous rates
and information-outage probability, and the end-to-end frame error rate.

All estimators share one decoding front end: every read is decoded by the
joint index/inner BCJR (with the offset of its originating strand), reads
are grouped according to the configured variant, and per-position symbol
log-ratios are summed over the reads grouped onto each index.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bcjr import BcjrDecoder, DriftTrellisConfig, UndecodableRead, app_to_binary_llr
from .channel import ChannelOutput, DrawRealization, IdsParams, MultiDrawParams, channel_pass, draw_strands
from .cluster import (
    ClusterCalibration,
    calibrate_cluster,
    cluster_reads,
    combine_cluster_apps,
    cluster_diagnostics,
    decide_index,
    llr_from_app,
)
from .gf4 import random_symbols
from .inner_codes import IndexCodebook, bundled_codebook, even_marker_positions
from .scldpc import BpResult, ParityCheckMatrix, bp_decode
from .strand import CodeConfig, encode_strand

VARIANTS = ("genie", "uncoded", "coded", "coded-cluster")

LOG2E = math.log2(math.e)


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent, reproducible RNG substream for (master seed, key...)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=key))


def air_code_config(
    strand_len_target: int,
    n_strands: int,
    variant: str,
    marker_period: int = 10,
) -> CodeConfig:
    """Code configuration for rate estimation at a target strand length.

    The data block length is rounded to a multiple of the marker period;
    coded variants use the bundled [3,1] index codebook, the uncoded and
    genie variants a length-1 identity index per half.
    """
    kix = max(2, math.ceil(math.log(n_strands, 4) / 2) * 2)
    if variant in ("genie", "uncoded"):
        book = IndexCodebook.identity(kix // 2)
    else:
        book = bundled_codebook("3_1")
        if 2 * book.k_half < kix:
            raise ValueError("bundled [3,1] codebook only supports up to 16 strands")
    nix = 2 * book.n_half
    ri = marker_period / (marker_period + 1)
    block_len = marker_period * round((strand_len_target - nix) * ri / marker_period)
    markers = even_marker_positions(block_len, block_len // marker_period)
    return CodeConfig(
        n_strands=n_strands,
        block_len=block_len,
        codebook=book,
        marker_positions=tuple(markers),
    )


def noiseless_air_benchmark(cfg: CodeConfig, coverage: float) -> float:
    """Closed-form benchmark: expected drawn-strand fraction times the
    per-strand data rate 2*Lo/lambda (drawing and permutation losses only)."""
    md = MultiDrawParams(n_strands=cfg.n_strands, coverage=coverage)
    p_drawn = 1.0 - (1.0 - 1.0 / cfg.n_strands) ** md.n_reads
    return p_drawn * 2.0 * cfg.block_len / cfg.strand_len


@dataclass
class DecodedReads:
    """Per-read BCJR outputs for one channel realization."""

    read_ids: list  # positions into ChannelOutput.reads
    apps: list  # (v_len, 4) APP matrices
    sources: np.ndarray  # true source strand per decoded read
    n_rejected: int = 0


def decode_channel_output(
    out: ChannelOutput,
    offsets: list,
    decoder: BcjrDecoder,
    use_cache: bool = False,
) -> DecodedReads:
    """BCJR-decode every read with its source strand's offset.

    Ground truth provenance selects the offset only; grouping and index
    decisions downstream never see it (except in the genie variant).
    """
    read_ids, apps, sources = [], [], []
    rejected = 0
    for j, y in enumerate(out.reads):
        src = int(out.ground_truth[j])
        try:
            app = decoder.decode(y, offsets[src], use_cache=use_cache)
        except UndecodableRead:
            rejected += 1
            continue
        read_ids.append(j)
        apps.append(app)
        sources.append(src)
    return DecodedReads(
        read_ids=read_ids, apps=apps, sources=np.array(sources, dtype=np.int64),
        n_rejected=rejected,
    )


def group_reads(
    decoded: DecodedReads,
    cfg: CodeConfig,
    variant: str,
    cal: ClusterCalibration | None = None,
):
    """Group decoded reads into clusters and decide an index per cluster.

    Returns (clusters, indices, n_overflow); clusters hold positions into
    decoded.apps.
    """
    n = len(decoded.apps)
    if variant == "genie":
        groups: dict[int, list] = {}
        for k, src in enumerate(decoded.sources):
            groups.setdefault(int(src), []).append(k)
        clusters = [groups[i] for i in sorted(groups)]
        indices = [int(i) for i in sorted(groups)]
        return clusters, indices, 0
    if variant in ("uncoded", "coded"):
        clusters = [[k] for k in range(n)]
    elif variant == "coded-cluster":
        if cal is None:
            raise ValueError("clustering variant needs a calibration")
        llrs = [app_to_binary_llr(a) for a in decoded.apps]
        clusters = cluster_reads(llrs, cal)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    indices = []
    n_overflow = 0
    for members in clusters:
        combined = combine_cluster_apps([decoded.apps[k] for k in members])
        est, overflow = decide_index(combined, cfg)
        indices.append(est)
        n_overflow += int(overflow)
    return clusters, indices, n_overflow


def combined_data_llrs(
    decoded: DecodedReads, clusters: list, indices: list, cfg: CodeConfig
) -> np.ndarray:
    """Summed per-position symbol log-ratios, shape (M, Lo, 4), anchored at
    symbol 0; zero rows (uniform) for indices with no cluster."""
    k_half = cfg.kix // 2
    out = np.zeros((cfg.n_strands, cfg.block_len, 4))
    for members, idx in zip(clusters, indices):
        for k in members:
            llr4 = llr_from_app(decoded.apps[k])
            out[idx] += llr4[k_half: k_half + cfg.block_len]
    return out


def _rate_from_llrs(llrs: np.ndarray, true_blocks: np.ndarray, strand_len: int) -> float:
    """Plug-in mutual-information estimate in bits/nucleotide.

    Per position: log2(4) + log2 softmax(LLR)[true symbol], averaged over
    M * lambda (positions without reads have all-zero LLRs and contribute
    exactly 0 through the same formula: 2 + log2(1/4) = 0).
    """
    m = llrs.max(axis=2, keepdims=True)
    logsumexp = np.log(np.exp(llrs - m).sum(axis=2)) + m[:, :, 0]
    true_llr = np.take_along_axis(llrs, true_blocks[:, :, None].astype(np.int64), axis=2)[:, :, 0]
    bits = 2.0 + (true_llr - logsumexp) * LOG2E
    return float(bits.sum()) / (llrs.shape[0] * strand_len)


@dataclass
class RealizationResult:
    rate: float
    diagnostics: dict = field(default_factory=dict)


def instantaneous_rate_multi(
    cfg: CodeConfig,
    ids: IdsParams,
    coverage: float,
    variants: tuple,
    rng: np.random.Generator,
    decoder: BcjrDecoder | None = None,
    cal: ClusterCalibration | None = None,
    draw: DrawRealization | None = None,
    use_cache: bool | None = None,
) -> dict:
    """One channel realization decoded once, grouped per variant.

    Sharing the BCJR pass across variants gives paired rate samples, which
    tightens ordering comparisons between variants considerably.
    """
    if decoder is None:
        decoder = BcjrDecoder(cfg, ids)
    if use_cache is None:
        use_cache = ids.noiseless
    md = MultiDrawParams(n_strands=cfg.n_strands, coverage=coverage)
    blocks = np.stack([random_symbols(cfg.block_len, rng) for _ in range(cfg.n_strands)])
    offsets = [random_symbols(cfg.strand_len, rng) for _ in range(cfg.n_strands)]
    strands = [encode_strand(blocks[i], i, cfg, offsets[i]) for i in range(cfg.n_strands)]
    out = channel_pass(strands, ids, md, rng, draw=draw)
    decoded = decode_channel_output(out, offsets, decoder, use_cache=use_cache)
    decoder._cache.clear()  # hits only occur within one realization
    results = {}
    for variant in variants:
        clusters, indices, n_overflow = group_reads(decoded, cfg, variant, cal)
        llrs = combined_data_llrs(decoded, clusters, indices, cfg)
        rate = _rate_from_llrs(llrs, blocks, cfg.strand_len)
        index_errors = sum(
            1
            for members, idx in zip(clusters, indices)
            if variant != "genie" and any(decoded.sources[k] != idx for k in members)
        )
        results[variant] = RealizationResult(
            rate=rate,
            diagnostics={
                "n_decoded": len(decoded.apps),
                "n_rejected": decoded.n_rejected,
                "n_clusters": len(clusters),
                "index_overflow": n_overflow,
                "cluster_index_errors": index_errors,
            },
        )
    return results


def instantaneous_rate(
    cfg: CodeConfig,
    ids: IdsParams,
    coverage: float,
    variant: str,
    rng: np.random.Generator,
    decoder: BcjrDecoder | None = None,
    cal: ClusterCalibration | None = None,
    draw: DrawRealization | None = None,
    use_cache: bool | None = None,
) -> RealizationResult:
    """One full decode at a fixed draw realization; returns the BCJR-once
    instantaneous rate for fresh random strands."""
    return instantaneous_rate_multi(
        cfg, ids, coverage, (variant,), rng, decoder=decoder, cal=cal,
        draw=draw, use_cache=use_cache,
    )[variant]


@dataclass
class AirResult:
    rate: float
    samples: np.ndarray
    variant: str
    coverage: float

    @property
    def std_error(self) -> float:
        if len(self.samples) < 2:
            return float("nan")
        return float(self.samples.std(ddof=1) / math.sqrt(len(self.samples)))

    def confidence_interval(self, z: float = 1.96):
        return self.rate - z * self.std_error, self.rate + z * self.std_error


def _air_one(args):
    cfg, ids, coverage, variants, cal, trellis, master_seed, phi_idx = args
    rng = substream(master_seed, 1, phi_idx)
    decoder = BcjrDecoder(cfg, ids, trellis)
    res = instantaneous_rate_multi(cfg, ids, coverage, variants, rng, decoder=decoder, cal=cal)
    return [res[v].rate for v in variants]


def estimate_air_multi(
    cfg: CodeConfig,
    ids: IdsParams,
    coverage: float,
    variants: tuple,
    phi: int,
    master_seed: int,
    cal: ClusterCalibration | None = None,
    threads: int = 1,
    trellis: DriftTrellisConfig | None = None,
) -> dict:
    """Paired AIR estimates for several variants over the same phi
    realizations (one BCJR pass per realization)."""
    jobs = [(cfg, ids, coverage, variants, cal, trellis, master_seed, p) for p in range(phi)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_air_one, jobs))
    else:
        decoder = BcjrDecoder(cfg, ids, trellis)
        rows = [
            [
                r.rate
                for r in instantaneous_rate_multi(
                    cfg, ids, coverage, variants, substream(master_seed, 1, p),
                    decoder=decoder, cal=cal,
                ).values()
            ]
            for p in range(phi)
        ]
    mat = np.array(rows)
    return {
        v: AirResult(rate=float(mat[:, i].mean()), samples=mat[:, i], variant=v, coverage=coverage)
        for i, v in enumerate(variants)
    }


def estimate_air(
    cfg: CodeConfig,
    ids: IdsParams,
    coverage: float,
    variant: str,
    phi: int,
    master_seed: int,
    cal: ClusterCalibration | None = None,
    threads: int = 1,
    trellis: DriftTrellisConfig | None = None,
) -> AirResult:
    """Average the instantaneous rate over phi independent draw realizations."""
    return estimate_air_multi(
        cfg, ids, coverage, (variant,), phi, master_seed, cal=cal, threads=threads,
        trellis=trellis,
    )[variant]


def wilson_interval(k: int, n: int, z: float = 1.96):
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass
class OutageResult:
    q_out: float
    trials: int
    below: int
    ro_prime: float
    samples: np.ndarray
    ci_low: float
    ci_high: float


def estimate_outage(
    cfg: CodeConfig,
    ids: IdsParams,
    coverage: float,
    ro_prime: float,
    trials: int,
    master_seed: int,
    variant: str = "coded",
    cal: ClusterCalibration | None = None,
    threads: int = 1,
) -> OutageResult:
    """q_out = Pr(instantaneous rate < Ro'), with a Wilson interval."""
    if not 0.0 <= ro_prime <= 2.0:
        raise ValueError("ro_prime must be in [0, 2]")
    jobs = [
        (cfg, ids, coverage, (variant,), cal, None, master_seed, 2_000_000 + t)
        for t in range(trials)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            samples = [row[0] for row in pool.map(_air_one, jobs)]
    else:
        decoder = BcjrDecoder(cfg, ids)
        samples = [
            instantaneous_rate(cfg, ids, coverage, variant,
                               substream(master_seed, 1, 2_000_000 + t),
                               decoder=decoder, cal=cal).rate
            for t in range(trials)
        ]
    samples = np.array(samples)
    below = int(np.sum(samples < ro_prime))
    lo, hi = wilson_interval(below, trials)
    return OutageResult(
        q_out=below / trials, trials=trials, below=below, ro_prime=ro_prime,
        samples=samples, ci_low=lo, ci_high=hi,
    )


@dataclass
class FerResult:
    frames: int
    errors: int
    ro_prime: float | None = None
    per_frame: list = field(default_factory=list)

    @property
    def fer(self) -> float:
        return self.errors / self.frames if self.frames else float("nan")


@dataclass
class FerOptions:
    variant: str = "coded"
    all_zero: bool = True
    max_iter: int = 100
    trellis: DriftTrellisConfig | None = None
    collect_diagnostics: bool = True


def _fer_one(args):
    cfg, ids, coverage, H, options, cal, master_seed, trial = args
    return run_fer_frame(cfg, ids, coverage, H, substream(master_seed, 3, trial),
                         options=options, cal=cal)


def run_fer_frame(
    cfg: CodeConfig,
    ids: IdsParams,
    coverage: float,
    H: ParityCheckMatrix,
    rng: np.random.Generator,
    options: FerOptions,
    cal: ClusterCalibration | None = None,
    decoder: BcjrDecoder | None = None,
    codeword: np.ndarray | None = None,
):
    """One end-to-end frame. Returns (is_error, diagnostics)."""
    if H.n_cols != cfg.n_outer:
        raise ValueError("H column count must equal the outer blocklength")
    if decoder is None:
        decoder = BcjrDecoder(cfg, ids, options.trellis)
    if codeword is None:
        if not options.all_zero:
            raise ValueError("pass an encoded codeword when all_zero is off")
        codeword = np.zeros(cfg.n_outer, dtype=np.uint8)
    blocks = codeword.reshape(cfg.n_strands, cfg.block_len)
    md = MultiDrawParams(n_strands=cfg.n_strands, coverage=coverage)
    offsets = [random_symbols(cfg.strand_len, rng) for _ in range(cfg.n_strands)]
    strands = [encode_strand(blocks[i], i, cfg, offsets[i]) for i in range(cfg.n_strands)]
    out = channel_pass(strands, ids, md, rng)
    decoded = decode_channel_output(out, offsets, decoder, use_cache=ids.noiseless)
    clusters, indices, n_overflow = group_reads(decoded, cfg, options.variant, cal)
    llrs = combined_data_llrs(decoded, clusters, indices, cfg)
    covered = llrs.any(axis=(1, 2))
    # Softmax of the summed log-ratios gives the ordered outer priors.
    m = llrs.max(axis=2, keepdims=True)
    q = np.exp(llrs - m)
    priors = (q / q.sum(axis=2, keepdims=True)).reshape(cfg.n_outer, 4)
    result: BpResult = bp_decode(H, priors, max_iter=options.max_iter)
    is_error = not np.array_equal(result.estimate, codeword)
    diag = {}
    if options.collect_diagnostics:
        read_truth = decoded.sources
        diag = {
            "erased_blocks": int(np.sum(~covered)),
            "index_overflow": n_overflow,
            "bp_iterations": result.iterations,
            "bp_success": result.success,
            "n_rejected": decoded.n_rejected,
        }
        if options.variant == "coded-cluster" and len(decoded.apps) > 1:
            diag.update(cluster_diagnostics(clusters, read_truth))
    return is_error, diag


def run_fer(
    cfg: CodeConfig,
    ids: IdsParams,
    coverage: float,
    H: ParityCheckMatrix,
    trials: int,
    master_seed: int,
    options: FerOptions | None = None,
    cal: ClusterCalibration | None = None,
    threads: int = 1,
) -> FerResult:
    if options is None:
        options = FerOptions()
    if threads > 1:
        jobs = [(cfg, ids, coverage, H, options, cal, master_seed, t) for t in range(trials)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_fer_one, jobs))
    else:
        decoder = BcjrDecoder(cfg, ids, options.trellis)
        outcomes = [
            run_fer_frame(cfg, ids, coverage, H, substream(master_seed, 3, t),
                          options=options, cal=cal, decoder=decoder)
            for t in range(trials)
        ]
    errors = sum(int(e) for e, _ in outcomes)
    return FerResult(frames=trials, errors=errors, per_frame=[d for _, d in outcomes])
