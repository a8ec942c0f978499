"""Single-strand IDS channel and the three-phase multi-draw channel.

The multi-draw channel draws N = round(c*M) reads from the stored strands
uniformly with replacement, passes each draw through an independent IDS
channel, and returns the noisy reads in a uniformly random order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class IdsParams:
    """Insertion / deletion / substitution probabilities of the IDS channel."""

    p_ins: float = 0.0
    p_del: float = 0.0
    p_sub: float = 0.0

    def __post_init__(self):
        for name in ("p_ins", "p_del", "p_sub"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {v}")
        if self.p_ins + self.p_del >= 1.0:
            raise ValueError("p_ins + p_del must be < 1")

    @property
    def p_trans(self) -> float:
        return 1.0 - self.p_ins - self.p_del

    @property
    def noiseless(self) -> bool:
        return self.p_ins == 0.0 and self.p_del == 0.0 and self.p_sub == 0.0


# Channel parameters observed in the TrellisBMA sequencing experiment; used
# as the default operating point throughout.
EXPERIMENT_IDS = IdsParams(p_ins=0.017, p_del=0.020, p_sub=0.022)


@dataclass(frozen=True)
class MultiDrawParams:
    """Draw geometry: M stored strands, coverage depth c, N = round(c*M) reads."""

    n_strands: int
    coverage: float
    strand_len: int = 0  # only needed for beta

    def __post_init__(self):
        if self.n_strands < 1:
            raise ValueError("n_strands must be >= 1")
        if self.n_reads < 1:
            raise ValueError("coverage too small: no reads")

    @property
    def n_reads(self) -> int:
        # Ties round half up; the model only defines integer products.
        return int(math.floor(self.coverage * self.n_strands + 0.5))

    @property
    def beta(self) -> float:
        if self.strand_len <= 0:
            raise ValueError("strand_len not set")
        return math.log(self.n_strands, 4) / self.strand_len


@dataclass
class DrawRealization:
    """Outcome of the draw phase: per-strand counts and per-read sources."""

    counts: np.ndarray  # shape (M,), sums to N
    assignment: np.ndarray  # shape (N,), source strand per read

    def __post_init__(self):
        assert int(self.counts.sum()) == len(self.assignment)


@dataclass
class ChannelOutput:
    """Permuted noisy reads. ground_truth maps read -> source strand index.

    Ground truth is for diagnostics and cluster scoring only; decoders never
    see it.
    """

    reads: list = field(default_factory=list)  # list of uint8 arrays
    ground_truth: np.ndarray | None = None


def transmit_ids(x: np.ndarray, params: IdsParams, rng: np.random.Generator) -> np.ndarray:
    """Pass one strand through the IDS channel.

    Per enqueued symbol: insert a uniform random symbol with p_ins (symbol
    stays in the queue), delete with p_del, or transmit with p_trans, in
    which case it is replaced by a uniform different symbol with p_sub.
    """
    if params.noiseless:
        return np.array(x, dtype=np.uint8, copy=True)
    x = np.asarray(x, dtype=np.uint8)
    n = len(x)
    p_ins, p_del, p_sub = params.p_ins, params.p_del, params.p_sub
    # Insertions before each symbol resolves form a geometric run.
    if p_ins > 0.0:
        n_ins = rng.geometric(1.0 - p_ins, size=n) - 1
    else:
        n_ins = np.zeros(n, dtype=np.int64)
    # Conditioned on leaving the insertion run, the symbol is deleted with
    # probability p_del / (p_del + p_trans).
    deleted = rng.random(n) < (p_del / (p_del + params.p_trans))
    kept = ~deleted
    sent = x[kept]
    if p_sub > 0.0:
        sub = rng.random(len(sent)) < p_sub
        offs = rng.integers(1, 4, size=int(sub.sum()), dtype=np.uint8)
        sent = sent.copy()
        sent[sub] = (sent[sub] + offs) % 4
    total_ins = int(n_ins.sum())
    inserted = rng.integers(0, 4, size=total_ins, dtype=np.uint8)
    if total_ins == 0:
        return sent
    # Interleave: for each input position, its insertion run, then the
    # transmitted symbol (if not deleted).
    out = np.empty(total_ins + len(sent), dtype=np.uint8)
    # Output slot where each input symbol's run begins.
    run_start = np.concatenate(([0], np.cumsum(n_ins + kept)[:-1]))
    ins_pos = np.repeat(run_start, n_ins) + _run_offsets(n_ins)
    out[ins_pos] = inserted
    sym_pos = run_start[kept] + n_ins[kept]
    out[sym_pos] = sent
    return out


def _run_offsets(counts: np.ndarray) -> np.ndarray:
    """(0..c0-1, 0..c1-1, ...) for run lengths counts."""
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    idx = np.arange(total)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    return idx - starts


def expected_length_factor(params: IdsParams) -> float:
    """E[len(y)] / len(x) for the IDS channel: (1 - p_del) / (1 - p_ins)."""
    return (1.0 - params.p_del) / (1.0 - params.p_ins)


def draw_strands(params: MultiDrawParams, rng: np.random.Generator) -> DrawRealization:
    """Draw N reads uniformly with replacement from the M strands."""
    assignment = rng.integers(0, params.n_strands, size=params.n_reads)
    counts = np.bincount(assignment, minlength=params.n_strands)
    return DrawRealization(counts=counts, assignment=assignment)


def channel_pass(
    strands: list,
    ids: IdsParams,
    md: MultiDrawParams,
    rng: np.random.Generator,
    draw: DrawRealization | None = None,
) -> ChannelOutput:
    """Draw -> independent IDS transmissions -> uniform random permutation.

    An explicit draw realization may be supplied to decouple draw and noise
    randomness (used by the outage estimator).
    """
    if len(strands) != md.n_strands:
        raise ValueError("strand list length does not match n_strands")
    lengths = {len(s) for s in strands}
    if len(lengths) > 1:
        raise ValueError("all strands must have the same length")
    if draw is None:
        draw = draw_strands(md, rng)
    noisy = [transmit_ids(strands[src], ids, rng) for src in draw.assignment]
    perm = rng.permutation(len(noisy))
    reads = [noisy[p] for p in perm]
    ground_truth = draw.assignment[perm]
    return ChannelOutput(reads=reads, ground_truth=ground_truth)
