"""Per-strand code configuration, random offsets, and strand encoding.

A stored strand is head-half index codeword | marker-repeat coded data
block | tail-half index codeword, plus a strand-specific random offset
(GF(4) addition) known to the decoder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .inner_codes import IndexCodebook, index_encode, mr_encode

OFFSET_STREAM = 0xD5


@dataclass(frozen=True)
class CodeConfig:
    """Blocklength and rate bookkeeping for the concatenated scheme."""

    n_strands: int  # M
    block_len: int  # Lo, data symbols per strand
    codebook: IndexCodebook
    marker_positions: tuple  # 1-based positions duplicated by the inner code
    outer_rate: float | None = None  # Ro in (0,1]; None when no outer code

    def __post_init__(self):
        if self.kix < math.log(self.n_strands, 4) - 1e-9:
            raise ValueError("kix must be at least log4(M)")
        for p in self.marker_positions:
            if not 1 <= p <= self.block_len:
                raise ValueError("marker position outside data block")

    @property
    def kix(self) -> int:
        return 2 * self.codebook.k_half

    @property
    def nix(self) -> int:
        return 2 * self.codebook.n_half

    @property
    def n_markers(self) -> int:
        return len(self.marker_positions)

    @property
    def inner_len(self) -> int:
        return self.block_len + self.n_markers

    @property
    def strand_len(self) -> int:
        return self.nix + self.inner_len

    @property
    def v_len(self) -> int:
        return self.kix + self.block_len

    @property
    def n_outer(self) -> int:
        return self.n_strands * self.block_len

    @property
    def inner_rate(self) -> float:
        return self.block_len / self.inner_len

    @property
    def index_rate(self) -> float:
        return self.kix / self.nix

    @property
    def rate_limit(self) -> float:
        """Rate ceiling 2*Ri imposed by the inner code, in bits/nucleotide."""
        return 2.0 * self.block_len / self.inner_len

    @property
    def overall_rate(self) -> float:
        if self.outer_rate is None:
            raise ValueError("no outer rate configured")
        return 2.0 * self.outer_rate * self.block_len / self.strand_len


def offset_sequence(master_seed: int, strand_index: int, strand_len: int) -> np.ndarray:
    """Strand offset, reproducible from (master seed, strand index)."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(OFFSET_STREAM, strand_index))
    rng = np.random.default_rng(ss)
    return rng.integers(0, 4, size=strand_len, dtype=np.uint8)


def encode_strand(
    data_block: np.ndarray, index: int, cfg: CodeConfig, offset: np.ndarray
) -> np.ndarray:
    """head | mr(data) | tail, plus the offset (GF(4) addition)."""
    data_block = np.asarray(data_block, dtype=np.uint8)
    if len(data_block) != cfg.block_len:
        raise ValueError("data block length mismatch")
    if not 0 <= index < 4**cfg.kix:
        raise ValueError("index out of range")
    head, tail = index_encode(index, cfg.kix, cfg.codebook)
    bare = np.concatenate([head, mr_encode(data_block, list(cfg.marker_positions)), tail])
    if len(offset) != cfg.strand_len:
        raise ValueError("offset length mismatch")
    return np.bitwise_xor(bare, offset)


@dataclass
class EncodedPool:
    """The M encoded strands of one frame plus their offsets."""

    strands: list = field(default_factory=list)
    offsets: list = field(default_factory=list)


def encode_pool(blocks: np.ndarray, cfg: CodeConfig, master_seed: int) -> EncodedPool:
    """Encode M data blocks (array (M, Lo)) into the stored strand pool."""
    pool = EncodedPool()
    for i in range(cfg.n_strands):
        off = offset_sequence(master_seed, i, cfg.strand_len)
        pool.offsets.append(off)
        pool.strands.append(encode_strand(blocks[i], i, cfg, off))
    return pool
