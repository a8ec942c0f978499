"""Marker-repeat inner code, index codebooks, and Levenshtein-distance tools.

The marker-repeat code duplicates selected input symbols to aid
resynchronization. Index codebooks are short GF(4) block codes with good
pairwise Levenshtein distance; the two codebooks used throughout (a [3,1]_4
and a [6,2]_4 code) ship as package data. ``search_index_code`` re-derives
such codebooks as maximum cliques of the distance graph.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np


def even_marker_positions(block_len: int, n_markers: int) -> list[int]:
    """Marker positions (1-based, symbol duplicated after encoding) spread
    as evenly as possible over the block."""
    if n_markers < 0 or n_markers > block_len:
        raise ValueError("invalid marker count")
    return [math.ceil((j + 1) * block_len / n_markers) for j in range(n_markers)] if n_markers else []


def mr_encode(block: np.ndarray, marker_positions: list[int]) -> np.ndarray:
    """Duplicate the symbol at each marker position (1-based)."""
    block = np.asarray(block, dtype=np.uint8)
    for p in marker_positions:
        if not 1 <= p <= len(block):
            raise ValueError(f"marker position {p} outside block of length {len(block)}")
    out = []
    marker_set = set(marker_positions)
    for i, sym in enumerate(block, start=1):
        out.append(sym)
        if i in marker_set:
            out.append(sym)
    return np.array(out, dtype=np.uint8)


def mr_strip(encoded: np.ndarray, marker_positions: list[int], block_len: int) -> np.ndarray:
    """Inverse of mr_encode for a clean (error-free) sequence."""
    out = np.empty(block_len, dtype=np.uint8)
    marker_set = set(marker_positions)
    j = 0
    for i in range(1, block_len + 1):
        out[i - 1] = encoded[j]
        j += 2 if i in marker_set else 1
    return out


@dataclass(frozen=True)
class IndexCodebook:
    """Half-index codebook: 4**k_half codewords of length n_half.

    The full index code is the serial concatenation of two copies of this
    code, one per strand end. Codeword i encodes the info value i (base-4
    digits, most significant first).
    """

    codewords: tuple  # tuple of tuples of ints
    k_half: int

    def __post_init__(self):
        if len(self.codewords) != 4**self.k_half:
            raise ValueError("codebook size must be 4**k_half")
        lengths = {len(c) for c in self.codewords}
        if len(lengths) != 1:
            raise ValueError("codewords must have equal length")
        if len(set(self.codewords)) != len(self.codewords):
            raise ValueError("codewords must be distinct")

    @property
    def n_half(self) -> int:
        return len(self.codewords[0])

    def as_array(self) -> np.ndarray:
        return np.array(self.codewords, dtype=np.uint8)

    @classmethod
    def identity(cls, k_half: int) -> "IndexCodebook":
        """Uncoded index: codeword = the info digits themselves."""
        words = tuple(tuple(d) for d in itertools.product(range(4), repeat=k_half))
        return cls(codewords=words, k_half=k_half)

    @classmethod
    def from_lines(cls, lines) -> "IndexCodebook":
        words = []
        for ln in lines:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            words.append(tuple(int(ch) for ch in ln))
        k_half = round(math.log(len(words), 4))
        return cls(codewords=tuple(words), k_half=k_half)

    @classmethod
    def load(cls, path) -> "IndexCodebook":
        with open(path) as f:
            return cls.from_lines(f)

    def save(self, path) -> None:
        with open(path, "w") as f:
            for cw in self.codewords:
                f.write("".join(str(s) for s in cw) + "\n")


def bundled_codebook(name: str) -> IndexCodebook:
    """Load one of the shipped codebooks: '3_1' or '6_2'."""
    text = resources.files("dnastore.data").joinpath(f"index_{name}.txt").read_text()
    return IndexCodebook.from_lines(text.splitlines())


def int_to_digits(i: int, n_digits: int) -> tuple:
    """Base-4 digits of i, most significant first."""
    if not 0 <= i < 4**n_digits:
        raise ValueError(f"index {i} out of range for {n_digits} base-4 digits")
    return tuple((i >> (2 * (n_digits - 1 - d))) & 3 for d in range(n_digits))


def digits_to_int(digits) -> int:
    v = 0
    for d in digits:
        v = (v << 2) | int(d)
    return v


def index_encode(i: int, kix: int, book: IndexCodebook):
    """Encode index i into (head, tail) half-codewords."""
    if kix != 2 * book.k_half:
        raise ValueError("kix must equal 2 * k_half of the codebook")
    digits = int_to_digits(i, kix)
    head = np.array(book.codewords[digits_to_int(digits[: kix // 2])], dtype=np.uint8)
    tail = np.array(book.codewords[digits_to_int(digits[kix // 2:])], dtype=np.uint8)
    return head, tail


def levenshtein(a, b) -> int:
    """Unit-cost edit distance (insertions, deletions, substitutions)."""
    a = tuple(a)
    b = tuple(b)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, sa in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, sb in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (sa != sb))
        prev = cur
    return prev[-1]


@dataclass
class DistanceSpectrum:
    histogram: dict  # distance -> pair count

    @property
    def min_distance(self) -> int:
        if not self.histogram:
            raise ValueError("empty spectrum")
        return min(self.histogram)

    def as_sorted_items(self):
        return sorted(self.histogram.items())


def distance_spectrum(book: IndexCodebook) -> DistanceSpectrum:
    """Histogram of pairwise Levenshtein distances over unordered pairs."""
    hist: dict[int, int] = {}
    for x, y in itertools.combinations(book.codewords, 2):
        d = levenshtein(x, y)
        hist[d] = hist.get(d, 0) + 1
    return DistanceSpectrum(histogram=hist)


class SearchInfeasible(Exception):
    """No codebook of the requested size exists at the requested distance."""


def _spectrum_key(words) -> tuple:
    """Lexicographic spectrum ranking: fewer small-distance pairs wins."""
    hist: dict[int, int] = {}
    for x, y in itertools.combinations(words, 2):
        d = levenshtein(x, y)
        hist[d] = hist.get(d, 0) + 1
    max_d = max(hist) if hist else 0
    return tuple(hist.get(d, 0) for d in range(max_d + 1))


def search_index_code(
    n: int,
    target_size: int,
    min_dist: int,
    rng: np.random.Generator | None = None,
    rank_spectrum: bool = False,
):
    """Find target_size words of length n with pairwise Levenshtein distance
    >= min_dist, as a clique in the distance graph over all 4**n words.

    Exact branch-and-bound for n <= 3; randomized greedy restarts (flagged
    non-exhaustive) for larger n. Returns (IndexCodebook, exhaustive_flag).
    """
    if 4**n > 2**20:
        raise ValueError(f"4**{n} words exceed the tractability guard")
    words = list(itertools.product(range(4), repeat=n))
    nv = len(words)
    adj = np.zeros((nv, nv), dtype=bool)
    for i in range(nv):
        for j in range(i + 1, nv):
            if levenshtein(words[i], words[j]) >= min_dist:
                adj[i, j] = adj[j, i] = True

    if n <= 3:
        cliques = _exact_cliques(adj, target_size, collect_all=rank_spectrum)
        if not cliques:
            raise SearchInfeasible(
                f"no clique of size {target_size} at distance {min_dist} for n={n}"
            )
        if rank_spectrum:
            cliques.sort(key=lambda c: _spectrum_key([words[i] for i in c]))
        chosen = cliques[0]
        exhaustive = True
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        chosen = _greedy_clique(adj, target_size, rng)
        if chosen is None:
            raise SearchInfeasible(
                f"greedy search found no clique of size {target_size} (non-exhaustive)"
            )
        exhaustive = False

    selected = sorted(words[i] for i in chosen)
    k_half = math.log(target_size, 4)
    if abs(k_half - round(k_half)) > 1e-9:
        raise ValueError("target_size must be a power of 4 to form a codebook")
    book = IndexCodebook(codewords=tuple(selected), k_half=round(k_half))
    # Post-hoc verification of the distance promise.
    assert distance_spectrum(book).min_distance >= min_dist
    return book, exhaustive


def _exact_cliques(adj: np.ndarray, size: int, collect_all: bool = False):
    """Branch-and-bound clique enumeration with degree-ordered vertices."""
    nv = adj.shape[0]
    order = sorted(range(nv), key=lambda v: -int(adj[v].sum()))
    found: list[tuple] = []

    def extend(clique, candidates):
        if len(clique) == size:
            found.append(tuple(clique))
            return not collect_all
        if len(clique) + len(candidates) < size:
            return False
        for idx, v in enumerate(candidates):
            nxt = [u for u in candidates[idx + 1:] if adj[v, u]]
            clique.append(v)
            if extend(clique, nxt):
                return True
            clique.pop()
        return False

    extend([], order if not collect_all else list(range(nv)))
    if collect_all:
        # Deduplicate by sorted vertex set.
        found = sorted({tuple(sorted(c)) for c in found})
    return found


def _greedy_clique(adj: np.ndarray, size: int, rng: np.random.Generator, restarts: int = 200):
    nv = adj.shape[0]
    for _ in range(restarts):
        perm = rng.permutation(nv)
        clique: list[int] = []
        for v in perm:
            if all(adj[v, u] for u in clique):
                clique.append(v)
            if len(clique) == size:
                return clique
    return None
