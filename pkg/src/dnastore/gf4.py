"""Arithmetic over GF(4) and the mapping to the DNA alphabet.

Symbols are plain integers in {0, 1, 2, 3}, interpreted as 2-bit vectors for
addition (XOR) and as {0, 1, x, x+1} modulo x^2 + x + 1 for multiplication.
Vectors are numpy uint8 arrays.
"""

from __future__ import annotations

import numpy as np

ALPHABET = "ACGT"

# Multiplication table for GF(4) with the polynomial x^2 + x + 1.
MUL_TABLE = np.array(
    [
        [0, 0, 0, 0],
        [0, 1, 2, 3],
        [0, 2, 3, 1],
        [0, 3, 1, 2],
    ],
    dtype=np.uint8,
)

# Multiplicative inverses of 1, 2, 3 (index 0 unused).
INV_TABLE = np.array([0, 1, 3, 2], dtype=np.uint8)


def gf4_add(a, b):
    """Addition in GF(4): XOR of the 2-bit representations."""
    return np.bitwise_xor(a, b)


def gf4_mul(a, b):
    """Multiplication in GF(4)."""
    return MUL_TABLE[a, b]


def gf4_inv(a):
    """Multiplicative inverse of a nonzero element."""
    if np.any(np.asarray(a) == 0):
        raise ZeroDivisionError("0 has no multiplicative inverse in GF(4)")
    return INV_TABLE[a]


def to_dna(symbols) -> str:
    """Map a GF(4) vector to a DNA string (0->A, 1->C, 2->G, 3->T)."""
    return "".join(ALPHABET[int(s)] for s in np.asarray(symbols).ravel())


def from_dna(seq: str) -> np.ndarray:
    """Inverse of ``to_dna``. Raises ValueError on characters outside ACGT."""
    out = np.empty(len(seq), dtype=np.uint8)
    for i, ch in enumerate(seq):
        idx = ALPHABET.find(ch)
        if idx < 0:
            raise ValueError(f"illegal nucleotide {ch!r} at position {i}")
        out[i] = idx
    return out


def random_symbols(n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.u.d. GF(4) symbols."""
    return rng.integers(0, 4, size=n, dtype=np.uint8)
