"""Marker-repeat code, index codebooks, Levenshtein tooling, and the
codebook search."""

import itertools

import numpy as np
import pytest

from dnastore.gf4 import random_symbols
from dnastore.inner_codes import (
    DistanceSpectrum,
    IndexCodebook,
    SearchInfeasible,
    bundled_codebook,
    digits_to_int,
    distance_spectrum,
    even_marker_positions,
    index_encode,
    int_to_digits,
    levenshtein,
    mr_encode,
    mr_strip,
    search_index_code,
)


def test_even_marker_positions():
    assert even_marker_positions(10, 1) == [10]
    assert even_marker_positions(10, 2) == [5, 10]
    assert even_marker_positions(90, 9) == [10, 20, 30, 40, 50, 60, 70, 80, 90]
    assert even_marker_positions(7, 0) == []
    with pytest.raises(ValueError):
        even_marker_positions(5, 6)


def test_mr_encode_duplicates_markers():
    block = np.array([1, 2, 3, 0], dtype=np.uint8)
    enc = mr_encode(block, [2, 4])
    assert enc.tolist() == [1, 2, 2, 3, 0, 0]


def test_mr_round_trip_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        lo = int(rng.integers(1, 40))
        n_markers = int(rng.integers(0, lo + 1))
        markers = sorted(rng.choice(np.arange(1, lo + 1), size=n_markers, replace=False).tolist())
        block = random_symbols(lo, rng)
        enc = mr_encode(block, markers)
        assert len(enc) == lo + n_markers
        assert np.array_equal(mr_strip(enc, markers, lo), block)


def test_mr_encode_rejects_bad_positions():
    with pytest.raises(ValueError):
        mr_encode(np.zeros(4, dtype=np.uint8), [5])
    with pytest.raises(ValueError):
        mr_encode(np.zeros(4, dtype=np.uint8), [0])


def test_levenshtein_basics():
    assert levenshtein([], []) == 0
    assert levenshtein([1, 2, 3], [1, 2, 3]) == 0
    assert levenshtein([1, 2, 3], [1, 3]) == 1
    assert levenshtein([0, 1], [1, 0]) == 2
    assert levenshtein([0, 0, 0], [1, 1, 1]) == 3
    assert levenshtein("kitten", "sitting") == 3


def test_levenshtein_metric_properties_random():
    rng = np.random.default_rng(1)
    for _ in range(300):
        a = random_symbols(int(rng.integers(0, 9)), rng).tolist()
        b = random_symbols(int(rng.integers(0, 9)), rng).tolist()
        c = random_symbols(int(rng.integers(0, 9)), rng).tolist()
        dab = levenshtein(a, b)
        assert dab == levenshtein(b, a)
        assert (dab == 0) == (a == b)
        assert dab <= levenshtein(a, c) + levenshtein(c, b)
        assert dab >= abs(len(a) - len(b))
        assert dab <= max(len(a), len(b))


def test_bundled_3_1_codebook():
    book = bundled_codebook("3_1")
    assert book.k_half == 1
    assert book.n_half == 3
    assert book.codewords == ((0, 3, 3), (1, 0, 2), (2, 1, 1), (3, 2, 0))
    spec = distance_spectrum(book)
    assert spec.min_distance == 3
    assert spec.histogram == {3: 6}


def test_bundled_6_2_codebook():
    book = bundled_codebook("6_2")
    assert book.k_half == 2
    assert book.n_half == 6
    assert len(book.codewords) == 16
    spec = distance_spectrum(book)
    assert spec.min_distance >= 4
    assert sum(spec.histogram.values()) == 120


def test_identity_codebook():
    book = IndexCodebook.identity(2)
    assert book.n_half == 2
    assert book.codewords[9] == (2, 1)
    assert distance_spectrum(book).min_distance == 1


def test_codebook_validation():
    with pytest.raises(ValueError):
        IndexCodebook(codewords=((0,), (1,), (2,)), k_half=1)
    with pytest.raises(ValueError):
        IndexCodebook(codewords=((0, 0), (1,), (2, 2), (3, 3)), k_half=1)
    with pytest.raises(ValueError):
        IndexCodebook(codewords=((0,), (0,), (2,), (3,)), k_half=1)


def test_codebook_serialization_round_trip(tmp_path):
    book = bundled_codebook("6_2")
    path = tmp_path / "book.txt"
    book.save(path)
    again = IndexCodebook.load(path)
    assert again == book


def test_digit_conversions():
    assert int_to_digits(0b1101_10, 3) == (3, 1, 2)
    assert digits_to_int((3, 1, 2)) == 0b110110
    for i in range(64):
        assert digits_to_int(int_to_digits(i, 3)) == i
    with pytest.raises(ValueError):
        int_to_digits(64, 3)


def test_index_encode_splits_digits():
    book = bundled_codebook("3_1")
    head, tail = index_encode(0b0111, 2, book)  # digits (1, 3)
    assert head.tolist() == [1, 0, 2]
    assert tail.tolist() == [3, 2, 0]
    with pytest.raises(ValueError):
        index_encode(0, 4, book)


def test_distance_spectrum_counts_pairs():
    book = IndexCodebook.identity(1)
    spec = distance_spectrum(book)
    assert isinstance(spec, DistanceSpectrum)
    assert spec.histogram == {1: 6}


def test_search_reproduces_min_dist_3():
    book, exhaustive = search_index_code(3, 4, 3)
    assert exhaustive
    assert distance_spectrum(book).min_distance == 3
    assert len(book.codewords) == 4
    assert book.n_half == 3


def test_search_infeasible():
    # 4 words of length 2 at pairwise distance >= 3 cannot exist (d <= max len).
    with pytest.raises(SearchInfeasible):
        search_index_code(2, 4, 3)


def test_search_trivial_distance_one():
    book, exhaustive = search_index_code(1, 4, 1)
    assert exhaustive
    assert sorted(book.codewords) == [(0,), (1,), (2,), (3,)]


def test_search_guard():
    with pytest.raises(ValueError):
        search_index_code(11, 4, 3)


def test_search_greedy_path():
    rng = np.random.default_rng(2)
    book, exhaustive = search_index_code(4, 4, 3, rng=rng)
    assert not exhaustive
    assert distance_spectrum(book).min_distance >= 3


def test_bundled_books_beat_identity_spectrum():
    # The shipped codebooks dominate uncoded indices of equal k_half.
    for name in ("3_1", "6_2"):
        book = bundled_codebook(name)
        ident = IndexCodebook.identity(book.k_half)
        assert distance_spectrum(book).min_distance > distance_spectrum(ident).min_distance
