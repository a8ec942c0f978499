"""Simulation and coding toolkit for index-based concatenated codes on the
multi-draw DNA storage channel."""

__version__ = "0.1.0"

from .channel import EXPERIMENT_IDS, IdsParams, MultiDrawParams, channel_pass, transmit_ids
from .gf4 import from_dna, gf4_add, gf4_inv, gf4_mul, to_dna
from .inner_codes import IndexCodebook, bundled_codebook, levenshtein, search_index_code
from .strand import CodeConfig, encode_strand, offset_sequence

__all__ = [
    "__version__",
    "EXPERIMENT_IDS",
    "IdsParams",
    "MultiDrawParams",
    "channel_pass",
    "transmit_ids",
    "from_dna",
    "to_dna",
    "gf4_add",
    "gf4_mul",
    "gf4_inv",
    "IndexCodebook",
    "bundled_codebook",
    "levenshtein",
    "search_index_code",
    "CodeConfig",
    "encode_strand",
    "offset_sequence",
]
