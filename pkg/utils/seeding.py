"""
Seed derivation for reproducible noise, dropout and shuffling streams
"""
from typing import Sequence
import zlib

import numpy as np


def derive_seed(*keys: int) -> int:
    """Collapse a tuple of non-negative integers into one 32-bit seed"""
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


def document_key(doc_id: str) -> int:
    """Stable integer key of a document id (crc32 of its UTF-8 bytes)"""
    return zlib.crc32(doc_id.encode("utf-8"))


def run_seeds(seed: int, runs: int) -> Sequence[int]:
    """Seeds of repeated runs: seed, seed + 1, ..."""
    return [seed + r for r in range(runs)]
