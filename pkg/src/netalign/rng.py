"""Seeded random streams.

Every sampling operation draws from its own Philox (counter-based, 64-bit)
stream keyed by ``(seed, tag)``. The counter plays the role of the draw
index, so adding draws to one operation never shifts the stream seen by
another operation with a different tag.
"""
from __future__ import annotations

import zlib

import numpy as np

_SEED_MASK = (1 << 64) - 1


def stream(seed: int, tag: str) -> np.random.Generator:
    if seed < 0 or seed > _SEED_MASK:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    key = zlib.crc32(tag.encode("utf-8"))
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(key,))
    return np.random.Generator(np.random.Philox(ss))


def round_half_up(x: float) -> int:
    """Round to nearest integer, halves away from zero (x >= 0 assumed)."""
    return int(np.floor(x + 0.5))
