"""Seed derivation for reproducible, independently labeled RNG streams.

All randomness in the package flows from a single 64-bit root seed.
Every consumer derives its own generator from (root, label, indices),
so replicas can run in any order or in parallel without changing
results.
"""

import zlib

import numpy as np

__all__ = ["derive", "spawn_key"]


def spawn_key(label, *indices):
    """Map a text label plus integer indices to a SeedSequence spawn key."""
    key = (zlib.crc32(label.encode("utf-8")),)
    for ix in indices:
        ix = int(ix)
        if ix < 0:
            raise ValueError("stream indices must be non-negative")
        key = key + (ix,)
    return key


def derive(root_seed, label, *indices):
    """Return a Generator for the stream named by label and indices.

    The same (root_seed, label, indices) triple always yields the same
    stream, independent of construction order.
    """
    ss = np.random.SeedSequence(entropy=int(root_seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=spawn_key(label, *indices))
    return np.random.Generator(np.random.PCG64(ss))
