"""Derived random streams.

Every stochastic step draws from its own Philox stream whose 128-bit key is
the BLAKE2b digest of ``(master_seed, *labels)``. Two calls with the same
labels always see the same numbers, regardless of which worker runs them or
in which order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(master_seed: int, *labels) -> int:
    if master_seed < 0 or master_seed >= 2**64:
        raise ValueError("master_seed must be a 64-bit unsigned integer")
    text = ":".join([str(int(master_seed))] + [str(label) for label in labels])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=16).digest()
    return int.from_bytes(digest, "little")


def child_stream(master_seed: int, *labels) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, *labels)))
