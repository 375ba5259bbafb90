"""Deterministic stream derivation for parallel replications.

Streams are keyed by (base seed, purpose tag, replication index) through a
cryptographic hash feeding a counter-based Philox generator, so any two
distinct keys give independent streams and the same key always reproduces
the same stream, regardless of scheduling or worker count.
"""
from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_stream"]


def derive_stream(base_seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Independent, reproducible generator for one (tag, index) purpose."""
    material = f"{int(base_seed)}|{tag}|{int(index)}".encode()
    digest = hashlib.sha256(material).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
