"""Deterministic derivation of per-task RNG streams from one master seed.

Streams are keyed by stable string/int parts (scene ids, band labels, crop
indices) through SHA-256, so results never depend on scheduling order,
thread count, or Python's salted ``hash``.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, *parts) -> int:
    """Collapse ``(master_seed, *parts)`` into a stable 64-bit stream seed."""
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode("ascii"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "big")


def derive_rng(master_seed: int, *parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *parts))
