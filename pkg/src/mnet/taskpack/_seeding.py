"""Deterministic sub-seed derivation shared by the generators.

Plain ``random.Random(seed)`` streams would collide between generators that
share a seed, so every generator derives its own stream from a labeled
SHA-256 of (label, seed, params). Stable across platforms and runs.
"""

from __future__ import annotations

import hashlib
import random


def derive_rng(label: str, *parts) -> random.Random:
    material = "|".join([label, *map(str, parts)]).encode("utf-8")
    seed = int.from_bytes(hashlib.sha256(material).digest()[:8], "big")
    return random.Random(seed)
