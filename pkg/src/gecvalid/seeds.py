"""Deterministic RNG stream derivation.

Every sampling site derives its own stream from (global seed, identifying
parts, purpose tag), so evaluation order and parallelism cannot change any
sampled value.
"""

import hashlib
import random


def derive_seed(*parts) -> int:
    """Hash arbitrary parts into a stable 64-bit seed."""
    key = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(*parts) -> random.Random:
    """A fresh Random stream keyed by the given parts."""
    return random.Random(derive_seed(*parts))
