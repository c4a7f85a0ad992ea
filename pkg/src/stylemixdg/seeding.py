"""Splittable deterministic seeding.

All randomness in the toolkit flows from a single 64-bit root seed.
Sub-streams are derived by hashing the root seed together with a string
context (image id, epoch, position, ...), so results are independent of
processing order and worker count.
"""

import hashlib

import numpy as np

_SEP = b"\x1f"


def derive_seed(*parts) -> int:
    """Hash an arbitrary tuple of parts into a 64-bit sub-seed."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(_SEP)
    return int.from_bytes(h.digest(), "little")


def rng_for(*parts) -> np.random.Generator:
    """A fresh PCG64 generator keyed by the given context parts."""
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))
