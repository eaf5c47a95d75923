"""Named random streams derived from a single master seed.

Every source of randomness in the package draws from a generator obtained
here, so a run is fully determined by one 64-bit master seed. Streams are
split by hashing a purpose string and an index, which keeps generators
independent regardless of the order in which they are created.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stream_key(purpose: str, index: int = 0) -> int:
    digest = hashlib.blake2b(
        f"{purpose}/{index}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def seed_sequence(master_seed: int, purpose: str, index: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed & _MASK64, stream_key(purpose, index)])


def rng(master_seed: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Generator for the named stream under the given master seed."""
    return np.random.default_rng(seed_sequence(master_seed, purpose, index))


def child_seed(master_seed: int, purpose: str, index: int = 0) -> int:
    """A derived 64-bit master seed for a sub-computation."""
    return seed_sequence(master_seed, purpose, index).generate_state(1, np.uint64)[0].item()
