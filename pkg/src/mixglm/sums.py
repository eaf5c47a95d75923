"""Deterministic chunked accumulation helpers.

Sample sums are computed per fixed-size chunk and merged with a balanced
pairwise tree, so results do not depend on how work is sharded as long as
chunk boundaries are fixed, and cancellation is reduced for mixed-sign
terms.
"""

from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

DEFAULT_CHUNK = 65536


def chunk_ranges(n: int, size: int = DEFAULT_CHUNK) -> Iterator[tuple[int, int]]:
    for start in range(0, n, size):
        yield start, min(start + size, n)


def tree_sum(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Balanced pairwise sum of a list of equal-shape arrays."""
    if len(parts) == 0:
        raise ValueError("tree_sum needs at least one part")
    if len(parts) == 1:
        return parts[0]
    # split at the largest power of two strictly less than len(parts)
    split = 1 << ((len(parts) - 1).bit_length() - 1)
    return tree_sum(parts[:split]) + tree_sum(parts[split:])
