"""Seeding helpers.

All randomness goes through counter-based Philox generators keyed by a
``SeedSequence``, so that any (seed, stream) pair gives the same numbers
regardless of how work is scheduled across processes.
"""

from __future__ import annotations

import numpy as np

SEED_MASK = (1 << 64) - 1


def make_rng(seed, *stream) -> np.random.Generator:
    """Return a Philox generator for ``seed`` and an optional stream key.

    ``stream`` entries must be non-negative integers; they select
    independent substreams of the same seed.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    entropy = [int(seed) & SEED_MASK, *(int(s) & SEED_MASK for s in stream)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def replicate_seed(base_seed: int, replicate: int) -> int:
    """Per-replicate seed: ``base_seed XOR replicate``."""
    return (int(base_seed) ^ int(replicate)) & SEED_MASK


def derive_seed(*keys) -> int:
    """A 64-bit seed derived from a tuple of non-negative integer keys."""
    state = np.random.SeedSequence([int(k) & SEED_MASK for k in keys]).generate_state(2, np.uint32)
    return (int(state[0]) << 32) | int(state[1])
