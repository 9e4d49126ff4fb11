"""
Reproducible random streams.

Every random draw in the package comes from a PCG64 generator whose seed is
hashed by SeedSequence from a tuple of nonnegative integers, so a stream is
fully named by its key, e.g. (dataset seed, instance index).
"""

import numpy as np

from lattice_relax.types import InvalidInputError

# Purpose tags, kept distinct so streams for different jobs never collide.
TEST_SET = 1
TRAIN_SET = 2
CORRUPTION = 3
INIT_BELIEFS = 4
MEMORIES = 5


def stream(*keys: int) -> np.random.Generator:
    """
    Build a generator from an entropy key.

    Args:
        *keys (int): Nonnegative integers identifying the stream

    Returns:
        np.random.Generator: PCG64-backed generator
    """
    return np.random.Generator(np.random.PCG64(_sequence(keys)))


def derive_seed(*keys: int) -> int:
    """Collapse an entropy key into a single u64 seed (recorded in manifests)."""
    return int(_sequence(keys).generate_state(1, dtype=np.uint64)[0])


def _sequence(keys) -> np.random.SeedSequence:
    if any(int(k) < 0 for k in keys):
        raise InvalidInputError(f"Stream keys must be nonnegative, got {keys}")
    return np.random.SeedSequence([int(k) for k in keys])
