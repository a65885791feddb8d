"""
Keyed random streams.

Every random quantity in the lab is drawn from a stream identified by the master seed and a key
tuple (purpose, index, ...). Streams are built from numpy's counter-based Philox bit generator,
seeded through a SeedSequence whose spawn key is the key tuple, so a stream never depends on how
many other streams were created before it or on the order in which they are used.
"""

import numpy as np

# purpose tags, first element of every key
WALK = 1
BROWNIAN = 2
ENVIRONMENT = 3
RWRE = 4
POTENTIAL = 5
DIFFUSION = 6
RANDOM_LAW = 7
LATTICE = 8

MAX_SEED = 2**64 - 1


def zigzag(index: int) -> int:
    """Maps ..., -2, -1, 0, 1, 2, ... onto 3, 1, 0, 2, 4, ... so block indices can be negative."""
    return 2 * index if index >= 0 else -2 * index - 1


def generator(seed: int, *key: int) -> np.random.Generator:
    if not 0 <= seed <= MAX_SEED:
        raise ValueError("seed {} is not a 64-bit unsigned integer".format(seed))

    if any(k < 0 for k in key):
        raise ValueError("stream key {} contains negative entries".format(key))

    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def seed_record(seed: int, *key: int) -> dict:
    return {'seed': int(seed), 'key': [int(k) for k in key]}
