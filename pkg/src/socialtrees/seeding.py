"""Counter-based seed derivation.

Every random stream in a run is derived from one master seed plus a tuple of
integer keys (purpose, generation, worker, ...). Streams never depend on the
order in which other streams were created, so serial and parallel executions
draw identical numbers.
"""

import zlib

import numpy as np

# purpose keys
POPULATION = 1
QINIT = 2
COLLAB = 3
INDIVIDUAL = 4
EVALUATE = 5
EVOLVE = 6


def _key(k):
    if isinstance(k, str):
        return zlib.crc32(k.encode())
    return int(k)


def seed_sequence(seed, *keys):
    if isinstance(seed, np.random.SeedSequence):
        base = tuple(seed.spawn_key)
        return np.random.SeedSequence(seed.entropy, spawn_key=base + tuple(_key(k) for k in keys))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in keys))


def stream(seed, *keys):
    """Independent ``numpy.random.Generator`` for ``(seed, *keys)``."""
    return np.random.default_rng(seed_sequence(seed, *keys))


def child_seed(seed, *keys):
    """A 63-bit integer seed for ``(seed, *keys)``, e.g. for ``env.reset``."""
    return int(seed_sequence(seed, *keys).generate_state(2, np.uint32).view(np.uint64)[0] >> np.uint64(1))


def fresh_seed():
    return int(np.random.SeedSequence().generate_state(1, np.uint32)[0])
