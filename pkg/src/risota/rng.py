"""Named, independently seeded random streams.

A stream is addressed by ``(seed, name, *indices)``; the same address always
yields the same generator, and distinct names never share state. This is what
keeps e.g. the fading draws untouched when only the receiver noise changes.
"""

import zlib

import numpy as np


def _name_key(name):
    return zlib.crc32(name.encode("utf-8"))


def stream(seed, name, *indices):
    """Return a fresh generator for the given stream address."""
    if seed is None:
        seed = 0
    entropy = [int(seed), _name_key(name)] + [int(i) for i in indices]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def resolve_seed(random_state):
    """Map an sklearn-style ``random_state`` onto an integer base seed."""
    if random_state is None:
        return 0
    if isinstance(random_state, (int, np.integer)):
        return int(random_state)
    if isinstance(random_state, np.random.Generator):
        return int(random_state.integers(0, 2**31 - 1))
    if isinstance(random_state, np.random.RandomState):
        return int(random_state.randint(0, 2**31 - 1))
    raise TypeError(f"unsupported random_state {random_state!r}")
