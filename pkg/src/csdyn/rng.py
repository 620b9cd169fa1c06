"""Seeded random substreams.

Every random object is drawn from its own generator::

    Generator(Philox(SeedSequence(seed, spawn_key=(tag, *indices))))

``tag`` names the kind of object (matrix, signal, noise, ensemble block) and
``indices`` locate it (trial number, block number).  Because the derivation
depends only on the integer path, any single object can be regenerated without
replaying the others, and parallel workers never share a stream.
"""

import numpy as np

MATRIX = 1
SIGNAL = 2
NOISE = 3
ENSEMBLE = 4

_TAG_NAMES = {"matrix": MATRIX, "signal": SIGNAL, "noise": NOISE, "ensemble": ENSEMBLE}


def substream(seed, tag, *indices):
    """Return the generator for object ``(tag, *indices)`` under master ``seed``."""
    if isinstance(tag, str):
        tag = _TAG_NAMES[tag]
    if seed is None or int(seed) < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(tag), *map(int, indices)))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng):
    """Accept a Generator, an int seed, or None (fresh entropy)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(rng))
