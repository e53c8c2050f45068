"""Seed derivation.

Every stochastic routine takes an integer ``seed``. When a routine needs
independent streams (one per trial, restart, epoch, ...) it derives them
with :func:`spawn`: the child stream for ``(seed, k1, k2, ...)`` is a PCG64
generator seeded by ``SeedSequence([seed, k1, k2, ...])``. Child streams
depend only on the key path, never on how many siblings were drawn before,
so splitting work across workers cannot change results.
"""

import zlib

import numpy as np


def spawn(seed, *keys):
    """Return the generator for the key path ``(seed, *keys)``."""
    entropy = [int(seed)] + [_key(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def _key(k):
    if isinstance(k, str):
        return zlib.crc32(k.encode())
    k = int(k)
    if k < 0:
        raise ValueError("seed keys must be non-negative")
    return k
