"""Seed derivation. Every random draw in the package goes through ``substream``."""

import hashlib

import numpy as np


def _word(part):
    if isinstance(part, (int, np.integer)) and part >= 0:
        return int(part)
    digest = hashlib.sha256(repr(part).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def seed_sequence(master, *keys):
    """Stable child seed for ``(master, *keys)``; identical across runs and thread counts."""
    if isinstance(master, np.random.SeedSequence):
        entropy, prefix = master.entropy, tuple(master.spawn_key)
    else:
        entropy, prefix = _word(master), ()
    return np.random.SeedSequence(entropy, spawn_key=prefix + tuple(_word(k) for k in keys))


def substream(master, *keys):
    return np.random.Generator(np.random.PCG64(seed_sequence(master, *keys)))


def as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return substream(seed)
