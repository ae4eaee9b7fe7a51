"""Seed derivation.

Every random draw comes from ``numpy.random.Generator(PCG64)`` seeded by a
``SeedSequence(entropy=master_seed, spawn_key=path)``, where ``path`` is a
tuple of small integers naming the stream, e.g. ``(run_index, STREAM_MATRIX)``.
Results therefore depend only on the master seed and the stream path, never
on worker count or call order.
"""

from __future__ import annotations

import numpy as np

STREAM_INPUT = 0
STREAM_MATRIX = 1
STREAM_PRIME = 2
STREAM_SEED = 3
STREAM_EXTRACTOR = 4
STREAM_SAMPLING = 5


def derive(master: int, *path: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=master, spawn_key=tuple(path))))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    if isinstance(seed, tuple):
        return derive(seed[0], *seed[1:])
    return derive(int(seed))


def random_bits(rng: np.random.Generator, n: int) -> str:
    return "".join("1" if b else "0" for b in rng.integers(0, 2, size=n))
