"""Seed handling.

Every stochastic routine takes an explicit integer seed or a
``numpy.random.Generator``. Sub-task seeds are derived from a master seed and
a task path through ``SeedSequence`` so they are stable across runs and
platforms.
"""
from __future__ import annotations

import hashlib

import numpy as np



def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    if seed is None:
        raise TypeError("an explicit seed is required")
    return np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))


def _path_key(path) -> tuple[int, ...]:
    words = []
    for part in path:
        digest = hashlib.sha256(str(part).encode()).digest()
        words.append(int.from_bytes(digest[:4], "little"))
    return tuple(words)


def derive_seed(master: int, *path) -> int:
    """64-bit seed for the task identified by ``path`` under ``master``."""
    ss = np.random.SeedSequence(int(master) & (2**64 - 1), spawn_key=_path_key(path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def spawn_seeds(master: int, count: int, *path) -> list[int]:
    return [derive_seed(master, *path, k) for k in range(count)]
