"""Seed handling: every random routine accepts an int seed or a Generator.

A single global seed fans out into named sub-streams (graph, treatment,
noise, sampler, init, ...) so that runs are reproducible end to end while
the streams stay independent.
"""

from __future__ import annotations

import zlib

import numpy as np


def as_generator(seed) -> np.random.Generator:
    """Pass Generators through; anything else seeds a fresh PCG64 stream."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derive_seed(root_seed: int, *path: str | int) -> int:
    """Deterministic child seed for a named sub-stream of root_seed.

    String path parts hash via crc32, so derive_seed(7, "sampler", 3) is
    stable across runs and platforms.
    """
    keys = [zlib.crc32(p.encode()) if isinstance(p, str) else int(p) for p in path]
    ss = np.random.SeedSequence([int(root_seed), *keys])
    return int(ss.generate_state(1, np.uint64)[0])
