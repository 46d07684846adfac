"""Random-walk subgraph sampling with negative sampling.

One draw = one walk: consecutive walk pairs become positive (edge) examples
and each positive spawns a fixed number of uniformly random negatives.
Samplers hold no state beyond the caller's RNG, so independent streams can
run concurrently against one shared graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .rng import as_generator


class SamplerError(ValueError):
    pass


@dataclass
class SamplerConfig:
    walk_length: int = 40
    negatives_per_positive: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.walk_length < 1:
            raise SamplerError("walk_length must be >= 1")
        if self.negatives_per_positive < 1:
            raise SamplerError("negatives_per_positive must be >= 1")


@dataclass
class SubgraphSample:
    """vertices: unique walk vertices in first-visit order.
    positives: (i, j) consecutive walk pairs, so always true edges;
    duplicates are kept (a pair's weight is its visit multiplicity).
    negatives: (i, u) pairs with u drawn uniformly over all nodes != i,
    without any edge-membership check."""

    vertices: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray


def random_walk(g: Graph, start: int, length: int, seed) -> np.ndarray:
    """Simple random walk: each step moves to a uniformly random neighbor.
    Returns length+1 vertices beginning at start."""
    if not 0 <= start < g.n:
        raise SamplerError(f"start node {start} out of range")
    if length < 0:
        raise SamplerError("length must be >= 0")
    rng = as_generator(seed)
    walk = np.empty(length + 1, dtype=np.int64)
    walk[0] = start
    cur = start
    offsets, targets = g.offsets, g.targets
    for step in range(1, length + 1):
        lo, hi = offsets[cur], offsets[cur + 1]
        if hi == lo:
            raise SamplerError(f"walk stuck at isolated node {cur}")
        cur = targets[lo + rng.integers(hi - lo)]
        walk[step] = cur
    return walk


def sample_subgraph(g: Graph, cfg: SamplerConfig, seed) -> SubgraphSample:
    """One sampler draw: a walk from a uniformly random non-isolated start,
    its consecutive pairs as positives, and negatives_per_positive random
    companions per positive."""
    if g.m == 0:
        raise SamplerError("cannot sample from an edgeless graph")
    rng = as_generator(seed)
    non_isolated = np.flatnonzero(g.degrees() > 0)
    start = int(non_isolated[rng.integers(len(non_isolated))])
    walk = random_walk(g, start, cfg.walk_length, rng)
    positives = np.column_stack([walk[:-1], walk[1:]])
    src = np.repeat(positives[:, 0], cfg.negatives_per_positive)
    # uniform over nodes != src: draw from n-1 slots and shift past src
    neg = rng.integers(0, g.n - 1, size=len(src))
    neg = np.where(neg >= src, neg + 1, neg)
    _, first = np.unique(walk, return_index=True)
    vertices = walk[np.sort(first)]
    return SubgraphSample(
        vertices=vertices,
        positives=positives,
        negatives=np.column_stack([src, neg]),
    )


def visit_frequencies(g: Graph, walks: int, cfg: SamplerConfig, seed) -> np.ndarray:
    """Empirical node-visit distribution over `walks` independent walks.

    On connected non-bipartite graphs this converges to degree/(2m)."""
    rng = as_generator(seed)
    non_isolated = np.flatnonzero(g.degrees() > 0)
    if len(non_isolated) == 0:
        raise SamplerError("graph has no edges to walk on")
    counts = np.zeros(g.n, dtype=np.int64)
    for _ in range(walks):
        start = int(non_isolated[rng.integers(len(non_isolated))])
        walk = random_walk(g, start, cfg.walk_length, rng)
        counts += np.bincount(walk, minlength=g.n)
    return counts / counts.sum()
