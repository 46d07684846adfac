"""Immutable undirected graphs in compressed sparse adjacency form.

Nodes are dense integers 0..n-1. Neighbor lists are sorted, duplicate-free,
and symmetric (j in neighbors(i) iff i in neighbors(j)); self-loops are
never stored.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .rng import as_generator


class GraphError(ValueError):
    """Invalid graph input or malformed graph file."""


@dataclass(frozen=True)
class Graph:
    """Undirected graph stored as offsets/targets (CSR adjacency).

    n: node count, m: undirected edge count.
    offsets has length n+1; targets[offsets[i]:offsets[i+1]] are the sorted
    neighbors of node i; len(targets) == 2*m.
    """

    n: int
    offsets: np.ndarray
    targets: np.ndarray
    m: int

    def neighbors(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n:
            raise GraphError(f"node id {i} out of range [0, {self.n})")
        return self.targets[self.offsets[i]:self.offsets[i + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def edges(self) -> np.ndarray:
        """All undirected edges as an (m, 2) array with u < v."""
        u = np.repeat(np.arange(self.n), self.degrees())
        keep = u < self.targets
        return np.column_stack([u[keep], self.targets[keep]])

    def validate(self) -> None:
        """Full-scan check of the storage invariants; raises on violation."""
        if self.offsets.shape != (self.n + 1,):
            raise GraphError("offsets must have length n+1")
        if self.offsets[0] != 0 or np.any(np.diff(self.offsets) < 0):
            raise GraphError("offsets must be monotone nondecreasing from 0")
        if self.offsets[-1] != 2 * self.m or len(self.targets) != 2 * self.m:
            raise GraphError("offsets[n] and len(targets) must equal 2*m")
        if self.m and (self.targets.min() < 0 or self.targets.max() >= self.n):
            raise GraphError("neighbor id out of range")
        seen = set()
        for i in range(self.n):
            nbrs = self.neighbors(i)
            if np.any(nbrs == i):
                raise GraphError(f"self-loop at node {i}")
            if np.any(np.diff(nbrs) <= 0):
                raise GraphError(f"neighbor list of {i} not sorted unique")
            for j in nbrs:
                seen.add((i, int(j)))
        for i, j in seen:
            if (j, i) not in seen:
                raise GraphError(f"asymmetric edge ({i}, {j})")


def degree(g: Graph, i: int) -> int:
    """Number of connections of node i."""
    return len(g.neighbors(i))


def from_edges(n: int, edges: np.ndarray) -> Graph:
    """Build a Graph from an (k, 2) int array of undirected edges.

    Duplicate edges are collapsed and self-loops dropped. Endpoints must be
    in [0, n).
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) and (edges.min() < 0 or edges.max() >= n):
        raise GraphError("edge endpoint out of range")
    edges = edges[edges[:, 0] != edges[:, 1]]
    if len(edges):
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        edges = np.unique(np.column_stack([lo, hi]), axis=0)
    directed = np.concatenate([edges, edges[:, ::-1]]) if len(edges) else edges
    order = np.lexsort((directed[:, 1], directed[:, 0])) if len(directed) else []
    directed = directed[order] if len(directed) else directed.reshape(0, 2)
    counts = np.bincount(directed[:, 0], minlength=n) if len(directed) else np.zeros(n, dtype=np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    targets = directed[:, 1].astype(np.int64) if len(directed) else np.zeros(0, dtype=np.int64)
    return Graph(n=n, offsets=offsets, targets=targets, m=len(edges))


@dataclass
class LoadedGraph:
    """Result of reading an edge-list file.

    id_map[k] is the original id of dense node k (identity when input ids
    were already dense 0..n-1).
    """

    graph: Graph
    id_map: np.ndarray
    self_loops_dropped: int
    duplicates_collapsed: int


def load_edge_list(path) -> LoadedGraph:
    """Read whitespace-separated integer pairs, one edge per line.

    Blank lines and lines starting with '#' are skipped. Sparse node ids are
    remapped to dense 0..n-1 (mapping returned). Duplicate edges collapse to
    one; self-loops are dropped and counted.
    """
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split()
            if len(fields) != 2:
                raise GraphError(f"{path}: line {lineno}: expected two node ids, got {len(fields)} fields")
            try:
                u, v = int(fields[0]), int(fields[1])
            except ValueError:
                raise GraphError(f"{path}: line {lineno}: non-integer node id") from None
            if u < 0 or v < 0:
                raise GraphError(f"{path}: line {lineno}: negative node id")
            pairs.append((u, v))
    raw = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    ids = np.unique(raw) if len(raw) else np.zeros(0, dtype=np.int64)
    remapped = np.searchsorted(ids, raw) if len(raw) else raw
    n = len(ids)
    n_self = int(np.sum(remapped[:, 0] == remapped[:, 1])) if len(remapped) else 0
    if n_self:
        warnings.warn(f"{path}: dropped {n_self} self-loop(s)", stacklevel=2)
    non_loops = remapped[remapped[:, 0] != remapped[:, 1]] if len(remapped) else remapped
    lo = np.minimum(non_loops[:, 0], non_loops[:, 1]) if len(non_loops) else non_loops
    unique_edges = len(np.unique(np.column_stack([lo, np.maximum(non_loops[:, 0], non_loops[:, 1])]), axis=0)) if len(non_loops) else 0
    g = from_edges(n, remapped)
    return LoadedGraph(
        graph=g,
        id_map=ids,
        self_loops_dropped=n_self,
        duplicates_collapsed=len(non_loops) - unique_edges,
    )


def save_edge_list(g: Graph, path) -> None:
    """Write one 'u v' line per undirected edge, u < v, sorted."""
    with open(path, "w") as fh:
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")


def graph_summary(g: Graph) -> str:
    """Single-line record of node/edge counts and the degree range."""
    deg = g.degrees()
    dmin = int(deg.min()) if g.n else 0
    dmax = int(deg.max()) if g.n else 0
    dmean = float(deg.mean()) if g.n else 0.0
    return f"n={g.n} m={g.m} degree_min={dmin} degree_mean={dmean:.4f} degree_max={dmax}"


@dataclass
class BlockModelSpec:
    """Stochastic block model: node blocks plus a symmetric edge-probability matrix."""

    n: int
    block_of: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        self.block_of = np.asarray(self.block_of, dtype=np.int64)
        self.P = np.asarray(self.P, dtype=np.float64)
        if self.n <= 0:
            raise GraphError("n must be positive")
        if self.block_of.shape != (self.n,):
            raise GraphError("block_of must assign every node a block")
        b = self.P.shape[0]
        if self.P.shape != (b, b) or not np.allclose(self.P, self.P.T):
            raise GraphError("P must be square and symmetric")
        if np.any(self.P < 0) or np.any(self.P > 1):
            raise GraphError("edge probabilities must lie in [0, 1]")
        if self.block_of.min() < 0 or self.block_of.max() >= b:
            raise GraphError("block id out of range for P")

    @property
    def n_blocks(self) -> int:
        return self.P.shape[0]


def equal_blocks_spec(n: int, n_blocks: int, p_within: float, p_between: float) -> BlockModelSpec:
    """Spec with contiguous near-equal blocks and a two-level probability matrix."""
    block_of = (np.arange(n) * n_blocks) // n
    P = np.full((n_blocks, n_blocks), p_between, dtype=np.float64)
    np.fill_diagonal(P, p_within)
    return BlockModelSpec(n=n, block_of=block_of, P=P)


def _bernoulli_pair_indices(rng: np.random.Generator, n_pairs: int, p: float) -> np.ndarray:
    """Indices in [0, n_pairs) kept under independent Bernoulli(p) draws.

    Geometric skipping visits only the kept indices, so the cost is
    proportional to the number of sampled pairs rather than n_pairs.
    """
    if n_pairs <= 0 or p <= 0.0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(n_pairs, dtype=np.int64)
    chunks = []
    last = -1
    while last < n_pairs:
        size = max(int((n_pairs - last) * p * 1.2) + 16, 16)
        idx = last + np.cumsum(rng.geometric(p, size=size))
        chunks.append(idx)
        last = int(idx[-1])
    idx = np.concatenate(chunks)
    return idx[idx < n_pairs]


def _pair_index_to_within(idx: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Invert the row-major enumeration of pairs (i, j), i < j, over k nodes."""
    # T(i) = i*(2k-i-1)/2 pairs precede row i; solve for i, then fix up any
    # off-by-one from the float sqrt.
    i = ((2 * k - 1 - np.sqrt((2 * k - 1) ** 2 - 8 * idx)) // 2).astype(np.int64)
    start = i * (2 * k - i - 1) // 2
    over = start > idx
    i[over] -= 1
    start = i * (2 * k - i - 1) // 2
    under = idx >= start + (k - 1 - i)
    i[under] += 1
    start = i * (2 * k - i - 1) // 2
    j = idx - start + i + 1
    return i, j


def sbm_generate(spec: BlockModelSpec, seed) -> Graph:
    """Draw a graph where each unordered pair (i, j), i != j, is an edge
    independently with probability P[block(i)][block(j)].

    Deterministic given spec and seed.
    """
    rng = as_generator(seed)
    members = [np.flatnonzero(spec.block_of == b) for b in range(spec.n_blocks)]
    chunks = []
    for a in range(spec.n_blocks):
        for b in range(a, spec.n_blocks):
            p = float(spec.P[a, b])
            na, nb = len(members[a]), len(members[b])
            if a == b:
                idx = _bernoulli_pair_indices(rng, na * (na - 1) // 2, p)
                if len(idx):
                    i, j = _pair_index_to_within(idx, na)
                    chunks.append(np.column_stack([members[a][i], members[a][j]]))
            else:
                idx = _bernoulli_pair_indices(rng, na * nb, p)
                if len(idx):
                    chunks.append(np.column_stack([members[a][idx // nb], members[b][idx % nb]]))
    edges = np.concatenate(chunks) if chunks else np.zeros((0, 2), dtype=np.int64)
    return from_edges(spec.n, edges)


def shared_neighbor_probability(g: Graph, pair_sample_size: int = 1_000_000, seed=0) -> float:
    """Probability that a uniformly random distinct pair has >= 1 common neighbor.

    Exact enumeration over all C(n,2) pairs when that count fits within
    pair_sample_size; Monte Carlo over pair_sample_size random pairs otherwise.
    """
    if g.n < 2:
        raise GraphError("need at least two nodes")
    total_pairs = g.n * (g.n - 1) // 2
    if g.m == 0:
        return 0.0
    neighbor_sets = [frozenset(g.neighbors(i).tolist()) for i in range(g.n)]
    if total_pairs <= pair_sample_size:
        hits = 0
        for i in range(g.n):
            si = neighbor_sets[i]
            for j in range(i + 1, g.n):
                if not si.isdisjoint(neighbor_sets[j]):
                    hits += 1
        return hits / total_pairs
    rng = as_generator(seed)
    i = rng.integers(0, g.n, size=pair_sample_size)
    j = rng.integers(0, g.n - 1, size=pair_sample_size)
    j = np.where(j >= i, j + 1, j)  # uniform over j != i
    hits = sum(
        1 for a, b in zip(i.tolist(), j.tolist())
        if not neighbor_sets[a].isdisjoint(neighbor_sets[b])
    )
    return hits / pair_sample_size
