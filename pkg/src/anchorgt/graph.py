"""Immutable undirected graphs in compressed-row form, BFS distances and generators."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

UNREACHABLE = -1


class GraphFormatError(ValueError):
    """Raised when an edge-list file cannot be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected, unweighted graph stored as sorted CSR neighbor lists.

    Build instances with :func:`from_edge_list`; the constructor trusts its
    arguments and does no canonicalisation.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        degrees = np.diff(self.indptr)
        object.__setattr__(self, "degrees", degrees)
        for arr in (self.indptr, self.indices, degrees):
            arr.setflags(write=False)

    @property
    def num_edges(self) -> int:
        return int(self.indices.size // 2)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def edges(self) -> np.ndarray:
        """Edges as an ``(m, 2)`` array with ``u < v``, sorted lexicographically."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        keep = rows < self.indices
        return np.stack([rows[keep], self.indices[keep]], axis=1)

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < nbrs.size and nbrs[i] == v)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __hash__(self):
        return hash((self.n, self.indices.tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.num_edges})"


@dataclass(frozen=True)
class SpdTable:
    """Hop distances from ``source``; ``UNREACHABLE`` beyond ``cap`` or off-component."""

    source: int
    dist: np.ndarray
    cap: Optional[int] = None


def _check_node(g: Graph, v: int) -> None:
    if not 0 <= v < g.n:
        raise IndexError(f"node id {v} out of range for graph with {g.n} nodes")


def from_edge_list(pairs: Iterable[Tuple[int, int]], n: int) -> Graph:
    """Canonicalise ``pairs`` into a :class:`Graph` on nodes ``0..n-1``.

    Duplicates, both orientations and self-loops are accepted; self-loops are
    dropped and the rest is symmetrised.
    """
    if n < 0:
        raise ValueError(f"node count must be non-negative, got {n}")
    arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs,
                     dtype=np.int64).reshape(-1, 2)
    bad = (arr < 0) | (arr >= n)
    if bad.any():
        u, v = arr[np.flatnonzero(bad.any(axis=1))[0]]
        raise ValueError(f"edge ({u}, {v}) has a node id outside [0, {n})")
    arr = arr[arr[:, 0] != arr[:, 1]]
    both = np.concatenate([arr, arr[:, ::-1]])
    if both.size:
        # one int64 key per directed edge dedups and sorts in a single pass
        keys = np.unique(both[:, 0] * max(n, 1) + both[:, 1])
        src, dst = np.divmod(keys, max(n, 1))
    else:
        src = dst = np.empty(0, dtype=np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return Graph(n, indptr, dst.astype(np.int64))


def _expand(g: Graph, frontier: np.ndarray) -> np.ndarray:
    """Concatenated neighbor lists of ``frontier`` (with repeats)."""
    lens = g.degrees[frontier]
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    starts = g.indptr[frontier]
    offsets = np.repeat(starts - np.cumsum(lens) + lens, lens) + np.arange(total)
    return g.indices[offsets]


def _bfs_levels(g: Graph, sources: np.ndarray, cap: Optional[int], dist: np.ndarray):
    """Level-synchronous BFS writing into ``dist`` (pre-filled with UNREACHABLE).

    Returns the visited nodes in discovery order. Callers reuse ``dist`` by
    resetting only the returned nodes.
    """
    frontier = np.unique(sources)
    dist[frontier] = 0
    visited = [frontier]
    level = 0
    while frontier.size and (cap is None or level < cap):
        level += 1
        nbrs = _expand(g, frontier)
        nbrs = np.unique(nbrs[dist[nbrs] == UNREACHABLE])
        dist[nbrs] = level
        visited.append(nbrs)
        frontier = nbrs
    return np.concatenate(visited)


def bfs_spd(g: Graph, source: int, cap: Optional[int] = None) -> SpdTable:
    _check_node(g, source)
    if cap is not None and cap < 0:
        raise ValueError("cap must be non-negative")
    dist = np.full(g.n, UNREACHABLE, dtype=np.int64)
    _bfs_levels(g, np.array([source], dtype=np.int64), cap, dist)
    dist.setflags(write=False)
    return SpdTable(source, dist, cap)


def multi_source_bfs(g: Graph, sources: Sequence[int], cap: Optional[int] = None) -> np.ndarray:
    """Distance from each node to its nearest source, UNREACHABLE past ``cap``."""
    src = np.asarray(sources, dtype=np.int64)
    for s in src:
        _check_node(g, int(s))
    dist = np.full(g.n, UNREACHABLE, dtype=np.int64)
    if src.size:
        _bfs_levels(g, src, cap, dist)
    return dist


def k_hop(g: Graph, v: int, k: int) -> np.ndarray:
    """Sorted ids of all nodes within ``k`` hops of ``v``, ``v`` included."""
    _check_node(g, v)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    dist = np.full(g.n, UNREACHABLE, dtype=np.int64)
    return np.sort(_bfs_levels(g, np.array([v], dtype=np.int64), k, dist))


class BallSearcher:
    """Repeated truncated BFS on one graph with a shared scratch buffer.

    Each call costs time proportional to the ball it returns, not to ``n``.
    Not thread-safe; give each worker its own instance.
    """

    def __init__(self, g: Graph):
        self.g = g
        self._dist = np.full(g.n, UNREACHABLE, dtype=np.int64)

    def ball(self, v: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes within ``k`` hops of ``v`` (sorted) and their distances."""
        nodes = _bfs_levels(self.g, np.array([v], dtype=np.int64), k, self._dist)
        nodes.sort()
        d = self._dist[nodes].copy()
        self._dist[nodes] = UNREACHABLE
        return nodes, d


def adjacency_matrix(g: Graph, dtype=np.int32) -> sp.csr_matrix:
    data = np.ones(g.indices.size, dtype=dtype)
    return sp.csr_matrix((data, g.indices, g.indptr), shape=(g.n, g.n))


def k_hop_distances(g: Graph, k: int) -> sp.csr_matrix:
    """All pairs within ``k`` hops as a CSR matrix of ``distance + 1``.

    Stored values are offset by one so the diagonal (distance 0) survives as
    an explicit entry. Built from boolean powers of ``I + A``: a pair first
    reached at power ``j`` sits at distance ``j``.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    step = (adjacency_matrix(g) + sp.identity(g.n, dtype=np.int32, format="csr")).tocsr()
    reach = sp.identity(g.n, dtype=np.int32, format="csr")
    # after the loop, count[v, u] = number of j in 0..k with SPD(v, u) <= j
    count = reach.copy()
    for _ in range(k):
        reach = reach @ step
        reach.data[:] = 1
        count = count + reach
    count = count.tocsr()
    count.sort_indices()
    count.data = (k + 2 - count.data).astype(np.int64)
    return count


def component_labels(g: Graph) -> np.ndarray:
    """Connected-component id per node (ids in order of lowest member)."""
    labels = np.full(g.n, -1, dtype=np.int64)
    dist = np.full(g.n, UNREACHABLE, dtype=np.int64)
    comp = 0
    for v in range(g.n):
        if labels[v] >= 0:
            continue
        members = _bfs_levels(g, np.array([v], dtype=np.int64), None, dist)
        labels[members] = comp
        comp += 1
    return labels


def all_pairs_spd(g: Graph, cap: Optional[int] = None) -> np.ndarray:
    """Dense ``(n, n)`` distance matrix built from one BFS per node."""
    out = np.full((g.n, g.n), UNREACHABLE, dtype=np.int64)
    for v in range(g.n):
        _bfs_levels(g, np.array([v], dtype=np.int64), cap, out[v])
    return out


def induced_subgraph(g: Graph, nodes: Sequence[int]) -> Tuple[Graph, np.ndarray]:
    """Subgraph induced on ``nodes``; returns it with the local->global id map."""
    keep = np.unique(np.asarray(nodes, dtype=np.int64))
    for v in keep[[0, -1]] if keep.size else ():
        _check_node(g, int(v))
    local = np.full(g.n, -1, dtype=np.int64)
    local[keep] = np.arange(keep.size)
    e = g.edges()
    e = e[(local[e[:, 0]] >= 0) & (local[e[:, 1]] >= 0)]
    return from_edge_list(local[e], keep.size), keep


def relabel(g: Graph, perm: Sequence[int]) -> Graph:
    """Graph with node ``v`` renamed to ``perm[v]``."""
    perm = np.asarray(perm, dtype=np.int64)
    return from_edge_list(perm[g.edges()], g.n)


# -- generators ---------------------------------------------------------------

def erdos_renyi(n: int, p: float, seed: int) -> Graph:
    """G(n, p): every unordered pair is an edge independently with probability ``p``.

    Successful pairs are located by geometric gap sampling over the linear
    upper-triangle index, which has exactly the law of one Bernoulli draw per
    pair but costs time proportional to the edge count. The Philox stream is
    keyed by ``seed`` alone, so output depends only on ``(n, p, seed)``.
    """
    if n < 0:
        raise ValueError(f"node count must be non-negative, got {n}")
    if not 0.0 <= p <= 1.0 or p != p:
        raise ValueError(f"edge probability must lie in [0, 1], got {p}")
    total = n * (n - 1) // 2
    if total == 0 or p == 0.0:
        return from_edge_list(np.empty((0, 2), dtype=np.int64), n)
    rng = np.random.Generator(np.random.Philox(seed))
    picked = []
    pos = -1
    chunk = max(1024, int(total * p * 1.1) + 64)
    while True:
        gaps = rng.geometric(p, size=chunk) if p < 1.0 else np.ones(chunk, dtype=np.int64)
        idx = pos + np.cumsum(gaps)
        picked.append(idx[idx < total])
        if idx[-1] >= total:
            break
        pos = int(idx[-1])
    lin = np.concatenate(picked)
    # row i of the strict upper triangle starts at i*(2n-i-1)/2
    rows = np.arange(n, dtype=np.int64)
    starts = rows * (2 * n - rows - 1) // 2
    i = np.searchsorted(starts, lin, side="right") - 1
    j = lin - starts[i] + i + 1
    return from_edge_list(np.stack([i, j], axis=1), n)


def path_graph(n: int) -> Graph:
    return from_edge_list([(i, i + 1) for i in range(n - 1)], n)


def cycle_graph(n: int) -> Graph:
    return from_edge_list([(i, (i + 1) % n) for i in range(n)], n)


def complete_graph(n: int) -> Graph:
    return from_edge_list([(i, j) for i in range(n) for j in range(i + 1, n)], n)


def star_graph(leaves: int) -> Graph:
    """Center 0 joined to ``leaves`` leaf nodes."""
    return from_edge_list([(0, i) for i in range(1, leaves + 1)], leaves + 1)


def decalin() -> Graph:
    """Two hexagons sharing the edge (0, 5)."""
    ring = [(i, i + 1) for i in range(5)] + [(5, 0)]
    return from_edge_list(ring + [(0, 6), (6, 7), (7, 8), (8, 9), (9, 5)], 10)


def bicyclopentyl() -> Graph:
    """Two pentagons joined by the bridge (0, 5)."""
    a = [(i, (i + 1) % 5) for i in range(5)]
    b = [(5 + i, 5 + (i + 1) % 5) for i in range(5)]
    return from_edge_list(a + b + [(0, 5)], 10)


# -- edge-list text format ----------------------------------------------------

def parse_edge_list(text: str) -> Graph:
    """Parse the edge-list format: a node count line, then ``u v`` lines.

    ``#`` starts a comment; blank lines are ignored.
    """
    n = None
    pairs = []
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            values = [int(t) for t in tokens]
        except ValueError:
            raise GraphFormatError(f"non-integer token in {line!r}", lineno) from None
        if n is None:
            if len(values) != 1 or values[0] < 0:
                raise GraphFormatError(f"expected a node count, got {line!r}", lineno)
            n = values[0]
            continue
        if len(values) != 2:
            raise GraphFormatError(f"expected 'u v', got {line!r}", lineno)
        u, v = values
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"node id out of range [0, {n}) in {line!r}", lineno)
        pairs.append((u, v))
    if n is None:
        raise GraphFormatError("missing node count line")
    return from_edge_list(pairs, n)


def format_edge_list(g: Graph) -> str:
    lines = [str(g.n)] + [f"{u} {v}" for u, v in g.edges().tolist()]
    return "\n".join(lines) + "\n"


def read_edge_list_file(path: "str | os.PathLike") -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_edge_list(fh.read())


def write_edge_list_file(g: Graph, path: "str | os.PathLike") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_edge_list(g))
