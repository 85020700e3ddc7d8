"""Greedy k-dominating-set anchor selection and verification."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .graph import UNREACHABLE, BallSearcher, Graph, multi_source_bfs


@dataclass(frozen=True, eq=False)
class AnchorSet:
    nodes: np.ndarray
    k: int
    seed: Optional[int]
    membership: np.ndarray = field(repr=False)

    @classmethod
    def from_nodes(cls, g: Graph, nodes: Sequence[int], k: int,
                   seed: Optional[int] = None) -> "AnchorSet":
        arr = np.unique(np.asarray(nodes, dtype=np.int64))
        if arr.size and (arr[0] < 0 or arr[-1] >= g.n):
            raise IndexError(f"anchor ids must lie in [0, {g.n})")
        mask = np.zeros(g.n, dtype=bool)
        mask[arr] = True
        arr.setflags(write=False)
        mask.setflags(write=False)
        return cls(arr, k, seed, mask)

    def __len__(self):
        return int(self.nodes.size)

    def __eq__(self, other):
        if not isinstance(other, AnchorSet):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.nodes, other.nodes)

    def to_dict(self) -> dict:
        return {"k": self.k, "seed": self.seed, "anchors": self.nodes.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def select_anchors(g: Graph, k: int, seed: int = 0) -> AnchorSet:
    """Greedy k-dominating set: take the highest-degree labeled node, unlabel its k-ball.

    Degrees are those of the input graph and never updated. Ties among
    maximum-degree labeled nodes are broken uniformly at random.

    Within a degree bucket nodes are visited in one seeded random order and
    unlabeled ones skipped. Since labels are only ever removed, the next
    labeled node in a uniform permutation is uniform over the labeled members,
    so this has the same law as a fresh draw at every step.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    order = np.lexsort((rng.random(g.n), -g.degrees))
    labeled = np.ones(g.n, dtype=bool)
    searcher = BallSearcher(g)
    chosen = []
    for a in order:
        if not labeled[a]:
            continue
        chosen.append(int(a))
        ball, _ = searcher.ball(int(a), k)
        labeled[ball] = False
    return AnchorSet.from_nodes(g, chosen, k, seed)


def verify_dominating(g: Graph, anchors: AnchorSet,
                      k: Optional[int] = None) -> Tuple[bool, Optional[int]]:
    """Check every node is within ``k`` hops of some anchor.

    Returns ``(True, None)`` or ``(False, witness)`` with the smallest
    uncovered node id.
    """
    k = anchors.k if k is None else k
    if g.n == 0:
        return True, None
    dist = multi_source_bfs(g, anchors.nodes, cap=k)
    uncovered = np.flatnonzero(dist == UNREACHABLE)
    if uncovered.size:
        return False, int(uncovered[0])
    return True, None


def max_ball_size(g: Graph, k: int) -> int:
    searcher = BallSearcher(g)
    return max((searcher.ball(v, k)[0].size for v in range(g.n)), default=0)


def anchor_sweep(g: Graph, k_values: Sequence[int], seed: int = 0) -> List[Dict]:
    """One record per k: anchor count, largest k-ball and selection time."""
    if not k_values:
        raise ValueError("k_values must be non-empty")
    records = []
    for k in k_values:
        t0 = time.perf_counter()
        s = select_anchors(g, k, seed)
        elapsed = time.perf_counter() - t0
        ok, _ = verify_dominating(g, s)
        records.append({
            "k": int(k),
            "seed": seed,
            "num_anchors": len(s),
            "max_ball": max_ball_size(g, k),
            "select_seconds": elapsed,
            "verified": ok,
        })
    return records
