"""Executable expressiveness constructions.

* :func:`wl_refine` is joint 1-WL colour refinement over a pair of graphs.
* :func:`fact1_construct` parameterises one attention layer as a mean
  aggregation over exact neighbours.
* :func:`fact2_run` runs the two-layer anchor construction that separates
  1-WL-equivalent graphs, through the real attention module.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .anchors import AnchorSet, select_anchors, verify_dominating
from .attention import (MASK_VALUE, AttentionParams, ReceptiveField, attention_forward,
                        build_receptive_field)
from .encoding import DEFAULT_D_MAX, BiasTable, SpdScheme, is_anchor_distinguishable, \
    is_neighbor_distinguishable
from .graph import Graph, from_edge_list, k_hop


# -- 1-WL ---------------------------------------------------------------------

@dataclass(frozen=True)
class WlResult:
    rounds: int
    histograms: Tuple[Dict[int, int], Dict[int, int]]
    distinguishable: bool

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "histograms": [{str(c): m for c, m in sorted(h.items())} for h in self.histograms],
            "distinguishable": self.distinguishable,
        }


def wl_refine(g1: Graph, g2: Graph, max_rounds: Optional[int] = None) -> WlResult:
    """Colour refinement run on both graphs with a shared palette.

    Colours start as degrees; each round a node's new colour is the pair
    (own colour, sorted neighbour colours). Stops once the number of colour
    classes stops growing, or after ``max_rounds``.
    """
    graphs = (g1, g2)
    colors = [g.degrees.tolist() for g in graphs]
    limit = max_rounds if max_rounds is not None else g1.n + g2.n
    num_classes = len(set(colors[0]) | set(colors[1]))
    rounds = 0
    while rounds < limit:
        sigs = []
        for g, col in zip(graphs, colors):
            sigs.append([(col[v], tuple(sorted(col[u] for u in g.neighbors(v))))
                         for v in range(g.n)])
        palette = {s: i for i, s in enumerate(sorted(set(sigs[0]) | set(sigs[1])))}
        colors = [[palette[s] for s in sig] for sig in sigs]
        rounds += 1
        if len(palette) == num_classes:
            break
        num_classes = len(palette)
    hists = (dict(Counter(colors[0])), dict(Counter(colors[1])))
    return WlResult(rounds, hists, hists[0] != hists[1])


# -- Fact 1: mean aggregation over neighbours ---------------------------------

SELF_FALLBACK = MASK_VALUE / 2


def fact1_construct(g: Graph, rf: ReceptiveField, d_model: int = 1,
                    scheme=None) -> AttentionParams:
    """Attention parameters that average exact neighbours' features.

    Zero query/key maps and identity value/output maps, with bias 0 on code 1
    and the mask value elsewhere. Code 0 (self) gets half the mask value: it
    loses to any neighbour but beats every masked pair, so an isolated node
    keeps its own feature instead of averaging masked entries.
    """
    scheme = scheme if scheme is not None else SpdScheme(rf.d_max)
    if not is_neighbor_distinguishable(scheme):
        raise ValueError(f"{scheme!r} cannot recover adjacency; mean aggregation needs it")
    if rf.n != g.n:
        raise ValueError("receptive field does not belong to this graph")
    biases = np.full((1, rf.num_codes), MASK_VALUE)
    biases[0, 1] = 0.0
    biases[0, 0] = SELF_FALLBACK
    eye = np.eye(d_model)
    zero = np.zeros((1, d_model, d_model))
    return AttentionParams(zero.copy(), zero.copy(), eye[None].copy(), eye.copy(),
                           BiasTable(biases, rf.d_max))


def neighbor_mean(g: Graph, x: np.ndarray) -> np.ndarray:
    """Mean of neighbour rows; isolated nodes keep their own row."""
    out = np.array(x, dtype=np.float64, copy=True)
    for v in range(g.n):
        nbrs = g.neighbors(v)
        if nbrs.size:
            out[v] = x[nbrs].mean(axis=0)
    return out


# -- Fact 2: anchors separate 1-WL-equivalent graphs --------------------------

@dataclass(frozen=True)
class Fact2Config:
    """Layer-2 logits: ``a`` inside the k-ball, ``b`` on anchors beyond it."""

    a: float = 0.0
    b: float = math.log(2.0)
    k: int = 1
    d_max: int = DEFAULT_D_MAX

    def __post_init__(self):
        if not math.isclose(math.exp(self.a - self.b), 0.5, rel_tol=1e-12):
            raise ValueError(f"need exp(a)/exp(b) = 1/2, got {math.exp(self.a - self.b)!r}")
        SpdScheme(self.d_max).check_k(self.k)


@dataclass(frozen=True)
class Fact2Result:
    values: np.ndarray
    closed_form: np.ndarray
    anchors: Tuple[int, ...]

    @property
    def mean_readout(self) -> float:
        return float(self.values.mean())

    @property
    def sum_readout(self) -> float:
        return float(self.values.sum())

    def multiset(self) -> List[float]:
        return sorted(self.values.tolist())


def fact2_params(cfg: Fact2Config) -> AttentionParams:
    scheme = SpdScheme(cfg.d_max)
    if not (is_neighbor_distinguishable(scheme) and is_anchor_distinguishable(scheme, cfg.k)):
        raise ValueError("encoding must be neighbor- and anchor-distinguishable")
    biases = np.full((1, scheme.num_codes), cfg.b)
    biases[0, :cfg.k + 1] = cfg.a
    zero = np.zeros((1, 1, 1))
    return AttentionParams(zero.copy(), zero.copy(), np.ones((1, 1, 1)), np.ones((1, 1)),
                           BiasTable(biases, cfg.d_max))


def fact2_closed_form(g: Graph, anchors: AnchorSet, cfg: Fact2Config,
                      h: Optional[np.ndarray] = None) -> np.ndarray:
    """``p * MEAN(h over N_k(v)) + (1 - p) * MEAN(h over S~)`` per node, ``S~ = S - N_k(v)``."""
    h = g.degrees.astype(np.float64) if h is None else np.asarray(h, dtype=np.float64)
    ea, eb = math.exp(cfg.a), math.exp(cfg.b)
    out = np.empty(g.n)
    for v in range(g.n):
        ball = k_hop(g, v, cfg.k)
        outside = np.setdiff1d(anchors.nodes, ball, assume_unique=True)
        wa, wb = ball.size * ea, outside.size * eb
        p = wa / (wa + wb)
        out[v] = p * h[ball].mean()
        if outside.size:
            out[v] += (1.0 - p) * h[outside].mean()
    return out


def mixing_weight(g: Graph, anchors: AnchorSet, cfg: Fact2Config, v: int) -> float:
    ball = k_hop(g, v, cfg.k)
    outside = np.setdiff1d(anchors.nodes, ball, assume_unique=True).size
    wa = ball.size * math.exp(cfg.a)
    return wa / (wa + outside * math.exp(cfg.b))


def fact2_run(g: Graph, anchors: AnchorSet, cfg: Fact2Config = Fact2Config()) -> Fact2Result:
    """Degree features, then one anchor-attention layer with the Fact 2 biases."""
    if anchors.k != cfg.k:
        raise ValueError(f"anchor set was built for k={anchors.k}, config says k={cfg.k}")
    ok, witness = verify_dominating(g, anchors)
    if not ok:
        raise ValueError(f"anchors do not {cfg.k}-dominate the graph (node {witness} uncovered)")
    h = g.degrees.astype(np.float64)[:, None]
    rf = build_receptive_field(g, anchors, cfg.d_max)
    y, _ = attention_forward(h, rf, fact2_params(cfg))
    return Fact2Result(y[:, 0], fact2_closed_form(g, anchors, cfg),
                       tuple(anchors.nodes.tolist()))


def fact2_membership_values(g: Graph, anchors: Sequence[int],
                            ratio: Fraction = Fraction(1, 2)) -> List[Fraction]:
    """Exact layer-2 values when the bias can see anchor membership directly.

    Weight ``ratio`` on neighbours that are not anchors, 1 on every anchor,
    nothing elsewhere (self included unless it is an anchor); features are
    degrees. SPD codes alone cannot express this rule, since an anchor inside
    the ball shares its code with ordinary neighbours.
    """
    s = {int(a) for a in anchors}
    deg = g.degrees.tolist()
    out = []
    for v in range(g.n):
        plain = [int(u) for u in g.neighbors(v) if int(u) not in s]
        num = ratio * sum(deg[u] for u in plain) + sum(deg[a] for a in s)
        den = ratio * len(plain) + len(s)
        out.append(Fraction(num) / den)
    return sorted(out)


# -- anchor-set enumeration ---------------------------------------------------

def greedy_anchor_distribution(g: Graph, k: int) -> Dict[FrozenSet[int], Fraction]:
    """Exact law of :func:`select_anchors` over its random tie-breaks.

    Exponential in the worst case; meant for graphs of a dozen or so nodes.
    """
    balls = [frozenset(k_hop(g, v, k).tolist()) for v in range(g.n)]
    deg = g.degrees.tolist()

    @lru_cache(maxsize=None)
    def walk(left: FrozenSet[int]) -> Tuple[Tuple[FrozenSet[int], Fraction], ...]:
        if not left:
            return ((frozenset(), Fraction(1)),)
        top = max(deg[v] for v in left)
        tied = sorted(v for v in left if deg[v] == top)
        acc: Dict[FrozenSet[int], Fraction] = {}
        for a in tied:
            for rest, pr in walk(left - balls[a]):
                key = rest | {a}
                acc[key] = acc.get(key, Fraction(0)) + pr / len(tied)
        return tuple(acc.items())

    return dict(walk(frozenset(range(g.n))))


def minimum_dominating_sets(g: Graph, k: int, max_n: int = 16) -> List[Tuple[int, ...]]:
    """Every k-dominating set of minimum size, by exhaustive search."""
    if g.n > max_n:
        raise ValueError(f"exhaustive search refused for n={g.n} > {max_n}")
    if g.n == 0:
        return [()]
    balls = [set(k_hop(g, v, k).tolist()) for v in range(g.n)]
    everything = set(range(g.n))
    for size in range(1, g.n + 1):
        found = [c for c in combinations(range(g.n), size)
                 if set().union(*(balls[a] for a in c)) == everything]
        if found:
            return found
    return []


# -- distributions over anchor choices ----------------------------------------

@dataclass(frozen=True)
class ReadoutDistribution:
    """Readout value -> probability (exact or empirical)."""

    support: Tuple[Tuple[float, float], ...]

    @classmethod
    def from_pairs(cls, pairs, tol: float = 1e-9) -> "ReadoutDistribution":
        merged: List[List[float]] = []
        for value, prob in sorted((float(v), float(p)) for v, p in pairs):
            if merged and abs(value - merged[-1][0]) <= tol:
                merged[-1][1] += prob
            else:
                merged.append([value, prob])
        return cls(tuple((v, p) for v, p in merged))

    def values(self) -> List[float]:
        return [v for v, _ in self.support]

    def same_as(self, other: "ReadoutDistribution", tol: float = 1e-9) -> bool:
        if len(self.support) != len(other.support):
            return False
        return all(abs(v1 - v2) <= tol and abs(p1 - p2) <= 1e-12
                   for (v1, p1), (v2, p2) in zip(self.support, other.support))

    def to_list(self) -> List[dict]:
        return [{"readout": v, "probability": p} for v, p in self.support]


@dataclass(frozen=True)
class Fact2Report:
    wl: WlResult
    distributions: Tuple[ReadoutDistribution, ReadoutDistribution]
    multisets: Tuple[List[List[float]], List[List[float]]]
    distinguished: bool

    def to_dict(self) -> dict:
        return {
            "wl": self.wl.to_dict(),
            "distributions": [d.to_list() for d in self.distributions],
            "multisets": [list(m) for m in self.multisets],
            "verdict": "distinguished" if self.distinguished else "not-distinguished",
        }


def _readout_law(g: Graph, cfg: Fact2Config, trials: Optional[int], seed: int):
    if trials is None:
        law = greedy_anchor_distribution(g, cfg.k)
        runs = [(fact2_run(g, AnchorSet.from_nodes(g, sorted(s), cfg.k), cfg), pr)
                for s, pr in sorted(law.items(), key=lambda item: sorted(item[0]))]
    else:
        runs = [(fact2_run(g, select_anchors(g, cfg.k, seed + t), cfg), Fraction(1, trials))
                for t in range(trials)]
    dist = ReadoutDistribution.from_pairs((r.mean_readout, pr) for r, pr in runs)
    multisets = sorted({tuple(round(x, 12) for x in r.multiset()) for r, _ in runs})
    return dist, [list(m) for m in multisets]


def fact2_distribution(g1: Graph, g2: Graph, cfg: Fact2Config = Fact2Config(),
                       trials: Optional[int] = None, seed: int = 0,
                       tol: float = 1e-9) -> Fact2Report:
    """Compare the readout laws of the two graphs under random anchor selection.

    ``trials=None`` enumerates every outcome of the greedy selection with its
    exact probability; otherwise ``trials`` seeded selections are drawn per
    graph (seeds ``seed .. seed + trials - 1``).
    """
    d1, m1 = _readout_law(g1, cfg, trials, seed)
    d2, m2 = _readout_law(g2, cfg, trials, seed)
    return Fact2Report(wl_refine(g1, g2), (d1, d2), (m1, m2), not d1.same_as(d2, tol))


# -- reference graphs ---------------------------------------------------------

def two_triangles() -> Graph:
    """Triangles {0,1,2} and {3,4,5} joined by the bridge (0, 3)."""
    return from_edge_list([(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (0, 3)], 6)


def hexagon_with_chord() -> Graph:
    """6-cycle with the long chord (0, 3)."""
    return from_edge_list([(i, (i + 1) % 6) for i in range(6)] + [(0, 3)], 6)
