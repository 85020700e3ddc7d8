"""Bucketed shortest-path-distance encoding and the per-head bias table."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .graph import UNREACHABLE, Graph, SpdTable

DEFAULT_D_MAX = 8


@dataclass(frozen=True)
class SpdScheme:
    """SPD bucketing: codes ``0..d_max`` exact, ``d_max+1`` beyond, ``d_max+2`` unreachable."""

    d_max: int = DEFAULT_D_MAX

    def __post_init__(self):
        if self.d_max < 1:
            raise ValueError(f"d_max must be >= 1, got {self.d_max}")

    @property
    def far(self) -> int:
        return self.d_max + 1

    @property
    def unreachable(self) -> int:
        return self.d_max + 2

    @property
    def num_codes(self) -> int:
        return self.d_max + 3

    def bucket(self, dist):
        """Vectorised distance -> code map; accepts scalars or arrays."""
        d = np.asarray(dist, dtype=np.int64)
        codes = np.where(d == UNREACHABLE, self.unreachable, np.minimum(d, self.far))
        return int(codes) if codes.ndim == 0 else codes

    def check_k(self, k: int) -> None:
        if self.d_max < k + 1:
            raise ValueError(f"d_max={self.d_max} collapses the k={k} boundary; need d_max >= {k + 1}")


@dataclass(frozen=True)
class ConstantScheme:
    """Degenerate encoding that assigns every pair the same code."""

    num_codes: int = 1

    def bucket(self, dist):
        d = np.asarray(dist)
        return 0 if d.ndim == 0 else np.zeros(d.shape, dtype=np.int64)


def encode_pair(g: Graph, spd_rows: Mapping[int, SpdTable], v: int, u: int,
                d_max: int = DEFAULT_D_MAX) -> int:
    """Bucket code for the pair ``(v, u)`` from whichever endpoint has a BFS table.

    A truncated table cannot tell a long path from a missing one, so a miss
    past its cap defers to the other endpoint.
    """
    scheme = SpdScheme(d_max)
    for a, b in ((v, u), (u, v)):
        table = spd_rows.get(a)
        if table is None:
            continue
        d = int(table.dist[b])
        if d == UNREACHABLE and table.cap is not None:
            continue
        return scheme.bucket(d)
    raise KeyError(f"no SPD table resolves the pair ({v}, {u})")


def is_neighbor_distinguishable(scheme) -> bool:
    """Adjacency is recoverable from the code alone.

    For SPD bucketing the decision is ``code == 1``, which needs code 1 to
    hold distance 1 only.
    """
    if isinstance(scheme, SpdScheme):
        return scheme.d_max >= 1
    return False


def is_anchor_distinguishable(scheme, k: int) -> bool:
    """"Anchor outside my k-ball" is recoverable from the code within R(v).

    Inside R(v) only anchors can sit beyond k hops, so the decision is
    ``code > k``. Bucketing must keep distances k and k+1 apart.
    """
    if isinstance(scheme, SpdScheme):
        return scheme.d_max >= k + 1
    return False


def neighbor_decision(scheme, codes: np.ndarray) -> np.ndarray:
    if not is_neighbor_distinguishable(scheme):
        raise ValueError(f"{scheme!r} is not neighbor-distinguishable")
    return np.asarray(codes) == 1


def anchor_decision(scheme, codes: np.ndarray, k: int) -> np.ndarray:
    if not is_anchor_distinguishable(scheme, k):
        raise ValueError(f"{scheme!r} is not anchor-distinguishable for k={k}")
    return np.asarray(codes) > k


class BiasTable:
    """Learnable scalar bias per (head, code)."""

    def __init__(self, biases: np.ndarray, d_max: int):
        biases = np.asarray(biases, dtype=np.float64)
        if biases.ndim != 2 or biases.shape[1] != d_max + 3:
            raise ValueError(f"bias table must have shape (heads, {d_max + 3}), got {biases.shape}")
        if not np.isfinite(biases).all():
            raise ValueError("bias table entries must be finite")
        self.biases = biases
        self.d_max = d_max

    @classmethod
    def zeros(cls, heads: int, d_max: int = DEFAULT_D_MAX) -> "BiasTable":
        return cls(np.zeros((heads, d_max + 3)), d_max)

    @classmethod
    def random(cls, heads: int, d_max: int = DEFAULT_D_MAX,
               rng: Optional[np.random.Generator] = None, scale: float = 0.5) -> "BiasTable":
        rng = rng or np.random.default_rng()
        return cls(scale * rng.standard_normal((heads, d_max + 3)), d_max)

    @property
    def heads(self) -> int:
        return self.biases.shape[0]

    @property
    def scheme(self) -> SpdScheme:
        return SpdScheme(self.d_max)

    def copy(self) -> "BiasTable":
        return BiasTable(self.biases.copy(), self.d_max)

    def to_dict(self) -> dict:
        return {"heads": self.heads, "d_max": self.d_max, "biases": self.biases.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "BiasTable":
        table = cls(np.array(data["biases"], dtype=np.float64), int(data["d_max"]))
        if table.heads != int(data["heads"]):
            raise ValueError("head count does not match bias rows")
        return table

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "BiasTable":
        return cls.from_dict(json.loads(text))
