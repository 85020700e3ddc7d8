"""Anchor-based sparse graph attention with hand-written backward passes.

Every node ``v`` attends to ``R(v) = N_k(v) | S``: its inclusive k-hop ball
plus the anchor set. Pairs are stored row-compressed; scores are computed
only on stored pairs and the weighted sums use scipy sparse products.

A :class:`DenseField` runs the same layer over all ``n**2`` pairs with an
optional mask; it serves as the comparison path in tests and benchmarks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .anchors import AnchorSet
from .encoding import DEFAULT_D_MAX, BiasTable, SpdScheme
from .graph import (UNREACHABLE, Graph, all_pairs_spd, bfs_spd, component_labels,
                    induced_subgraph, k_hop_distances)

MASK_VALUE = -1e9
_CHUNK = 1 << 18


# -- receptive fields ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReceptiveField:
    """Row-compressed ``(v, u, code)`` triples for ``u in R(v)``, columns sorted per row."""

    n: int
    indptr: np.ndarray
    cols: np.ndarray
    codes: np.ndarray
    k: int
    d_max: int
    anchors: np.ndarray
    rows: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "rows", np.repeat(np.arange(self.n), np.diff(self.indptr)))
        # scipy would otherwise down-cast the index arrays on every product
        idx = np.int32 if self.cols.size < 2**31 else np.int64
        object.__setattr__(self, "_cols32", self.cols.astype(idx))
        object.__setattr__(self, "_indptr32", self.indptr.astype(idx))
        # only anchors can sit beyond the k-ball, so code > k marks an anchor column
        far = self.codes > self.k
        object.__setattr__(self, "far_pairs", np.flatnonzero(far))
        object.__setattr__(self, "far_slots", np.searchsorted(self.anchors, self.cols[far]))
        object.__setattr__(self, "near_pairs", np.flatnonzero(~far))
        object.__setattr__(self, "near_row_sizes", np.bincount(self.rows[~far], minlength=self.n))

    @property
    def total_pairs(self) -> int:
        return int(self.cols.size)

    @property
    def num_codes(self) -> int:
        return self.d_max + 3

    def row(self, v: int) -> Tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[v], self.indptr[v + 1]
        return self.cols[lo:hi], self.codes[lo:hi]

    def row_sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    def pattern(self, data: Optional[np.ndarray] = None) -> sp.csr_matrix:
        """CSR matrix over the field's pairs carrying ``data`` (ones by default)."""
        if data is None:
            data = np.ones(self.cols.size)
        return sp.csr_matrix((data, self._cols32, self._indptr32), shape=(self.n, self.n))


def anchor_codes(g: Graph, anchors: Sequence[int], d_max: int) -> np.ndarray:
    """``(|S|, n)`` SPD bucket codes from each anchor to every node."""
    scheme = SpdScheme(d_max)
    comp = component_labels(g)
    out = np.empty((len(anchors), g.n), dtype=np.int64)
    for i, a in enumerate(anchors):
        dist = bfs_spd(g, int(a), cap=d_max).dist
        codes = scheme.bucket(dist)
        # past the cap but in the same component means a long finite path
        codes[(dist == UNREACHABLE) & (comp == comp[a])] = scheme.far
        out[i] = codes
    return out


def build_receptive_field(g: Graph, anchors: AnchorSet, d_max: int = DEFAULT_D_MAX) -> ReceptiveField:
    """Receptive field ``N_k(v) | S`` per node, each pair tagged with its SPD code.

    An anchor inside the k-ball appears once, with its true distance.
    """
    k = anchors.k
    SpdScheme(d_max).check_k(k)
    ball = k_hop_distances(g, k)
    ball_rows = np.repeat(np.arange(g.n), np.diff(ball.indptr))
    ball_cols = ball.indices.astype(np.int64)
    ball_codes = ball.data - 1

    s = anchors.nodes
    if s.size:
        codes = anchor_codes(g, s, d_max)
        a_rows = np.tile(np.arange(g.n), s.size)
        a_cols = np.repeat(s, g.n)
        a_codes = codes.reshape(-1)
        outside = a_codes > k
        rows = np.concatenate([ball_rows, a_rows[outside]])
        cols = np.concatenate([ball_cols, a_cols[outside]])
        all_codes = np.concatenate([ball_codes, a_codes[outside]])
        order = np.lexsort((cols, rows))
        rows, cols, all_codes = rows[order], cols[order], all_codes[order]
    else:
        rows, cols, all_codes = ball_rows, ball_cols, ball_codes
    indptr = np.zeros(g.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=g.n), out=indptr[1:])
    return ReceptiveField(g.n, indptr, cols, all_codes.astype(np.int64), k, d_max, s.copy())


def attended_pair_count(rf: ReceptiveField) -> int:
    return rf.total_pairs


def dense_pair_count(n: int) -> int:
    return n * n


@dataclass(frozen=True, eq=False)
class DenseField:
    """All ``n**2`` pairs with SPD codes and a keep-mask (``True`` = attend)."""

    codes: np.ndarray
    mask: np.ndarray
    d_max: int

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def num_codes(self) -> int:
        return self.d_max + 3

    @classmethod
    def from_graph(cls, g: Graph, d_max: int = DEFAULT_D_MAX,
                   rf: Optional[ReceptiveField] = None) -> "DenseField":
        """Full attention over ``g``; restricted to ``rf``'s pairs when given."""
        scheme = SpdScheme(d_max)
        dist = all_pairs_spd(g)
        codes = scheme.bucket(dist)
        if rf is None:
            mask = np.ones((g.n, g.n), dtype=bool)
        else:
            mask = np.zeros((g.n, g.n), dtype=bool)
            mask[rf.rows, rf.cols] = True
        return cls(codes, mask, d_max)


Field = Union[ReceptiveField, DenseField]


# -- parameters ---------------------------------------------------------------

@dataclass
class AttentionParams:
    """Per-head projections ``(heads, d_model, d_head)``, output projection and SPD biases."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    bias: BiasTable

    @classmethod
    def init(cls, d_model: int, heads: int, d_max: int = DEFAULT_D_MAX,
             rng: Optional[np.random.Generator] = None, dtype=np.float64) -> "AttentionParams":
        if d_model <= 0 or heads <= 0 or d_model % heads:
            raise ValueError(f"d_model={d_model} must be a positive multiple of heads={heads}")
        rng = rng or np.random.default_rng()
        d_head = d_model // heads
        scale = 1.0 / math.sqrt(d_model)
        shape = (heads, d_model, d_head)
        return cls(
            wq=(scale * rng.standard_normal(shape)).astype(dtype),
            wk=(scale * rng.standard_normal(shape)).astype(dtype),
            wv=(scale * rng.standard_normal(shape)).astype(dtype),
            wo=(scale * rng.standard_normal((d_model, d_model))).astype(dtype),
            bias=BiasTable.random(heads, d_max, rng),
        )

    @property
    def heads(self) -> int:
        return self.wq.shape[0]

    @property
    def d_model(self) -> int:
        return self.wq.shape[1]

    @property
    def d_head(self) -> int:
        return self.wq.shape[2]

    def arrays(self) -> Dict[str, np.ndarray]:
        """Named views of every trainable array (mutating them mutates the params)."""
        return {"wq": self.wq, "wk": self.wk, "wv": self.wv, "wo": self.wo, "bias": self.bias.biases}

    def to_dict(self) -> dict:
        return {
            "heads": self.heads,
            "d_model": self.d_model,
            "d_head": self.d_head,
            "encoding": {"scheme": "spd", "d_max": self.bias.d_max},
            "arrays": {name: {"shape": list(a.shape), "data": a.reshape(-1).tolist()}
                       for name, a in self.arrays().items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AttentionParams":
        arrays = {name: np.array(item["data"], dtype=np.float64).reshape(item["shape"])
                  for name, item in data["arrays"].items()}
        d_max = int(data["encoding"]["d_max"])
        return cls(arrays["wq"], arrays["wk"], arrays["wv"], arrays["wo"],
                   BiasTable(arrays["bias"], d_max))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "AttentionParams":
        return cls.from_dict(json.loads(text))


@dataclass
class AttentionCache:
    h: np.ndarray
    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    alpha: np.ndarray
    concat: np.ndarray
    field: Field = field(repr=False)


def _check_inputs(h: np.ndarray, fld: Field, params: AttentionParams) -> None:
    if h.ndim != 2 or h.shape[1] != params.d_model:
        raise ValueError(f"features must have shape (n, {params.d_model}), got {h.shape}")
    if h.shape[0] != fld.n:
        raise ValueError(f"{h.shape[0]} feature rows for a field over {fld.n} nodes")
    if params.bias.biases.shape[1] != fld.num_codes:
        raise ValueError("bias table and field disagree on d_max")
    if not np.isfinite(h).all():
        raise ValueError("node features contain non-finite values")


def _sddmm(rf: "ReceptiveField", a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``out[p, h] = a[rows[p], h] . b[cols[p], h]`` for ``(n, H, e)`` inputs.

    Anchor columns outside the k-ball are shared by every row, so those
    entries come from one dense ``(n, |S|)`` product per head; only ball
    pairs pay for a row-wise gather.
    """
    n, heads, width = a.shape
    out = np.empty((rf.total_pairs, heads), dtype=np.result_type(a, b))
    far = rf.far_pairs
    if far.size:
        far_rows, slots = rf.rows[far], rf.far_slots
        for hd in range(heads):
            block = a[:, hd] @ b[rf.anchors, hd].T
            out[far, hd] = block[far_rows, slots]
    near, sizes = rf.near_pairs, rf.near_row_sizes
    a2 = np.ascontiguousarray(a).reshape(n, heads * width)
    b2 = np.ascontiguousarray(b).reshape(n, heads * width)
    summer = np.kron(np.eye(heads, dtype=out.dtype), np.ones((width, 1), dtype=out.dtype))
    # near pairs keep row order, so the row side is a repeat rather than a gather
    row_starts = np.concatenate([[0], np.cumsum(sizes)])
    bounds = np.searchsorted(row_starts, np.arange(0, near.size, _CHUNK), side="right") - 1
    bounds = np.unique(np.append(bounds, n))
    for r0, r1 in zip(bounds[:-1], bounds[1:]):
        lo, hi = row_starts[r0], row_starts[r1]
        prod = np.repeat(a2[r0:r1], sizes[r0:r1], axis=0)
        prod *= b2[rf.cols[near[lo:hi]]]
        out[near[lo:hi]] = prod @ summer
    return out


def _project(h: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``(n, d) x (H, d, e) -> (n, H, e)``."""
    return np.einsum("nd,hde->nhe", h, w)


# -- sparse path --------------------------------------------------------------

def _sparse_forward(h, rf: ReceptiveField, params: AttentionParams):
    q, k, v = _project(h, params.wq), _project(h, params.wk), _project(h, params.wv)
    n, heads, d_head = q.shape
    scale = 1.0 / math.sqrt(d_head)
    starts = rf.indptr[:-1]
    scores = _sddmm(rf, q, k)
    scores *= scale
    scores += params.bias.biases.T.astype(h.dtype)[rf.codes]
    alpha = np.empty((rf.total_pairs, heads), dtype=h.dtype)
    out = np.empty((n, heads, d_head), dtype=h.dtype)
    for hd in range(heads):
        s = np.ascontiguousarray(scores[:, hd])
        # rows are never empty (v is in its own ball), so reduceat is safe
        s -= np.maximum.reduceat(s, starts)[rf.rows]
        np.exp(s, out=s)
        s /= np.add.reduceat(s, starts)[rf.rows]
        alpha[:, hd] = s
        out[:, hd] = rf.pattern(s) @ v[:, hd]
    return q, k, v, alpha, out


def _sparse_backward(d_out, cache: AttentionCache, params: AttentionParams):
    rf = cache.field
    q, k, v, alpha = cache.q, cache.k, cache.v, cache.alpha
    heads, d_head = q.shape[1], q.shape[2]
    scale = 1.0 / math.sqrt(d_head)
    starts = rf.indptr[:-1]
    dq = np.empty_like(q)
    dk = np.empty_like(k)
    dv = np.empty_like(v)
    dbias = np.zeros_like(params.bias.biases)
    d_alphas = _sddmm(rf, d_out, v)
    for hd in range(heads):
        a = np.ascontiguousarray(alpha[:, hd])
        d_alpha = d_alphas[:, hd]
        ds = a * (d_alpha - np.add.reduceat(a * d_alpha, starts)[rf.rows])
        dbias[hd] = np.bincount(rf.codes, weights=ds, minlength=rf.num_codes)
        ds_mat = rf.pattern(ds * scale)
        dq[:, hd] = ds_mat @ k[:, hd]
        dk[:, hd] = ds_mat.T @ q[:, hd]
        dv[:, hd] = rf.pattern(a).T @ d_out[:, hd]
    return dq, dk, dv, dbias


# -- dense path ---------------------------------------------------------------

def _dense_forward(h, fld: DenseField, params: AttentionParams):
    q, k, v = _project(h, params.wq), _project(h, params.wk), _project(h, params.wv)
    n, heads, d_head = q.shape
    scale = 1.0 / math.sqrt(d_head)
    alpha = np.empty((heads, n, n), dtype=h.dtype)
    out = np.empty((n, heads, d_head), dtype=h.dtype)
    full = bool(fld.mask.all())
    for hd in range(heads):
        s = (q[:, hd] @ k[:, hd].T) * scale
        s += params.bias.biases[hd].astype(h.dtype)[fld.codes]
        if not full:
            s[~fld.mask] = MASK_VALUE
        s -= s.max(axis=1, keepdims=True)
        np.exp(s, out=s)
        s /= s.sum(axis=1, keepdims=True)
        alpha[hd] = s
        out[:, hd] = s @ v[:, hd]
    return q, k, v, alpha, out


def _dense_backward(d_out, cache: AttentionCache, params: AttentionParams):
    fld = cache.field
    q, k, v, alpha = cache.q, cache.k, cache.v, cache.alpha
    heads, d_head = q.shape[1], q.shape[2]
    scale = 1.0 / math.sqrt(d_head)
    dq = np.empty_like(q)
    dk = np.empty_like(k)
    dv = np.empty_like(v)
    dbias = np.zeros_like(params.bias.biases)
    full = bool(fld.mask.all())
    for hd in range(heads):
        a = alpha[hd]
        d_alpha = d_out[:, hd] @ v[:, hd].T
        ds = a * (d_alpha - (a * d_alpha).sum(axis=1, keepdims=True))
        if not full:
            # masked logits are constants, not functions of the parameters
            ds[~fld.mask] = 0.0
        dbias[hd] = np.bincount(fld.codes.reshape(-1), weights=ds.reshape(-1),
                                minlength=fld.num_codes)
        ds *= scale
        dq[:, hd] = ds @ k[:, hd]
        dk[:, hd] = ds.T @ q[:, hd]
        dv[:, hd] = a.T @ d_out[:, hd]
    return dq, dk, dv, dbias


# -- public attention API -----------------------------------------------------

def attention_forward(h: np.ndarray, fld: Field, params: AttentionParams
                      ) -> Tuple[np.ndarray, AttentionCache]:
    """Multi-head attention restricted to the field's pairs.

    Per head, logits are ``q_v . k_u / sqrt(d_head) + bias[code(v, u)]``,
    normalised by a max-shifted softmax over the row. Head outputs are
    concatenated and multiplied by ``wo``.
    """
    _check_inputs(h, fld, params)
    run = _sparse_forward if isinstance(fld, ReceptiveField) else _dense_forward
    q, k, v, alpha, out = run(h, fld, params)
    concat = out.reshape(out.shape[0], -1)
    y = concat @ params.wo
    return y, AttentionCache(h, q, k, v, alpha, concat, fld)


def attention_backward(d_y: np.ndarray, cache: AttentionCache, params: AttentionParams
                       ) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Gradients of ``sum(d_y * y)`` w.r.t. the input features and every parameter."""
    if d_y.shape != (cache.h.shape[0], params.d_model):
        raise ValueError(f"upstream gradient has shape {d_y.shape}, expected "
                         f"{(cache.h.shape[0], params.d_model)}")
    grads = {"wo": cache.concat.T @ d_y}
    d_out = (d_y @ params.wo.T).reshape(cache.q.shape)
    run = _sparse_backward if isinstance(cache.field, ReceptiveField) else _dense_backward
    dq, dk, dv, dbias = run(d_out, cache, params)
    h = cache.h
    grads["wq"] = np.einsum("nd,nhe->hde", h, dq)
    grads["wk"] = np.einsum("nd,nhe->hde", h, dk)
    grads["wv"] = np.einsum("nd,nhe->hde", h, dv)
    grads["bias"] = dbias
    dh = (np.einsum("nhe,hde->nd", dq, params.wq)
          + np.einsum("nhe,hde->nd", dk, params.wk)
          + np.einsum("nhe,hde->nd", dv, params.wv))
    return dh, {name: grads[name] for name in ("wq", "wk", "wv", "wo", "bias")}


def attention_weights(cache: AttentionCache) -> np.ndarray:
    """Per-pair weights ``(pairs, heads)`` for sparse caches, ``(heads, n, n)`` for dense."""
    return cache.alpha


def row_sums(cache: AttentionCache) -> np.ndarray:
    """Softmax row sums, shape ``(n, heads)``."""
    if isinstance(cache.field, ReceptiveField):
        return np.add.reduceat(cache.alpha, cache.field.indptr[:-1], axis=0)
    return cache.alpha.sum(axis=2).T


# -- transformer layer --------------------------------------------------------

LN_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)


def _gelu(x):
    inner = _GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(inner)
    return 0.5 * x * (1.0 + t), t


def _gelu_grad(x, t):
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x * x)


def _layer_norm(x, gamma, beta):
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return xhat * gamma + beta, (xhat, inv)


def _layer_norm_backward(dy, gamma, cache):
    xhat, inv = cache
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * gamma
    dx = inv * (dxhat - dxhat.mean(axis=1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=1, keepdims=True))
    return dx, dgamma, dbeta


@dataclass
class LayerParams:
    """Pre-norm block: ``x + Attn(LN1 x)`` then ``+ FFN(LN2 .)`` with a GELU hidden layer."""

    attn: AttentionParams
    ln1_g: np.ndarray
    ln1_b: np.ndarray
    ln2_g: np.ndarray
    ln2_b: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def init(cls, d_model: int, heads: int, d_max: int = DEFAULT_D_MAX,
             rng: Optional[np.random.Generator] = None, dtype=np.float64) -> "LayerParams":
        rng = rng or np.random.default_rng()
        hidden = 2 * d_model
        return cls(
            attn=AttentionParams.init(d_model, heads, d_max, rng, dtype),
            ln1_g=(1.0 + 0.1 * rng.standard_normal(d_model)).astype(dtype),
            ln1_b=(0.1 * rng.standard_normal(d_model)).astype(dtype),
            ln2_g=(1.0 + 0.1 * rng.standard_normal(d_model)).astype(dtype),
            ln2_b=(0.1 * rng.standard_normal(d_model)).astype(dtype),
            w1=(rng.standard_normal((d_model, hidden)) / math.sqrt(d_model)).astype(dtype),
            b1=(0.1 * rng.standard_normal(hidden)).astype(dtype),
            w2=(rng.standard_normal((hidden, d_model)) / math.sqrt(hidden)).astype(dtype),
            b2=(0.1 * rng.standard_normal(d_model)).astype(dtype),
        )

    def arrays(self) -> Dict[str, np.ndarray]:
        out = {f"attn.{k}": a for k, a in self.attn.arrays().items()}
        for name in ("ln1_g", "ln1_b", "ln2_g", "ln2_b", "w1", "b1", "w2", "b2"):
            out[name] = getattr(self, name)
        return out


@dataclass
class LayerCache:
    ln1: tuple
    attn: AttentionCache
    ln2: tuple
    z2: np.ndarray
    pre: np.ndarray
    tanh: np.ndarray
    act: np.ndarray


def transformer_layer(h: np.ndarray, fld: Field, params: LayerParams
                      ) -> Tuple[np.ndarray, LayerCache]:
    z1, ln1 = _layer_norm(h, params.ln1_g, params.ln1_b)
    a, attn_cache = attention_forward(z1, fld, params.attn)
    h1 = h + a
    z2, ln2 = _layer_norm(h1, params.ln2_g, params.ln2_b)
    pre = z2 @ params.w1 + params.b1
    act, t = _gelu(pre)
    out = h1 + act @ params.w2 + params.b2
    return out, LayerCache(ln1, attn_cache, ln2, z2, pre, t, act)


def transformer_layer_backward(d_out: np.ndarray, cache: LayerCache, params: LayerParams
                               ) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    grads = {"w2": cache.act.T @ d_out, "b2": d_out.sum(axis=0)}
    d_act = d_out @ params.w2.T
    d_pre = d_act * _gelu_grad(cache.pre, cache.tanh)
    grads["w1"] = cache.z2.T @ d_pre
    grads["b1"] = d_pre.sum(axis=0)
    d_z2 = d_pre @ params.w1.T
    d_h1, grads["ln2_g"], grads["ln2_b"] = _layer_norm_backward(d_z2, params.ln2_g, cache.ln2)
    d_h1 += d_out
    d_z1, attn_grads = attention_backward(d_h1, cache.attn, params.attn)
    d_h, grads["ln1_g"], grads["ln1_b"] = _layer_norm_backward(d_z1, params.ln1_g, cache.ln1)
    d_h += d_h1
    grads.update({f"attn.{k}": g for k, g in attn_grads.items()})
    return d_h, grads


def stack_forward(h: np.ndarray, fld: Field, layers: Sequence[LayerParams]):
    caches = []
    for p in layers:
        h, c = transformer_layer(h, fld, p)
        caches.append(c)
    return h, caches


def stack_backward(d_out: np.ndarray, caches: Sequence[LayerCache], layers: Sequence[LayerParams]):
    grads: List[Dict[str, np.ndarray]] = [None] * len(layers)
    for i in reversed(range(len(layers))):
        d_out, grads[i] = transformer_layer_backward(d_out, caches[i], layers[i])
    return d_out, grads


def mean_readout(h: np.ndarray) -> np.ndarray:
    if h.shape[0] == 0:
        raise ValueError("mean readout of an empty graph is undefined")
    return h.mean(axis=0)


# -- sampling-based training --------------------------------------------------

@dataclass(frozen=True)
class Batch:
    graph: Graph
    global_ids: np.ndarray
    anchors: AnchorSet

    def local_anchor_ids(self) -> np.ndarray:
        return self.anchors.nodes


def augment_subgraph(g: Graph, anchors: AnchorSet, sampled: Sequence[int]) -> Batch:
    """Induced subgraph on ``sampled | S`` with the full-graph anchors as its anchor set."""
    sampled = np.asarray(sampled, dtype=np.int64)
    if sampled.size == 0:
        raise ValueError("sampled node set must be non-empty")
    sub, ids = induced_subgraph(g, np.concatenate([sampled, anchors.nodes]))
    local = np.searchsorted(ids, anchors.nodes)
    return Batch(sub, ids, AnchorSet.from_nodes(sub, local, anchors.k, anchors.seed))
