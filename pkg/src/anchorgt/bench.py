"""Scaling benchmarks: attended-pair counts, timings and allocator peaks on ER graphs."""

from __future__ import annotations

import csv
import json
import logging
import time
import tracemalloc
from contextlib import contextmanager
from dataclasses import asdict, dataclass, fields
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .anchors import select_anchors
from .attention import (DenseField, LayerParams, attended_pair_count,
                        build_receptive_field, dense_pair_count, stack_backward, stack_forward)
from .encoding import DEFAULT_D_MAX
from .graph import Graph, erdos_renyi, k_hop_distances

log = logging.getLogger(__name__)


@dataclass
class BenchRecord:
    n: int
    p: float
    k: int
    seed: int
    graphs: int
    num_anchors: int
    max_ball: int
    mean_ball: float
    attended_pairs: int
    dense_pairs: int
    anchor_forward_ms: float
    anchor_backward_ms: float
    anchor_peak_bytes: int
    dense_forward_ms: Optional[float] = None
    dense_backward_ms: Optional[float] = None
    dense_peak_bytes: Optional[int] = None

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]


PRESETS: Dict[str, dict] = {
    # sparse grid; most nodes are isolated at this density
    "paper-grid": {"sizes": [500, 1000, 1500, 2000, 2500, 3000], "p": 0.0001},
    "fixed-degree": {"sizes": [1000, 2000, 4000, 8000], "avg_degree": 10.0},
}


def ball_stats(g: Graph, k: int) -> Tuple[int, float]:
    sizes = np.diff(k_hop_distances(g, k).indptr)
    if sizes.size == 0:
        return 0, 0.0
    return int(sizes.max()), float(sizes.mean())


def _time_passes(h, fld, layers, upstream, reps: int, warmup: int) -> Tuple[float, float]:
    for _ in range(warmup):
        out, caches = stack_forward(h, fld, layers)
        stack_backward(upstream, caches, layers)
    fwd = bwd = 0.0
    for _ in range(reps):
        t0 = time.perf_counter()
        out, caches = stack_forward(h, fld, layers)
        t1 = time.perf_counter()
        stack_backward(upstream, caches, layers)
        t2 = time.perf_counter()
        fwd += t1 - t0
        bwd += t2 - t1
    return 1e3 * fwd / reps, 1e3 * bwd / reps


def _peak_bytes(h, fld, layers, upstream) -> int:
    tracemalloc.start()
    try:
        tracemalloc.reset_peak()
        base = tracemalloc.get_traced_memory()[0]
        out, caches = stack_forward(h, fld, layers)
        stack_backward(upstream, caches, layers)
        return tracemalloc.get_traced_memory()[1] - base
    finally:
        tracemalloc.stop()


def run_scaling_suite(sizes: Sequence[int], p: Optional[float] = None,
                      avg_degree: Optional[float] = None, k: int = 2, reps: int = 3,
                      seed: int = 0, d_model: int = 32, heads: int = 2, layers: int = 2,
                      warmup: int = 3, graphs_per_size: int = 1, dense_max_n: int = 4000,
                      d_max: int = DEFAULT_D_MAX, dtype=np.float32,
                      measure_memory: bool = True) -> List[BenchRecord]:
    """Time anchor and dense attention stacks on ER graphs of each size.

    Exactly one of ``p`` (fixed edge probability) or ``avg_degree`` (``p``
    scaled as ``avg_degree / (n - 1)``) must be given. Counts are summed and
    timings averaged over ``graphs_per_size`` graphs. The dense path is
    skipped (fields left ``None``) above ``dense_max_n`` nodes.
    """
    if (p is None) == (avg_degree is None):
        raise ValueError("give exactly one of p or avg_degree")
    if list(sizes) != sorted(sizes):
        raise ValueError("sizes must be ascending")
    records = []
    for n in sizes:
        p_n = p if p is not None else min(1.0, avg_degree / max(n - 1, 1))
        acc = {"anchors": 0, "max_ball": 0, "mean_ball": 0.0, "pairs": 0, "dense": 0,
               "af": 0.0, "ab": 0.0, "am": 0, "df": 0.0, "db": 0.0, "dm": 0}
        run_dense = n <= dense_max_n
        for i in range(graphs_per_size):
            gseed = seed + 1000 * i + n
            g = erdos_renyi(n, p_n, gseed)
            anchors = select_anchors(g, k, gseed)
            rf = build_receptive_field(g, anchors, d_max)
            max_ball, mean_ball = ball_stats(g, k)
            rng = np.random.default_rng(gseed)
            stack = [LayerParams.init(d_model, heads, d_max, rng, dtype) for _ in range(layers)]
            h = rng.standard_normal((n, d_model)).astype(dtype)
            upstream = rng.standard_normal((n, d_model)).astype(dtype)
            af, ab = _time_passes(h, rf, stack, upstream, reps, warmup)
            acc["anchors"] += len(anchors)
            acc["max_ball"] = max(acc["max_ball"], max_ball)
            acc["mean_ball"] += mean_ball / graphs_per_size
            acc["pairs"] += attended_pair_count(rf)
            acc["dense"] += dense_pair_count(n)
            acc["af"] += af / graphs_per_size
            acc["ab"] += ab / graphs_per_size
            if measure_memory:
                acc["am"] = max(acc["am"], _peak_bytes(h, rf, stack, upstream))
            if run_dense:
                dense = DenseField.from_graph(g, d_max)
                df, db = _time_passes(h, dense, stack, upstream, reps, warmup)
                acc["df"] += df / graphs_per_size
                acc["db"] += db / graphs_per_size
                if measure_memory:
                    acc["dm"] = max(acc["dm"], _peak_bytes(h, dense, stack, upstream))
                del dense
        rec = BenchRecord(
            n=n, p=p_n, k=k, seed=seed, graphs=graphs_per_size, num_anchors=acc["anchors"],
            max_ball=acc["max_ball"], mean_ball=acc["mean_ball"], attended_pairs=acc["pairs"],
            dense_pairs=acc["dense"], anchor_forward_ms=acc["af"], anchor_backward_ms=acc["ab"],
            anchor_peak_bytes=acc["am"],
        )
        if run_dense:
            rec.dense_forward_ms, rec.dense_backward_ms = acc["df"], acc["db"]
            rec.dense_peak_bytes = acc["dm"]
        log.info("n=%d anchors=%d pairs=%d anchor=%.1f+%.1fms dense=%s", n, rec.num_anchors,
                 rec.attended_pairs, rec.anchor_forward_ms, rec.anchor_backward_ms,
                 "skipped" if not run_dense else f"{rec.dense_forward_ms:.1f}+{rec.dense_backward_ms:.1f}ms")
        records.append(rec)
    return records


def fit_scaling_exponent(ns: Sequence[float], values: Sequence[float]) -> Tuple[float, float]:
    """Least-squares slope of ``log(value)`` on ``log(n)`` and the RMS residual."""
    x = np.log(np.asarray(ns, dtype=np.float64))
    y = np.asarray(values, dtype=np.float64)
    if x.size != y.size or np.unique(x).size < 3:
        raise ValueError("need at least 3 records with distinct n")
    if not (np.isfinite(y).all() and (y > 0).all()):
        raise ValueError("metric values must be positive and finite")
    y = np.log(y)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(np.sqrt(np.mean(resid ** 2)))


def fit_records(records: Sequence[BenchRecord], metric: str = "attended_pairs") -> Tuple[float, float]:
    return fit_scaling_exponent([r.n for r in records], [getattr(r, metric) for r in records])


def k_sweep_report(g: Graph, k_values: Sequence[int], seed: int = 0,
                   baseline_k: int = 2) -> List[dict]:
    """Anchor count, ball sizes and attended pairs per k, with cost relative to ``baseline_k``."""
    if not k_values or not set(k_values) <= set(range(1, 7)):
        raise ValueError("k_values must be a non-empty subset of 1..6")
    rows = []
    for k in k_values:
        anchors = select_anchors(g, k, seed)
        rf = build_receptive_field(g, anchors, max(DEFAULT_D_MAX, k + 1))
        max_ball, mean_ball = ball_stats(g, k)
        rows.append({"k": k, "num_anchors": len(anchors), "mean_ball": mean_ball,
                     "max_ball": max_ball, "attended_pairs": attended_pair_count(rf)})
    base = next((r for r in rows if r["k"] == baseline_k), rows[0])
    for r in rows:
        r["relative_cost"] = r["attended_pairs"] / base["attended_pairs"] if base["attended_pairs"] else float("nan")
    return rows


# -- output -------------------------------------------------------------------

def _plain(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


@contextmanager
def _sink(target):
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", newline="", encoding="utf-8") as fh:
            yield fh


def write_records_csv(records: Iterable[BenchRecord], target) -> None:
    """Write one row per record to a path or an open text stream."""
    with _sink(target) as fh:
        writer = csv.writer(fh)
        writer.writerow(BenchRecord.columns())
        for r in records:
            writer.writerow([_plain(getattr(r, c)) for c in BenchRecord.columns()])


def write_long_csv(records: Iterable[BenchRecord], target) -> None:
    """One ``(n, metric, value)`` row per numeric field, for external plotting."""
    skip = {"n", "seed", "k", "p", "graphs"}
    with _sink(target) as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "metric", "value"])
        for r in records:
            for c in BenchRecord.columns():
                v = getattr(r, c)
                if c not in skip and v is not None:
                    writer.writerow([r.n, c, _plain(v)])


def records_to_json(records: Iterable[BenchRecord]) -> str:
    return json.dumps([asdict(r) for r in records], indent=2)


def read_records_csv(path) -> List[BenchRecord]:
    kinds = {f.name: f.type for f in fields(BenchRecord)}
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for name, raw in row.items():
                if raw == "":
                    kw[name] = None
                elif "int" in str(kinds[name]):
                    kw[name] = int(raw)
                else:
                    kw[name] = float(raw)
            out.append(BenchRecord(**kw))
    return out
