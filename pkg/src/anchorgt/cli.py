"""Command-line entry point: ``anchorgt <command> ...``.

Graph arguments accept an edge-list file or a built-in name: ``P<n>`` (path),
``C<n>`` (cycle), ``K<n>`` (complete), ``star<n>`` (star with n leaves),
``triangle``, ``decalin``, ``bicyclopentyl``.

Exit codes: 0 success, 1 verification failure, 2 usage or parse error.
Set ``ANCHORGT_LOG`` (e.g. ``INFO``, ``DEBUG``) to change log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import graph as gr
from .anchors import select_anchors, verify_dominating
from .attention import (LayerParams, attention_forward, attended_pair_count,
                        build_receptive_field, row_sums, stack_forward)
from .bench import (PRESETS, fit_records, k_sweep_report, records_to_json,
                    run_scaling_suite, write_long_csv, write_records_csv)
from .encoding import DEFAULT_D_MAX
from .expressiveness import Fact2Config, fact2_distribution, wl_refine
from .gradcheck import check_layer

log = logging.getLogger("anchorgt")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: Sequence[str] = ()
    k: int = 2
    seed: int = 0
    d_max: int = DEFAULT_D_MAX
    d_model: int = 32
    heads: int = 2
    layers: int = 2
    preset: Optional[str] = None
    out: Optional[str] = None
    fmt: str = "json"

    def __post_init__(self):
        if self.k < 1:
            raise UsageError(f"k must be >= 1, got {self.k}")
        if self.d_max < self.k + 1:
            raise UsageError(f"d_max must be >= k + 1 = {self.k + 1}, got {self.d_max}")
        for name in ("d_model", "heads", "layers"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be positive")
        if self.d_model % self.heads:
            raise UsageError(f"d_model {self.d_model} is not divisible by heads {self.heads}")


_NAMED = {
    "triangle": lambda: gr.cycle_graph(3),
    "decalin": gr.decalin,
    "bicyclopentyl": gr.bicyclopentyl,
}
_FAMILIES = {"P": gr.path_graph, "C": gr.cycle_graph, "K": gr.complete_graph, "star": gr.star_graph}


def load_graph(spec: str) -> gr.Graph:
    """Read ``spec`` as a file if it exists, else as a built-in graph name."""
    if os.path.exists(spec):
        return gr.read_edge_list_file(spec)
    if spec in _NAMED:
        return _NAMED[spec]()
    m = re.fullmatch(r"(P|C|K|star)(\d+)", spec)
    if m:
        return _FAMILIES[m.group(1)](int(m.group(2)))
    raise UsageError(f"no such file or built-in graph: {spec!r}")


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2))


def _probability(text: str) -> float:
    p = float(text)
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError(f"p must lie in [0, 1], got {text}")
    return p


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


# -- commands -----------------------------------------------------------------

def cmd_gen(args, cfg: RunConfig) -> int:
    g = gr.erdos_renyi(args.n, args.p, cfg.seed)
    if cfg.out:
        gr.write_edge_list_file(g, cfg.out)
    else:
        sys.stdout.write(gr.format_edge_list(g))
    log.info("generated n=%d m=%d", g.n, g.num_edges)
    return EXIT_OK


def cmd_anchors(args, cfg: RunConfig) -> int:
    g = load_graph(cfg.inputs[0])
    anchors = select_anchors(g, cfg.k, cfg.seed)
    ok, witness = verify_dominating(g, anchors)
    out = anchors.to_dict()
    out["verified"] = bool(ok)
    if witness is not None:
        out["uncovered"] = int(witness)
    _emit(out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sweep(args, cfg: RunConfig) -> int:
    g = load_graph(cfg.inputs[0])
    _emit(k_sweep_report(g, args.k_values, cfg.seed, baseline_k=cfg.k))
    return EXIT_OK


def _random_setup(cfg: RunConfig, g: gr.Graph):
    anchors = select_anchors(g, cfg.k, cfg.seed)
    rf = build_receptive_field(g, anchors, cfg.d_max)
    rng = np.random.default_rng(cfg.seed)
    h = rng.standard_normal((g.n, cfg.d_model))
    return anchors, rf, rng, h


def cmd_forward(args, cfg: RunConfig) -> int:
    g = load_graph(cfg.inputs[0])
    anchors, rf, rng, h = _random_setup(cfg, g)
    stack = [LayerParams.init(cfg.d_model, cfg.heads, cfg.d_max, rng) for _ in range(cfg.layers)]
    # row sums are reported for the first layer's attention on the input features
    _, cache = attention_forward(h, rf, stack[0].attn)
    sums = row_sums(cache)
    out, _ = stack_forward(h, rf, stack)
    ok = bool(np.all(np.abs(sums - 1.0) < 1e-9)) and bool(np.isfinite(out).all())
    _emit({
        "n": g.n, "k": cfg.k, "seed": cfg.seed, "num_anchors": len(anchors),
        "attended_pairs": attended_pair_count(rf),
        "row_sums": [{"head": i, "min": float(sums[:, i].min()) if g.n else 1.0,
                      "max": float(sums[:, i].max()) if g.n else 1.0}
                     for i in range(cfg.heads)],
        "output_shape": list(out.shape),
        "output_norm": float(np.linalg.norm(out)),
        "ok": ok,
    })
    return EXIT_OK if ok else EXIT_FAIL


def cmd_gradcheck(args, cfg: RunConfig) -> int:
    g = load_graph(cfg.inputs[0])
    _, rf, rng, h = _random_setup(cfg, g)
    params = LayerParams.init(cfg.d_model, cfg.heads, cfg.d_max, rng)
    upstream = rng.standard_normal(h.shape)
    errors = check_layer(h, rf, params, upstream, step=args.step)
    worst = max(errors.values())
    _emit({"errors": errors, "max_relative_error": worst, "tolerance": args.tol,
           "ok": worst < args.tol})
    return EXIT_OK if worst < args.tol else EXIT_FAIL


def cmd_wl(args, cfg: RunConfig) -> int:
    g1, g2 = (load_graph(s) for s in cfg.inputs)
    res = wl_refine(g1, g2)
    out = res.to_dict()
    out["verdict"] = "distinguishable" if res.distinguishable else "indistinguishable"
    _emit(out)
    return EXIT_OK


def cmd_fact2(args, cfg: RunConfig) -> int:
    g1, g2 = (load_graph(s) for s in cfg.inputs)
    report = fact2_distribution(g1, g2, Fact2Config(k=cfg.k if args.k_given else 1, d_max=cfg.d_max),
                                trials=args.trials, seed=cfg.seed)
    _emit(report.to_dict())
    return EXIT_OK


def cmd_bench(args, cfg: RunConfig) -> int:
    preset = dict(PRESETS[cfg.preset])
    sizes = args.sizes or preset.pop("sizes")
    preset.pop("sizes", None)
    records = run_scaling_suite(sizes, k=cfg.k, reps=args.reps, seed=cfg.seed,
                                d_model=cfg.d_model, heads=cfg.heads, layers=cfg.layers,
                                warmup=args.warmup, d_max=cfg.d_max, **preset)
    slopes = {}
    if len({r.n for r in records}) >= 3:
        for metric in ("attended_pairs", "dense_pairs"):
            slope, resid = fit_records(records, metric)
            slopes[metric] = {"slope": slope, "rms_residual": resid}
    out = Path(cfg.out) if cfg.out else None
    if out is None:
        if cfg.fmt == "csv":
            write_records_csv(records, sys.stdout)
        else:
            print(records_to_json(records))
    else:
        if cfg.fmt == "csv":
            write_records_csv(records, out)
            write_long_csv(records, out.with_name(out.stem + "_long.csv"))
        else:
            out.write_text(records_to_json(records) + "\n", encoding="utf-8")
        out.with_name(out.stem + "_slopes.json").write_text(json.dumps(slopes, indent=2) + "\n",
                                                            encoding="utf-8")
    for metric, fit in slopes.items():
        log.info("%s slope %.3f", metric, fit["slope"])
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anchorgt", description="Anchor-based graph transformer tools")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="single source of randomness")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p):
        p.add_argument("--k", type=int, default=None, help="anchor radius (default 2)")
        p.add_argument("--d-max", type=int, default=DEFAULT_D_MAX)
        p.add_argument("--d-model", type=_positive_int, default=32)
        p.add_argument("--heads", type=_positive_int, default=2)
        p.add_argument("--layers", type=_positive_int, default=2)

    p = sub.add_parser("gen", parents=[common], help="write an Erdos-Renyi graph as an edge list")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=_probability, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("anchors", parents=[common], help="select and verify a k-dominating anchor set")
    p.add_argument("graph")
    model_flags(p)
    p.set_defaults(func=cmd_anchors)

    p = sub.add_parser("sweep", parents=[common], aliases=["ksweep"], help="anchor count and cost per k")
    p.add_argument("graph")
    p.add_argument("--k-values", type=int, nargs="+", default=[1, 2, 3])
    model_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("forward", parents=[common], help="run the layer stack on random features")
    p.add_argument("graph")
    model_flags(p)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of one layer")
    p.add_argument("graph")
    model_flags(p)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("wl", parents=[common], help="1-WL test on two graphs")
    p.add_argument("graphs", nargs=2)
    p.set_defaults(func=cmd_wl)

    p = sub.add_parser("fact2", parents=[common], help="compare anchor-attention readout laws of two graphs")
    p.add_argument("graphs", nargs=2)
    model_flags(p)
    p.add_argument("--trials", type=_positive_int, default=None,
                   help="sample seeded selections instead of the exact greedy law")
    p.set_defaults(func=cmd_fact2)

    p = sub.add_parser("bench", parents=[common], help="scaling suite on Erdos-Renyi graphs")
    p.add_argument("--preset", choices=sorted(PRESETS), default="paper-grid")
    p.add_argument("--sizes", type=_positive_int, nargs="+", default=None)
    p.add_argument("--reps", type=_positive_int, default=3)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--out")
    p.add_argument("--format", dest="fmt", choices=["json", "csv"], default="json")
    model_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def _config(args) -> RunConfig:
    inputs = getattr(args, "graphs", None) or ([args.graph] if getattr(args, "graph", None) else [])
    args.k_given = getattr(args, "k", None) is not None
    k = args.k if args.k_given else 2
    return RunConfig(
        command=args.command, inputs=inputs, k=k, seed=args.seed,
        d_max=getattr(args, "d_max", DEFAULT_D_MAX),
        d_model=getattr(args, "d_model", 32), heads=getattr(args, "heads", 2),
        layers=getattr(args, "layers", 2), preset=getattr(args, "preset", None),
        out=getattr(args, "out", None), fmt=getattr(args, "fmt", "json"),
    )


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=os.environ.get("ANCHORGT_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except (UsageError, gr.GraphFormatError, ValueError, OSError) as exc:
        print(f"anchorgt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
