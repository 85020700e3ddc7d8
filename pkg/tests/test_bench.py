import json

import numpy as np
import pytest

from anchorgt.anchors import select_anchors
from anchorgt.attention import (DenseField, LayerParams, attended_pair_count,
                                build_receptive_field, stack_forward)
from anchorgt.bench import (PRESETS, BenchRecord, fit_records, fit_scaling_exponent,
                            k_sweep_report, read_records_csv, records_to_json,
                            run_scaling_suite, write_long_csv, write_records_csv)
from anchorgt.graph import complete_graph, erdos_renyi, path_graph

FAST = dict(reps=1, warmup=0, d_model=8, heads=2, layers=1, measure_memory=False)


def test_fit_quadratic_and_linear():
    ns = [100, 200, 400, 800, 1600]
    slope, resid = fit_scaling_exponent(ns, [n * n for n in ns])
    assert abs(slope - 2.0) < 1e-9 and resid < 1e-9
    slope, _ = fit_scaling_exponent(ns, [7.5 * n for n in ns])
    assert abs(slope - 1.0) < 1e-9


@pytest.mark.parametrize("ns,vals", [([1, 2], [1, 2]), ([5, 5, 5], [1, 2, 3]),
                                     ([1, 2, 3], [1, 0, 3]), ([1, 2, 3], [1, 2])])
def test_fit_rejects_degenerate(ns, vals):
    with pytest.raises(ValueError):
        fit_scaling_exponent(ns, vals)


def test_suite_rejects_bad_arguments():
    with pytest.raises(ValueError):
        run_scaling_suite([10, 20], p=0.1, avg_degree=3.0)
    with pytest.raises(ValueError):
        run_scaling_suite([20, 10], p=0.1)


def test_paper_grid_records():
    preset = PRESETS["paper-grid"]
    recs = run_scaling_suite(preset["sizes"], p=preset["p"], **FAST)
    assert [r.n for r in recs] == [500, 1000, 1500, 2000, 2500, 3000]
    for r in recs:
        assert r.attended_pairs < r.dense_pairs
        assert r.anchor_forward_ms > 0 and r.dense_forward_ms > 0


def test_complete_graph_attends_everything():
    (rec,) = run_scaling_suite([500], p=1.0, k=1, **FAST)
    assert rec.num_anchors == 1
    assert rec.attended_pairs == rec.dense_pairs == 500 * 500


def test_counts_deterministic_and_match_field():
    a = run_scaling_suite([200, 300, 400], avg_degree=4.0, **FAST)
    b = run_scaling_suite([200, 300, 400], avg_degree=4.0, **FAST)
    for ra, rb in zip(a, b):
        assert (ra.num_anchors, ra.attended_pairs, ra.max_ball) == (rb.num_anchors, rb.attended_pairs, rb.max_ball)
        g = erdos_renyi(ra.n, ra.p, ra.n)
        rf = build_receptive_field(g, select_anchors(g, 2, ra.n))
        assert ra.attended_pairs == attended_pair_count(rf) == rf.total_pairs
    assert fit_records(a, "dense_pairs")[0] == pytest.approx(2.0, abs=1e-12)


def test_dense_and_anchor_paths_agree_when_field_is_global():
    g = erdos_renyi(60, 0.5, 4)
    rf = build_receptive_field(g, select_anchors(g, 2, 4))
    assert rf.total_pairs == 60 * 60
    rng = np.random.default_rng(0)
    stack = [LayerParams.init(16, 2, 8, rng) for _ in range(2)]
    h = rng.standard_normal((60, 16))
    ys, _ = stack_forward(h, rf, stack)
    yd, _ = stack_forward(h, DenseField.from_graph(g, 8), stack)
    assert np.abs(ys - yd).max() < 1e-6


def test_k_sweep_complete_graph_rows_identical():
    rows = k_sweep_report(complete_graph(6), [1, 2, 3])
    stripped = [{k: v for k, v in r.items() if k != "k"} for r in rows]
    assert stripped[0] == stripped[1] == stripped[2]


def test_k_sweep_path_strictly_decreasing():
    rows = k_sweep_report(path_graph(100), [1, 2, 3])
    sizes = [r["num_anchors"] for r in rows]
    assert sizes[0] > sizes[1] > sizes[2]
    assert rows[1]["relative_cost"] == 1.0


def test_k_sweep_er_trend():
    rows = k_sweep_report(erdos_renyi(2000, 0.005, 0), [1, 2, 3], seed=0)
    s = [r["num_anchors"] for r in rows]
    m = [r["mean_ball"] for r in rows]
    assert s[0] >= s[1] >= s[2]
    assert m[0] <= m[1] <= m[2]


def test_k_sweep_rejects_out_of_range():
    with pytest.raises(ValueError):
        k_sweep_report(path_graph(5), [0, 1])
    with pytest.raises(ValueError):
        k_sweep_report(path_graph(5), [])


def test_csv_json_round_trip(tmp_path):
    recs = run_scaling_suite([100, 150, 5000], avg_degree=2.0, dense_max_n=200, **FAST)
    assert recs[-1].dense_forward_ms is None
    path = tmp_path / "r.csv"
    write_records_csv(recs, path)
    assert read_records_csv(path) == recs
    data = json.loads(records_to_json(recs))
    assert [d["n"] for d in data] == [100, 150, 5000]
    assert set(data[0]) == set(BenchRecord.columns())
    long = tmp_path / "long.csv"
    write_long_csv(recs, long)
    lines = long.read_text().splitlines()
    assert lines[0] == "n,metric,value"
    assert not any(",dense_forward_ms," in ln for ln in lines if ln.startswith("5000,"))
