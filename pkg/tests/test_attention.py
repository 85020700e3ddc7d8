import math

import numpy as np
import pytest

from anchorgt.anchors import AnchorSet, select_anchors, verify_dominating
from anchorgt.attention import (MASK_VALUE, AttentionParams, DenseField, LayerParams,
                                attended_pair_count, attention_backward, attention_forward,
                                augment_subgraph, build_receptive_field, dense_pair_count,
                                mean_readout, row_sums, stack_backward, stack_forward,
                                transformer_layer)
from anchorgt.encoding import SpdScheme
from anchorgt.gradcheck import check_attention, check_layer
from anchorgt.graph import (complete_graph, erdos_renyi, from_edge_list, induced_subgraph,
                            k_hop, path_graph, relabel)

from conftest import matrix_power_distances, random_graph


def random_instance(rng, n_max=64, p_choices=(0.05, 0.1, 0.2), k=None, d_max=8):
    n = int(rng.integers(1, n_max + 1))
    g = random_graph(rng, n, float(rng.choice(p_choices)))
    k = int(rng.integers(1, 4)) if k is None else k
    s = select_anchors(g, k, int(rng.integers(1 << 20)))
    return g, s, build_receptive_field(g, s, d_max)


def receptive_mask(g, s):
    dist = matrix_power_distances(g)
    mask = (dist >= 0) & (dist <= s.k)
    mask[:, s.nodes] = True
    return mask


def dense_masked_oracle(h, g, s, params):
    """Full n x n attention with out-of-field logits replaced by the mask value."""
    codes = SpdScheme(params.bias.d_max).bucket(matrix_power_distances(g))
    mask = receptive_mask(g, s)
    heads = []
    for hd in range(params.heads):
        q, k, v = h @ params.wq[hd], h @ params.wk[hd], h @ params.wv[hd]
        logits = q @ k.T / math.sqrt(params.d_head) + params.bias.biases[hd][codes]
        logits = np.where(mask, logits, MASK_VALUE)
        logits -= logits.max(axis=1, keepdims=True)
        w = np.exp(logits)
        w /= w.sum(axis=1, keepdims=True)
        heads.append(w @ v)
    return np.concatenate(heads, axis=1) @ params.wo


# -- receptive field ----------------------------------------------------------

def test_rf_complete_graph():
    g = complete_graph(4)
    rf = build_receptive_field(g, AnchorSet.from_nodes(g, [0], 1))
    for v in range(4):
        assert rf.row(v)[0].tolist() == [0, 1, 2, 3]
    assert rf.total_pairs == 16 == attended_pair_count(rf)


def test_rf_path_row():
    g = path_graph(5)
    rf = build_receptive_field(g, AnchorSet.from_nodes(g, [1, 3], 1))
    cols, codes = rf.row(0)
    assert cols.tolist() == [0, 1, 3]
    assert codes.tolist() == [0, 1, 3]


def test_rf_er_bound_and_cover():
    g = erdos_renyi(500, 0.02, 4)
    s = select_anchors(g, 2, 4)
    rf = build_receptive_field(g, s)
    max_ball = max(k_hop(g, v, 2).size for v in range(g.n))
    assert rf.total_pairs <= 500 * (max_ball + len(s))
    near = rf.codes <= 2
    assert np.unique(rf.cols[near]).size == g.n


def test_rf_invariants_and_codes(rng):
    for _ in range(50):
        g, s, rf = random_instance(rng, 40)
        codes = SpdScheme(rf.d_max).bucket(matrix_power_distances(g))
        mask = receptive_mask(g, s)
        for v in range(g.n):
            cols, c = rf.row(v)
            assert np.all(np.diff(cols) > 0)
            assert v in cols
            assert set(s.nodes.tolist()) <= set(cols.tolist())
            assert cols.tolist() == np.flatnonzero(mask[v]).tolist()
            assert c.tolist() == codes[v, cols].tolist()


def test_rf_rejects_small_d_max():
    g = path_graph(5)
    with pytest.raises(ValueError):
        build_receptive_field(g, select_anchors(g, 2, 0), d_max=2)


def test_pair_counts():
    assert dense_pair_count(1000) == 1_000_000
    rng = np.random.default_rng(1)
    for _ in range(20):
        g, s, rf = random_instance(rng, 50)
        bound = g.n * (max(k_hop(g, v, s.k).size for v in range(g.n)) + len(s))
        assert attended_pair_count(rf) <= bound
        assert attended_pair_count(rf) <= dense_pair_count(g.n)


# -- forward ------------------------------------------------------------------

def test_forward_single_node(rng):
    g = from_edge_list([], 1)
    rf = build_receptive_field(g, select_anchors(g, 1, 0))
    params = AttentionParams.init(4, 2, rng=rng)
    params.wo[:] = np.eye(4)
    h = rng.standard_normal((1, 4))
    y, cache = attention_forward(h, rf, params)
    assert np.allclose(cache.alpha, 1.0)
    expected = np.concatenate([h @ params.wv[0], h @ params.wv[1]], axis=1)
    assert np.allclose(y, expected, atol=1e-14)


def test_forward_identical_features_uniform(rng):
    g = complete_graph(4)
    rf = build_receptive_field(g, AnchorSet.from_nodes(g, [0], 1))
    params = AttentionParams.init(6, 3, rng=rng)
    params.bias.biases[:] = 0.0
    h = np.tile(rng.standard_normal(6), (4, 1))
    y, cache = attention_forward(h, rf, params)
    assert np.allclose(cache.alpha, 0.25, atol=1e-15)
    vproj = np.concatenate([h[:1] @ params.wv[i] for i in range(3)], axis=1) @ params.wo
    assert np.allclose(y, np.tile(vproj, (4, 1)), atol=1e-13)


def test_forward_matches_dense_oracle_n16(rng):
    g = random_graph(rng, 16, 0.15)
    s = select_anchors(g, 2, 1)
    rf = build_receptive_field(g, s)
    params = AttentionParams.init(8, 2, rng=rng)
    h = rng.standard_normal((16, 8))
    y, _ = attention_forward(h, rf, params)
    assert np.abs(y - dense_masked_oracle(h, g, s, params)).max() < 1e-6


def test_forward_matches_dense_oracle_many(rng):
    for _ in range(50):
        g, s, rf = random_instance(rng, 64)
        d_model = int(rng.choice([2, 8, 16, 32]))
        params = AttentionParams.init(d_model, 2, rng=rng)
        h = rng.standard_normal((g.n, d_model))
        y, _ = attention_forward(h, rf, params)
        assert np.abs(y - dense_masked_oracle(h, g, s, params)).max() < 1e-6


def test_dense_field_paths_agree(rng):
    for _ in range(10):
        g, s, rf = random_instance(rng, 40)
        params = AttentionParams.init(8, 2, rng=rng)
        h = rng.standard_normal((g.n, 8))
        up = rng.standard_normal((g.n, 8))
        y_s, c_s = attention_forward(h, rf, params)
        masked = DenseField.from_graph(g, rf.d_max, rf)
        y_d, c_d = attention_forward(h, masked, params)
        assert np.abs(y_s - y_d).max() < 1e-12
        dh_s, g_s = attention_backward(up, c_s, params)
        dh_d, g_d = attention_backward(up, c_d, params)
        assert np.abs(dh_s - dh_d).max() < 1e-10
        for name in g_s:
            assert np.abs(g_s[name] - g_d[name]).max() < 1e-10


def test_full_anchor_coverage_equals_full_attention():
    g = complete_graph(30)
    s = select_anchors(g, 1, 0)
    rf = build_receptive_field(g, s)
    assert rf.total_pairs == dense_pair_count(30)
    rng = np.random.default_rng(2)
    params = AttentionParams.init(8, 2, rng=rng)
    h = rng.standard_normal((30, 8))
    y1, _ = attention_forward(h, rf, params)
    y2, _ = attention_forward(h, DenseField.from_graph(g), params)
    assert np.abs(y1 - y2).max() < 1e-6


def test_rows_sum_to_one_and_large_inputs(rng):
    for _ in range(20):
        g, s, rf = random_instance(rng, 48)
        params = AttentionParams.init(8, 2, rng=rng)
        h = 1e3 * rng.standard_normal((g.n, 8))
        y, cache = attention_forward(h, rf, params)
        assert np.isfinite(y).all()
        assert np.abs(row_sums(cache) - 1.0).max() < 1e-12


def test_forward_rejects_bad_inputs(rng):
    g, s, rf = random_instance(rng, 10)
    params = AttentionParams.init(4, 2, rng=rng)
    h = rng.standard_normal((g.n, 4))
    h[0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        attention_forward(h, rf, params)
    with pytest.raises(ValueError):
        attention_forward(np.zeros((g.n, 3)), rf, params)
    with pytest.raises(ValueError):
        AttentionParams.init(5, 2)


def test_forward_is_bit_reproducible(rng):
    g, s, rf = random_instance(rng, 60)
    params = AttentionParams.init(8, 2, rng=rng)
    h = rng.standard_normal((g.n, 8))
    up = rng.standard_normal((g.n, 8))
    y1, c1 = attention_forward(h, rf, params)
    y2, c2 = attention_forward(h, rf, params)
    assert np.array_equal(y1, y2)
    g1 = attention_backward(up, c1, params)[1]
    g2 = attention_backward(up, c2, params)[1]
    assert all(np.array_equal(g1[k], g2[k]) for k in g1)


# -- backward -----------------------------------------------------------------

def test_zero_upstream_gives_zero_gradients(rng):
    g, s, rf = random_instance(rng, 20)
    params = AttentionParams.init(8, 2, rng=rng)
    _, cache = attention_forward(rng.standard_normal((g.n, 8)), rf, params)
    dh, grads = attention_backward(np.zeros((g.n, 8)), cache, params)
    assert not dh.any()
    assert not any(a.any() for a in grads.values())


def test_value_gradient_identity(rng):
    # y is linear in wv: dwv[h] = X^T A_h^T dO_h with A_h the attention matrix
    g, s, rf = random_instance(rng, 24)
    params = AttentionParams.init(8, 2, rng=rng)
    h = rng.standard_normal((g.n, 8))
    up = rng.standard_normal((g.n, 8))
    _, cache = attention_forward(h, rf, params)
    _, grads = attention_backward(up, cache, params)
    d_out = (up @ params.wo.T).reshape(g.n, 2, 4)
    for hd in range(2):
        attn = np.zeros((g.n, g.n))
        attn[rf.rows, rf.cols] = cache.alpha[:, hd]
        assert np.allclose(grads["wv"][hd], h.T @ attn.T @ d_out[:, hd], atol=1e-12)


def test_backward_shape_check(rng):
    g, s, rf = random_instance(rng, 10)
    params = AttentionParams.init(4, 2, rng=rng)
    _, cache = attention_forward(rng.standard_normal((g.n, 4)), rf, params)
    with pytest.raises(ValueError):
        attention_backward(np.zeros((g.n + 1, 4)), cache, params)


def test_attention_gradcheck(rng):
    for _ in range(5):
        g, s, rf = random_instance(rng, 24, p_choices=(0.1, 0.2))
        params = AttentionParams.init(8, 2, rng=rng)
        h = rng.standard_normal((g.n, 8))
        errors = check_attention(h, rf, params, rng.standard_normal((g.n, 8)))
        assert max(errors.values()) < 1e-4, errors


# -- layer, readout, sampling -------------------------------------------------

def test_layer_identity_when_outputs_zeroed(rng):
    g, s, rf = random_instance(rng, 20)
    params = LayerParams.init(8, 2, rng=rng)
    params.attn.wo[:] = 0.0
    params.w2[:] = 0.0
    params.b2[:] = 0.0
    h = rng.standard_normal((g.n, 8))
    assert np.array_equal(transformer_layer(h, rf, params)[0], h)


def test_layer_finite(rng):
    for _ in range(100):
        g, s, rf = random_instance(rng, 24)
        params = LayerParams.init(8, 2, rng=rng)
        h = 10 * rng.standard_normal((g.n, 8))
        assert np.isfinite(transformer_layer(h, rf, params)[0]).all()


def test_layer_gradcheck(rng):
    for _ in range(3):
        g, s, rf = random_instance(rng, 16, p_choices=(0.1, 0.2))
        params = LayerParams.init(8, 2, rng=rng)
        h = rng.standard_normal((g.n, 8))
        errors = check_layer(h, rf, params, rng.standard_normal((g.n, 8)))
        assert max(errors.values()) < 1e-4, errors


def test_mean_readout():
    row = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(mean_readout(np.tile(row, (5, 1))), row)
    assert mean_readout(np.array([[0.0], [2.0]])).tolist() == [1.0]
    x = np.random.default_rng(0).standard_normal((7, 3))
    assert np.allclose(mean_readout(x[::-1]), mean_readout(x), atol=1e-15)
    with pytest.raises(ValueError):
        mean_readout(np.zeros((0, 3)))


def test_augment_subgraph_superset():
    g = erdos_renyi(60, 0.08, 2)
    s = select_anchors(g, 2, 2)
    sampled = np.union1d(s.nodes, [0, 1, 2, 3])
    batch = augment_subgraph(g, s, sampled)
    sub, ids = induced_subgraph(g, sampled)
    assert batch.graph == sub and np.array_equal(batch.global_ids, ids)
    assert np.array_equal(batch.global_ids[batch.anchors.nodes], s.nodes)


def test_augment_subgraph_single_node():
    g = erdos_renyi(80, 0.05, 3)
    s = select_anchors(g, 2, 3)
    v = int(np.flatnonzero(~s.membership)[0])
    batch = augment_subgraph(g, s, [v])
    assert sorted(batch.global_ids.tolist()) == sorted(set(s.nodes.tolist()) | {v})
    assert len(batch.anchors) == len(s)
    with pytest.raises(ValueError):
        augment_subgraph(g, s, [])


def test_augment_subgraph_field_builds():
    # the injected anchors need not dominate the batch; the field still builds
    g = erdos_renyi(300, 0.02, 5)
    s = select_anchors(g, 2, 5)
    sampled = np.random.default_rng(5).choice(g.n, 50, replace=False)
    batch = augment_subgraph(g, s, sampled)
    rf = build_receptive_field(batch.graph, batch.anchors)
    assert rf.n == batch.graph.n
    verify_dominating(batch.graph, batch.anchors)


def test_checkpoint_round_trip(rng):
    params = AttentionParams.init(8, 2, 6, rng=rng)
    back = AttentionParams.from_json(params.to_json())
    for name, arr in params.arrays().items():
        assert np.array_equal(back.arrays()[name], arr)
    assert back.to_dict()["encoding"] == {"scheme": "spd", "d_max": 6}


# -- global properties --------------------------------------------------------

def test_two_step_global_receptive_field(rng):
    for _ in range(50):
        g, s, rf = random_instance(rng, 48)
        assert verify_dominating(g, s)[0]
        reach = np.zeros((g.n, g.n), dtype=np.int64)
        reach[rf.rows, rf.cols] = 1
        two = (reach + reach @ reach) > 0
        assert two.all()


def test_influence_after_two_layers(rng):
    for _ in range(10):
        g, s, rf = random_instance(rng, 16)
        layers = [LayerParams.init(8, 2, rng=rng) for _ in range(2)]
        h = rng.standard_normal((g.n, 8))
        _, caches = stack_forward(h, rf, layers)
        for w in range(g.n):
            up = np.zeros((g.n, 8))
            up[w] = rng.standard_normal(8)
            dh, _ = stack_backward(up, caches, layers)
            assert (np.linalg.norm(dh, axis=1) > 1e-12).all()


def test_permutation_equivariance(rng):
    for _ in range(20):
        g, s, rf = random_instance(rng, 40)
        params = AttentionParams.init(8, 2, rng=rng)
        h = rng.standard_normal((g.n, 8))
        perm = rng.permutation(g.n)
        g2 = relabel(g, perm)
        s2 = AnchorSet.from_nodes(g2, perm[s.nodes], s.k)
        rf2 = build_receptive_field(g2, s2)
        h2 = np.empty_like(h)
        h2[perm] = h
        y, _ = attention_forward(h, rf, params)
        y2, _ = attention_forward(h2, rf2, params)
        assert np.abs(y2[perm] - y).max() < 1e-12
