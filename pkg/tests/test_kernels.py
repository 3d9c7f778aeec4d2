"""Kernel correctness against dense brute-force oracles.

The oracles materialize neighbor lists from the raw edge list and evaluate
each convolution's defining formula with plain numpy dense algebra; they
never touch the CSR message-passing path they check.
"""

import math

import numpy as np
import pytest

from gnnforge.fixed_point import FixedPointFormat
from gnnforge.graph import (
    GraphCOO,
    build_neighbor_csr,
    compute_degree_tables,
    generate_random_graph,
)
from gnnforge.kernels import (
    FixedOps,
    FloatOps,
    apply_skip,
    global_pool,
    linear_tiled,
    mlp_forward,
    model_forward,
    model_forward_fixed_raw,
    random_weights,
)
from gnnforge.kernels.convs import conv_forward, prepare_conv_layer
from gnnforge.model_ir import ActivationKind, ConvKind, PoolKind

from conftest import make_model_spec, make_project

# ---------------------------------------------------------------------------
# Dense oracles
# ---------------------------------------------------------------------------


def in_neighbors(g: GraphCOO):
    """Materialized in-neighbor (and edge id) lists, in edge order."""
    lists = [[] for _ in range(g.num_nodes)]
    for e, (s, d) in enumerate(g.edges.tolist()):
        lists[d].append((s, e))
    return lists


def oracle_gcn(g, w, b):
    x = g.node_features
    n = g.num_nodes
    a_hat = np.zeros((n, n))
    for s, d in g.edges.tolist():
        a_hat[d, s] += 1.0
    a_hat += np.eye(n)
    d_hat = a_hat.sum(axis=1)  # in_degree + 1
    d_inv_sqrt = np.diag(1.0 / np.sqrt(d_hat))
    return d_inv_sqrt @ a_hat @ d_inv_sqrt @ x @ w + b


def oracle_sage(g, w_self, w_neigh, b):
    x = g.node_features
    out = np.zeros((g.num_nodes, w_self.shape[1]))
    for i, nbrs in enumerate(in_neighbors(g)):
        mean = (
            np.mean([x[j] for j, _ in nbrs], axis=0)
            if nbrs
            else np.zeros(x.shape[1])
        )
        out[i] = x[i] @ w_self + mean @ w_neigh + b
    return out


def oracle_gin(g, w1, b1, w2, b2, eps, act, use_edge):
    x = g.node_features
    out = np.zeros((g.num_nodes, w2.shape[1]))
    for i, nbrs in enumerate(in_neighbors(g)):
        acc = np.zeros(x.shape[1])
        for j, e in nbrs:
            msg = x[j] + (g.edge_features[e] if use_edge else 0.0)
            acc += np.maximum(msg, 0.0)
        t = (1.0 + eps) * x[i] + acc
        h = act(t @ w1 + b1)
        out[i] = h @ w2 + b2
    return out


def oracle_pna(g, w_phi, b_phi, w_gamma, b_gamma, delta):
    x = g.node_features
    d_out = w_phi.shape[1]
    out = np.zeros((g.num_nodes, d_out))
    for i, nbrs in enumerate(in_neighbors(g)):
        msgs = np.array(
            [np.concatenate([x[i], x[j]]) @ w_phi + b_phi for j, _ in nbrs]
        ).reshape(-1, d_out)
        if len(msgs):
            mean = msgs.mean(axis=0)
            mn = msgs.min(axis=0)
            mx = msgs.max(axis=0)
            std = np.sqrt(((msgs - mean) ** 2).mean(axis=0))
        else:
            mean = mn = mx = std = np.zeros(d_out)
        d = len(nbrs)
        if delta > 0:
            amp = math.log(d + 1.0) / delta
            att = delta / math.log(d + 1.0) if d > 0 else 0.0
        else:
            amp = att = 0.0
        parts = []
        for agg in (mean, mn, mx, std):
            parts += [agg, agg * amp, agg * att]
        parts.append(x[i])
        out[i] = np.concatenate(parts) @ w_gamma + b_gamma
    return out


def run_conv(kind, g, tensors, ops=None, act=ActivationKind.RELU, eps=0.0,
             delta=0.0, use_edge=False):
    ops = ops or FloatOps()
    deg = compute_degree_tables(g)
    csr = build_neighbor_csr(g, deg)
    d_in = g.node_dim
    d_out = next(v.shape[1] for v in tensors.values() if v.ndim == 2)
    layer = prepare_conv_layer(
        kind, tensors, d_in, d_out, 1, 1, ops,
        activation=act, eps=eps, delta=delta, use_edge=use_edge,
    )
    table = [ops.vec_from_real(g.node_features[i]) for i in range(g.num_nodes)]
    edge_feats = None
    if use_edge and g.edge_features is not None:
        edge_feats = [ops.vec_from_real(g.edge_features[e]) for e in range(g.num_edges)]
    out = conv_forward(layer, csr, deg, table, ops, edge_feats)
    return np.stack([ops.to_real(v) for v in out])


def random_tensors(kind, d_in, d_out, rng):
    from gnnforge.kernels.weights import conv_tensor_shapes

    return {
        role: rng.uniform(-0.5, 0.5, size=shape)
        for role, shape in conv_tensor_shapes(kind, d_in, d_out).items()
    }


# ---------------------------------------------------------------------------
# Convolutions vs oracles
# ---------------------------------------------------------------------------


class TestGCN:
    def test_single_node_identity(self):
        g = GraphCOO(1, 0, np.zeros((0, 2), dtype=np.int64),
                     np.array([[2.0]]))
        out = run_conv(ConvKind.GCN, g, {"w": np.eye(1), "b": np.zeros(1)})
        assert out[0, 0] == pytest.approx(2.0)  # self term only, dh = 1

    def test_matches_dense_formula(self):
        rng = np.random.default_rng(1)
        g = generate_random_graph(8, 20, 5, seed=4)
        t = random_tensors(ConvKind.GCN, 5, 3, rng)
        got = run_conv(ConvKind.GCN, g, t)
        want = oracle_gcn(g, t["w"], t["b"])
        np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-9)


class TestSAGE:
    def test_hand_case(self):
        g = GraphCOO(2, 1, np.array([[0, 1]], dtype=np.int64),
                     np.array([[1.0], [10.0]]))
        t = {"w_self": np.eye(1), "w_neigh": np.eye(1), "b": np.zeros(1)}
        out = run_conv(ConvKind.SAGE, g, t)
        assert out[1, 0] == pytest.approx(11.0)
        assert out[0, 0] == pytest.approx(1.0)  # zero neighbors -> mean 0

    def test_matches_oracle(self):
        rng = np.random.default_rng(2)
        g = generate_random_graph(9, 25, 4, seed=9)
        t = random_tensors(ConvKind.SAGE, 4, 6, rng)
        got = run_conv(ConvKind.SAGE, g, t)
        want = oracle_sage(g, t["w_self"], t["w_neigh"], t["b"])
        np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-9)


class TestGIN:
    def test_no_edges_reduces_to_mlp(self):
        g = GraphCOO(1, 0, np.zeros((0, 2), dtype=np.int64),
                     np.array([[0.5, -0.25]]))
        rng = np.random.default_rng(3)
        t = random_tensors(ConvKind.GIN, 2, 2, rng)
        out = run_conv(ConvKind.GIN, g, t, eps=0.0)
        h = np.maximum(g.node_features[0] @ t["w1"] + t["b1"], 0.0)
        want = h @ t["w2"] + t["b2"]
        np.testing.assert_allclose(out[0], want, rtol=1e-12)

    def test_matches_oracle(self):
        rng = np.random.default_rng(4)
        g = generate_random_graph(7, 18, 3, seed=13)
        t = random_tensors(ConvKind.GIN, 3, 5, rng)
        got = run_conv(ConvKind.GIN, g, t, eps=0.3)
        want = oracle_gin(
            g, t["w1"], t["b1"], t["w2"], t["b2"], 0.3,
            lambda z: np.maximum(z, 0.0), use_edge=False,
        )
        np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-9)

    def test_edge_features_layer0(self):
        rng = np.random.default_rng(5)
        g = generate_random_graph(6, 12, 3, seed=21, edge_dim=3)
        t = random_tensors(ConvKind.GIN, 3, 4, rng)
        got = run_conv(ConvKind.GIN, g, t, eps=0.1, use_edge=True)
        want = oracle_gin(
            g, t["w1"], t["b1"], t["w2"], t["b2"], 0.1,
            lambda z: np.maximum(z, 0.0), use_edge=True,
        )
        np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-9)


class TestPNA:
    def test_isolated_node_zero_aggregates(self):
        g = GraphCOO(1, 0, np.zeros((0, 2), dtype=np.int64),
                     np.array([[1.0, -2.0]]))
        rng = np.random.default_rng(6)
        t = random_tensors(ConvKind.PNA, 2, 3, rng)
        out = run_conv(ConvKind.PNA, g, t, delta=0.7)
        cat = np.concatenate([np.zeros(12 * 3), g.node_features[0]])
        want = cat @ t["w_gamma"] + t["b_gamma"]
        np.testing.assert_allclose(out[0], want, rtol=1e-10)

    def test_matches_oracle(self):
        rng = np.random.default_rng(7)
        g = generate_random_graph(8, 24, 4, seed=17)
        t = random_tensors(ConvKind.PNA, 4, 5, rng)
        delta = 0.9134
        got = run_conv(ConvKind.PNA, g, t, delta=delta)
        want = oracle_pna(g, t["w_phi"], t["b_phi"], t["w_gamma"], t["b_gamma"], delta)
        np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-8)


class TestPermutationInvariance:
    @pytest.mark.parametrize("kind", list(ConvKind))
    def test_float_mode_edge_shuffle(self, kind):
        rng = np.random.default_rng(8)
        g = generate_random_graph(10, 30, 4, seed=23)
        t = random_tensors(kind, 4, 4, rng)
        base = run_conv(kind, g, t, delta=0.8)
        perm = np.random.default_rng(99).permutation(g.num_edges)
        g2 = GraphCOO(g.num_nodes, g.num_edges, g.edges[perm],
                      g.node_features, None)
        shuffled = run_conv(kind, g2, t, delta=0.8)
        np.testing.assert_allclose(base, shuffled, rtol=1e-6, atol=1e-12)


# ---------------------------------------------------------------------------
# Linear, skip, pooling, MLP
# ---------------------------------------------------------------------------


class TestLinearTiled:
    def test_identity(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        for p_in, p_out in [(1, 1), (2, 2), (4, 1), (3, 4)]:
            out = linear_tiled(x, np.eye(4), np.zeros(4), p_in, p_out)
            np.testing.assert_allclose(out, x)

    def test_all_ones(self):
        out = linear_tiled(
            np.array([1.0, 2.0, 3.0, 4.0]), np.ones((4, 2)), np.ones(2), 2, 1
        )
        assert out.tolist() == [11.0, 11.0]

    def test_dense_oracle_random(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=7)
        w = rng.normal(size=(7, 5))
        b = rng.normal(size=5)
        out = linear_tiled(x, w, b, 3, 2)
        np.testing.assert_allclose(out, x @ w + b, rtol=1e-12)

    def test_float_tiling_invariance(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=8)
        w = rng.normal(size=(8, 6))
        b = rng.normal(size=6)
        ref = linear_tiled(x, w, b, 1, 1)
        for p_in in (1, 2, 4, 8):
            for p_out in (1, 2, 3, 6):
                np.testing.assert_array_equal(
                    linear_tiled(x, w, b, p_in, p_out), ref
                )

    def test_fixed_tiling_bit_identical(self):
        fmt = FixedPointFormat(16, 10)
        rng = np.random.default_rng(13)
        x = rng.uniform(-2, 2, size=8)
        w = rng.uniform(-2, 2, size=(8, 4))
        b = rng.uniform(-1, 1, size=4)
        outs = []
        for p_in in (1, 2, 4, 8):
            ops = FixedOps(fmt)
            out = ops.linear(
                ops.vec_from_real(x), ops.mat_from_real(w), ops.vec_from_real(b),
                p_in, 2,
            )
            outs.append(out)
        assert all(o == outs[0] for o in outs)

    def test_fixed_double_width_accumulator(self):
        # products that would each truncate to zero still accumulate: the
        # requantize happens once per output, not per MAC
        fmt = FixedPointFormat(16, 10)
        ops = FixedOps(fmt)
        x = [6] * 64  # 0.09375; 6*6 >> 6 == 0 if requantized per product
        mat = [[6] * 64]
        out = ops.linear(x, mat, None)
        assert out[0] == (64 * 36) >> 6  # exact wide accumulation

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            linear_tiled(np.ones(3), np.ones((4, 2)), np.zeros(2))

    def test_bad_tiling(self):
        with pytest.raises(ValueError):
            linear_tiled(np.ones(4), np.ones((4, 2)), np.zeros(2), p_in=5)


class TestSkip:
    def test_equal_dims_adds(self):
        ops = FloatOps()
        a = [np.array([1.0, 2.0])]
        out = apply_skip(a, a, ops)
        assert out[0].tolist() == [2.0, 4.0]

    def test_dim_mismatch_passthrough(self):
        ops = FloatOps()
        a = [np.array([1.0, 2.0, 3.0])]
        b = [np.array([5.0, 6.0])]
        out = apply_skip(a, b, ops)
        assert out[0].tolist() == [5.0, 6.0]

    def test_zero_identity(self):
        ops = FloatOps()
        a = [np.array([1.5, -2.5])]
        z = [np.zeros(2)]
        assert apply_skip(a, z, ops)[0].tolist() == [1.5, -2.5]


class TestGlobalPool:
    def test_sum_mean_max(self):
        ops = FloatOps()
        table = [np.array([1.0, 2.0]), np.array([3.0, 4.0])]
        out = global_pool(table, (PoolKind.SUM, PoolKind.MEAN, PoolKind.MAX), ops)
        assert out.tolist() == [4.0, 6.0, 2.0, 3.0, 3.0, 4.0]

    def test_single_node_mean(self):
        ops = FloatOps()
        v = np.array([7.0, -1.0])
        assert global_pool([v], (PoolKind.MEAN,), ops).tolist() == [7.0, -1.0]

    def test_max_of_negatives(self):
        ops = FloatOps()
        table = [np.array([-1.0]), np.array([-5.0])]
        assert global_pool(table, (PoolKind.MAX,), ops).tolist() == [-1.0]

    def test_empty_graph_error(self):
        with pytest.raises(ValueError):
            global_pool([], (PoolKind.SUM,), FloatOps())


class TestMLP:
    def test_identity_single_layer(self):
        spec = make_model_spec(mlp_hidden_layers=0, out=4, mlp_out=4,
                               pooling=("sum",))
        ops = FloatOps()
        layers = [{"w": np.eye(4), "b": np.zeros(4)}]
        v = np.array([1.0, -2.0, 3.0, -4.0])
        out = mlp_forward(v, spec.mlp, layers, ops)
        assert out.tolist() == v.tolist()

    def test_hand_case(self):
        # in=2,out=1,hidden=2,1 hidden layer, all-ones weights, bias 1, relu
        spec = make_model_spec(
            mlp_hidden_layers=1, mlp_hidden=2, out=2, mlp_out=1, pooling=("sum",)
        )
        ops = FloatOps()
        layers = [
            {"w": np.ones((2, 2)), "b": np.ones(2)},
            {"w": np.ones((2, 1)), "b": np.ones(1)},
        ]
        out = mlp_forward(np.array([1.0, 1.0]), spec.mlp, layers, ops)
        assert out.tolist() == [7.0]  # hidden (3,3) -> relu -> 3+3+1

    def test_no_activation_after_last(self):
        spec = make_model_spec(mlp_hidden_layers=0, out=1, mlp_out=1,
                               pooling=("sum",))
        ops = FloatOps()
        layers = [{"w": -np.eye(1), "b": np.zeros(1)}]
        out = mlp_forward(np.array([2.0]), spec.mlp, layers, ops)
        assert out[0] == -2.0  # may be negative: no trailing relu


# ---------------------------------------------------------------------------
# Whole model
# ---------------------------------------------------------------------------


class TestModelForward:
    def test_identity_composition(self):
        # 1-layer GCN, identity weights, 1 node, pooling [sum], identity MLP
        spec = make_model_spec(
            conv="gcn", in_dim=2, hidden=2, layers=1, out=2,
            pooling=("sum",), mlp_out=2, mlp_hidden_layers=0, skip=False,
        )
        proj = make_project(spec)
        g = GraphCOO(1, 0, np.zeros((0, 2), dtype=np.int64),
                     np.array([[0.5, -0.75]]))
        w = random_weights(spec, seed=0)
        w.conv[0]["w"] = np.eye(2)
        w.conv[0]["b"] = np.zeros(2)
        w.mlp[0]["w"] = np.eye(2)
        w.mlp[0]["b"] = np.zeros(2)
        out = model_forward(proj, g, w, "float")
        np.testing.assert_allclose(out, [0.5, 0.0])  # relu after the conv

    def test_node_task_returns_table(self):
        spec = make_model_spec(pooling=(), layers=2, out=3)
        proj = make_project(spec)
        g = generate_random_graph(6, 10, 4, seed=31)
        w = random_weights(spec, seed=1)
        out = model_forward(proj, g, w, "float")
        assert out.shape == (6, 3)

    @pytest.mark.parametrize("conv", ["gcn", "sage", "gin", "pna"])
    def test_float_fixed_mae_small(self, conv):
        spec = make_model_spec(conv=conv)
        proj = make_project(spec, numeric_mode=FixedPointFormat(32, 16))
        g = generate_random_graph(10, 30, 4, seed=37)
        w = random_weights(spec, seed=2, pna_delta=0.9)
        f = model_forward(proj, g, w, "float")
        x = model_forward(proj, g, w, "fixed")
        assert np.mean(np.abs(f - x)) < 1e-2

    def test_fixed_mode_deterministic(self):
        spec = make_model_spec(conv="pna")
        proj = make_project(spec, numeric_mode=FixedPointFormat(16, 10))
        g = generate_random_graph(12, 40, 4, seed=41)
        w = random_weights(spec, seed=3, pna_delta=1.1)
        a = model_forward_fixed_raw(proj, g, w)
        b = model_forward_fixed_raw(proj, g, w)
        assert a == b

    def test_fixed_requires_format(self):
        spec = make_model_spec()
        proj = make_project(spec)  # float project
        g = generate_random_graph(4, 6, 4, seed=43)
        w = random_weights(spec, seed=4)
        with pytest.raises(ValueError):
            model_forward(proj, g, w, "fixed")

    def test_graph_exceeding_bounds_rejected(self):
        spec = make_model_spec()
        proj = make_project(spec, max_nodes=4)
        g = generate_random_graph(10, 20, 4, seed=47)
        w = random_weights(spec, seed=5)
        from gnnforge.errors import GraphFormatError

        with pytest.raises(GraphFormatError):
            model_forward(proj, g, w, "float")

    def test_skip_changes_result_only_on_matching_dims(self):
        # 1 layer in_dim != out_dim: skip must be a no-op
        spec_skip = make_model_spec(in_dim=4, layers=1, out=8, skip=True)
        spec_noskip = make_model_spec(in_dim=4, layers=1, out=8, skip=False)
        proj_a = make_project(spec_skip)
        proj_b = make_project(spec_noskip)
        g = generate_random_graph(5, 10, 4, seed=53)
        w = random_weights(spec_skip, seed=6)
        np.testing.assert_array_equal(
            model_forward(proj_a, g, w, "float"),
            model_forward(proj_b, g, w, "float"),
        )
