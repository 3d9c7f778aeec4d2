"""Full model pipeline: degree tables -> neighbor CSR -> conv/act/skip stack
-> global pooling -> MLP head -> output activation.

Double-buffered node tables alternate between layers.  Fixed mode quantizes
inputs and weights first, runs every kernel in fixed arithmetic, and returns
dequantized reals (raw outputs are available separately for bit-level
comparison against the generated testbench).
"""

from __future__ import annotations

import numpy as np

from ..errors import WeightFormatError
from ..graph import GraphCOO, build_neighbor_csr, compute_degree_tables
from ..model_ir import ActivationKind, ConvKind, GNNModelSpec, PoolKind, ProjectSpec
from .aggregations import AggKind, make_agg
from .convs import conv_forward, prepare_conv_layer
from .numerics import FixedOps, FloatOps
from .weights import LayerWeights, check_shapes

__all__ = [
    "linear_tiled",
    "apply_skip",
    "global_pool",
    "mlp_forward",
    "model_forward",
    "model_forward_fixed_raw",
    "simulate_dataset",
]

_POOL_TO_AGG = {
    PoolKind.SUM: AggKind.SUM,
    PoolKind.MEAN: AggKind.MEAN,
    PoolKind.MAX: AggKind.MAX,
}


def linear_tiled(x, w, b, p_in: int = 1, p_out: int = 1, ops=None):
    """W^T x + b with (out-tile-major, in-tile-minor) accumulation order.

    Raw-real convenience wrapper: prepares operands for the backend and
    returns reals.  Kernels use ops.linear directly on prepared tensors.
    """
    ops = ops or FloatOps()
    w = np.asarray(w, dtype=np.float64)
    in_dim, out_dim = w.shape
    if not (1 <= p_in <= in_dim and 1 <= p_out <= out_dim):
        raise ValueError(f"tiling factors ({p_in}, {p_out}) out of range")
    x_v = ops.vec_from_real(x)
    if len(x_v) != in_dim:
        raise ValueError(f"input length {len(x_v)} != in_dim {in_dim}")
    w_m = ops.mat_from_real(w)
    b_v = ops.vec_from_real(b) if b is not None else None
    return ops.to_real(ops.linear(x_v, w_m, b_v, p_in, p_out))


def apply_skip(layer_in, layer_out, ops):
    """Additive skip when dims match; pass-through at dim boundaries."""
    if len(layer_in) != len(layer_out):
        return layer_out
    if layer_in and len(layer_in[0]) != len(layer_out[0]):
        return layer_out
    return [ops.add_vec(a, b) for a, b in zip(layer_in, layer_out)]


def global_pool(table, pooling, ops):
    """Concatenation, in spec order, of per-kind reductions over all nodes."""
    if not table:
        raise ValueError("cannot pool an empty graph")
    dim = len(table[0])
    parts = []
    for kind in pooling:
        agg = make_agg(ops, _POOL_TO_AGG[kind], dim)
        for v in table:
            agg.update(v)
        parts.append(agg.finalize())
    return ops.concat(*parts)


def mlp_forward(v, mlp_spec, prepared_layers, ops, parallelism=None):
    """hidden_layers+1 tiled linears; activation after all but the last."""
    factors = _mlp_factors(mlp_spec, parallelism)
    h = v
    last = len(prepared_layers) - 1
    for i, layer in enumerate(prepared_layers):
        p_in, p_out = factors[i]
        h = ops.linear(h, layer["w"], layer["b"], p_in, p_out)
        if i != last:
            h = ops.activate(mlp_spec.activation, h)
    return h


def _mlp_factors(mlp_spec, parallelism):
    n_layers = len(mlp_spec.layer_dims())
    if parallelism is None:
        return [(1, 1)] * n_layers
    out = []
    for i in range(n_layers):
        p_in = parallelism.mlp_p_in if i == 0 else parallelism.mlp_p_hidden
        p_out = (
            parallelism.mlp_p_out if i == n_layers - 1 else parallelism.mlp_p_hidden
        )
        out.append((p_in, p_out))
    return out


def _prepare_model(spec: GNNModelSpec, w: LayerWeights, ops):
    check_shapes(w, spec)
    conv_layers = []
    factors = spec.layer_factors()
    for i, (d_in, d_out) in enumerate(spec.layer_io_dims()):
        p_in, p_out = factors[i]
        conv_layers.append(
            prepare_conv_layer(
                spec.conv,
                w.conv[i],
                d_in,
                d_out,
                p_in,
                p_out,
                ops,
                activation=spec.gnn_activation,
                eps=w.gin_eps[i] if spec.conv is ConvKind.GIN else 0.0,
                delta=w.pna_delta,
                use_edge=(
                    spec.conv is ConvKind.GIN
                    and i == 0
                    and spec.input_edge_dim > 0
                ),
            )
        )
    mlp_layers = [
        {"w": ops.mat_from_real(l["w"]), "b": ops.vec_from_real(l["b"])}
        for l in w.mlp
    ]
    return conv_layers, mlp_layers


def _forward_backend(proj: ProjectSpec, g: GraphCOO, w: LayerWeights, ops):
    """Run the whole pipeline on one backend; returns backend vectors."""
    spec = proj.model
    g.check_bounds(proj.max_nodes, proj.max_edges)
    if g.node_dim != spec.input_node_dim:
        raise WeightFormatError(
            f"graph node_dim {g.node_dim} != input_node_dim {spec.input_node_dim}"
        )
    if spec.input_edge_dim and g.edge_dim != spec.input_edge_dim:
        raise WeightFormatError(
            f"graph edge_dim {g.edge_dim} != input_edge_dim {spec.input_edge_dim}"
        )
    deg = compute_degree_tables(g)
    csr = build_neighbor_csr(g, deg)
    conv_layers, mlp_layers = _prepare_model(spec, w, ops)

    table = [ops.vec_from_real(g.node_features[i]) for i in range(g.num_nodes)]
    edge_feats = None
    if spec.input_edge_dim and g.edge_features is not None:
        edge_feats = [
            ops.vec_from_real(g.edge_features[e]) for e in range(g.num_edges)
        ]

    for layer in conv_layers:
        y = conv_forward(layer, csr, deg, table, ops, edge_feats)
        y = [ops.activate(spec.gnn_activation, v) for v in y]
        if spec.skip_connections:
            y = apply_skip(table, y, ops)
        table = y

    if not spec.is_graph_task():
        return [ops.activate(spec.output_activation, v) for v in table]

    pooled = global_pool(table, spec.pooling, ops)
    out = mlp_forward(pooled, spec.mlp, mlp_layers, ops, spec.parallelism)
    return [ops.activate(spec.output_activation, out)]


def model_forward(
    proj: ProjectSpec, g: GraphCOO, w: LayerWeights, mode: str = "float"
) -> np.ndarray:
    """Forward pass; returns an output vector (graph task) or a
    (num_nodes, out_dim) table (node task) of float64 values.

    mode="fixed" requires the project to carry a fixed-point numeric mode and
    returns dequantized reals.
    """
    if mode == "float":
        ops = FloatOps()
    elif mode == "fixed":
        if not proj.is_fixed:
            raise ValueError("project numeric_mode is float; no fixed format set")
        ops = FixedOps(proj.numeric_mode)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    vecs = _forward_backend(proj, g, w, ops)
    reals = [ops.to_real(v) for v in vecs]
    if proj.model.is_graph_task():
        return reals[0]
    return np.stack(reals)


def model_forward_fixed_raw(proj: ProjectSpec, g: GraphCOO, w: LayerWeights):
    """Fixed-mode forward returning raw integer outputs, flattened in the
    same order the generated testbench writes them."""
    if not proj.is_fixed:
        raise ValueError("project numeric_mode is float; no fixed format set")
    ops = FixedOps(proj.numeric_mode)
    vecs = _forward_backend(proj, g, w, ops)
    flat: list[int] = []
    for v in vecs:
        flat.extend(v)
    return flat


def simulate_dataset(proj: ProjectSpec, graphs, w: LayerWeights) -> dict:
    """Float (and, for fixed projects, fixed) outputs for every graph plus the
    mean absolute error between the two modes."""
    result: dict = {"graphs": [], "mae_float_fixed": None}
    abs_errs: list[float] = []
    for g in graphs:
        float_out = model_forward(proj, g, w, "float")
        entry = {"float": float_out}
        if proj.is_fixed:
            fixed_out = model_forward(proj, g, w, "fixed")
            entry["fixed"] = fixed_out
            entry["fixed_raw"] = model_forward_fixed_raw(proj, g, w)
            abs_errs.extend(
                np.abs(np.asarray(float_out) - np.asarray(fixed_out)).ravel().tolist()
            )
        result["graphs"].append(entry)
    if abs_errs:
        result["mae_float_fixed"] = float(np.mean(abs_errs))
    return result
