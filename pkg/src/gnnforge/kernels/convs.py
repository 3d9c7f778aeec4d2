"""Explicit message-passing graph convolutions.

Per node: gather the in-neighbor block from the CSR tables, transform each
neighbor embedding, stream it through a constant-space aggregation, finalize,
combine with the node's own embedding, and apply the output transform.  The
aggregation order is the CSR block order (original COO edge order), which
pins the fixed-mode bit pattern.

Formulas (float-mode semantics; fixed mode runs the same dataflow):

* GCN:  out_i = W^T (x_i/dh_i + sum_j x_j/(sqrt(dh_j) sqrt(dh_i))) + b,
        dh_v = in_degree(v) + 1 (self-loop folded into the kernel).
* SAGE: out_i = W_self^T x_i + W_neigh^T mean_j(x_j) + b.
* GIN:  out_i = MLP((1 + eps) x_i + sum_j relu(x_j + e_ji)); the edge term
        only exists at layer 0 when edge features are present; MLP is
        2-layer with hidden = out dim.
* PNA:  messages phi(concat(x_i, x_j)); aggregators [mean, min, max, std];
        scalers [identity, amplification, attenuation] with
        amp = ln(d_i+1)/delta and att = delta/ln(d_i+1) (0 when d_i = 0, and
        both 0 when delta = 0); out_i = gamma(concat(12 aggregates, x_i)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..model_ir import ActivationKind, ConvKind
from .aggregations import AggKind, make_agg

__all__ = ["PreparedConvLayer", "prepare_conv_layer", "conv_forward"]

_PNA_AGGS = (AggKind.MEAN, AggKind.MIN, AggKind.MAX, AggKind.STD)


@dataclass
class PreparedConvLayer:
    kind: ConvKind
    d_in: int
    d_out: int
    p_in: int
    p_out: int
    tensors: dict  # role -> backend matrix/vector
    activation: ActivationKind = ActivationKind.RELU  # GIN inner MLP only
    eps: float = 0.0
    delta: float = 0.0
    use_edge: bool = False


def prepare_conv_layer(
    kind: ConvKind,
    raw_tensors: dict,
    d_in: int,
    d_out: int,
    p_in: int,
    p_out: int,
    ops,
    activation: ActivationKind = ActivationKind.RELU,
    eps: float = 0.0,
    delta: float = 0.0,
    use_edge: bool = False,
) -> PreparedConvLayer:
    prepared = {}
    for role, arr in raw_tensors.items():
        if arr.ndim == 2:
            prepared[role] = ops.mat_from_real(arr)
        else:
            prepared[role] = ops.vec_from_real(arr)
    return PreparedConvLayer(
        kind=kind,
        d_in=d_in,
        d_out=d_out,
        p_in=p_in,
        p_out=p_out,
        tensors=prepared,
        activation=activation,
        eps=eps,
        delta=delta,
        use_edge=use_edge,
    )


def _gcn(layer, csr, in_degree, x, ops):
    n = len(x)
    inv_sqrt = [ops.scalar(1.0 / math.sqrt(float(d) + 1.0)) for d in in_degree]
    inv_deg = [ops.scalar(1.0 / (float(d) + 1.0)) for d in in_degree]
    w, b = layer.tensors["w"], layer.tensors["b"]
    out = []
    for i in range(n):
        nbrs, _ = csr.block(i)
        agg = make_agg(ops, AggKind.SUM, layer.d_in)
        for j in nbrs:
            agg.update(ops.scale(x[j], inv_sqrt[j]))
        s = agg.finalize()
        h = ops.add_vec(ops.scale(s, inv_sqrt[i]), ops.scale(x[i], inv_deg[i]))
        out.append(ops.linear(h, w, b, layer.p_in, layer.p_out))
    return out


def _sage(layer, csr, in_degree, x, ops):
    n = len(x)
    w_self, w_neigh, b = (
        layer.tensors["w_self"],
        layer.tensors["w_neigh"],
        layer.tensors["b"],
    )
    out = []
    for i in range(n):
        nbrs, _ = csr.block(i)
        agg = make_agg(ops, AggKind.MEAN, layer.d_in)
        for j in nbrs:
            agg.update(x[j])
        m = agg.finalize()
        t_self = ops.linear(x[i], w_self, b, layer.p_in, layer.p_out)
        t_neigh = ops.linear(m, w_neigh, None, layer.p_in, layer.p_out)
        out.append(ops.add_vec(t_self, t_neigh))
    return out


def _gin(layer, csr, in_degree, x, edge_feats, ops):
    n = len(x)
    w1, b1 = layer.tensors["w1"], layer.tensors["b1"]
    w2, b2 = layer.tensors["w2"], layer.tensors["b2"]
    eps1 = ops.scalar(1.0 + layer.eps)
    use_edge = layer.use_edge and edge_feats is not None
    out = []
    for i in range(n):
        nbrs, eids = csr.block(i)
        agg = make_agg(ops, AggKind.SUM, layer.d_in)
        for j, e in zip(nbrs, eids):
            msg = x[j]
            if use_edge:
                msg = ops.add_vec(msg, edge_feats[e])
            agg.update(ops.activate(ActivationKind.RELU, msg))
        s = agg.finalize()
        t = ops.add_vec(ops.scale(x[i], eps1), s)
        h = ops.linear(t, w1, b1, layer.p_in, layer.p_out)
        h = ops.activate(layer.activation, h)
        out.append(ops.linear(h, w2, b2, layer.p_out, layer.p_out))
    return out


def _pna(layer, csr, in_degree, x, ops):
    n = len(x)
    w_phi, b_phi = layer.tensors["w_phi"], layer.tensors["b_phi"]
    w_gamma, b_gamma = layer.tensors["w_gamma"], layer.tensors["b_gamma"]
    delta = layer.delta
    out = []
    for i in range(n):
        nbrs, _ = csr.block(i)
        aggs = [make_agg(ops, k, layer.d_out) for k in _PNA_AGGS]
        for j in nbrs:
            cat = ops.concat(x[i], x[j])
            msg = ops.linear(cat, w_phi, b_phi, layer.p_in, layer.p_out)
            for agg in aggs:
                agg.update(msg)
        finals = [agg.finalize() for agg in aggs]
        d = float(in_degree[i])
        if delta > 0.0:
            amp = ops.scalar(math.log(d + 1.0) / delta)
            att = ops.scalar(delta / math.log(d + 1.0)) if d > 0 else ops.scalar(0.0)
        else:
            amp = ops.scalar(0.0)
            att = ops.scalar(0.0)
        parts = []
        for fin in finals:  # aggregator-major, scaler-minor
            parts.append(fin)
            parts.append(ops.scale(fin, amp))
            parts.append(ops.scale(fin, att))
        parts.append(x[i])
        out.append(ops.linear(ops.concat(*parts), w_gamma, b_gamma,
                              layer.p_in, layer.p_out))
    return out


def conv_forward(layer: PreparedConvLayer, csr, deg, x, ops, edge_feats=None):
    """One graph-conv layer over the whole node table.

    x is a list of backend vectors (one per node); returns the same.
    """
    in_degree = deg.in_degree
    if layer.kind is ConvKind.GCN:
        return _gcn(layer, csr, in_degree, x, ops)
    if layer.kind is ConvKind.SAGE:
        return _sage(layer, csr, in_degree, x, ops)
    if layer.kind is ConvKind.GIN:
        return _gin(layer, csr, in_degree, x, edge_feats, ops)
    return _pna(layer, csr, in_degree, x, ops)
