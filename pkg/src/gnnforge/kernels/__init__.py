"""Functional simulator: message-passing convolutions, aggregations, tiled
linear layers, pooling, and full model forward in float and fixed modes."""

from .aggregations import AggKind, agg_finalize, agg_init, agg_update
from .convs import conv_forward
from .forward import (
    apply_skip,
    global_pool,
    linear_tiled,
    mlp_forward,
    model_forward,
    model_forward_fixed_raw,
    simulate_dataset,
)
from .numerics import FixedOps, FloatOps
from .weights import LayerWeights, load_weights, random_weights, save_weights

__all__ = [
    "AggKind",
    "agg_init",
    "agg_update",
    "agg_finalize",
    "conv_forward",
    "apply_skip",
    "global_pool",
    "linear_tiled",
    "mlp_forward",
    "model_forward",
    "model_forward_fixed_raw",
    "simulate_dataset",
    "FloatOps",
    "FixedOps",
    "LayerWeights",
    "random_weights",
    "save_weights",
    "load_weights",
]
