import json

import pytest

from gnnforge.fixed_point import FixedPointFormat
from gnnforge.model_ir import ProjectSpec, parse_model_spec


def make_model_spec(
    conv="sage",
    in_dim=4,
    hidden=8,
    layers=2,
    out=8,
    pooling=("sum", "mean", "max"),
    mlp_out=3,
    mlp_hidden=8,
    mlp_hidden_layers=1,
    activation="relu",
    skip=True,
    edge_dim=0,
    output_activation=None,
    parallelism=None,
):
    d = {
        "input_node_dim": in_dim,
        "input_edge_dim": edge_dim,
        "gnn_hidden_dim": hidden,
        "gnn_num_layers": layers,
        "gnn_output_dim": out,
        "conv": conv,
        "gnn_activation": activation,
        "skip_connections": skip,
        "pooling": list(pooling),
        "output_activation": output_activation,
    }
    if pooling:
        d["mlp"] = {
            "in_dim": out * len(pooling),
            "out_dim": mlp_out,
            "hidden_dim": mlp_hidden,
            "hidden_layers": mlp_hidden_layers,
        }
    if parallelism:
        d["parallelism"] = parallelism
    return parse_model_spec(json.dumps(d))


def make_project(model, numeric_mode=None, max_nodes=600, max_edges=600, name="test"):
    return ProjectSpec(
        name=name,
        model=model,
        max_nodes=max_nodes,
        max_edges=max_edges,
        num_nodes_guess=10.0,
        num_edges_guess=20.0,
        degree_guess=2.0,
        numeric_mode=numeric_mode,
    )


@pytest.fixture
def fmt16():
    return FixedPointFormat(16, 10)


@pytest.fixture
def fmt32():
    return FixedPointFormat(32, 16)
