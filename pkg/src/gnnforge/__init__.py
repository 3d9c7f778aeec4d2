"""gnnforge: GNN accelerator toolkit.

Compiles a declarative model description into a bit-accurate fixed-point
functional simulation, HLS-style C++ kernel/testbench source, and analytic
latency/BRAM estimates driving random-forest design-space exploration.
"""

from .fixed_point import FixedPointFormat, FixedValue
from .graph import GraphCOO, generate_random_graph
from .model_ir import (
    ActivationKind,
    ConvKind,
    GNNModelSpec,
    MLPSpec,
    ParallelismSpec,
    PoolKind,
    ProjectSpec,
    parse_model_spec,
    parse_project_spec,
    validate_model_spec,
)

__version__ = "0.1.0"

__all__ = [
    "FixedPointFormat",
    "FixedValue",
    "GraphCOO",
    "generate_random_graph",
    "ConvKind",
    "ActivationKind",
    "PoolKind",
    "ParallelismSpec",
    "MLPSpec",
    "GNNModelSpec",
    "ProjectSpec",
    "parse_model_spec",
    "parse_project_spec",
    "validate_model_spec",
    "__version__",
]
