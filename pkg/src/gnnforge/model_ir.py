"""Declarative model and project descriptions: parsing, validation, serialization.

Spec files are JSON, UTF-8, snake_case field names.  The exact schemas are
documented field-by-field in docs/model_spec.md and docs/project_spec.md.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

from .errors import SpecError
from .fixed_point import FixedPointFormat

__all__ = [
    "ConvKind",
    "ActivationKind",
    "PoolKind",
    "ParallelismSpec",
    "MLPSpec",
    "GNNModelSpec",
    "ProjectSpec",
    "Violation",
    "parse_model_spec",
    "parse_project_spec",
    "validate_model_spec",
    "model_spec_to_dict",
    "serialize_model_spec",
    "project_spec_to_dict",
    "serialize_project_spec",
]


class ConvKind(enum.Enum):
    GCN = "gcn"
    GIN = "gin"
    SAGE = "sage"
    PNA = "pna"


class ActivationKind(enum.Enum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    TANH = "tanh"
    GELU = "gelu"
    NONE = "none"


class PoolKind(enum.Enum):
    SUM = "sum"
    MEAN = "mean"
    MAX = "max"


# "add" is accepted as an alias for sum pooling.
_POOL_ALIASES = {"add": PoolKind.SUM}


@dataclass(frozen=True)
class ParallelismSpec:
    """Unrolling/partition factors; each tiles one dimension of the design."""

    gnn_p_in: int = 1
    gnn_p_hidden: int = 1
    gnn_p_out: int = 1
    mlp_p_in: int = 1
    mlp_p_hidden: int = 1
    mlp_p_out: int = 1

    def factors(self) -> dict[str, int]:
        return {
            "gnn_p_in": self.gnn_p_in,
            "gnn_p_hidden": self.gnn_p_hidden,
            "gnn_p_out": self.gnn_p_out,
            "mlp_p_in": self.mlp_p_in,
            "mlp_p_hidden": self.mlp_p_hidden,
            "mlp_p_out": self.mlp_p_out,
        }


@dataclass(frozen=True)
class MLPSpec:
    in_dim: int
    out_dim: int
    hidden_dim: int
    hidden_layers: int
    activation: ActivationKind = ActivationKind.RELU

    def layer_dims(self) -> list[tuple[int, int]]:
        """(in, out) of every weight matrix; hidden_layers=0 is a single layer.

        hidden_layers counts hidden linear layers between in and out, so
        hidden_layers=3 yields 4 matrices: in->h, h->h, h->h, h->out.
        """
        if self.hidden_layers == 0:
            return [(self.in_dim, self.out_dim)]
        dims = [(self.in_dim, self.hidden_dim)]
        dims += [(self.hidden_dim, self.hidden_dim)] * (self.hidden_layers - 1)
        dims.append((self.hidden_dim, self.out_dim))
        return dims


@dataclass(frozen=True)
class GNNModelSpec:
    input_node_dim: int
    input_edge_dim: int
    gnn_hidden_dim: int
    gnn_num_layers: int
    gnn_output_dim: int
    conv: ConvKind
    gnn_activation: ActivationKind
    skip_connections: bool
    pooling: tuple[PoolKind, ...]
    mlp: MLPSpec | None
    output_activation: ActivationKind = ActivationKind.NONE
    parallelism: ParallelismSpec = field(default_factory=ParallelismSpec)

    def layer_io_dims(self) -> list[tuple[int, int]]:
        """(in, out) dims of each graph-conv layer, following the dim chain."""
        dims = []
        for i in range(self.gnn_num_layers):
            d_in = self.input_node_dim if i == 0 else self.gnn_hidden_dim
            d_out = (
                self.gnn_output_dim
                if i == self.gnn_num_layers - 1
                else self.gnn_hidden_dim
            )
            dims.append((d_in, d_out))
        return dims

    def layer_factors(self) -> list[tuple[int, int]]:
        """(p_in, p_out) per graph-conv layer."""
        p = self.parallelism
        out = []
        for i in range(self.gnn_num_layers):
            p_in = p.gnn_p_in if i == 0 else p.gnn_p_hidden
            p_out = p.gnn_p_out if i == self.gnn_num_layers - 1 else p.gnn_p_hidden
            out.append((p_in, p_out))
        return out

    def is_graph_task(self) -> bool:
        return len(self.pooling) > 0


@dataclass(frozen=True)
class ProjectSpec:
    name: str
    model: GNNModelSpec
    max_nodes: int
    max_edges: int
    num_nodes_guess: float
    num_edges_guess: float
    degree_guess: float
    numeric_mode: FixedPointFormat | None = None  # None = float (IEEE double)
    clock_mhz: float = 300.0
    fpga_part: str = "xcu280-fsvh2892-2L-e"
    build_dir: str = "build"

    @property
    def is_fixed(self) -> bool:
        return self.numeric_mode is not None


@dataclass(frozen=True)
class Violation:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _load_json(text: str | bytes) -> dict:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise SpecError(f"spec file is not valid UTF-8: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError(
            f"JSON syntax error at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e
    if not isinstance(data, dict):
        raise SpecError("top-level value must be a JSON object")
    return data


def _req(data: dict, name: str, where: str = ""):
    if name not in data:
        loc = f" in {where}" if where else ""
        raise SpecError(f"missing required field '{name}'{loc}")
    return data[name]


def _as_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError(f"field '{name}' must be an integer, got {value!r}")
    return value


def _as_bool(value, name: str) -> bool:
    if not isinstance(value, bool):
        raise SpecError(f"field '{name}' must be a boolean, got {value!r}")
    return value


def _as_real(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"field '{name}' must be a number, got {value!r}")
    v = float(value)
    if math.isnan(v) or math.isinf(v):
        raise SpecError(f"field '{name}' must be finite, got {value!r}")
    return v


def _parse_enum(enum_cls, value, name: str):
    if not isinstance(value, str):
        raise SpecError(f"field '{name}' must be a string, got {value!r}")
    try:
        return enum_cls(value.lower())
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise SpecError(
            f"unknown value {value!r} for field '{name}' (allowed: {allowed})"
        ) from None


def _parse_activation(value, name: str, allow_none: bool) -> ActivationKind:
    if value is None:
        value = "none"
    kind = _parse_enum(ActivationKind, value, name)
    if kind is ActivationKind.NONE and not allow_none:
        raise SpecError(f"field '{name}' may not be 'none'")
    return kind


def _parse_pooling(value) -> tuple[PoolKind, ...]:
    if not isinstance(value, list):
        raise SpecError(f"field 'pooling' must be a list, got {value!r}")
    kinds: list[PoolKind] = []
    for item in value:
        if isinstance(item, str) and item.lower() in _POOL_ALIASES:
            kind = _POOL_ALIASES[item.lower()]
        else:
            kind = _parse_enum(PoolKind, item, "pooling")
        if kind in kinds:
            raise SpecError(f"duplicate pooling kind '{kind.value}'")
        kinds.append(kind)
    return tuple(kinds)


def _parse_mlp(data: dict) -> MLPSpec:
    return MLPSpec(
        in_dim=_as_int(_req(data, "in_dim", "mlp"), "mlp.in_dim"),
        out_dim=_as_int(_req(data, "out_dim", "mlp"), "mlp.out_dim"),
        hidden_dim=_as_int(_req(data, "hidden_dim", "mlp"), "mlp.hidden_dim"),
        hidden_layers=_as_int(
            _req(data, "hidden_layers", "mlp"), "mlp.hidden_layers"
        ),
        activation=_parse_activation(
            data.get("activation", "relu"), "mlp.activation", allow_none=False
        ),
    )


def _parse_parallelism(data: dict) -> ParallelismSpec:
    defaults = ParallelismSpec()
    values = {}
    for key in defaults.factors():
        raw = data.get(key, 1)
        v = _as_int(raw, f"parallelism.{key}")
        if v < 1:
            raise SpecError(f"parallelism.{key} must be >= 1, got {v}")
        values[key] = v
    unknown = set(data) - set(defaults.factors())
    if unknown:
        raise SpecError(f"unknown parallelism fields: {sorted(unknown)}")
    return ParallelismSpec(**values)


def _model_from_dict(data: dict) -> GNNModelSpec:
    mlp_data = data.get("mlp")
    mlp = None
    if mlp_data is not None:
        if not isinstance(mlp_data, dict):
            raise SpecError("field 'mlp' must be an object")
        mlp = _parse_mlp(mlp_data)

    para_data = data.get("parallelism", {})
    if not isinstance(para_data, dict):
        raise SpecError("field 'parallelism' must be an object")

    spec = GNNModelSpec(
        input_node_dim=_as_int(_req(data, "input_node_dim"), "input_node_dim"),
        input_edge_dim=_as_int(data.get("input_edge_dim", 0), "input_edge_dim"),
        gnn_hidden_dim=_as_int(_req(data, "gnn_hidden_dim"), "gnn_hidden_dim"),
        gnn_num_layers=_as_int(_req(data, "gnn_num_layers"), "gnn_num_layers"),
        gnn_output_dim=_as_int(_req(data, "gnn_output_dim"), "gnn_output_dim"),
        conv=_parse_enum(ConvKind, _req(data, "conv"), "conv"),
        gnn_activation=_parse_activation(
            data.get("gnn_activation", "relu"), "gnn_activation", allow_none=False
        ),
        skip_connections=_as_bool(
            data.get("skip_connections", False), "skip_connections"
        ),
        pooling=_parse_pooling(data.get("pooling", [])),
        mlp=mlp,
        output_activation=_parse_activation(
            data.get("output_activation"), "output_activation", allow_none=True
        ),
        parallelism=_parse_parallelism(para_data),
    )
    _check_basic_ranges(spec)
    return spec


def _check_basic_ranges(spec: GNNModelSpec) -> None:
    checks = [
        ("input_node_dim", spec.input_node_dim, 1),
        ("gnn_hidden_dim", spec.gnn_hidden_dim, 1),
        ("gnn_num_layers", spec.gnn_num_layers, 1),
        ("gnn_output_dim", spec.gnn_output_dim, 1),
        ("input_edge_dim", spec.input_edge_dim, 0),
    ]
    for name, value, lo in checks:
        if value < lo:
            raise SpecError(f"field '{name}' must be >= {lo}, got {value}")
    if spec.mlp is not None:
        for name, value in [
            ("mlp.in_dim", spec.mlp.in_dim),
            ("mlp.out_dim", spec.mlp.out_dim),
            ("mlp.hidden_dim", spec.mlp.hidden_dim),
        ]:
            if value < 1:
                raise SpecError(f"field '{name}' must be >= 1, got {value}")
        if spec.mlp.hidden_layers < 0:
            raise SpecError(
                f"field 'mlp.hidden_layers' must be >= 0, got {spec.mlp.hidden_layers}"
            )


def parse_model_spec(text: str | bytes) -> GNNModelSpec:
    """Parse a model-spec JSON document; defaults applied per the schema."""
    return _model_from_dict(_load_json(text))


def _parse_numeric_mode(value) -> FixedPointFormat | None:
    if value is None:
        return None
    if not isinstance(value, str):
        raise SpecError(f"field 'numeric_mode' must be a string, got {value!r}")
    if value.strip().lower() == "float":
        return None
    try:
        return FixedPointFormat.parse(value)
    except ValueError as e:
        raise SpecError(f"field 'numeric_mode': {e}") from e


def parse_project_spec(text: str | bytes) -> ProjectSpec:
    data = _load_json(text)
    name = _req(data, "name")
    if not isinstance(name, str) or not name:
        raise SpecError("field 'name' must be a nonempty string")
    model_data = _req(data, "model")
    if not isinstance(model_data, dict):
        raise SpecError("field 'model' must be an object")
    proj = ProjectSpec(
        name=name,
        model=_model_from_dict(model_data),
        max_nodes=_as_int(_req(data, "max_nodes"), "max_nodes"),
        max_edges=_as_int(_req(data, "max_edges"), "max_edges"),
        num_nodes_guess=_as_real(
            data.get("num_nodes_guess", 1.0), "num_nodes_guess"
        ),
        num_edges_guess=_as_real(
            data.get("num_edges_guess", 1.0), "num_edges_guess"
        ),
        degree_guess=_as_real(data.get("degree_guess", 1.0), "degree_guess"),
        numeric_mode=_parse_numeric_mode(data.get("numeric_mode", "float")),
        clock_mhz=_as_real(data.get("clock_mhz", 300.0), "clock_mhz"),
        fpga_part=str(data.get("fpga_part", "xcu280-fsvh2892-2L-e")),
        build_dir=str(data.get("build_dir", "build")),
    )
    if proj.max_nodes < 1:
        raise SpecError(f"field 'max_nodes' must be >= 1, got {proj.max_nodes}")
    if proj.max_edges < 1:
        raise SpecError(f"field 'max_edges' must be >= 1, got {proj.max_edges}")
    for gname, guess in [
        ("num_nodes_guess", proj.num_nodes_guess),
        ("num_edges_guess", proj.num_edges_guess),
        ("degree_guess", proj.degree_guess),
    ]:
        if guess <= 0:
            raise SpecError(f"field '{gname}' must be positive, got {guess}")
    if proj.clock_mhz <= 0:
        raise SpecError(f"field 'clock_mhz' must be positive, got {proj.clock_mhz}")
    return proj


# ---------------------------------------------------------------------------
# Validation (violations are data, not failures)
# ---------------------------------------------------------------------------


def validate_model_spec(
    spec: GNNModelSpec, proj: ProjectSpec | None = None
) -> list[Violation]:
    """Every violated invariant of the model (and optionally project) spec."""
    out: list[Violation] = []
    p = spec.parallelism

    if spec.pooling and spec.mlp is None:
        out.append(Violation("mlp", "pooling is configured but no mlp head is given"))
    if not spec.pooling and spec.mlp is not None:
        out.append(
            Violation("mlp", "mlp head present but pooling is empty (node-level task)")
        )

    if spec.pooling and spec.mlp is not None:
        expected = spec.gnn_output_dim * len(spec.pooling)
        if spec.mlp.in_dim != expected:
            out.append(
                Violation(
                    "mlp.in_dim",
                    f"expected {expected} "
                    f"(gnn_output_dim {spec.gnn_output_dim} x {len(spec.pooling)} "
                    f"pooling kinds), got {spec.mlp.in_dim}",
                )
            )

    # Parallelism factors may leave a remainder tile but must not exceed the
    # dimension they tile.
    dim_of_factor = [
        ("gnn_p_in", p.gnn_p_in, "input_node_dim", spec.input_node_dim),
        ("gnn_p_hidden", p.gnn_p_hidden, "gnn_hidden_dim", spec.gnn_hidden_dim),
        ("gnn_p_out", p.gnn_p_out, "gnn_output_dim", spec.gnn_output_dim),
    ]
    if spec.mlp is not None:
        dim_of_factor += [
            ("mlp_p_in", p.mlp_p_in, "mlp.in_dim", spec.mlp.in_dim),
            ("mlp_p_hidden", p.mlp_p_hidden, "mlp.hidden_dim", spec.mlp.hidden_dim),
            ("mlp_p_out", p.mlp_p_out, "mlp.out_dim", spec.mlp.out_dim),
        ]
    for fname, factor, dname, dim in dim_of_factor:
        if factor > dim:
            out.append(
                Violation(
                    f"parallelism.{fname}",
                    f"factor {factor} exceeds {dname} = {dim}",
                )
            )

    # GIN edge features enter as x_j + e_ji at layer 0, so dims must agree.
    if (
        spec.conv is ConvKind.GIN
        and spec.input_edge_dim > 0
        and spec.input_edge_dim != spec.input_node_dim
    ):
        out.append(
            Violation(
                "input_edge_dim",
                f"gin edge features require input_edge_dim == input_node_dim "
                f"({spec.input_edge_dim} != {spec.input_node_dim})",
            )
        )

    if proj is not None:
        if proj.num_nodes_guess > proj.max_nodes:
            out.append(
                Violation("num_nodes_guess", "guess exceeds max_nodes")
            )
        if proj.num_edges_guess > proj.max_edges:
            out.append(
                Violation("num_edges_guess", "guess exceeds max_edges")
            )
    return out


# ---------------------------------------------------------------------------
# Serialization (round-trips through parse_*)
# ---------------------------------------------------------------------------


def model_spec_to_dict(spec: GNNModelSpec) -> dict:
    d = {
        "input_node_dim": spec.input_node_dim,
        "input_edge_dim": spec.input_edge_dim,
        "gnn_hidden_dim": spec.gnn_hidden_dim,
        "gnn_num_layers": spec.gnn_num_layers,
        "gnn_output_dim": spec.gnn_output_dim,
        "conv": spec.conv.value,
        "gnn_activation": spec.gnn_activation.value,
        "skip_connections": spec.skip_connections,
        "pooling": [k.value for k in spec.pooling],
        "output_activation": spec.output_activation.value,
        "parallelism": spec.parallelism.factors(),
    }
    if spec.mlp is not None:
        d["mlp"] = {
            "in_dim": spec.mlp.in_dim,
            "out_dim": spec.mlp.out_dim,
            "hidden_dim": spec.mlp.hidden_dim,
            "hidden_layers": spec.mlp.hidden_layers,
            "activation": spec.mlp.activation.value,
        }
    return d


def serialize_model_spec(spec: GNNModelSpec) -> str:
    return json.dumps(model_spec_to_dict(spec), indent=2, sort_keys=True) + "\n"


def project_spec_to_dict(proj: ProjectSpec) -> dict:
    return {
        "name": proj.name,
        "model": model_spec_to_dict(proj.model),
        "max_nodes": proj.max_nodes,
        "max_edges": proj.max_edges,
        "num_nodes_guess": proj.num_nodes_guess,
        "num_edges_guess": proj.num_edges_guess,
        "degree_guess": proj.degree_guess,
        "numeric_mode": str(proj.numeric_mode) if proj.is_fixed else "float",
        "clock_mhz": proj.clock_mhz,
        "fpga_part": proj.fpga_part,
        "build_dir": proj.build_dir,
    }


def serialize_project_spec(proj: ProjectSpec) -> str:
    return json.dumps(project_spec_to_dict(proj), indent=2, sort_keys=True) + "\n"
