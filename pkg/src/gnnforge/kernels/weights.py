"""Model parameter container, random initialization, and the weight-file
format shared with the generated testbench.

On disk: a directory with manifest.json naming each tensor (section, layer,
role, shape, file) plus one little-endian f32 binary blob per tensor.
Scalars (per-layer GIN epsilon, the PNA log-degree average) live in the
manifest under "scalars".
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import WeightFormatError
from ..model_ir import ConvKind, GNNModelSpec

__all__ = [
    "LayerWeights",
    "conv_tensor_shapes",
    "mlp_tensor_shapes",
    "random_weights",
    "save_weights",
    "load_weights",
]

# PNA uses 4 aggregators x 3 scalers concatenated ahead of the node embedding.
PNA_AGG_COUNT = 4
PNA_SCALER_COUNT = 3


@dataclass
class LayerWeights:
    """All tensors of one model: conv layers then MLP layers, float64 in
    memory but always materialized at f32 precision."""

    conv: list[dict[str, np.ndarray]]
    mlp: list[dict[str, np.ndarray]]
    gin_eps: list[float] = field(default_factory=list)
    pna_delta: float = 0.0


def conv_tensor_shapes(kind: ConvKind, d_in: int, d_out: int) -> dict[str, tuple]:
    """Role -> shape for one conv layer; matrices are (in, out) row-major."""
    if kind is ConvKind.GCN:
        return {"w": (d_in, d_out), "b": (d_out,)}
    if kind is ConvKind.SAGE:
        return {"w_self": (d_in, d_out), "w_neigh": (d_in, d_out), "b": (d_out,)}
    if kind is ConvKind.GIN:
        return {
            "w1": (d_in, d_out),
            "b1": (d_out,),
            "w2": (d_out, d_out),
            "b2": (d_out,),
        }
    # PNA: message phi on concat(x_i, x_j); apply gamma on the 12 scaled
    # aggregates concatenated with x_i.
    gamma_in = PNA_AGG_COUNT * PNA_SCALER_COUNT * d_out + d_in
    return {
        "w_phi": (2 * d_in, d_out),
        "b_phi": (d_out,),
        "w_gamma": (gamma_in, d_out),
        "b_gamma": (d_out,),
    }


def mlp_tensor_shapes(spec: GNNModelSpec) -> list[dict[str, tuple]]:
    if spec.mlp is None:
        return []
    return [
        {"w": (i, o), "b": (o,)} for i, o in spec.mlp.layer_dims()
    ]


def _f32(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float32).astype(np.float64)


def random_weights(
    spec: GNNModelSpec, seed: int, pna_delta: float | None = None
) -> LayerWeights:
    """Unit-scale init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) per tensor, f32."""
    rng = np.random.default_rng(seed)

    def draw(shape: tuple) -> np.ndarray:
        fan_in = shape[0] if len(shape) == 2 else max(shape[0], 1)
        bound = 1.0 / math.sqrt(fan_in)
        return _f32(rng.uniform(-bound, bound, size=shape))

    conv = []
    for d_in, d_out in spec.layer_io_dims():
        shapes = conv_tensor_shapes(spec.conv, d_in, d_out)
        layer = {}
        for role, shape in shapes.items():
            if role.startswith("b"):
                bound = 1.0 / math.sqrt(d_in)
                layer[role] = _f32(rng.uniform(-bound, bound, size=shape))
            else:
                layer[role] = draw(shape)
        conv.append(layer)

    mlp = []
    for shapes in mlp_tensor_shapes(spec):
        w = draw(shapes["w"])
        bound = 1.0 / math.sqrt(shapes["w"][0])
        b = _f32(rng.uniform(-bound, bound, size=shapes["b"]))
        mlp.append({"w": w, "b": b})

    gin_eps = [0.0] * spec.gnn_num_layers if spec.conv is ConvKind.GIN else []
    return LayerWeights(
        conv=conv,
        mlp=mlp,
        gin_eps=gin_eps,
        pna_delta=float(pna_delta) if pna_delta is not None else 0.0,
    )


def check_shapes(w: LayerWeights, spec: GNNModelSpec) -> None:
    dims = spec.layer_io_dims()
    if len(w.conv) != len(dims):
        raise WeightFormatError(
            f"expected {len(dims)} conv layers, got {len(w.conv)}"
        )
    for i, (d_in, d_out) in enumerate(dims):
        expected = conv_tensor_shapes(spec.conv, d_in, d_out)
        for role, shape in expected.items():
            if role not in w.conv[i]:
                raise WeightFormatError(f"layer {i} missing tensor '{role}'")
            got = w.conv[i][role].shape
            if tuple(got) != shape:
                raise WeightFormatError(
                    f"layer {i} tensor '{role}': shape {got} != {shape}"
                )
    expected_mlp = mlp_tensor_shapes(spec)
    if len(w.mlp) != len(expected_mlp):
        raise WeightFormatError(
            f"expected {len(expected_mlp)} mlp layers, got {len(w.mlp)}"
        )
    for i, shapes in enumerate(expected_mlp):
        for role, shape in shapes.items():
            got = w.mlp[i][role].shape
            if tuple(got) != shape:
                raise WeightFormatError(
                    f"mlp layer {i} tensor '{role}': shape {got} != {shape}"
                )
    if spec.conv is ConvKind.GIN and len(w.gin_eps) != spec.gnn_num_layers:
        raise WeightFormatError("gin_eps must have one entry per conv layer")


def save_weights(w: LayerWeights, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tensors = []

    def emit(section: str, layer: int, role: str, arr: np.ndarray) -> None:
        fname = f"{section}{layer}.{role}.bin"
        (directory / fname).write_bytes(arr.astype("<f4").tobytes())
        tensors.append(
            {
                "name": f"{section}{layer}.{role}",
                "section": section,
                "layer": layer,
                "role": role,
                "shape": list(arr.shape),
                "file": fname,
            }
        )

    for i, layer in enumerate(w.conv):
        for role in sorted(layer):
            emit("gnn", i, role, layer[role])
    for i, layer in enumerate(w.mlp):
        for role in sorted(layer):
            emit("mlp", i, role, layer[role])

    manifest = {
        "version": 1,
        "tensors": tensors,
        "scalars": {"gin_eps": list(w.gin_eps), "pna_delta": w.pna_delta},
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )


def load_weights(directory: str | Path) -> LayerWeights:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise WeightFormatError(f"no manifest.json in {directory}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    conv: dict[int, dict[str, np.ndarray]] = {}
    mlp: dict[int, dict[str, np.ndarray]] = {}
    for t in manifest["tensors"]:
        data = (directory / t["file"]).read_bytes()
        shape = tuple(t["shape"])
        count = int(np.prod(shape))
        arr = (
            np.frombuffer(data, dtype="<f4", count=count)
            .reshape(shape)
            .astype(np.float64)
        )
        target = conv if t["section"] == "gnn" else mlp
        target.setdefault(t["layer"], {})[t["role"]] = arr
    scalars = manifest.get("scalars", {})
    return LayerWeights(
        conv=[conv[i] for i in sorted(conv)],
        mlp=[mlp[i] for i in sorted(mlp)],
        gin_eps=[float(e) for e in scalars.get("gin_eps", [])],
        pna_delta=float(scalars.get("pna_delta", 0.0)),
    )
