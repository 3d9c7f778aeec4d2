"""Graph data model: COO storage, degree tables, neighbor CSR, dataset stats.

Message passing aggregates over in-neighbors (sources of edges pointing at a
node); undirected graphs are modeled by inserting both edge directions.
Within a destination's CSR block, sources keep original edge order (stable).

On-disk format ``.gnnb-graph`` (all little-endian):
    magic "GNNB", u32 version=1, u32 num_nodes, u32 num_edges,
    u32 node_dim, u32 edge_dim,
    edges as num_edges x 2 u32,
    node features as num_nodes x node_dim f32,
    edge features (only if edge_dim > 0) as num_edges x edge_dim f32.

A dataset is a directory of such files plus a manifest.json listing file
names and optional per-graph target vectors.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GraphFormatError

__all__ = [
    "GraphCOO",
    "DegreeTables",
    "NeighborCSR",
    "DatasetStats",
    "compute_degree_tables",
    "build_neighbor_csr",
    "compute_dataset_stats",
    "generate_random_graph",
    "save_graph",
    "load_graph",
    "save_dataset",
    "load_dataset",
]

_MAGIC = b"GNNB"
_VERSION = 1


@dataclass(frozen=True)
class GraphCOO:
    num_nodes: int
    num_edges: int
    edges: np.ndarray  # (num_edges, 2) int64, columns (src, dst)
    node_features: np.ndarray  # (num_nodes, node_dim) float64
    edge_features: np.ndarray | None = None  # (num_edges, edge_dim) float64

    def __post_init__(self) -> None:
        if self.num_nodes < 1:
            raise GraphFormatError("graph must have at least one node")
        if self.edges.shape != (self.num_edges, 2):
            raise GraphFormatError(
                f"edges shape {self.edges.shape} != ({self.num_edges}, 2)"
            )
        if self.num_edges and (
            self.edges.min() < 0 or self.edges.max() >= self.num_nodes
        ):
            raise GraphFormatError("edge endpoint out of range")
        if self.node_features.shape[0] != self.num_nodes:
            raise GraphFormatError("node_features row count != num_nodes")
        if self.edge_features is not None and self.edge_features.shape[0] != (
            self.num_edges
        ):
            raise GraphFormatError("edge_features row count != num_edges")

    @property
    def node_dim(self) -> int:
        return self.node_features.shape[1]

    @property
    def edge_dim(self) -> int:
        return 0 if self.edge_features is None else self.edge_features.shape[1]

    def check_bounds(self, max_nodes: int, max_edges: int) -> None:
        if self.num_nodes > max_nodes:
            raise GraphFormatError(
                f"graph has {self.num_nodes} nodes > max_nodes {max_nodes}"
            )
        if self.num_edges > max_edges:
            raise GraphFormatError(
                f"graph has {self.num_edges} edges > max_edges {max_edges}"
            )


@dataclass(frozen=True)
class DegreeTables:
    in_degree: np.ndarray
    out_degree: np.ndarray


@dataclass(frozen=True)
class NeighborCSR:
    """In-neighbor sources grouped by destination, plus parallel edge ids."""

    neighbor_table: np.ndarray  # (num_edges,) source node per slot
    offsets: np.ndarray  # (num_nodes + 1,)
    edge_ids: np.ndarray  # (num_edges,) original COO edge index per slot

    def block(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.offsets[v], self.offsets[v + 1]
        return self.neighbor_table[lo:hi], self.edge_ids[lo:hi]


@dataclass(frozen=True)
class DatasetStats:
    avg_nodes: float
    avg_edges: float
    avg_degree: float
    avg_log_degree: float  # mean over all nodes of ln(in_degree + 1)


def compute_degree_tables(g: GraphCOO) -> DegreeTables:
    """Single pass over the edge list; O(num_edges)."""
    if g.num_edges:
        out_deg = np.bincount(g.edges[:, 0], minlength=g.num_nodes)
        in_deg = np.bincount(g.edges[:, 1], minlength=g.num_nodes)
    else:
        out_deg = np.zeros(g.num_nodes, dtype=np.int64)
        in_deg = np.zeros(g.num_nodes, dtype=np.int64)
    return DegreeTables(
        in_degree=in_deg.astype(np.int64), out_degree=out_deg.astype(np.int64)
    )


def build_neighbor_csr(g: GraphCOO, deg: DegreeTables) -> NeighborCSR:
    """Offsets = exclusive prefix sum of in_degree; stable within blocks."""
    offsets = np.zeros(g.num_nodes + 1, dtype=np.int64)
    np.cumsum(deg.in_degree, out=offsets[1:])
    if g.num_edges:
        order = np.argsort(g.edges[:, 1], kind="stable")
        neighbor_table = g.edges[order, 0].astype(np.int64)
        edge_ids = order.astype(np.int64)
    else:
        neighbor_table = np.zeros(0, dtype=np.int64)
        edge_ids = np.zeros(0, dtype=np.int64)
    return NeighborCSR(neighbor_table=neighbor_table, offsets=offsets, edge_ids=edge_ids)


def compute_dataset_stats(graphs) -> DatasetStats:
    graphs = list(graphs)
    if not graphs:
        raise ValueError("dataset is empty")
    nodes = [g.num_nodes for g in graphs]
    edges = [g.num_edges for g in graphs]
    ratios = [e / n for n, e in zip(nodes, edges)]
    log_degs: list[float] = []
    for g in graphs:
        deg = compute_degree_tables(g).in_degree
        log_degs.extend(np.log(deg.astype(np.float64) + 1.0).tolist())
    return DatasetStats(
        avg_nodes=float(np.mean(nodes)),
        avg_edges=float(np.mean(edges)),
        avg_degree=float(np.mean(ratios)),
        avg_log_degree=float(np.mean(log_degs)),
    )


def generate_random_graph(
    n: int,
    m: int,
    d: int,
    seed: int,
    edge_dim: int = 0,
) -> GraphCOO:
    """Deterministic synthetic graph: m distinct directed non-self-loop edges,
    features uniform in [-1, 1)."""
    if n < 1:
        raise ValueError("need at least one node")
    if m > n * (n - 1):
        raise ValueError(
            f"cannot place {m} distinct directed non-self-loop edges on {n} nodes"
        )
    rng = np.random.default_rng(seed)
    if m:
        codes = rng.choice(n * (n - 1), size=m, replace=False)
        src = codes // (n - 1)
        rem = codes % (n - 1)
        dst = np.where(rem >= src, rem + 1, rem)  # skip the self-loop slot
        edges = np.stack([src, dst], axis=1).astype(np.int64)
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    node_features = rng.uniform(-1.0, 1.0, size=(n, d))
    edge_features = (
        rng.uniform(-1.0, 1.0, size=(m, edge_dim)) if edge_dim > 0 else None
    )
    # Store with f32 precision so in-memory values match the on-disk format.
    node_features = node_features.astype(np.float32).astype(np.float64)
    if edge_features is not None:
        edge_features = edge_features.astype(np.float32).astype(np.float64)
    return GraphCOO(
        num_nodes=n,
        num_edges=m,
        edges=edges,
        node_features=node_features,
        edge_features=edge_features,
    )


# ---------------------------------------------------------------------------
# File IO
# ---------------------------------------------------------------------------


def graph_to_bytes(g: GraphCOO) -> bytes:
    parts = [
        _MAGIC,
        struct.pack(
            "<5I", _VERSION, g.num_nodes, g.num_edges, g.node_dim, g.edge_dim
        ),
        g.edges.astype("<u4").tobytes(),
        g.node_features.astype("<f4").tobytes(),
    ]
    if g.edge_dim > 0:
        parts.append(g.edge_features.astype("<f4").tobytes())
    return b"".join(parts)


def save_graph(g: GraphCOO, path: str | Path) -> None:
    Path(path).write_bytes(graph_to_bytes(g))


def graph_from_bytes(data: bytes) -> GraphCOO:
    if len(data) < 24 or data[:4] != _MAGIC:
        raise GraphFormatError("not a gnnb-graph file (bad magic)")
    version, num_nodes, num_edges, node_dim, edge_dim = struct.unpack(
        "<5I", data[4:24]
    )
    if version != _VERSION:
        raise GraphFormatError(f"unsupported graph file version {version}")
    off = 24
    need = num_edges * 8 + num_nodes * node_dim * 4 + num_edges * edge_dim * 4
    if len(data) - off < need:
        raise GraphFormatError("graph file truncated")
    edges = (
        np.frombuffer(data, dtype="<u4", count=num_edges * 2, offset=off)
        .reshape(num_edges, 2)
        .astype(np.int64)
    )
    off += num_edges * 8
    node_features = (
        np.frombuffer(data, dtype="<f4", count=num_nodes * node_dim, offset=off)
        .reshape(num_nodes, node_dim)
        .astype(np.float64)
    )
    off += num_nodes * node_dim * 4
    edge_features = None
    if edge_dim > 0:
        edge_features = (
            np.frombuffer(data, dtype="<f4", count=num_edges * edge_dim, offset=off)
            .reshape(num_edges, edge_dim)
            .astype(np.float64)
        )
    return GraphCOO(
        num_nodes=num_nodes,
        num_edges=num_edges,
        edges=edges,
        node_features=node_features,
        edge_features=edge_features,
    )


def load_graph(path: str | Path) -> GraphCOO:
    return graph_from_bytes(Path(path).read_bytes())


def save_dataset(
    graphs: list[GraphCOO],
    directory: str | Path,
    targets: list[np.ndarray] | None = None,
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, g in enumerate(graphs):
        fname = f"g{i:04d}.gnnb-graph"
        save_graph(g, directory / fname)
        entry: dict = {"file": fname}
        if targets is not None:
            entry["target"] = [float(x) for x in np.asarray(targets[i]).ravel()]
        entries.append(entry)
    manifest = {"version": 1, "graphs": entries}
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )


def load_dataset(
    directory: str | Path,
) -> tuple[list[GraphCOO], list[np.ndarray | None]]:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise GraphFormatError(f"no manifest.json in {directory}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise GraphFormatError(f"malformed manifest.json: {e}") from e
    graphs = []
    targets: list[np.ndarray | None] = []
    for entry in manifest.get("graphs", []):
        graphs.append(load_graph(directory / entry["file"]))
        t = entry.get("target")
        targets.append(np.asarray(t, dtype=np.float64) if t is not None else None)
    return graphs, targets
