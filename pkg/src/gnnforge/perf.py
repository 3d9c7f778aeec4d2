"""Performance estimation: analytic latency/BRAM surrogate and direct-fit
random-forest regressors with k-fold cross-validation.

The surrogate stands in for post-synthesis reports so the whole flow runs
without vendor tools.  Its formulas are deterministic and monotone and are
the published reference for every estimate in this repo:

    lin(i, o, pi, po)   = ceil(i/pi) * ceil(o/po) + 10
    tables              = 2*E + N
    conv layer (di->do) = E * ceil(di/p_in) * c_msg
                          + N * sum(lin costs of the layer's transforms)
      c_msg: gcn 1, sage 1, gin 2, pna 4 (one per aggregator)
      transforms: gcn lin(di,do); sage 2*lin(di,do);
                  gin lin(di,do)+lin(do,do);
                  pna lin(2*di,do)+lin(12*do+di,do)
    pooling             = N * ceil(d_last/p_out) * n_pool_kinds
    mlp                 = sum of its lin costs (runs once per graph)
    total cycles        = tables + sum(conv) + pooling + mlp

    bram(array D elems, partition P, width b) = P * ceil(ceil(D/P)*b / 18432)
    arrays: 2 embedding buffers (max_nodes x max_dim, P = max conv factor),
            neighbor table (max_edges), offset table (max_nodes),
            2 degree tables (max_nodes) at 32-bit, every weight matrix
            (P = p_in*p_out) and bias (P = p_out) at the data width.

E and N are the project's edge/node count guesses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model_ir import ConvKind

__all__ = [
    "DesignConfig",
    "DesignContext",
    "DesignRecord",
    "DesignDatabase",
    "PerfEstimate",
    "LISTING_SPACE",
    "design_space_size",
    "lin_cost",
    "bram_for_array",
    "surrogate_latency",
    "surrogate_bram",
    "estimate_design",
    "sample_design_space",
    "build_surrogate_database",
    "RegressionTree",
    "RandomForest",
    "fit_random_forest",
    "cross_validate",
    "encode_features",
    "FEATURE_NAMES",
]

# Sampled design space: every field domain used to build the 400-design
# surrogate database.
LISTING_SPACE: dict[str, list] = {
    "conv": ["gcn", "gin", "pna", "sage"],
    "gnn_hidden_dim": [64, 128, 256],
    "gnn_out_dim": [64, 128, 256],
    "gnn_num_layers": [1, 2, 3, 4],
    "skip": [True, False],
    "mlp_hidden_dim": [64, 128, 256],
    "mlp_num_layers": [1, 2, 3, 4],
    "gnn_p_hidden": [2, 4, 8],
    "gnn_p_out": [2, 4, 8],
    "mlp_p_in": [2, 4, 8],
    "mlp_p_hidden": [2, 4, 8],
}

_FIELD_ORDER = list(LISTING_SPACE)


def design_space_size(space: dict[str, list] | None = None) -> int:
    space = space or LISTING_SPACE
    size = 1
    for values in space.values():
        size *= len(values)
    return size


@dataclass(frozen=True)
class DesignConfig:
    conv: str
    gnn_hidden_dim: int
    gnn_out_dim: int
    gnn_num_layers: int
    skip: bool
    mlp_hidden_dim: int
    mlp_num_layers: int
    gnn_p_hidden: int
    gnn_p_out: int
    mlp_p_in: int
    mlp_p_hidden: int

    def key(self) -> tuple:
        """Canonical lexicographic ordering (deterministic tie-breaks)."""
        return tuple(getattr(self, f) for f in _FIELD_ORDER)

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in _FIELD_ORDER}

    @classmethod
    def from_dict(cls, d: dict) -> "DesignConfig":
        return cls(**{f: d[f] for f in _FIELD_ORDER})


@dataclass(frozen=True)
class DesignContext:
    """Fixed evaluation context shared by all designs in a database."""

    max_nodes: int = 600
    max_edges: int = 600
    num_nodes_guess: float = 20.0
    num_edges_guess: float = 40.0
    degree_guess: float = 2.0
    in_dim: int = 11
    mlp_out_dim: int = 19
    pooling_kinds: int = 3
    data_bits: int = 32
    clock_mhz: float = 300.0


@dataclass(frozen=True)
class PerfEstimate:
    latency_cycles: int
    latency_ms: float
    bram_18k: int


@dataclass(frozen=True)
class DesignRecord:
    config: DesignConfig
    latency_cycles: int
    bram_18k: int


@dataclass
class DesignDatabase:
    records: list[DesignRecord]
    provenance: str = "surrogate"

    def __post_init__(self) -> None:
        keys = [r.config.key() for r in self.records]
        if len(set(keys)) != len(keys):
            raise ValueError("database contains duplicate configs")

    def canonical(self) -> list[DesignRecord]:
        return sorted(self.records, key=lambda r: r.config.key())

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for r in self.records:
                row = dict(r.config.to_dict())
                row["latency_cycles"] = r.latency_cycles
                row["bram_18k"] = r.bram_18k
                row["provenance"] = self.provenance
                f.write(json.dumps(row) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DesignDatabase":
        records = []
        provenances = set()
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                provenances.add(row.get("provenance", "imported"))
                records.append(
                    DesignRecord(
                        config=DesignConfig.from_dict(row),
                        latency_cycles=int(row["latency_cycles"]),
                        bram_18k=int(row["bram_18k"]),
                    )
                )
        if len(provenances) > 1:
            raise ValueError(f"mixed provenance in database: {sorted(provenances)}")
        return cls(records, provenance=provenances.pop() if provenances else "surrogate")


# ---------------------------------------------------------------------------
# Surrogate formulas
# ---------------------------------------------------------------------------

_MSG_COST = {"gcn": 1, "sage": 1, "gin": 2, "pna": 4}


def lin_cost(i: int, o: int, p_in: int, p_out: int) -> int:
    return math.ceil(i / p_in) * math.ceil(o / p_out) + 10


def _conv_transform_lins(conv: str, d_in: int, d_out: int, p_in: int, p_out: int):
    if conv == "gcn":
        return [lin_cost(d_in, d_out, p_in, p_out)]
    if conv == "sage":
        return [lin_cost(d_in, d_out, p_in, p_out)] * 2
    if conv == "gin":
        return [
            lin_cost(d_in, d_out, p_in, p_out),
            lin_cost(d_out, d_out, p_out, p_out),
        ]
    # pna
    return [
        lin_cost(2 * d_in, d_out, p_in, p_out),
        lin_cost(12 * d_out + d_in, d_out, p_in, p_out),
    ]


def _layer_dims_factors(cfg: DesignConfig, ctx: DesignContext):
    """(d_in, d_out, p_in, p_out) per conv layer; layer 0 input is unrolled
    by factor 1 (the design space does not tile the raw input)."""
    out = []
    for i in range(cfg.gnn_num_layers):
        d_in = ctx.in_dim if i == 0 else cfg.gnn_hidden_dim
        d_out = (
            cfg.gnn_out_dim
            if i == cfg.gnn_num_layers - 1
            else cfg.gnn_hidden_dim
        )
        p_in = 1 if i == 0 else cfg.gnn_p_hidden
        p_out = (
            cfg.gnn_p_out if i == cfg.gnn_num_layers - 1 else cfg.gnn_p_hidden
        )
        out.append((d_in, d_out, p_in, p_out))
    return out


def _mlp_dims_factors(cfg: DesignConfig, ctx: DesignContext):
    """(i, o, p_in, p_out) per MLP linear; mlp_num_layers hidden layers."""
    mlp_in = cfg.gnn_out_dim * ctx.pooling_kinds
    if cfg.mlp_num_layers == 0:
        return [(mlp_in, ctx.mlp_out_dim, cfg.mlp_p_in, 1)]
    dims = [(mlp_in, cfg.mlp_hidden_dim, cfg.mlp_p_in, cfg.mlp_p_hidden)]
    dims += [
        (cfg.mlp_hidden_dim, cfg.mlp_hidden_dim, cfg.mlp_p_hidden, cfg.mlp_p_hidden)
    ] * (cfg.mlp_num_layers - 1)
    dims.append((cfg.mlp_hidden_dim, ctx.mlp_out_dim, cfg.mlp_p_hidden, 1))
    return dims


def surrogate_latency(cfg: DesignConfig, ctx: DesignContext | None = None) -> int:
    ctx = ctx or DesignContext()
    e_g, n_g = ctx.num_edges_guess, ctx.num_nodes_guess
    cycles = 2.0 * e_g + n_g  # degree + neighbor-table passes
    c_msg = _MSG_COST[cfg.conv]
    for d_in, d_out, p_in, p_out in _layer_dims_factors(cfg, ctx):
        msg = e_g * math.ceil(d_in / p_in) * c_msg
        apply = n_g * sum(_conv_transform_lins(cfg.conv, d_in, d_out, p_in, p_out))
        cycles += msg + apply
    cycles += n_g * math.ceil(cfg.gnn_out_dim / cfg.gnn_p_out) * ctx.pooling_kinds
    cycles += sum(lin_cost(i, o, pi, po) for i, o, pi, po in _mlp_dims_factors(cfg, ctx))
    return int(math.ceil(cycles))


def bram_for_array(elements: int, partition: int, width_bits: int) -> int:
    if elements <= 0:
        return 0
    per_part = math.ceil(elements / partition)
    return partition * math.ceil(per_part * width_bits / 18432)


def surrogate_bram(cfg: DesignConfig, ctx: DesignContext | None = None) -> int:
    ctx = ctx or DesignContext()
    bits = ctx.data_bits
    max_dim = max(ctx.in_dim, cfg.gnn_hidden_dim, cfg.gnn_out_dim)
    p_emb = max(cfg.gnn_p_hidden, cfg.gnn_p_out)
    total = 2 * bram_for_array(ctx.max_nodes * max_dim, p_emb, bits)
    total += bram_for_array(ctx.max_edges, 1, 32)  # neighbor table
    total += bram_for_array(ctx.max_nodes, 1, 32)  # offset table
    total += 2 * bram_for_array(ctx.max_nodes, 1, 32)  # degree tables
    for d_in, d_out, p_in, p_out in _layer_dims_factors(cfg, ctx):
        if cfg.conv == "gcn":
            mats, biases = [(d_in, d_out)], 1
        elif cfg.conv == "sage":
            mats, biases = [(d_in, d_out)] * 2, 1
        elif cfg.conv == "gin":
            mats, biases = [(d_in, d_out), (d_out, d_out)], 2
        else:
            mats, biases = [(2 * d_in, d_out), (12 * d_out + d_in, d_out)], 2
        for (i, o) in mats:
            total += bram_for_array(i * o, p_in * p_out, bits)
        total += biases * bram_for_array(d_out, p_out, bits)
    for i, o, pi, po in _mlp_dims_factors(cfg, ctx):
        total += bram_for_array(i * o, pi * po, bits)
        total += bram_for_array(o, po, bits)
    return total


def estimate_design(cfg: DesignConfig, ctx: DesignContext | None = None) -> PerfEstimate:
    ctx = ctx or DesignContext()
    cycles = surrogate_latency(cfg, ctx)
    return PerfEstimate(
        latency_cycles=cycles,
        latency_ms=cycles / (ctx.clock_mhz * 1e3),
        bram_18k=surrogate_bram(cfg, ctx),
    )


# ---------------------------------------------------------------------------
# Design-space sampling
# ---------------------------------------------------------------------------


def sample_design_space(
    n: int, seed: int, space: dict[str, list] | None = None
) -> list[DesignConfig]:
    """n distinct configs, each field drawn uniformly; duplicates redrawn."""
    space = space or LISTING_SPACE
    size = design_space_size(space)
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > size:
        raise ValueError(f"space holds only {size} distinct configs, asked for {n}")
    rng = np.random.default_rng(seed)
    seen: set[tuple] = set()
    out: list[DesignConfig] = []
    while len(out) < n:
        values = {
            f: space[f][int(rng.integers(0, len(space[f])))] for f in _FIELD_ORDER
        }
        cfg = DesignConfig(**values)
        if cfg.key() in seen:
            continue
        seen.add(cfg.key())
        out.append(cfg)
    return out


def build_surrogate_database(
    n: int, seed: int, ctx: DesignContext | None = None
) -> DesignDatabase:
    ctx = ctx or DesignContext()
    records = [
        DesignRecord(
            config=cfg,
            latency_cycles=surrogate_latency(cfg, ctx),
            bram_18k=surrogate_bram(cfg, ctx),
        )
        for cfg in sample_design_space(n, seed)
    ]
    return DesignDatabase(records, provenance="surrogate")


# ---------------------------------------------------------------------------
# Feature encoding: one-hot conv + 10 numeric fields
# ---------------------------------------------------------------------------

_CONV_ORDER = ["gcn", "gin", "pna", "sage"]
_NUMERIC_FIELDS = [
    "gnn_hidden_dim",
    "gnn_out_dim",
    "gnn_num_layers",
    "skip",
    "mlp_hidden_dim",
    "mlp_num_layers",
    "gnn_p_hidden",
    "gnn_p_out",
    "mlp_p_in",
    "mlp_p_hidden",
]
FEATURE_NAMES = [f"conv_{c}" for c in _CONV_ORDER] + _NUMERIC_FIELDS


def encode_features(configs: list[DesignConfig]) -> np.ndarray:
    rows = []
    for cfg in configs:
        row = [1.0 if cfg.conv == c else 0.0 for c in _CONV_ORDER]
        row += [float(getattr(cfg, f)) for f in _NUMERIC_FIELDS]
        rows.append(row)
    return np.asarray(rows, dtype=np.float64)


# ---------------------------------------------------------------------------
# CART regression trees and the forest
# ---------------------------------------------------------------------------


class RegressionTree:
    """CART regressor: MSE splits over all features, grown until nodes are
    pure or hold <= 2 samples; leaves store the sample mean."""

    def __init__(self):
        self.nodes: list[dict] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RegressionTree":
        self.nodes = []
        self._grow(X, y)
        return self

    def _grow(self, X: np.ndarray, y: np.ndarray) -> int:
        idx = len(self.nodes)
        self.nodes.append(None)  # reserve slot
        if len(y) <= 2 or np.all(y == y[0]):
            self.nodes[idx] = {"v": float(np.mean(y))}
            return idx
        split = self._best_split(X, y)
        if split is None:
            self.nodes[idx] = {"v": float(np.mean(y))}
            return idx
        f, thr = split
        mask = X[:, f] <= thr
        left = self._grow(X[mask], y[mask])
        right = self._grow(X[~mask], y[~mask])
        self.nodes[idx] = {"f": int(f), "t": float(thr), "l": left, "r": right}
        return idx

    @staticmethod
    def _best_split(X: np.ndarray, y: np.ndarray):
        n, n_features = X.shape
        best = None
        best_sse = math.inf
        # center once per node: SSE is shift-invariant and the cumulative
        # formula below cancels catastrophically on large-mean targets
        y = y - y.mean()
        for f in range(n_features):
            order = np.argsort(X[:, f], kind="stable")
            xs = X[order, f]
            ys = y[order]
            boundaries = np.nonzero(np.diff(xs))[0] + 1  # left-child sizes
            if boundaries.size == 0:
                continue
            csum = np.cumsum(ys)
            csq = np.cumsum(ys * ys)
            nl = boundaries.astype(np.float64)
            nr = n - nl
            sl = csum[boundaries - 1]
            sql = csq[boundaries - 1]
            sr = csum[-1] - sl
            sqr = csq[-1] - sql
            sse = (sql - sl * sl / nl) + (sqr - sr * sr / nr)
            j = int(np.argmin(sse))  # first minimum: deterministic tie-break
            if sse[j] < best_sse:
                best_sse = float(sse[j])
                b = boundaries[j]
                best = (f, (xs[b - 1] + xs[b]) / 2.0)
        return best

    def predict_one(self, row: np.ndarray) -> float:
        node = self.nodes[0]
        while "v" not in node:
            node = self.nodes[node["l"] if row[node["f"]] <= node["t"] else node["r"]]
        return node["v"]

    def to_dict(self) -> dict:
        return {"nodes": self.nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        tree = cls()
        tree.nodes = d["nodes"]
        return tree


class RandomForest:
    """n_estimators CART trees, each fit on a bootstrap resample of the
    training set (identical size, drawn with replacement).

    The raw prediction is the mean of the tree predictions in the fitted
    target domain.  Latency/BRAM spread several orders of magnitude across
    the design space, so targets are fitted as log(y) (``transform="log"``)
    and predictions are exponentiated back; the transform is recorded in the
    serialized form.
    """

    def __init__(
        self,
        n_estimators: int = 10,
        seed: int = 0,
        target: str = "",
        transform: str = "none",
    ):
        self.n_estimators = n_estimators
        self.seed = seed
        self.target = target
        self.transform = transform
        self.trees: list[RegressionTree] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForest":
        """Fit on already-transformed targets."""
        rng = np.random.default_rng(self.seed)
        n = len(y)
        self.trees = []
        for _ in range(self.n_estimators):
            idx = np.sort(rng.integers(0, n, size=n))
            self.trees.append(RegressionTree().fit(X[idx], y[idx]))
        return self

    def predict_raw_one(self, row: np.ndarray) -> float:
        """Mean of tree predictions in the fitted domain."""
        return float(np.mean([t.predict_one(row) for t in self.trees]))

    def predict_one(self, row: np.ndarray) -> float:
        raw = self.predict_raw_one(row)
        return math.exp(raw) if self.transform == "log" else raw

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(row) for row in X])

    def predict_config(self, cfg: DesignConfig) -> float:
        return self.predict_one(encode_features([cfg])[0])

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "target": self.target,
            "transform": self.transform,
            "n_estimators": self.n_estimators,
            "seed": self.seed,
            "feature_names": FEATURE_NAMES,
            "trees": [t.to_dict() for t in self.trees],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        forest = cls(
            n_estimators=d["n_estimators"],
            seed=d["seed"],
            target=d.get("target", ""),
            transform=d.get("transform", "none"),
        )
        forest.trees = [RegressionTree.from_dict(t) for t in d["trees"]]
        return forest

    @classmethod
    def load(cls, path: str | Path) -> "RandomForest":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _db_matrix(db: DesignDatabase, target: str):
    records = db.canonical()  # row-order invariance: fit on canonical order
    X = encode_features([r.config for r in records])
    if target == "latency":
        y = np.array([r.latency_cycles for r in records], dtype=np.float64)
    elif target == "bram":
        y = np.array([r.bram_18k for r in records], dtype=np.float64)
    else:
        raise ValueError(f"unknown target {target!r}")
    return X, y


def _fit_matrix(X: np.ndarray, y: np.ndarray, target: str, seed: int) -> RandomForest:
    # Strictly positive targets are fit in log space; anything else raw.
    if np.all(y > 0):
        transform, fitted = "log", np.log(y)
    else:
        transform, fitted = "none", y
    forest = RandomForest(
        n_estimators=10, seed=seed, target=target, transform=transform
    )
    return forest.fit(X, fitted)


def fit_random_forest(db: DesignDatabase, target: str, seed: int = 0) -> RandomForest:
    if not db.records:
        raise ValueError("database is empty")
    if len(db.records) < 10:
        raise ValueError("need at least 10 records to fit the forest")
    X, y = _db_matrix(db, target)
    return _fit_matrix(X, y, target, seed)


def cross_validate(db: DesignDatabase, target: str, k: int = 5, seed: int = 0) -> float:
    """Shuffled k-fold CV; returns the fold-averaged test MAPE (percent).
    Records with a zero true value are excluded from the metric."""
    if len(db.records) < k:
        raise ValueError(f"need at least {k} records for {k}-fold CV")
    X, y = _db_matrix(db, target)
    if np.all(y == 0):
        raise ValueError("all targets are zero; MAPE undefined")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(y))
    folds = np.array_split(perm, k)
    mapes = []
    for i in range(k):
        test_idx = folds[i]
        train_idx = np.concatenate([folds[j] for j in range(k) if j != i])
        forest = _fit_matrix(X[train_idx], y[train_idx], target, seed)
        pred = forest.predict(X[test_idx])
        true = y[test_idx]
        nz = true != 0
        if not nz.any():
            continue
        mapes.append(float(np.mean(np.abs(pred[nz] - true[nz]) / np.abs(true[nz])) * 100.0))
    return float(np.mean(mapes))
