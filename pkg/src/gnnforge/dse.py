"""Design-space exploration: minimize predicted latency under a BRAM budget.

Strategies: exhaustive enumeration of the space, or uniform random sampling
without replacement.  Ties on latency break by lexicographic config order so
results are reproducible.  An infeasible-everywhere query yields an explicit
empty result, not an error.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .perf import (
    LISTING_SPACE,
    DesignConfig,
    DesignContext,
    PerfEstimate,
    RandomForest,
    design_space_size,
    estimate_design,
    _FIELD_ORDER,
)

__all__ = [
    "SurrogatePredictor",
    "ForestPredictor",
    "DseQuery",
    "DseResult",
    "run_dse",
    "time_dse",
    "parse_space",
]


class SurrogatePredictor:
    """Evaluates the analytic cost model directly."""

    name = "surrogate"

    def __init__(self, ctx: DesignContext | None = None):
        self.ctx = ctx or DesignContext()

    def estimate(self, cfg: DesignConfig) -> PerfEstimate:
        return estimate_design(cfg, self.ctx)


class ForestPredictor:
    """Evaluates a pair of fitted direct-fit regressors."""

    name = "forest"

    def __init__(
        self,
        latency_forest: RandomForest,
        bram_forest: RandomForest,
        clock_mhz: float = 300.0,
    ):
        self.latency_forest = latency_forest
        self.bram_forest = bram_forest
        self.clock_mhz = clock_mhz

    def estimate(self, cfg: DesignConfig) -> PerfEstimate:
        cycles = max(0, int(round(self.latency_forest.predict_config(cfg))))
        bram = max(0, int(round(self.bram_forest.predict_config(cfg))))
        return PerfEstimate(
            latency_cycles=cycles,
            latency_ms=cycles / (self.clock_mhz * 1e3),
            bram_18k=bram,
        )


@dataclass(frozen=True)
class DseQuery:
    space: dict[str, list]
    bram_budget: int
    predictor: object  # SurrogatePredictor | ForestPredictor
    strategy: str = "exhaustive"  # or "sample"
    sample_n: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.bram_budget <= 0:
            raise ValueError("bram_budget must be positive")
        if design_space_size(self.space) == 0:
            raise ValueError("empty design space")
        if self.strategy not in ("exhaustive", "sample"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "sample" and self.sample_n < 1:
            raise ValueError("sample strategy needs sample_n >= 1")


@dataclass
class DseResult:
    best: DesignConfig | None
    estimate: PerfEstimate | None
    evaluated: int
    pareto: list[tuple[DesignConfig, PerfEstimate]] = field(default_factory=list)

    def to_dict(self) -> dict:
        def pair(cfg, est):
            return {
                "config": cfg.to_dict(),
                "latency_cycles": est.latency_cycles,
                "latency_ms": est.latency_ms,
                "bram_18k": est.bram_18k,
            }

        return {
            "best": pair(self.best, self.estimate) if self.best else None,
            "evaluated": self.evaluated,
            "pareto": [pair(c, e) for c, e in self.pareto],
        }


def _iter_space(space: dict[str, list]):
    fields = [(f, space[f]) for f in _FIELD_ORDER]
    for combo in itertools.product(*(vals for _, vals in fields)):
        yield DesignConfig(**dict(zip((f for f, _ in fields), combo)))


def _sample_space(space: dict[str, list], n: int, seed: int):
    size = design_space_size(space)
    n = min(n, size)
    rng = np.random.default_rng(seed)
    picks = rng.choice(size, size=n, replace=False)
    # decode mixed-radix indices in canonical field order
    radices = [len(space[f]) for f in _FIELD_ORDER]
    for code in sorted(int(p) for p in picks):
        values = {}
        for f, r in zip(reversed(_FIELD_ORDER), reversed(radices)):
            values[f] = space[f][code % r]
            code //= r
        yield DesignConfig(**values)


def _pareto_front(points: list[tuple[DesignConfig, PerfEstimate]]):
    """Nondominated in (latency, bram): no other point <= in both, < in one."""
    front = []
    for cfg, est in points:
        dominated = False
        for _, other in points:
            if (
                other.latency_cycles <= est.latency_cycles
                and other.bram_18k <= est.bram_18k
                and (
                    other.latency_cycles < est.latency_cycles
                    or other.bram_18k < est.bram_18k
                )
            ):
                dominated = True
                break
        if not dominated:
            front.append((cfg, est))
    front.sort(key=lambda p: p[0].key())
    return front


def run_dse(q: DseQuery) -> DseResult:
    stream = (
        _iter_space(q.space)
        if q.strategy == "exhaustive"
        else _sample_space(q.space, q.sample_n, q.seed)
    )
    best: DesignConfig | None = None
    best_est: PerfEstimate | None = None
    evaluated: list[tuple[DesignConfig, PerfEstimate]] = []
    for cfg in stream:
        est = q.predictor.estimate(cfg)
        evaluated.append((cfg, est))
        if est.bram_18k > q.bram_budget:
            continue
        if (
            best_est is None
            or est.latency_cycles < best_est.latency_cycles
            or (
                est.latency_cycles == best_est.latency_cycles
                and cfg.key() < best.key()
            )
        ):
            best, best_est = cfg, est
    pareto = _pareto_front(evaluated)
    return DseResult(best=best, estimate=best_est, evaluated=len(evaluated), pareto=pareto)


def time_dse(q: DseQuery) -> dict:
    """Wall-clock instrumentation around run_dse."""
    t0 = time.perf_counter()
    result = run_dse(q)
    total = time.perf_counter() - t0
    per_eval = total / result.evaluated if result.evaluated else 0.0
    return {
        "result": result,
        "total_seconds": total,
        "per_eval_seconds": per_eval,
    }


def parse_space(text: str | bytes | dict) -> dict[str, list]:
    """Space file: JSON object mapping each config field to a candidate list;
    omitted fields take the full default domain."""
    if isinstance(text, dict):
        data = text
    else:
        data = json.loads(text)
    space = {}
    for f in _FIELD_ORDER:
        values = data.get(f, LISTING_SPACE[f])
        if not isinstance(values, list) or not values:
            raise ValueError(f"space field '{f}' must be a nonempty list")
        space[f] = values
    unknown = set(data) - set(_FIELD_ORDER)
    if unknown:
        raise ValueError(f"unknown space fields: {sorted(unknown)}")
    return space
