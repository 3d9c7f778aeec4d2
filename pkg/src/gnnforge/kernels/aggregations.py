"""Constant-space partial aggregations: sum, min, max, mean, variance, std.

State is O(dim) regardless of how many vectors stream through.  Variance and
standard deviation use Welford's one-pass update.  Finalizing an empty
aggregation yields the zero vector for every kind (hardware cannot represent
+-inf, so min/max of nothing is 0 by convention).

Fixed-mode contract (mirrored in the C++ runtime):
* sum/mean accumulate in the double-width format; mean divides the
  accumulator by the count with floor division before re-quantizing;
* Welford keeps the running mean in the storage format and the second moment
  in the double-width format; deltas are saturated to the storage format
  before the m2 product so every intermediate fits the accumulator width;
* std dequantizes the variance, takes a double sqrt, and re-quantizes.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from ..fixed_point import (
    acc_bounds,
    dequantize_raw,
    floordiv,
    quantize_raw,
)
from .numerics import FixedOps, FloatOps

__all__ = ["AggKind", "agg_init", "agg_update", "agg_finalize", "make_agg"]


class AggKind(enum.Enum):
    SUM = "sum"
    MIN = "min"
    MAX = "max"
    MEAN = "mean"
    VARIANCE = "variance"
    STD = "std"


class _FloatAgg:
    def __init__(self, kind: AggKind, dim: int):
        self.kind = kind
        self.dim = dim
        self.count = 0
        self.accum = np.zeros(dim, dtype=np.float64)
        if kind in (AggKind.VARIANCE, AggKind.STD):
            self.mean_running = np.zeros(dim, dtype=np.float64)
            self.m2 = np.zeros(dim, dtype=np.float64)

    def update(self, v) -> "_FloatAgg":
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ValueError(f"expected dim {self.dim}, got shape {v.shape}")
        self.count += 1
        k = self.kind
        if k is AggKind.SUM or k is AggKind.MEAN:
            self.accum = self.accum + v
        elif k is AggKind.MIN:
            self.accum = v.copy() if self.count == 1 else np.minimum(self.accum, v)
        elif k is AggKind.MAX:
            self.accum = v.copy() if self.count == 1 else np.maximum(self.accum, v)
        else:  # Welford
            delta = v - self.mean_running
            self.mean_running = self.mean_running + delta / self.count
            delta2 = v - self.mean_running
            self.m2 = self.m2 + delta * delta2
        return self

    def finalize(self) -> np.ndarray:
        if self.count == 0:
            return np.zeros(self.dim, dtype=np.float64)
        k = self.kind
        if k is AggKind.SUM or k is AggKind.MIN or k is AggKind.MAX:
            return self.accum.copy()
        if k is AggKind.MEAN:
            return self.accum / self.count
        var = self.m2 / self.count  # population variance
        if k is AggKind.VARIANCE:
            return var
        return np.sqrt(var)


class _FixedAgg:
    def __init__(self, kind: AggKind, dim: int, fmt):
        self.kind = kind
        self.dim = dim
        self.fmt = fmt
        self.count = 0
        self._acc_lo, self._acc_hi = acc_bounds(fmt)
        if kind in (AggKind.VARIANCE, AggKind.STD):
            self.mean_running = [0] * dim
            self.m2 = [0] * dim
        else:
            self.accum = [0] * dim

    def _sat_acc(self, v: int) -> int:
        if v > self._acc_hi:
            return self._acc_hi
        if v < self._acc_lo:
            return self._acc_lo
        return v

    def update(self, v) -> "_FixedAgg":
        if len(v) != self.dim:
            raise ValueError(f"expected dim {self.dim}, got {len(v)}")
        self.count += 1
        k = self.kind
        fmt = self.fmt
        f = fmt.frac_bits
        if k is AggKind.SUM or k is AggKind.MEAN:
            acc = self.accum
            for i, r in enumerate(v):
                acc[i] = self._sat_acc(acc[i] + (r << f))
        elif k is AggKind.MIN:
            if self.count == 1:
                self.accum = list(v)
            else:
                acc = self.accum
                for i, r in enumerate(v):
                    if r < acc[i]:
                        acc[i] = r
        elif k is AggKind.MAX:
            if self.count == 1:
                self.accum = list(v)
            else:
                acc = self.accum
                for i, r in enumerate(v):
                    if r > acc[i]:
                        acc[i] = r
        else:  # fixed-point Welford
            n = self.count
            rlo, rhi = fmt.raw_min, fmt.raw_max
            mean = self.mean_running
            m2 = self.m2
            for i, r in enumerate(v):
                delta = r - mean[i]
                if delta > rhi:
                    delta = rhi
                elif delta < rlo:
                    delta = rlo
                m = mean[i] + floordiv(delta, n)
                if m > rhi:
                    m = rhi
                elif m < rlo:
                    m = rlo
                mean[i] = m
                delta2 = r - m
                if delta2 > rhi:
                    delta2 = rhi
                elif delta2 < rlo:
                    delta2 = rlo
                m2[i] = self._sat_acc(m2[i] + delta * delta2)
        return self

    def _requant(self, acc: int) -> int:
        return self.fmt.clamp(acc >> self.fmt.frac_bits)

    def finalize(self) -> list[int]:
        if self.count == 0:
            return [0] * self.dim
        k = self.kind
        if k is AggKind.MIN or k is AggKind.MAX:
            return list(self.accum)
        if k is AggKind.SUM:
            return [self._requant(a) for a in self.accum]
        if k is AggKind.MEAN:
            n = self.count
            return [self._requant(floordiv(a, n)) for a in self.accum]
        n = self.count
        var = [self._requant(floordiv(m, n)) for m in self.m2]
        if k is AggKind.VARIANCE:
            return var
        fmt = self.fmt
        out = []
        for r in var:
            v = dequantize_raw(r, fmt)
            out.append(quantize_raw(math.sqrt(v) if v > 0.0 else 0.0, fmt))
        return out


def make_agg(ops, kind: AggKind, dim: int):
    if isinstance(ops, FixedOps):
        return _FixedAgg(kind, dim, ops.fmt)
    return _FloatAgg(kind, dim)


def agg_init(kind: AggKind | str, dim: int, ops=None):
    """Fresh aggregation state; float64 unless a FixedOps backend is given."""
    if isinstance(kind, str):
        kind = AggKind(kind)
    return make_agg(ops if ops is not None else FloatOps(), kind, dim)


def agg_update(state, v):
    return state.update(v)


def agg_finalize(state):
    return state.finalize()
