"""Numeric backends shared by every kernel.

The same dataflow runs in two modes:

* ``FloatOps`` — IEEE double precision (the reference semantics),
* ``FixedOps`` — raw-integer fixed point per :mod:`gnnforge.fixed_point`.

Fixed-mode vectors are plain lists of Python ints (raw values); float-mode
vectors are 1-D float64 numpy arrays.  Unary transcendentals go through the
scalar C math library in both modes so results are reproducible against the
generated C++ testbench.
"""

from __future__ import annotations

import math

import numpy as np

from ..fixed_point import (
    FixedPointFormat,
    acc_bounds,
    dequantize_raw,
    quantize_raw,
)
from ..model_ir import ActivationKind

_SQRT2 = 1.4142135623730951


def act_scalar(kind: ActivationKind, x: float) -> float:
    """Double-precision activation; the single definition both modes share."""
    if kind is ActivationKind.RELU:
        return x if x > 0.0 else 0.0
    if kind is ActivationKind.SIGMOID:
        return 1.0 / (1.0 + math.exp(-x))
    if kind is ActivationKind.TANH:
        return math.tanh(x)
    if kind is ActivationKind.GELU:
        return 0.5 * x * (1.0 + math.erf(x / _SQRT2))
    return x  # NONE


class FloatOps:
    """Reference arithmetic in float64."""

    is_fixed = False
    fmt: FixedPointFormat | None = None

    def vec_from_real(self, values) -> np.ndarray:
        return np.asarray(values, dtype=np.float64).copy()

    def mat_from_real(self, matrix) -> np.ndarray:
        return np.asarray(matrix, dtype=np.float64).copy()

    def to_real(self, vec) -> np.ndarray:
        return np.asarray(vec, dtype=np.float64)

    def zeros(self, dim: int) -> np.ndarray:
        return np.zeros(dim, dtype=np.float64)

    def concat(self, *vecs) -> np.ndarray:
        return np.concatenate(vecs)

    def add_vec(self, a, b) -> np.ndarray:
        return a + b

    def scalar(self, x: float) -> float:
        return float(x)

    def scale(self, vec, s: float) -> np.ndarray:
        return vec * s

    def linear(self, x, mat, bias, p_in: int = 1, p_out: int = 1) -> np.ndarray:
        # Accumulation per output runs over ascending input index for every
        # (p_in, p_out) tiling, so float results are tiling-independent.
        y = x @ mat
        if bias is not None:
            y = y + bias
        return y

    def activate(self, kind: ActivationKind, vec) -> np.ndarray:
        if kind is ActivationKind.NONE:
            return vec
        if kind is ActivationKind.RELU:
            return np.maximum(vec, 0.0)
        return np.array([act_scalar(kind, float(t)) for t in vec], dtype=np.float64)


class FixedOps:
    """Hardware-faithful fixed point; vectors are lists of raw ints."""

    is_fixed = True

    def __init__(self, fmt: FixedPointFormat):
        self.fmt = fmt
        self._acc_lo, self._acc_hi = acc_bounds(fmt)

    def vec_from_real(self, values) -> list[int]:
        fmt = self.fmt
        return [quantize_raw(float(v), fmt) for v in np.asarray(values).ravel()]

    def mat_from_real(self, matrix) -> list[list[int]]:
        """Stored column-major: one list of in_dim raws per output."""
        m = np.asarray(matrix, dtype=np.float64)
        fmt = self.fmt
        return [
            [quantize_raw(float(v), fmt) for v in m[:, o]] for o in range(m.shape[1])
        ]

    def to_real(self, vec) -> np.ndarray:
        f = self.fmt.frac_bits
        return np.array([math.ldexp(r, -f) for r in vec], dtype=np.float64)

    def zeros(self, dim: int) -> list[int]:
        return [0] * dim

    def concat(self, *vecs) -> list[int]:
        out: list[int] = []
        for v in vecs:
            out.extend(v)
        return out

    def add_vec(self, a, b) -> list[int]:
        lo, hi = self.fmt.raw_min, self.fmt.raw_max
        out = []
        for x, y in zip(a, b):
            s = x + y
            out.append(hi if s > hi else lo if s < lo else s)
        return out

    def scalar(self, x: float) -> int:
        return quantize_raw(x, self.fmt)

    def scale(self, vec, s: int) -> list[int]:
        fmt = self.fmt
        f = fmt.frac_bits
        lo, hi = fmt.raw_min, fmt.raw_max
        out = []
        for r in vec:
            p = (r * s) >> f
            out.append(hi if p > hi else lo if p < lo else p)
        return out

    def linear(self, x, mat, bias, p_in: int = 1, p_out: int = 1) -> list[int]:
        """Tile-ordered MAC with a double-width accumulator, re-quantized once
        per output.  For a fixed output the inputs are visited in ascending
        order under every (p_in, p_out) tiling, so the tiling factors do not
        change the result; they remain parameters of the hardware contract.
        """
        fmt = self.fmt
        f = fmt.frac_bits
        lo, hi = self._acc_lo, self._acc_hi
        rlo, rhi = fmt.raw_min, fmt.raw_max
        out = []
        for o, col in enumerate(mat):
            acc = 0
            for xi, wi in zip(x, col):
                acc += xi * wi
                if acc > hi:
                    acc = hi
                elif acc < lo:
                    acc = lo
            r = acc >> f
            if r > rhi:
                r = rhi
            elif r < rlo:
                r = rlo
            if bias is not None:
                r = r + bias[o]
                if r > rhi:
                    r = rhi
                elif r < rlo:
                    r = rlo
            out.append(r)
        return out

    def activate(self, kind: ActivationKind, vec) -> list[int]:
        if kind is ActivationKind.NONE:
            return list(vec)
        if kind is ActivationKind.RELU:
            return [r if r > 0 else 0 for r in vec]
        fmt = self.fmt
        f = fmt.frac_bits
        return [
            quantize_raw(act_scalar(kind, math.ldexp(r, -f)), fmt) for r in vec
        ]
