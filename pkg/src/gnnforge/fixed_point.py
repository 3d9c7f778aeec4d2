"""Two's-complement parameterized fixed-point arithmetic.

A format ``<W, I>`` has W total bits and I integer bits (sign bit counted
inside I), leaving F = W - I fractional bits.  A raw integer r represents the
real value r * 2^-F.

Semantics, pinned for cross-component bit-equality with the C++ runtime:

* rounding = truncation toward -inf (floor),
* overflow = saturation to [-2^(W-1), 2^(W-1) - 1],
* ``quantize`` evaluates floor(x * 2^F) in IEEE double precision,
* dot-product accumulators use the double-width format <2W, 2I> and are
  re-quantized once per output element,
* unary transcendentals (sigmoid/tanh/gelu/sqrt) dequantize, evaluate in
  double via the C math library, and re-quantize.

All raw-level helpers operate on plain Python ints so every width up to 64
bits is exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

__all__ = [
    "FixedPointFormat",
    "FixedValue",
    "quantize",
    "dequantize",
    "fixed_add",
    "fixed_mul",
]

_FORMAT_RE = re.compile(r"^fixed<\s*(\d+)\s*,\s*(\d+)\s*>$")


@dataclass(frozen=True)
class FixedPointFormat:
    """A ``<W, I>`` fixed-point format; immutable and hashable."""

    total_bits: int
    integer_bits: int

    def __post_init__(self) -> None:
        w, i = self.total_bits, self.integer_bits
        if not (2 <= w <= 64):
            raise ValueError(f"total_bits must be in [2, 64], got {w}")
        if not (1 <= i <= w):
            raise ValueError(f"integer_bits must be in [1, {w}], got {i}")

    @property
    def frac_bits(self) -> int:
        return self.total_bits - self.integer_bits

    @property
    def raw_min(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def raw_max(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def min_value(self) -> float:
        return math.ldexp(self.raw_min, -self.frac_bits)

    @property
    def max_value(self) -> float:
        return math.ldexp(self.raw_max, -self.frac_bits)

    @property
    def resolution(self) -> float:
        return math.ldexp(1.0, -self.frac_bits)

    def wide(self) -> "FixedPointFormat":
        """Double-width accumulator format <2W, 2I> (2F fractional bits)."""
        return FixedPointFormat(2 * self.total_bits, 2 * self.integer_bits)

    def clamp(self, raw: int) -> int:
        if raw > self.raw_max:
            return self.raw_max
        if raw < self.raw_min:
            return self.raw_min
        return raw

    @classmethod
    def parse(cls, text: str) -> "FixedPointFormat":
        """Parse the ``fixed<W,I>`` syntax used in spec files and CLI flags."""
        m = _FORMAT_RE.match(text.strip())
        if not m:
            raise ValueError(f"not a fixed-point format string: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self) -> str:
        return f"fixed<{self.total_bits},{self.integer_bits}>"


@dataclass(frozen=True)
class FixedValue:
    raw: int
    fmt: FixedPointFormat

    def __post_init__(self) -> None:
        if not (self.fmt.raw_min <= self.raw <= self.fmt.raw_max):
            raise ValueError(f"raw {self.raw} out of range for {self.fmt}")

    def to_float(self) -> float:
        return math.ldexp(self.raw, -self.fmt.frac_bits)


def quantize_raw(x: float, fmt: FixedPointFormat) -> int:
    """floor(x * 2^F) in double, saturated. NaN is an error, +-inf saturates."""
    if math.isnan(x):
        raise ValueError("cannot quantize NaN")
    if math.isinf(x):
        return fmt.raw_max if x > 0 else fmt.raw_min
    scaled = x * math.ldexp(1.0, fmt.frac_bits)
    if math.isinf(scaled):
        return fmt.raw_max if scaled > 0 else fmt.raw_min
    return fmt.clamp(math.floor(scaled))


def quantize(x: float, fmt: FixedPointFormat) -> FixedValue:
    return FixedValue(quantize_raw(x, fmt), fmt)


def dequantize_raw(raw: int, fmt: FixedPointFormat) -> float:
    return math.ldexp(raw, -fmt.frac_bits)


def dequantize(v: FixedValue) -> float:
    return v.to_float()


def _require_same_format(a: FixedValue, b: FixedValue) -> None:
    if a.fmt != b.fmt:
        raise ValueError(f"format mismatch: {a.fmt} vs {b.fmt}")


def add_raw(a: int, b: int, fmt: FixedPointFormat) -> int:
    return fmt.clamp(a + b)


def sub_raw(a: int, b: int, fmt: FixedPointFormat) -> int:
    return fmt.clamp(a - b)


def mul_raw(a: int, b: int, fmt: FixedPointFormat) -> int:
    # Exact product has 2F fractional bits; >> floors toward -inf.
    return fmt.clamp((a * b) >> fmt.frac_bits)


def fixed_add(a: FixedValue, b: FixedValue) -> FixedValue:
    _require_same_format(a, b)
    return FixedValue(add_raw(a.raw, b.raw, a.fmt), a.fmt)


def fixed_mul(a: FixedValue, b: FixedValue) -> FixedValue:
    _require_same_format(a, b)
    return FixedValue(mul_raw(a.raw, b.raw, a.fmt), a.fmt)


# ---------------------------------------------------------------------------
# Double-width accumulator helpers (raw-level, used by the kernels).
#
# The accumulator format is <2W, 2I>: products of two W-format raws land in it
# without shifting, W-format values enter it shifted left by F.
# ---------------------------------------------------------------------------


def acc_bounds(fmt: FixedPointFormat) -> tuple[int, int]:
    wide = 1 << (2 * fmt.total_bits - 1)
    return -wide, wide - 1


def acc_clamp(acc: int, fmt: FixedPointFormat) -> int:
    lo, hi = acc_bounds(fmt)
    if acc > hi:
        return hi
    if acc < lo:
        return lo
    return acc


def acc_mac(acc: int, a: int, b: int, fmt: FixedPointFormat) -> int:
    """acc += a*b with saturation in the double-width format."""
    return acc_clamp(acc + a * b, fmt)


def acc_add_value(acc: int, raw: int, fmt: FixedPointFormat) -> int:
    """acc += raw (a W-format value promoted to accumulator scale)."""
    return acc_clamp(acc + (raw << fmt.frac_bits), fmt)


def acc_to_raw(acc: int, fmt: FixedPointFormat) -> int:
    """Re-quantize a double-width accumulator to the storage format."""
    return fmt.clamp(acc >> fmt.frac_bits)


def floordiv(a: int, n: int) -> int:
    """Floor division; mirrored in C++ by an explicit floordiv helper."""
    return a // n
