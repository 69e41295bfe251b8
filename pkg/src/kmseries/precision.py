"""Precision-tagged arbitrary-precision complex values.

Values are thin wrappers around ``gmpy2.mpc``.  Every value carries a
:class:`PrecisionContext`; mixing precisions in arithmetic is a hard error
rather than a silent down-cast.  All inputs are parsed from decimal strings
directly at the target precision, never through a binary double.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpc, mpfr

from .errors import PrecisionMismatch

DEFAULT_BITS = int(os.environ.get("KMSERIES_DEFAULT_PREC_BITS", "256"))

MIN_BITS = 64


def set_working_precision(bits: int) -> None:
    """Set the thread-local gmpy2 working precision for raw kernels."""
    gmpy2.get_context().precision = bits


@dataclass(frozen=True)
class PrecisionContext:
    """Working precision for a family of values.

    ``eps`` is the unit roundoff 2**(1-bits); ``guard_digits`` is extra
    headroom used when composing long products.
    """

    bits: int
    guard_digits: int = 16

    def __post_init__(self):
        if self.bits < MIN_BITS:
            raise ValueError(f"precision must be at least {MIN_BITS} bits, got {self.bits}")
        if self.guard_digits < 0:
            raise ValueError("guard_digits must be non-negative")

    @property
    def eps(self) -> mpfr:
        with gmpy2.local_context(gmpy2.get_context(), precision=self.bits):
            return mpfr(2) ** (1 - self.bits)

    def activate(self) -> None:
        set_working_precision(self.bits)


def bits_for_tolerance(tol: float) -> int:
    """Working precision for a check at relative tolerance ``tol``.

    Doubles the naive bit count and adds 64 guard bits, since products of
    hundreds of factors lose O(#factors) ulps of relative accuracy.
    """
    import math

    if not 0 < tol < 1:
        raise ValueError("tolerance must be in (0, 1)")
    return max(MIN_BITS, math.ceil(-2 * math.log2(tol)) + 64)


def parse_decimal(s: str, bits: int) -> mpfr:
    """Parse a decimal string to an mpfr at exactly ``bits`` precision."""
    return mpfr(s, bits)


class HValue:
    """An arbitrary-precision complex number tied to a PrecisionContext."""

    __slots__ = ("value", "ctx")

    def __init__(self, value: mpc, ctx: PrecisionContext):
        self.value = value
        self.ctx = ctx

    @classmethod
    def from_decimal(cls, re: str, im: str = "0", ctx: PrecisionContext | None = None) -> "HValue":
        ctx = ctx or PrecisionContext(DEFAULT_BITS)
        ctx.activate()
        return cls(mpc(parse_decimal(re, ctx.bits), parse_decimal(im, ctx.bits)), ctx)

    @classmethod
    def from_int(cls, n: int, ctx: PrecisionContext | None = None) -> "HValue":
        ctx = ctx or PrecisionContext(DEFAULT_BITS)
        ctx.activate()
        return cls(mpc(n), ctx)

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> mpc:
        if isinstance(other, HValue):
            if other.ctx.bits != self.ctx.bits:
                raise PrecisionMismatch(
                    f"mixing {self.ctx.bits}-bit and {other.ctx.bits}-bit values"
                )
            return other.value
        if isinstance(other, (int, mpc, mpfr)):
            return mpc(other)
        return NotImplemented

    def _wrap(self, v: mpc) -> "HValue":
        return HValue(v, self.ctx)

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        self.ctx.activate()
        return self._wrap(self.value + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        self.ctx.activate()
        return self._wrap(self.value - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        self.ctx.activate()
        return self._wrap(o - self.value)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        self.ctx.activate()
        return self._wrap(self.value * o)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        self.ctx.activate()
        return self._wrap(self.value / o)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        self.ctx.activate()
        return self._wrap(o / self.value)

    def __neg__(self):
        return self._wrap(-self.value)

    def __pow__(self, k: int):
        self.ctx.activate()
        return self._wrap(self.value ** k)

    def __abs__(self) -> mpfr:
        self.ctx.activate()
        return abs(self.value)

    def __eq__(self, other):
        if isinstance(other, HValue):
            return self.ctx.bits == other.ctx.bits and self.value == other.value
        if isinstance(other, (int, mpc, mpfr)):
            return self.value == other
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.ctx.bits))

    @property
    def re(self) -> mpfr:
        return self.value.real

    @property
    def im(self) -> mpfr:
        return self.value.imag

    def is_finite(self) -> bool:
        return gmpy2.is_finite(self.value)

    def __repr__(self):
        return f"HValue({self.value}, bits={self.ctx.bits})"


@dataclass(frozen=True)
class QBase:
    """Base of a q-series: a fixed complex q with 0 < |q| < 1."""

    q: HValue

    def __post_init__(self):
        self.q.ctx.activate()
        m = abs(self.q.value)
        if not (0 < m < 1):
            raise ValueError(f"|q| must lie in (0, 1), got |q| = {m}")

    @property
    def ctx(self) -> PrecisionContext:
        return self.q.ctx
