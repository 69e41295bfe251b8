"""Scalar special-function kernels: q-shifted factorials, infinite
q-products, classical Pochhammer symbols, complex log-gamma.

Two layers live here.  The public operations (:func:`qpoch_finite`,
:func:`qpoch_inf`, :func:`qpoch_list`, :func:`poch_classical`,
:func:`log_gamma`) work on :class:`~kmseries.precision.HValue` and enforce
the precision contracts.  Below them sits a raw layer on bare ``gmpy2``
numbers used by the summation kernels, which additionally exposes
numerator/denominator *pairs* so that an exactly vanishing factor can be
classified (zero term vs. pole) instead of dividing by zero.
"""

from __future__ import annotations

import gmpy2
import mpmath
from gmpy2 import mpc, mpfr

from .errors import DivisionByZeroPole, PoleAtNonPositiveInteger, PoleInTerm
from .precision import HValue, PrecisionContext, QBase, set_working_precision

ONE = mpc(1)

# ---------------------------------------------------------------------------
# raw layer
# ---------------------------------------------------------------------------


def qpoch_pair(a: mpc, q: mpc, k: int) -> tuple[mpc, mpc]:
    """(a;q)_k as a (numerator, denominator) pair of plain products.

    k >= 0: ((1-a)(1-aq)...(1-aq^{k-1}), 1).
    k < 0:  (1, (1-aq^{-1})(1-aq^{-2})...(1-aq^{k})).
    Neither side is ever divided, so exact zeros survive for the caller
    to classify.
    """
    num = mpc(1)
    den = mpc(1)
    if k >= 0:
        f = a
        for _ in range(k):
            num *= 1 - f
            f *= q
    else:
        qi = 1 / q
        f = a * qi
        for _ in range(-k):
            den *= 1 - f
            f *= qi
    return num, den


def cpoch_pair(a: mpc, k: int) -> tuple[mpc, mpc]:
    """Classical rising factorial (a)_k as a (numerator, denominator) pair.

    k >= 0: (a(a+1)...(a+k-1), 1).
    k < 0:  (1, (a-1)(a-2)...(a+k)).
    """
    num = mpc(1)
    den = mpc(1)
    if k >= 0:
        for j in range(k):
            num *= a + j
    else:
        for j in range(1, -k + 1):
            den *= a - j
    return num, den


def qpoch_raw(a: mpc, q: mpc, k: int) -> mpc:
    num, den = qpoch_pair(a, q, k)
    if den == 0:
        raise DivisionByZeroPole(f"(a;q)_{k} pole at a={a}")
    return num / den


def cpoch_raw(a: mpc, k: int) -> mpc:
    num, den = cpoch_pair(a, k)
    if den == 0:
        raise DivisionByZeroPole(f"(a)_{k} pole at a={a}")
    return num / den


def qpoch_inf_raw(a: mpc, q: mpc, bits: int, guard_digits: int = 16) -> mpc:
    """prod_{j>=0} (1 - a q^j), truncated once |a q^j| < eps * 2^-guard.

    The dropped tail multiplies the result by prod(1 - a q^j) with all
    |a q^j| below threshold, a relative perturbation under
    2 * |a q^J| / (1 - |q|): far below eps at the chosen cutoff.
    """
    thresh = mpfr(2) ** (1 - bits - guard_digits)
    prod = mpc(1)
    f = mpc(a)
    # geometric decay: bound the loop defensively
    for _ in range(64 * (bits + guard_digits)):
        if abs(f) < thresh:
            break
        prod *= 1 - f
        f *= q
    return prod


def loggamma_raw(z: mpc, bits: int) -> mpc:
    """Principal branch of log Gamma via mpmath at ``bits`` + guard precision.

    Conversion both ways is exact (mantissa/exponent transport, no decimal
    round trip).
    """
    if z.imag == 0 and z.real <= 0 and z.real == gmpy2.floor(z.real):
        raise PoleAtNonPositiveInteger(f"log_gamma pole at z={z}")
    work = bits + 16
    with mpmath.workprec(work):
        mz = mpmath.mpc(_to_mpmath(z.real, work), _to_mpmath(z.imag, work))
        r = mpmath.loggamma(mz)
        return mpc(_from_mpmath(r.real, bits), _from_mpmath(r.imag, bits))


def _to_mpmath(x: mpfr, work: int):
    if x == 0:
        return mpmath.mpf(0)
    m, e = x.as_mantissa_exp()
    return mpmath.ldexp(mpmath.mpf(int(m)), int(e))


def _from_mpmath(x, bits: int) -> mpfr:
    sign, man, exp, _ = mpmath.mpf(x)._mpf_
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        v = mpfr(man) * mpfr(2) ** exp
        return -v if sign else v


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def qpoch_finite(a: HValue, q: QBase, k: int) -> HValue:
    """q-shifted factorial (a;q)_k for any integer k."""
    ctx = _common_ctx(a, q.q)
    ctx.activate()
    return HValue(qpoch_raw(a.value, q.q.value, k), ctx)


def qpoch_inf(a: HValue, q: QBase) -> HValue:
    """Infinite q-product (a;q)_infty = prod_{j>=0} (1 - a q^j)."""
    ctx = _common_ctx(a, q.q)
    ctx.activate()
    return HValue(qpoch_inf_raw(a.value, q.q.value, ctx.bits, ctx.guard_digits), ctx)


def qpoch_list(bases: list[HValue], q: QBase, k: int) -> HValue:
    """(a_1, ..., a_m; q)_k = (a_1;q)_k ... (a_m;q)_k; empty list gives 1."""
    ctx = q.ctx
    for a in bases:
        ctx = _common_ctx(a, q.q)
    ctx.activate()
    prod = mpc(1)
    for a in bases:
        prod *= qpoch_raw(a.value, q.q.value, k)
    return HValue(prod, ctx)


def poch_classical(a: HValue, k: int) -> HValue:
    """Classical Pochhammer symbol (a)_k = Gamma(a+k)/Gamma(a), any integer k."""
    a.ctx.activate()
    return HValue(cpoch_raw(a.value, k), a.ctx)


def log_gamma(z: HValue) -> HValue:
    """Principal branch of log Gamma(z)."""
    z.ctx.activate()
    return HValue(loggamma_raw(z.value, z.ctx.bits), z.ctx)


def gamma_ratio(num: list[HValue], den: list[HValue]) -> HValue:
    """prod Gamma(num_i) / prod Gamma(den_j), via one exponentiation of
    accumulated log-gammas (branch-safe: exp(loggamma(z)) = Gamma(z))."""
    args = list(num) + list(den)
    if not args:
        raise ValueError("at least one gamma argument required")
    ctx = args[0].ctx
    for a in args[1:]:
        ctx = _common_ctx(a, args[0])
    ctx.activate()
    acc = mpc(0)
    for z in num:
        acc += loggamma_raw(z.value, ctx.bits)
    for z in den:
        acc -= loggamma_raw(z.value, ctx.bits)
    return HValue(gmpy2.exp(acc), ctx)


def _common_ctx(a: HValue, b: HValue) -> PrecisionContext:
    if a.ctx.bits != b.ctx.bits:
        from .errors import PrecisionMismatch

        raise PrecisionMismatch(f"mixing {a.ctx.bits}-bit and {b.ctx.bits}-bit values")
    return a.ctx


# ---------------------------------------------------------------------------
# cached fraction machinery for summation kernels
# ---------------------------------------------------------------------------


class PochCache:
    """Lazy table of (base)_k numerator/denominator pairs over integer k.

    Entries extend incrementally from k=0 by the one-step recurrence, which
    reproduces the same multiplication order as the from-scratch products
    (validated against the reference path in the test suite).
    """

    __slots__ = ("q", "tab")

    def __init__(self, q: mpc | None):
        self.q = q  # None selects the classical rising factorial
        self.tab = {}

    def get(self, base: mpc, k: int) -> tuple[mpc, mpc]:
        ent = self.tab.get(base)
        if ent is None:
            # pos[j] = pair for k=j; neg[j] = pair for k=-1-j
            ent = self.tab[base] = ([ (ONE, ONE) ], [])
        pos, neg = ent
        if k >= 0:
            while len(pos) <= k:
                j = len(pos) - 1
                num, den = pos[-1]
                if self.q is None:
                    num = num * (base + j)
                else:
                    num = num * (1 - base * self.q ** j)
                pos.append((num, den))
            return pos[k]
        while len(neg) < -k:
            j = len(neg) + 1
            num, den = neg[-1] if neg else (ONE, ONE)
            if self.q is None:
                den = den * (base - j)
            else:
                den = den * (1 - base * self.q ** -j)
            neg.append((num, den))
        return neg[-k - 1]


class Workspace:
    """Per-evaluation state: mode, base q, precision, and shared caches."""

    __slots__ = ("q", "bits", "guard", "cache", "_qpow")

    def __init__(self, q: mpc | None, bits: int, guard: int = 16):
        self.q = q
        self.bits = bits
        self.guard = guard
        self.cache = PochCache(q)
        self._qpow = {0: mpc(1)}

    @property
    def classical(self) -> bool:
        return self.q is None

    def qpow(self, k: int) -> mpc:
        v = self._qpow.get(k)
        if v is None:
            v = self._qpow[k] = self.q ** k
        return v

    def qpoch(self, a: mpc, k: int) -> mpc:
        if self.q is None:
            return cpoch_raw(a, k)
        return qpoch_raw(a, self.q, k)

    def qpinf(self, a: mpc) -> mpc:
        return qpoch_inf_raw(a, self.q, self.bits, self.guard)


class Frac:
    """Numerator/denominator accumulator for one summand.

    Products are collected unreduced so that an exact zero in the numerator
    yields a zero term while a zero denominator is reported as a pole.
    """

    __slots__ = ("ws", "num", "den")

    def __init__(self, ws: Workspace):
        self.ws = ws
        self.num = mpc(1)
        self.den = mpc(1)

    def mul(self, v: mpc) -> "Frac":
        self.num *= v
        return self

    def div(self, v: mpc) -> "Frac":
        self.den *= v
        return self

    def poch(self, base: mpc, k: int, inv: bool = False) -> "Frac":
        num, den = self.ws.cache.get(base, k)
        if inv:
            self.num *= den
            self.den *= num
        else:
            self.num *= num
            self.den *= den
        return self

    def ratio(self, nbase: mpc, dbase: mpc, k: int) -> "Frac":
        """Multiply by (nbase)_k / (dbase)_k."""
        return self.poch(nbase, k).poch(dbase, k, inv=True)

    def powi(self, base: mpc, e: int) -> "Frac":
        if e >= 0:
            self.num *= base ** e
        else:
            self.den *= base ** (-e)
        return self

    def vandermonde(self, z: list[mpc], y: tuple[int, ...]) -> "Frac":
        """Delta(z q^y)/Delta(z), or Delta(z+y)/Delta(z) in classical mode."""
        ws = self.ws
        n = len(z)
        if ws.q is None:
            for i in range(n):
                for j in range(i + 1, n):
                    self.num *= z[i] + y[i] - z[j] - y[j]
                    self.den *= z[i] - z[j]
        else:
            for i in range(n):
                for j in range(i + 1, n):
                    self.num *= z[i] * ws.qpow(y[i]) - z[j] * ws.qpow(y[j])
                    self.den *= z[i] - z[j]
        return self

    def value(self) -> mpc:
        if self.den == 0:
            raise PoleInTerm("summand denominator vanished")
        if self.num == 0:
            return mpc(0)
        return self.num / self.den
