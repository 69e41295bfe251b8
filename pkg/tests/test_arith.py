"""Shifted-factorial and gamma kernels: examples and algebraic invariants."""

import gmpy2
import pytest
from gmpy2 import mpc, mpfr
from hypothesis import given, settings, strategies as st

from kmseries.errors import DivisionByZeroPole, PoleAtNonPositiveInteger
from kmseries.qarith import (
    Workspace,
    cpoch_raw,
    loggamma_raw,
    qpoch_inf_raw,
    qpoch_raw,
)


def rel(a: mpc, b: mpc) -> float:
    d = max(abs(a), abs(b))
    return float(abs(a - b) / d) if d > 0 else float(abs(a - b))


def _set(bits: int) -> None:
    gmpy2.get_context().precision = bits + 32


# ---------------------------------------------------------------------------
# worked examples

def test_qpoch_positive_example():
    _set(128)
    q = mpc("0.5")
    # (q; q)_3 = (1 - 1/2)(1 - 1/4)(1 - 1/8)
    assert rel(qpoch_raw(q, q, 3), mpc("0.328125")) < 1e-30


def test_qpoch_zero_index_is_one():
    _set(128)
    assert qpoch_raw(mpc(mpfr("0.3"), mpfr("0.7")), mpc("0.4"), 0) == 1


def test_qpoch_negative_example():
    _set(128)
    q = mpc("0.5")
    a = mpc("3")
    # (a; q)_{-1} = 1/(1 - a/q)
    assert rel(qpoch_raw(a, q, -1), 1 / (1 - a / q)) < 1e-30


def test_qpoch_negative_pole_raises():
    _set(128)
    q = mpc("0.5")
    with pytest.raises(DivisionByZeroPole):
        qpoch_raw(q, q, -1)  # factor 1 - q/q = 0 lands in the denominator


def test_cpoch_examples():
    _set(128)
    assert cpoch_raw(mpc(2), 3) == 24  # 2*3*4
    assert rel(cpoch_raw(mpc(5), -2), mpc(1) / 12) < 1e-30  # 1/((5-1)(5-2))


def test_loggamma_pole_raises():
    _set(128)
    with pytest.raises(PoleAtNonPositiveInteger):
        loggamma_raw(mpc(-3), 128)


def test_loggamma_factorial():
    _set(256)
    v = gmpy2.exp(loggamma_raw(mpc(11), 256).real)
    assert rel(mpc(v), mpc(3628800)) < 1e-70


# ---------------------------------------------------------------------------
# hypothesis invariants; the acceptance suite re-runs these over large
# deterministic case counts, so moderate example counts suffice here

cbits = st.sampled_from([128, 256])
re_im = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)
off_axis = st.floats(min_value=0.05, max_value=1.5, allow_nan=False)
qmod = st.floats(min_value=0.1, max_value=0.85, allow_nan=False)
small_k = st.integers(min_value=0, max_value=12)


def _mk(re: float, im: float) -> mpc:
    return mpc(mpfr(repr(re)), mpfr(repr(im)))


@settings(max_examples=120, deadline=None)
@given(cbits, re_im, off_axis, qmod, re_im, small_k)
def test_qpoch_recurrence(bits, ar, ai, qm, qphase, k):
    _set(bits)
    a = _mk(ar, ai)
    q = _mk(qm, 0.3 * qphase)
    q = q * mpfr(repr(qm)) / abs(q)
    lhs = qpoch_raw(a, q, k + 1)
    rhs = qpoch_raw(a, q, k) * (1 - a * q ** k)
    assert rel(lhs, rhs) < 2.0 ** (40 - bits)


@settings(max_examples=120, deadline=None)
@given(cbits, re_im, off_axis, qmod, small_k)
def test_qpoch_branch_consistency(bits, ar, ai, qm, k):
    _set(bits)
    a = _mk(ar, ai)
    q = _mk(qm, 0.0)
    # (a;q)_{-k} (a q^{-k};q)_k = 1 links the two branches
    prod = qpoch_raw(a, q, -k) * qpoch_raw(a * q ** (-k), q, k)
    assert rel(prod, mpc(1)) < 2.0 ** (40 - bits)


@settings(max_examples=120, deadline=None)
@given(cbits, re_im, off_axis, qmod, small_k, small_k)
def test_qpoch_product_splitting(bits, ar, ai, qm, j, k):
    _set(bits)
    a = _mk(ar, ai)
    q = _mk(qm, 0.0)
    whole = qpoch_raw(a, q, j + k)
    split = qpoch_raw(a, q, j) * qpoch_raw(a * q ** j, q, k)
    assert rel(whole, split) < 2.0 ** (40 - bits)


@settings(max_examples=120, deadline=None)
@given(cbits, re_im, off_axis, qmod, small_k)
def test_qpoch_infinite_splitting(bits, ar, ai, qm, k):
    _set(bits)
    a = _mk(0.4 * ar, 0.4 * ai)
    q = _mk(qm, 0.0)
    whole = qpoch_inf_raw(a, q, bits)
    split = qpoch_raw(a, q, k) * qpoch_inf_raw(a * q ** k, q, bits)
    assert rel(whole, split) < 2.0 ** (40 - bits)


@settings(max_examples=120, deadline=None)
@given(cbits, re_im, off_axis)
def test_gamma_recurrence(bits, zr, zi):
    _set(bits)
    z = _mk(zr, zi)
    ratio = gmpy2.exp(loggamma_raw(z + 1, bits) - loggamma_raw(z, bits))
    assert rel(ratio, z) < 2.0 ** (40 - bits)


@settings(max_examples=80, deadline=None)
@given(re_im, off_axis, qmod, st.integers(min_value=-10, max_value=10))
def test_workspace_cache_matches_raw(ar, ai, qm, k):
    _set(288)
    q = _mk(qm, 0.0)
    ws = Workspace(q, 256)
    a = _mk(ar, ai)
    assert rel(ws.qpoch(a, k), qpoch_raw(a, q, k)) < 1e-70
