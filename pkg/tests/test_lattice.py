"""Shell enumeration, truncation bookkeeping and the Vandermonde ratio."""

import math
import random

import gmpy2
from gmpy2 import mpc, mpfr
from hypothesis import given, settings, strategies as st
import pytest

from kmseries.errors import Diverged
from kmseries.lattice import (
    SumDiagnostics,
    TruncationPolicy,
    _hyperplane_shell,
    _lattice_shell,
    _orthant_shell,
    iter_box_hyperplane,
    sum_box,
    sum_box_hyperplane,
    sum_hyperplane_bilateral,
    sum_lattice_bilateral,
    sum_orthant,
    vandermonde_ratio,
)
from kmseries.qarith import Workspace

gmpy2.get_context().precision = 160


# ---------------------------------------------------------------------------
# shell enumeration

@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("s", [0, 1, 2, 4])
def test_lattice_shell_count(n, s):
    pts = _lattice_shell(n, s)
    expected = (2 * s + 1) ** n - (2 * s - 1) ** n if s else 1
    assert len(pts) == expected
    assert len(set(pts)) == len(pts)
    assert all(max(abs(v) for v in y) == s for y in pts) or s == 0


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("s", [0, 1, 3])
def test_orthant_shell_count(n, s):
    pts = _orthant_shell(n, s)
    assert len(pts) == math.comb(s + n - 1, n - 1)
    assert all(sum(y) == s and min(y) >= 0 for y in pts)


@pytest.mark.parametrize("n", [2, 3])
def test_hyperplane_shells_partition(n):
    # shells with sum = N tile the clipped hyperplane without overlap
    N = 1
    R = 4
    seen = set()
    for s in range(R + 1):
        for y in _hyperplane_shell(n, N, s):
            assert sum(y) == N
            assert y not in seen
            seen.add(y)
    brute = {
        y
        for y in __import__("itertools").product(range(-R, R + 1), repeat=n)
        if sum(y) == N
    }
    assert seen == brute


def test_box_hyperplane_points():
    pts = list(iter_box_hyperplane((2, 2), 2))
    assert sorted(pts) == [(0, 2), (1, 1), (2, 0)]
    assert list(iter_box_hyperplane((1, 1), 5)) == []


# ---------------------------------------------------------------------------
# engines

def test_sum_box_matches_brute_force():
    def term(y):
        return mpc(2) ** y[0] * mpc(3) ** y[1]

    total = sum_box(term, (2, 3))
    brute = sum(term((i, j)) for i in range(3) for j in range(4))
    assert abs(total - brute) == 0


def test_geometric_bilateral_sum():
    # sum over Z of r^|y| = (1 + r) / (1 - r)
    r = mpfr("0.25")

    def term(y):
        return mpc(r) ** abs(y[0])

    val, diag = sum_lattice_bilateral(term, 1, TruncationPolicy(radius=80, term_tol=1e-44))
    assert diag.converged
    assert abs(val - mpfr(5) / 3) < 1e-40


def test_orthant_geometric_sum():
    r = mpfr("0.125")

    def term(y):
        return mpc(r) ** sum(y)

    val, diag = sum_orthant(term, 2, TruncationPolicy(radius=120, term_tol=1e-44))
    assert diag.converged
    target = (1 / (1 - r)) ** 2
    assert abs(val - target) < 1e-40


def test_order_independence_of_shell_sums():
    rng = random.Random(5)
    coeff = {
        y: mpc(mpfr(repr(rng.uniform(-1, 1)))) * mpfr("0.3") ** (abs(y[0]) + abs(y[1]))
        for y in __import__("itertools").product(range(-6, 7), repeat=2)
    }

    def term(y):
        return coeff.get(y, mpc(0))

    a, _ = sum_lattice_bilateral(term, 2, TruncationPolicy(radius=6, term_tol=1e-300))
    b = sum(coeff.values())
    assert abs(a - b) < 1e-38


def test_divergence_detected():
    def term(y):
        return mpc(2) ** abs(y[0])

    with pytest.raises(Diverged):
        sum_lattice_bilateral(term, 1, TruncationPolicy(radius=30))


def test_diagnostics_exact():
    d = SumDiagnostics.exact(7)
    assert d.converged and d.terms_evaluated == 7 and d.largest_shell_tail == 0.0


def test_converged_when_boundary_quiet_after_transient():
    # interior bump, quiet and decreasing at the radius
    def term(y):
        s = abs(y[0])
        return mpc(mpfr("10.0")) ** (-(abs(s - 5) + 18)) if s else mpc(1)

    _, diag = sum_lattice_bilateral(term, 1, TruncationPolicy(radius=12, term_tol=1e-20))
    assert diag.converged


# ---------------------------------------------------------------------------
# Vandermonde ratio against explicit determinants

def _det(mat):
    n = len(mat)
    if n == 1:
        return mat[0][0]
    out = mpc(0)
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in mat[1:]]
        out += (-1) ** j * mat[0][j] * _det(minor)
    return out


def _vdm_det(nodes):
    return _det([[x ** j for j in range(len(nodes))] for x in nodes])


@settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=2, max_value=4),
    st.integers(min_value=0, max_value=10 ** 6),
)
def test_vandermonde_ratio_matches_determinants(n, seed):
    rng = random.Random(seed)
    q = mpc(mpfr("0.6"))
    ws = Workspace(q, 160)
    z = [mpc(mpfr(repr(rng.uniform(0.5, 2.0))), mpfr(repr(rng.uniform(0.2, 1.0))))
         for _ in range(n)]
    y = tuple(rng.randint(-4, 4) for _ in range(n))
    shifted = [z[i] * q ** y[i] for i in range(n)]
    expected = _vdm_det(shifted) / _vdm_det(z)
    got = vandermonde_ratio(z, y, ws)
    assert abs(got - expected) / abs(expected) < 1e-40


def test_hyperplane_engine_vs_brute_force():
    ws = Workspace(mpc(mpfr("0.5")), 160)

    def term(y):
        return mpfr("0.2") ** (abs(y[0]) + abs(y[1])) * vandermonde_ratio(
            [mpc(1), mpc(mpfr("1.7"))], y, ws)

    val, _ = sum_hyperplane_bilateral(term, 2, 0, TruncationPolicy(radius=40, term_tol=1e-44))
    brute = sum(term((k, -k)) for k in range(-60, 61))
    assert abs(val - brute) < 1e-38


def test_box_hyperplane_sum_matches_filtered_box():
    def term(y):
        return mpc(2) ** y[0] * mpc(3) ** y[1] * mpc(5) ** y[2]

    m = (2, 1, 2)
    for N in range(0, 6):
        direct = sum(
            term(y)
            for y in __import__("itertools").product(range(3), range(2), range(3))
            if sum(y) == N
        )
        assert sum_box_hyperplane(term, m, N) == direct
