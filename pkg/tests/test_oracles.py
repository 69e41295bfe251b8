"""Independent cross-checks of representative identities.

Each oracle here is written from scratch on top of plain gmpy2 / mpmath
operations -- no shared code with the package's Pochhammer cache, term
builders or truncation engines -- so agreement is meaningful evidence.
"""

import gmpy2
import mpmath
import pytest
from gmpy2 import mpc, mpfr

from kmseries import registry, sampler
from kmseries.lattice import TruncationPolicy
from kmseries.params import Bound, ParamSet

BITS = 256
POLICY = TruncationPolicy(radius=24, term_tol=1e-24)


def setup_module():
    gmpy2.get_context().precision = BITS + 32


def naive_qpoch(a: mpc, q: mpc, k: int) -> mpc:
    """(a;q)_k by bare multiplication, negative branch by reciprocal."""
    if k >= 0:
        out = mpc(1)
        for j in range(k):
            out *= 1 - a * q ** j
        return out
    out = mpc(1)
    for j in range(1, -k + 1):
        out *= 1 - a * q ** (-j)
    return 1 / out


def rel(a, b) -> float:
    return float(abs(a - b) / max(abs(a), abs(b)))


# ---------------------------------------------------------------------------
# bilateral hyperplane sum at n = 2 against a direct one-variable
# bilateral summation

def _direct_bilateral(ps: ParamSet, K: int = 60) -> mpc:
    b = Bound(ps, BITS)
    q = b.ws.q
    z1, z2 = b.z
    total = mpc(0)
    for k in range(-K, K + 1):
        t = (z1 * q ** k - z2 * q ** (-k)) / (z1 - z2)
        for i in range(2):
            t *= naive_qpoch(b.a[i] * z1, q, k) / naive_qpoch(b.b[i] * z1, q, k)
            t *= naive_qpoch(b.a[i] * z2, q, -k) / naive_qpoch(b.b[i] * z2, q, -k)
        total += t
    return total


@pytest.mark.parametrize("index", range(4))
def test_bilateral_hyperplane_against_direct_sum(index):
    cfg = sampler.SampleConfig(seed=61, n_range=(2, 2))
    ps = sampler.sample("gustafson_6psi6", cfg, index + 1)[index]
    lhs, diag = registry.lhs_eval("gustafson_6psi6", ps, POLICY, BITS)
    assert diag.converged
    assert rel(lhs, _direct_bilateral(ps)) < 1e-20
    rhs, _ = registry.rhs_eval("gustafson_6psi6", ps, POLICY, BITS)
    assert rel(rhs, _direct_bilateral(ps)) < 1e-20


# ---------------------------------------------------------------------------
# balanced box evaluation at n = 1 against a from-scratch terminating
# balanced 3phi2 and its closed product form

def _saalschutz_pair(ps: ParamSet) -> tuple[mpc, mpc]:
    b = Bound(ps, BITS)
    q = b.ws.q
    a, c = b.a, b.c
    bz = b.b * b.z[0]
    m = b.m[0]
    series = mpc(0)
    for x in range(m + 1):
        series += (
            naive_qpoch(a, q, x) * naive_qpoch(bz, q, x)
            * naive_qpoch(q ** (-m), q, x)
            / (naive_qpoch(c, q, x) * naive_qpoch(b.d * b.z[0], q, x)
               * naive_qpoch(q, q, x))
            * q ** x
        )
    closed = (
        naive_qpoch(c / a, q, m) * naive_qpoch(c / bz, q, m)
        / (naive_qpoch(c, q, m) * naive_qpoch(c / (a * bz), q, m))
    )
    return series, closed


@pytest.mark.parametrize("index", range(4))
def test_balanced_box_against_saalschutz(index):
    cfg = sampler.SampleConfig(seed=62, n_range=(1, 1))
    ps = sampler.sample("cor_milne_saalschutz", cfg, index + 1)[index]
    series, closed = _saalschutz_pair(ps)
    assert rel(series, closed) < 1e-40  # the oracle agrees with itself
    lhs, _ = registry.lhs_eval("cor_milne_saalschutz", ps, POLICY, BITS)
    rhs, _ = registry.rhs_eval("cor_milne_saalschutz", ps, POLICY, BITS)
    assert rel(lhs, series) < 1e-25
    assert rel(rhs, closed) < 1e-25


# ---------------------------------------------------------------------------
# classical unit-argument series without integer shifts against mpmath's
# hypergeometric evaluation

def _mp(z: mpc):
    return mpmath.mpc(mpmath.mpf(str(z.real)), mpmath.mpf(str(z.imag)))


@pytest.mark.parametrize("index", range(3))
def test_classical_unit_argument_against_mpmath(index):
    cfg = sampler.SampleConfig(seed=63)
    desc = registry.get("cl_km")
    sets = desc.degenerations(sampler.rng_for(63, f"km:{index}", 0), cfg)
    ps = sets[0]
    assert all(v == 0 for v in ps.ivecs["m"])
    b = Bound(ps, BITS)
    lhs, _ = registry.lhs_eval("cl_km", ps, POLICY, BITS)
    with mpmath.workdps(80):
        oracle = mpmath.hyp2f1(_mp(b.a), _mp(b.b), _mp(b.b + 1), 1)
        got = mpc(mpfr(mpmath.nstr(oracle.real, 70)),
                  mpfr(mpmath.nstr(oracle.imag, 70)))
    assert rel(lhs, got) < 1e-40


# ---------------------------------------------------------------------------
# the shifted hyperplane reduction collapses to the plain bilateral sum
# when no integer shifts are present

@pytest.mark.parametrize("index", range(3))
def test_shift_free_reduction_matches_plain_bilateral(index):
    cfg = sampler.SampleConfig(seed=64, n_range=(2, 3))
    base = sampler.sample("gustafson_6psi6", cfg, index + 1)[index]
    n = base.dims["n"]
    shifted = ParamSet(
        "thm1", "q",
        dims={"n": n, "p": 1},
        ivecs={"m": [0]},
        scalars=dict(base.scalars),
        vectors=dict(base.vectors, c=[("1.103050709131", "0.207072514274")]),
    )
    lhs_a, _ = registry.lhs_eval("gustafson_6psi6", base, POLICY, BITS)
    lhs_b, _ = registry.lhs_eval("thm1", shifted, POLICY, BITS)
    rhs_b, _ = registry.rhs_eval("thm1", shifted, POLICY, BITS)
    assert rel(lhs_a, lhs_b) < 1e-60  # m = 0 removes the shift content
    assert rel(lhs_b, rhs_b) < 1e-20
