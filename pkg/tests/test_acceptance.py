"""End-to-end acceptance gate.

One test per release criterion; each prints a single machine-greppable
PASS/FAIL line.  Everything is seeded, so a red line here reproduces
byte-for-byte.
"""

import dataclasses
import itertools
import math
import random

import gmpy2
import pytest
from gmpy2 import mpc, mpfr

from kmseries import registry, reports, sampler
from kmseries.lattice import TruncationPolicy, _hyperplane_shell
from kmseries.params import DERIVED, Bound, ParamSet
from kmseries.qarith import (
    Frac,
    Workspace,
    cpoch_raw,
    loggamma_raw,
    qpoch_raw,
)

BITS = 256

EXACT_IDS = [
    "cor_kajihara_bailey", "cor_pkb", "eq_pbt", "cor_milne_saalschutz",
    "cor_milne_dougall", "cor_mnc", "cor_mnb", "cor_kajihara_watson",
]

INFINITE_IDS = [
    "gustafson_6psi6", "thm1", "thm1_shifted", "cor_c1", "cor_csc",
    "cor_chu_un", "cor_pk", "cor_c2", "cor_c3", "cor_2l",
]


def _line(name: str, ok: bool, detail: str = "") -> None:
    tail = f"  ({detail})" if detail else ""
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}{tail}")


def rel(a: mpc, b: mpc) -> float:
    return reports.relative_error(a, b)


# ---------------------------------------------------------------------------
# 1. the whole registry, five seeded draws per identity


def test_full_registry_suite():
    cfg = reports.SuiteConfig(samples=5, tolerance=1e-18,
                              precision_bits=BITS, radius=24, workers=8)
    doc = reports.run_suite(cfg)
    runtime_s = float(doc["total_runtime_ms"]) / 1e3
    failed = [r["identity"] for r in doc["reports"] if not r["passed"]]
    ok = doc["all_passed"] and runtime_s <= 900.0
    _line("full-registry-suite",
          ok, f"{len(doc['reports'])} checks, {runtime_s:.1f}s")
    assert not failed, f"failing checks: {sorted(set(failed))}"
    assert runtime_s <= 900.0
    assert ok


# ---------------------------------------------------------------------------
# 2. identities whose both sides are finite sums: no truncation error
#    is tolerated, so the bar tightens to 1e-25


def test_exact_finite_identities():
    cfg = sampler.SampleConfig(seed=20260826)
    bad = []
    for ident in EXACT_IDS:
        for i, ps in enumerate(sampler.sample(ident, cfg, 25)):
            rep = reports.check(ps, tol=1e-25, bits=BITS, sample_index=i)
            if not rep.passed:
                bad.append((ident, i, rep.rel_error, rep.error))
    _line("exact-finite-identities", not bad,
          f"{len(EXACT_IDS) * 25} checks at 1e-25")
    assert not bad, bad


# ---------------------------------------------------------------------------
# 3. with every integer shift zero, the shifted hyperplane series must
#    coincide with its unshifted specialization term by term, not just
#    in total


def _as_unshifted(ps: ParamSet) -> ParamSet:
    return ParamSet(
        identity="gustafson_6psi6", mode="q",
        dims={"n": ps.dims["n"]},
        scalars=dict(ps.scalars),
        vectors={k: list(v) for k, v in ps.vectors.items() if k != "c"},
    )


def test_zero_shift_term_by_term():
    cfg = sampler.SampleConfig(seed=71, m_max=0, n_range=(2, 3))
    policy = TruncationPolicy(radius=24, term_tol=1e-24)
    rng = random.Random(71)
    points_checked = 0
    sets = 0
    while points_checked < 20:
        sets += 1
        ps = sampler.sample("thm1", cfg, sets)[sets - 1]
        assert all(v == 0 for v in ps.ivecs["m"])
        ps_g = _as_unshifted(ps)
        b_t = Bound(ps, BITS)
        b_g = Bound(ps_g, BITS)
        n = b_t.n
        term_t = registry.get("thm1").lhs_term(b_t)
        term_g = registry.get("gustafson_6psi6").lhs_term(b_g)
        for _ in range(7):
            shell = _hyperplane_shell(n, 0, rng.randint(1, 8))
            y = shell[rng.randrange(len(shell))]
            assert rel(term_t(y), term_g(y)) < 1e-25, (ps.serialize(), y)
            points_checked += 1
        lhs_t, _ = registry.lhs_eval("thm1", ps, policy, BITS)
        lhs_g, _ = registry.lhs_eval("gustafson_6psi6", ps_g, policy, BITS)
        assert rel(lhs_t, lhs_g) < 1e-20
    _line("zero-shift-term-by-term", True,
          f"{points_checked} lattice points over {sets} sets")


# ---------------------------------------------------------------------------
# 4. collapsing the free denominator parameter onto its integer-shifted
#    special position must kill every box term except the origin


def test_box_collapse_to_origin():
    cfg = dataclasses.replace(sampler.SampleConfig(seed=72), m_max=2)
    deg = registry.get("cl_kmg").degenerations
    boxes = 0
    nontrivial = 0
    for i in range(8):
        ps_list = deg(sampler.rng_for(72, "cl_kmg", i), cfg)
        for ps in ps_list:
            b = Bound(ps, BITS)
            ws, c, m = b.ws, b.c, b.m
            mm = sum(m)
            r = len(c)

            def bterm(x):
                fr = Frac(ws).vandermonde(c, x)
                fr.ratio(b.b + 1 - b.d, mpc(1 - mm) - b.a, sum(x))
                for ii in range(r):
                    fr.ratio(c[ii] - b.a, 1 + c[ii] - b.d, x[ii])
                    for k in range(r):
                        fr.ratio(c[ii] - c[k] - m[k], 1 + c[ii] - c[k],
                                 x[ii])
                return fr.value()

            nonzero = 0
            for x in itertools.product(*(range(mi + 1) for mi in m)):
                v = bterm(x)
                if x == (0,) * r:
                    assert abs(v - 1) < 1e-25, (ps.serialize(), x)
                    nonzero += 1
                else:
                    assert abs(v) < 1e-25, (ps.serialize(), x, v)
            assert nonzero == 1
            boxes += 1
            if mm > 0:
                nontrivial += 1
    assert boxes >= 5 and nontrivial >= 3
    _line("box-collapse-to-origin", True,
          f"{boxes} boxes, {nontrivial} with nonempty shifts")


# ---------------------------------------------------------------------------
# 5. the two structurally different finite forms of the terminating
#    unit-argument series must agree on shared parameter sets


def test_node_sum_route_agreement():
    cfg = sampler.SampleConfig(seed=73)
    policy = TruncationPolicy(radius=24)
    done = 0
    count = 0
    worst = 0.0
    while done < 10 and count < 200:
        count += 1
        ps = sampler.sample("cl_kmg", cfg, count)[count - 1]
        twin = ParamSet(
            identity="cl_us", mode="classical",
            dims=dict(ps.dims), ivecs={k: list(v) for k, v in ps.ivecs.items()},
            scalars=dict(ps.scalars),
            vectors={k: list(v) for k, v in ps.vectors.items()},
        )
        if not sampler.admissible(twin, cfg):
            continue
        v1, _ = registry.rhs_eval("cl_kmg", ps, policy, BITS)
        v2, _ = registry.rhs_eval("cl_us", twin, policy, BITS)
        r = rel(v1, v2)
        worst = max(worst, r)
        assert r < 1e-18, (ps.serialize(), r)
        done += 1
    assert done == 10
    _line("node-sum-route-agreement", True, f"worst rel {worst:.2e}")


# ---------------------------------------------------------------------------
# 6. exchanging the node vector for a permutation of itself must leave
#    both sides equal (the connecting prefactor collapses to 1)


def test_node_exchange_permutation_case():
    cfg = sampler.SampleConfig(seed=74)
    policy = TruncationPolicy(radius=24, term_tol=1e-24)
    rng = random.Random(74)
    done = 0
    count = 0
    worst = 0.0
    while done < 10 and count < 200:
        count += 1
        ps = sampler.sample("cor_st", cfg, count)[count - 1]
        w = list(ps.vectors["z"])
        rng.shuffle(w)
        ps.vectors["w"] = w
        if not sampler.admissible(ps, cfg):
            continue
        lhs, ld = registry.lhs_eval("cor_st", ps, policy, BITS)
        rhs, rd = registry.rhs_eval("cor_st", ps, policy, BITS)
        r = rel(lhs, rhs)
        worst = max(worst, r)
        assert r < 1e-25, (ps.serialize(), r)
        done += 1
    assert done == 10
    _line("node-exchange-permutation", True, f"worst rel {worst:.2e}")


# ---------------------------------------------------------------------------
# 7. oracle equivalence against the independent implementations in
#    test_oracles (separate code path, bare multiplication)


def test_oracle_equivalence():
    import test_oracles as oracles

    cfg = sampler.SampleConfig(seed=75, n_range=(2, 2))
    policy = TruncationPolicy(radius=24, term_tol=1e-24)
    for ps in sampler.sample("gustafson_6psi6", cfg, 10):
        lhs, _ = registry.lhs_eval("gustafson_6psi6", ps, policy, BITS)
        direct = oracles._direct_bilateral(ps)
        assert rel(lhs, direct) < 1e-20, ps.serialize()
    cfg1 = sampler.SampleConfig(seed=76, n_range=(1, 1))
    for ps in sampler.sample("cor_milne_saalschutz", cfg1, 10):
        series, closed = oracles._saalschutz_pair(ps)
        lhs, _ = registry.lhs_eval("cor_milne_saalschutz", ps, policy, BITS)
        rhs, _ = registry.rhs_eval("cor_milne_saalschutz", ps, policy, BITS)
        assert rel(lhs, series) < 1e-25, ps.serialize()
        assert rel(rhs, closed) < 1e-25, ps.serialize()
    _line("oracle-equivalence", True, "10 bilateral + 10 balanced-box")


# ---------------------------------------------------------------------------
# 8. arithmetic kernel invariants over large deterministic case counts


def _rand_c(rng: random.Random) -> mpc:
    return mpc(mpfr(repr(rng.uniform(-2, 2))), mpfr(repr(rng.uniform(-2, 2))))


def _rand_q(rng: random.Random) -> mpc:
    r = rng.uniform(0.05, 0.9)
    th = rng.uniform(0, 6.283185307)
    return mpc(mpfr(repr(r * math.cos(th))), mpfr(repr(r * math.sin(th))))


@pytest.mark.parametrize("bits", [128, 256])
def test_arithmetic_invariants_bulk(bits):
    gmpy2.get_context().precision = bits + 32
    tol = 2.0 ** (40 - bits)
    rng = random.Random(10_000 + bits)
    cases = 1000
    for _ in range(cases):  # recurrence (a;q)_{k+1} = (a;q)_k (1 - a q^k)
        a, q, k = _rand_c(rng), _rand_q(rng), rng.randint(-8, 8)
        try:
            assert rel(qpoch_raw(a, q, k + 1),
                       qpoch_raw(a, q, k) * (1 - a * q ** k)) < tol
        except Exception as exc:
            if type(exc).__name__ != "DivisionByZeroPole":
                raise
    for _ in range(cases):  # branch consistency across zero
        a, q, k = _rand_c(rng), _rand_q(rng), rng.randint(1, 8)
        try:
            assert abs(qpoch_raw(a, q, -k)
                       * qpoch_raw(a * q ** (-k), q, k) - 1) < tol
        except Exception as exc:
            if type(exc).__name__ != "DivisionByZeroPole":
                raise
    for _ in range(cases):  # splitting (a;q)_{j+k} = (a;q)_j (a q^j;q)_k
        a, q = _rand_c(rng), _rand_q(rng)
        j, k = rng.randint(0, 6), rng.randint(0, 6)
        assert rel(qpoch_raw(a, q, j + k),
                   qpoch_raw(a, q, j) * qpoch_raw(a * q ** j, q, k)) < tol
    for _ in range(cases):  # gamma recurrence exp(lg(z+1) - lg(z)) = z
        z = _rand_c(rng)
        if abs(z) < 0.05 or (abs(z.imag) < 0.05 and z.real < 0.05):
            z += 3
        lg = loggamma_raw(z + 1, bits) - loggamma_raw(z, bits)
        assert rel(gmpy2.exp(lg), z) < tol
    _line(f"arithmetic-invariants-{bits}bit", True, f"4 x {cases} cases")


# ---------------------------------------------------------------------------
# 9. truncation honesty: widening the radius by two must not move a
#    converged value by more than a small multiple of the reported tail


def test_truncation_honesty():
    cfg = sampler.SampleConfig(seed=77, n_range=(1, 2))
    honest = 0
    total = 0
    for ident in INFINITE_IDS:
        for ps in sampler.sample(ident, cfg, 5):
            p24 = TruncationPolicy(radius=24, term_tol=1e-22)
            p26 = TruncationPolicy(radius=26, term_tol=1e-22)
            v24, d24 = registry.lhs_eval(ident, ps, p24, BITS)
            if not d24.converged:
                continue
            v26, _ = registry.lhs_eval(ident, ps, p26, BITS)
            total += 1
            scale = float(abs(v24))
            if float(abs(v24 - v26)) <= max(10 * d24.largest_shell_tail,
                                            1e-60 * scale):
                honest += 1
    assert total >= 50, f"only {total} converged checks"
    frac = honest / total
    _line("truncation-honesty", frac >= 0.95,
          f"{honest}/{total} within 10x reported tail")
    assert frac >= 0.95


# ---------------------------------------------------------------------------
# 10. determinism: identical configs give byte-identical reports
#     (timing aside), and parallel scheduling changes nothing


def _strip_timing(doc: dict) -> dict:
    doc = dict(doc)
    doc.pop("total_runtime_ms", None)
    doc["reports"] = [
        {k: v for k, v in r.items() if k != "wall_time_ms"}
        for r in doc["reports"]
    ]
    return doc


def test_determinism():
    cfg = reports.SuiteConfig(samples=2, workers=0)
    doc_a = _strip_timing(reports.run_suite(cfg))
    doc_b = _strip_timing(reports.run_suite(reports.SuiteConfig(samples=2,
                                                                workers=0)))
    assert reports.serialize_report(doc_a) == reports.serialize_report(doc_b)
    cfg_p = reports.SuiteConfig(samples=2, workers=8)
    doc_p = _strip_timing(reports.run_suite(cfg_p))
    assert reports.serialize_report(doc_a) == reports.serialize_report(doc_p)
    _line("determinism", True,
          f"{len(doc_a['reports'])} reports byte-stable, serial == parallel")
