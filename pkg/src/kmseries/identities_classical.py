"""Classical (q = 1) identity registrations.

Infinite series in this mode are checked in terminating form: one upper
parameter per coordinate is pinned to a negative-integer offset (and, for
bilateral sums, one lower parameter to a positive-integer offset), so both
sides are rational in the remaining freely drawn parameters and truncation
plays no role.  Closed forms are evaluated through log-gamma accumulation,
which keeps products of many gamma factors branch-safe.
"""

from __future__ import annotations

import random

import gmpy2
from gmpy2 import mpc

from .lattice import (
    SumDiagnostics,
    sum_box,
    sum_hyperplane_bilateral,
    sum_lattice_bilateral,
    sum_orthant,
)
from .params import DERIVED, ParamSet
from .qarith import Frac, loggamma_raw
from .registry import Constraint, IdentityDescriptor, register
from . import sampler as smp

ONE = mpc(1)


def _box_size(m) -> int:
    out = 1
    for mi in m:
        out *= mi + 1
    return out


def _gammas(ws, num, den) -> mpc:
    """prod Gamma(num_i) / prod Gamma(den_j) via summed log-gammas."""
    acc = mpc(0)
    for v in num:
        acc += loggamma_raw(mpc(v), ws.bits)
    for v in den:
        acc -= loggamma_raw(mpc(v), ws.bits)
    return gmpy2.exp(acc)


def _nonvan(atoms_fn) -> Constraint:
    def check(b):
        return smp._scan_atoms(b, atoms_fn(b), 1e-10, 26)

    return Constraint(
        "nonvanishing_denominator", "no denominator factor vanishes", check
    )


def _cvec(rng, cfg, n):
    return [smp.draw_complex(rng, cfg) for _ in range(n)]


def _neg_int_rule(ivec_name, index):
    """Terminating pin: entry = -(integer offset) - paired coordinate."""

    def rule(b):
        return mpc(-getattr(b, ivec_name)[index]) - b.z[index]

    return rule


def _pos_int_rule(ivec_name, index):
    def rule(b):
        return mpc(getattr(b, ivec_name)[index]) - b.z[index]

    return rule


# ---------------------------------------------------------------------------
# one-variable unilateral family (integer-shifted series at argument 1)
# ---------------------------------------------------------------------------


def _ipd_term(b):
    """Summand of the generic shifted series at unit argument:
    (a)_y (b)_y / ((d)_y y!) prod_i (c_i + m_i)_y / (c_i)_y."""
    ws = b.ws
    c, m = b.c, b.m

    def term(yv):
        y = yv[0]
        fr = Frac(ws)
        fr.poch(b.a, y).poch(b.b, y)
        fr.poch(b.d, y, inv=True).poch(ONE, y, inv=True)
        for i in range(len(c)):
            fr.ratio(c[i] + m[i], c[i], y)
        return fr.value()

    return term


def _ipd_atoms(b):
    at = [("gamma", b.d)]
    for i in range(len(b.c)):
        at.append(("creal", b.c[i]))
    if len(b.c) > 1:
        at.append(("sep", list(b.c)))
    return at


def _ipd_sampler(identity_id, with_d):
    def s(rng, cfg):
        r = rng.randint(*cfg.r_range)
        m = [rng.randint(0, cfg.m_max) for _ in range(r)]
        mm = sum(m)
        M = rng.randint(max(1, mm), max(3, mm))
        scalars = {"a": (str(-M), "0"), "b": smp.draw_complex(rng, cfg)}
        if with_d:
            scalars["d"] = smp.draw_complex(rng, cfg)
        return ParamSet(
            identity_id, "classical",
            dims={"r": r},
            ivecs={"m": m},
            scalars=scalars,
            vectors={"c": _cvec(rng, cfg, r)},
        )

    return s


def _km_lhs(b, policy):
    # lower parameter fixed at b+1
    ws = b.ws
    c, m = b.c, b.m

    def term(yv):
        y = yv[0]
        fr = Frac(ws)
        fr.poch(b.a, y).poch(b.b, y)
        fr.poch(b.b + 1, y, inv=True).poch(ONE, y, inv=True)
        for i in range(len(c)):
            fr.ratio(c[i] + m[i], c[i], y)
        return fr.value()

    return sum_orthant(term, 1, policy)


def _km_rhs(b, policy):
    ws = b.ws
    val = _gammas(ws, [b.b + 1, 1 - b.a], [1 + b.b - b.a])
    for i in range(len(b.c)):
        val *= ws.qpoch(b.c[i] - b.b, b.m[i]) / ws.qpoch(b.c[i], b.m[i])
    return val, SumDiagnostics.exact()


def _km_atoms(b):
    at = [("gamma", 1 + b.b - b.a), ("creal", b.b + 1)]
    for ci in b.c:
        at += [("creal", ci)]
    if len(b.c) > 1:
        at.append(("sep", list(b.c)))
    return at


def _km_degenerations(rng, cfg):
    out = []
    for _ in range(cfg.max_attempts):
        ps = _ipd_sampler("cl_km", with_d=False)(rng, cfg)
        ps.ivecs["m"] = [0] * ps.dims["r"]
        if smp.admissible(ps, cfg):
            out.append(ps)
            break
    return out


register(
    IdentityDescriptor(
        id="cl_km",
        anchor="integer-shifted series at unit argument with closed "
               "gamma-quotient value",
        mode="classical",
        route="orthant",
        schema={"dims": ["r"], "vectors": {"c": "r"}, "ivecs": {"m": "r"},
                "scalars": ["a", "b"]},
        constraints=(
            Constraint("parameter_region", "Re(a + |m|) < 1",
                       lambda b: float((b.a + b.isum("m")).real) < 1.0),
            _nonvan(_km_atoms),
        ),
        lhs=_km_lhs,
        rhs=_km_rhs,
        sampler=_ipd_sampler("cl_km", with_d=False),
        atoms=_km_atoms,
        degenerations=_km_degenerations,
    )
)


def _kmg_rhs(b, policy):
    ws = b.ws
    c, m = b.c, b.m
    r = len(c)
    mm = sum(m)
    a, bb, d = b.a, b.b, b.d

    val = _gammas(ws, [d, d - a - bb], [d - a, d - bb])
    for i in range(r):
        val *= ws.qpoch(c[i] + 1 - d, m[i]) / ws.qpoch(c[i], m[i])
    val *= ws.qpoch(a, mm) / ws.qpoch(1 + a + bb - d, mm)

    nonzero = 0

    def bterm(x):
        fr = Frac(ws).vandermonde(c, x)
        xx = sum(x)
        fr.ratio(bb + 1 - d, mpc(1 - mm) - a, xx)
        for i in range(r):
            fr.ratio(c[i] - a, 1 + c[i] - d, x[i])
            for k in range(r):
                fr.ratio(c[i] - c[k] - m[k], 1 + c[i] - c[k], x[i])
        v = fr.value()
        nonlocal nonzero
        if v != 0:
            nonzero += 1
        return v

    val *= sum_box(bterm, tuple(m))
    return val, SumDiagnostics.exact(max(nonzero, 1))


def _kmg_atoms(b):
    # (1 - |m| - a)_{|x|} is a positive-integer base under the terminating
    # pin a = -M with M >= |m|, so it needs no clearance scan
    at = [("gamma", b.d - b.a), ("gamma", b.d - b.b), ("creal", b.d)]
    bal = 1 + b.a + b.b - b.d
    if abs(bal - b.a) > 1e-25:
        # under the collapsed node sum d = b + 1 this base is exactly the
        # terminating pin a = -M, a structural integer with no pole in
        # reach; only scan it when d is free
        at.append(("creal", bal))
    for ci in b.c:
        at += [("creal", ci), ("creal", 1 + ci - b.d)]
    if len(b.c) > 1:
        at.append(("sep", list(b.c)))
    return at


def _kmg_constraints():
    return (
        Constraint("parameter_region", "sum of shifts bounded by the "
                   "terminating offset (|m| <= -Re a)",
                   lambda b: b.isum("m") <= -float(b.a.real) + 0.5),
        _nonvan(_kmg_atoms),
    )


def _kmg_degenerations(rng, cfg):
    # d = b + 1 collapses the node sum to its single surviving term
    out = []
    for _ in range(cfg.max_attempts):
        ps = _ipd_sampler("cl_kmg", with_d=True)(rng, cfg)
        ps.scalars["d"] = DERIVED
        if smp.admissible(ps, cfg):
            out.append(ps)
            break
    return out


register(
    IdentityDescriptor(
        id="cl_kmg",
        anchor="shifted series at unit argument reduced to a node sum over "
               "the shift box",
        mode="classical",
        route="orthant",
        schema={"dims": ["r"], "vectors": {"c": "r"}, "ivecs": {"m": "r"},
                "scalars": ["a", "b", "d"]},
        constraints=_kmg_constraints(),
        lhs=lambda b, policy: sum_orthant(_ipd_term(b), 1, policy),
        rhs=_kmg_rhs,
        sampler=_ipd_sampler("cl_kmg", with_d=True),
        dependents={"d": lambda b: b.b + 1},
        atoms=_kmg_atoms,
        degenerations=_kmg_degenerations,
        lhs_term=_ipd_term,
    )
)


def _us_rhs(b, policy):
    ws = b.ws
    c, m = b.c, b.m
    r = len(c)
    a, bb, d = b.a, b.b, b.d

    val = _gammas(ws, [d, d - a - bb], [d - a, d - bb])

    def bterm(x):
        fr = Frac(ws)
        xx = sum(x)
        fr.poch(a, xx).poch(bb, xx)
        fr.poch(1 + a + bb - d, xx, inv=True).poch(c[r - 1], xx, inv=True)
        for i in range(r):
            fr.poch(mpc(-m[i]), x[i])
            fr.poch(ONE, x[i], inv=True)
        part = 0
        for i in range(r - 1):
            part += x[i]
            fr.ratio(c[i + 1] + m[i + 1], c[i], part)
        return fr.value()

    val *= sum_box(bterm, tuple(m))
    return val, SumDiagnostics.exact(_box_size(m))


def _us_atoms(b):
    at = [("gamma", b.d - b.a), ("gamma", b.d - b.b), ("creal", b.d),
          ("creal", 1 + b.a + b.b - b.d)]
    for ci in b.c:
        at.append(("creal", ci))
    if len(b.c) > 1:
        at.append(("sep", list(b.c)))
    return at


register(
    IdentityDescriptor(
        id="cl_us",
        anchor="alternative staircase node sum for the shifted series at "
               "unit argument",
        mode="classical",
        route="orthant",
        schema={"dims": ["r"], "vectors": {"c": "r"}, "ivecs": {"m": "r"},
                "scalars": ["a", "b", "d"]},
        constraints=(
            Constraint("parameter_region", "sum of shifts bounded by the "
                       "terminating offset (|m| <= -Re a)",
                       lambda b: b.isum("m") <= -float(b.a.real) + 0.5),
            _nonvan(_us_atoms),
        ),
        lhs=lambda b, policy: sum_orthant(_ipd_term(b), 1, policy),
        rhs=_us_rhs,
        sampler=_ipd_sampler("cl_us", with_d=True),
        atoms=_us_atoms,
        lhs_term=_ipd_term,
    )
)


def _bi_rhs(b, policy):
    ws = b.ws
    c, m = b.c, b.m
    r = len(c)
    mm = sum(m)
    a, bb, d = b.a, b.b, b.d

    val = (-1) ** mm * _gammas(ws, [d, d - a - bb - mm], [d - a, d - bb])
    for i in range(r):
        val *= ws.qpoch(1 + c[i] - d, m[i])

    def bterm(x):
        fr = Frac(ws).vandermonde(c, x)
        for i in range(r):
            fr.poch(c[i] - a, x[i]).poch(c[i] - bb, x[i])
            fr.poch(c[i], x[i], inv=True)
            fr.poch(1 + c[i] - d, x[i], inv=True)
            for k in range(r):
                fr.ratio(c[i] - c[k] - m[k], 1 + c[i] - c[k], x[i])
        return fr.value()

    val *= sum_box(bterm, tuple(m))
    return val, SumDiagnostics.exact(_box_size(m))


def _bi_atoms(b):
    at = [("gamma", b.d - b.a), ("gamma", b.d - b.b), ("creal", b.d)]
    for ci in b.c:
        at += [("creal", ci), ("creal", 1 + ci - b.d)]
    if len(b.c) > 1:
        at.append(("sep", list(b.c)))
    return at


register(
    IdentityDescriptor(
        id="cl_bi",
        anchor="shifted series at unit argument as a signed gamma quotient "
               "times a node sum",
        mode="classical",
        route="orthant",
        schema={"dims": ["r"], "vectors": {"c": "r"}, "ivecs": {"m": "r"},
                "scalars": ["a", "b", "d"]},
        constraints=(
            Constraint("parameter_region", "sum of shifts bounded by the "
                       "terminating offset (|m| <= -Re a)",
                       lambda b: b.isum("m") <= -float(b.a.real) + 0.5),
            _nonvan(_bi_atoms),
        ),
        lhs=lambda b, policy: sum_orthant(_ipd_term(b), 1, policy),
        rhs=_bi_rhs,
        sampler=_ipd_sampler("cl_bi", with_d=True),
        atoms=_bi_atoms,
        lhs_term=_ipd_term,
    )
)


# ---------------------------------------------------------------------------
# multilateral gamma-quotient family
# ---------------------------------------------------------------------------


def _cl_hyper_term(b):
    """Coordinate-product summand: Vandermonde ratio times
    prod (c_i + z_k + m_i)_{y_k}/(c_i + z_k)_{y_k} times
    prod (a_i + z_k)_{y_k}/(b_i + z_k)_{y_k}."""
    ws = b.ws
    z, a, bb = b.z, b.a, b.b
    c = b.get("c") or []
    m = b.get("m") or []

    def term(y):
        fr = Frac(ws).vandermonde(z, y)
        for k in range(len(z)):
            zk, yk = z[k], y[k]
            for i in range(len(c)):
                fr.ratio(c[i] + zk + m[i], c[i] + zk, yk)
            for i in range(len(a)):
                fr.ratio(a[i] + zk, bb[i] + zk, yk)
        return fr.value()

    return term


def _asum(vals) -> mpc:
    out = mpc(0)
    for v in vals:
        out += v
    return out


def _5h5_rhs(b, policy):
    ws, n = b.ws, b.n
    z, a, bb = b.z, b.a, b.b
    sa, sb, sz = _asum(a), _asum(bb), _asum(z)
    num = [1 + sb - sa - n]
    den = [1 - sa - sz, 1 + sb + sz - n]
    for i in range(n):
        for k in range(n):
            num += [1 - a[k] - z[i], bb[i] + z[k]]
            den += [bb[i] - a[k], 1 + z[k] - z[i]]
    return _gammas(ws, num, den), SumDiagnostics.exact()


def _cl_hyper_atoms(b):
    z, a, bb = b.z, b.a, b.b
    n = len(z)
    pinned = b.get("J")
    at = [("sep", list(z))]
    for i in range(n):
        for k in range(n):
            if i != k:
                at.append(("gamma", 1 + z[k] - z[i]))
    for i in range(len(bb)):
        for k in range(len(a)):
            at.append(("gamma", bb[i] - a[k]))
        for k in range(n):
            if pinned is not None and i < len(pinned) and i == k:
                # diagonal pin b_i = J_i - z_i: the exact-integer zeros it
                # creates are the intended lower termination of the lattice
                continue
            at.append(("creal", bb[i] + z[k]))
    for i in range(len(b.get("c") or [])):
        for k in range(n):
            at.append(("creal", b.c[i] + z[k]))
    return at


def _cl_hyper_sampler(identity_id, with_c, extra):
    """extra = number of undetermined trailing a/b entries (0 or 1)."""

    def s(rng, cfg):
        n = rng.randint(*cfg.n_range)
        dims = {"n": n}
        ivecs = {"M": [rng.randint(1, 3) for _ in range(n)]}
        vectors = {}
        if with_c:
            p = rng.randint(*cfg.p_range)
            dims["p"] = p
            m = [rng.randint(0, cfg.m_max) for _ in range(p)]
            ivecs["m"] = m
            vectors["c"] = _cvec(rng, cfg, p)
            # keep the terminating offsets at least as large as the shifts
            while sum(ivecs["M"]) < sum(m):
                ivecs["M"][rng.randrange(n)] += 1
        vectors["z"] = _cvec(rng, cfg, n)
        vectors["a"] = [DERIVED] * n + (
            [smp.draw_complex(rng, cfg)] if extra else [])
        if extra:
            ivecs["J"] = [rng.randint(1, 3) for _ in range(n)]
            vectors["b"] = [DERIVED] * n + [smp.draw_complex(rng, cfg)]
        else:
            vectors["b"] = _cvec(rng, cfg, n)
        return ParamSet(
            identity_id, "classical",
            dims=dims, ivecs=ivecs, scalars={}, vectors=vectors,
        )

    return s


_PIN_A = {f"a[{i}]": _neg_int_rule("M", i) for i in range(4)}
_PIN_B = {f"b[{i}]": _pos_int_rule("J", i) for i in range(4)}


register(
    IdentityDescriptor(
        id="cl_5h5",
        anchor="zero-total-degree multilateral sum with closed gamma "
               "quotient",
        mode="classical",
        route="hyperplane_bilateral",
        schema={"dims": ["n"], "vectors": {"a": "n", "b": "n", "z": "n"},
                "ivecs": {"M": "n"}, "scalars": []},
        constraints=(_nonvan(_cl_hyper_atoms),),
        lhs=lambda b, policy: sum_hyperplane_bilateral(
            _cl_hyper_term(b), b.n, 0, policy),
        rhs=_5h5_rhs,
        sampler=_cl_hyper_sampler("cl_5h5", with_c=False, extra=0),
        dependents=_PIN_A,
        atoms=_cl_hyper_atoms,
        lhs_term=_cl_hyper_term,
    )
)


def _2h2_rhs(b, policy):
    ws, n = b.ws, b.n
    z, a, bb = b.z, b.a, b.b
    sa, sb = _asum(a), _asum(bb)
    num = [sb - sa - n]
    den = []
    for i in range(n + 1):
        for k in range(n + 1):
            den.append(bb[i] - a[k])
    for i in range(n):
        for k in range(n):
            den.append(1 + z[k] - z[i])
    for k in range(n):
        for i in range(n + 1):
            num += [1 - a[i] - z[k], bb[i] + z[k]]
    return _gammas(ws, num, den), SumDiagnostics.exact()


register(
    IdentityDescriptor(
        id="cl_2h2",
        anchor="full-lattice multilateral sum with closed gamma quotient",
        mode="classical",
        route="lattice_bilateral",
        schema={"dims": ["n"],
                "vectors": {"a": "n+1", "b": "n+1", "z": "n"},
                "ivecs": {"M": "n", "J": "n"}, "scalars": []},
        constraints=(_nonvan(_cl_hyper_atoms),),
        lhs=lambda b, policy: sum_lattice_bilateral(
            _cl_hyper_term(b), b.n, policy),
        rhs=_2h2_rhs,
        sampler=_cl_hyper_sampler("cl_2h2", with_c=False, extra=1),
        dependents=dict(_PIN_A, **_PIN_B),
        atoms=_cl_hyper_atoms,
        lhs_term=_cl_hyper_term,
    )
)


def _thm_a_rhs(b, policy):
    ws, n = b.ws, b.n
    z, a, bb = b.z, b.a, b.b
    c, m = b.c, b.m
    p = len(c)
    mm = sum(m)
    sa, sb, sz = _asum(a), _asum(bb), _asum(z)

    num = [1 + sb - sa - mm - n]
    den = [1 - sa - sz - mm, 1 + sb + sz - n]
    for i in range(n):
        for k in range(n):
            num += [1 - a[k] - z[i], bb[i] + z[k]]
            den += [bb[i] - a[k], 1 + z[k] - z[i]]
    val = _gammas(ws, num, den)
    for k in range(n):
        for i in range(p):
            val *= ws.qpoch(1 + c[i] - bb[k], m[i])
            val /= ws.qpoch(c[i] + z[k], m[i])

    hn = mpc(n) - sb - sz
    hd = mpc(1 - mm) - sa - sz

    def bterm(x):
        fr = Frac(ws).vandermonde(c, x)
        fr.ratio(hn, hd, sum(x))
        for i in range(p):
            for k in range(n):
                fr.ratio(c[i] - a[k], 1 + c[i] - bb[k], x[i])
            for k in range(p):
                fr.ratio(c[i] - c[k] - m[k], 1 + c[i] - c[k], x[i])
        return fr.value()

    val *= sum_box(bterm, tuple(m))
    return val, SumDiagnostics.exact(_box_size(m))


register(
    IdentityDescriptor(
        id="cl_thm_a",
        anchor="zero-total-degree multilateral sum with coordinate shifts, "
               "reduced to a node sum",
        mode="classical",
        route="hyperplane_bilateral",
        schema={"dims": ["n", "p"],
                "vectors": {"a": "n", "b": "n", "z": "n", "c": "p"},
                "ivecs": {"M": "n", "m": "p"}, "scalars": []},
        constraints=(_nonvan(_cl_hyper_atoms),),
        lhs=lambda b, policy: sum_hyperplane_bilateral(
            _cl_hyper_term(b), b.n, 0, policy),
        rhs=_thm_a_rhs,
        sampler=_cl_hyper_sampler("cl_thm_a", with_c=True, extra=0),
        dependents=_PIN_A,
        atoms=_cl_hyper_atoms,
        lhs_term=_cl_hyper_term,
    )
)


def _thm_b_rhs(b, policy):
    ws, n = b.ws, b.n
    z, a, bb = b.z, b.a, b.b
    c, m = b.c, b.m
    p = len(c)
    mm = sum(m)
    sa, sb = _asum(a), _asum(bb)

    num = [sb - sa - mm - n]
    den = []
    for i in range(n + 1):
        for k in range(n + 1):
            den.append(bb[i] - a[k])
    for i in range(n):
        for k in range(n):
            den.append(1 + z[k] - z[i])
    for k in range(n):
        for i in range(n + 1):
            num += [1 - a[i] - z[k], bb[i] + z[k]]
    val = (-1) ** mm * _gammas(ws, num, den)
    for i in range(p):
        for k in range(n + 1):
            val *= ws.qpoch(1 + c[i] - bb[k], m[i])
        for k in range(n):
            val /= ws.qpoch(c[i] + z[k], m[i])

    def bterm(x):
        fr = Frac(ws).vandermonde(c, x)
        for i in range(p):
            for k in range(n + 1):
                fr.ratio(c[i] - a[k], 1 + c[i] - bb[k], x[i])
            for k in range(p):
                fr.ratio(c[i] - c[k] - m[k], 1 + c[i] - c[k], x[i])
        return fr.value()

    val *= sum_box(bterm, tuple(m))
    return val, SumDiagnostics.exact(_box_size(m))


register(
    IdentityDescriptor(
        id="cl_thm_b",
        anchor="full-lattice multilateral sum with coordinate shifts, "
               "reduced to a node sum",
        mode="classical",
        route="lattice_bilateral",
        schema={"dims": ["n", "p"],
                "vectors": {"a": "n+1", "b": "n+1", "z": "n", "c": "p"},
                "ivecs": {"M": "n", "J": "n", "m": "p"}, "scalars": []},
        constraints=(_nonvan(_cl_hyper_atoms),),
        lhs=lambda b, policy: sum_lattice_bilateral(
            _cl_hyper_term(b), b.n, policy),
        rhs=_thm_b_rhs,
        sampler=_cl_hyper_sampler("cl_thm_b", with_c=True, extra=1),
        dependents=dict(_PIN_A, **_PIN_B),
        atoms=_cl_hyper_atoms,
        lhs_term=_cl_hyper_term,
    )
)


def _3h3_term(b):
    ws = b.ws
    c, m = b.c, b.m

    def term(yv):
        y = yv[0]
        fr = Frac(ws)
        fr.poch(b.a, y).poch(b.b, y)
        fr.poch(b.d, y, inv=True).poch(b.e, y, inv=True)
        for i in range(len(c)):
            fr.ratio(c[i] + m[i], c[i], y)
        return fr.value()

    return term


def _3h3_rhs(b, policy):
    ws = b.ws
    c, m = b.c, b.m
    p = len(c)
    mm = sum(m)
    a, bb, d, e = b.a, b.b, b.d, b.e

    val = mpc((-1) ** mm)
    for i in range(p):
        val *= ws.qpoch(1 + c[i] - d, m[i]) * ws.qpoch(1 + c[i] - e, m[i])
        val /= ws.qpoch(c[i], m[i])
    val *= _gammas(ws, [d + e - a - bb - mm - 1, 1 - a, 1 - bb, d, e],
                   [d - a, d - bb, e - a, e - bb])

    def bterm(x):
        fr = Frac(ws).vandermonde(c, x)
        for i in range(p):
            fr.poch(c[i] - a, x[i]).poch(c[i] - bb, x[i])
            fr.poch(1 + c[i] - d, x[i], inv=True)
            fr.poch(1 + c[i] - e, x[i], inv=True)
            for k in range(p):
                fr.ratio(c[i] - c[k] - m[k], 1 + c[i] - c[k], x[i])
        return fr.value()

    val *= sum_box(bterm, tuple(m))
    return val, SumDiagnostics.exact(_box_size(m))


def _3h3_atoms(b):
    at = [("gamma", b.d - b.a), ("gamma", b.d - b.b),
          ("gamma", b.e - b.a), ("gamma", b.e - b.b),
          ("gamma", 1 - b.b), ("creal", b.e)]
    for ci in b.c:
        at += [("creal", ci), ("creal", 1 + ci - b.d),
               ("creal", 1 + ci - b.e)]
    if len(b.c) > 1:
        at.append(("sep", list(b.c)))
    return at


def _3h3_sampler(rng, cfg):
    p = rng.randint(*cfg.p_range)
    m = [rng.randint(0, cfg.m_max) for _ in range(p)]
    M = rng.randint(max(1, sum(m)), max(3, sum(m)))
    J = rng.randint(1, 3)
    return ParamSet(
        "cl_3h3", "classical",
        dims={"p": p},
        ivecs={"m": m},
        scalars={"a": (str(-M), "0"), "b": smp.draw_complex(rng, cfg),
                 "d": (str(J), "0"), "e": smp.draw_complex(rng, cfg)},
        vectors={"c": _cvec(rng, cfg, p)},
    )


register(
    IdentityDescriptor(
        id="cl_3h3",
        anchor="one-variable bilateral shifted series reduced to a node sum",
        mode="classical",
        route="lattice_bilateral",
        schema={"dims": ["p"], "vectors": {"c": "p"}, "ivecs": {"m": "p"},
                "scalars": ["a", "b", "d", "e"]},
        constraints=(_nonvan(_3h3_atoms),),
        lhs=lambda b, policy: sum_lattice_bilateral(_3h3_term(b), 1, policy),
        rhs=_3h3_rhs,
        sampler=_3h3_sampler,
        atoms=_3h3_atoms,
        lhs_term=_3h3_term,
    )
)
