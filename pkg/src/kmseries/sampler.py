"""Deterministic, seeded generation of admissible parameter sets.

Free complex parameters are drawn as modulus x phase (phases keep clear of
the real axis to reduce accidental near-poles); classical-mode parameters
are drawn real.  Exact balancing constraints are never rejection-sampled:
each identity designates dependent parameters that are solved at bind
time, at full precision, from auxiliary draws stored in the ParamSet.
Every emitted set passes the identity's constraints, a margin check on all
convergence moduli, and a pole scan of the shifted-factorial denominators
over the planned truncation window.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpc

from .errors import ExhaustedAttempts, NoDegenerations
from .params import Bound, ParamSet


@dataclass(frozen=True)
class SampleConfig:
    seed: int = 20260826
    q_modulus_range: tuple[float, float] = (0.2, 0.7)
    magnitude_band: tuple[float, float] = (0.3, 2.0)
    margin: float = 0.5
    pole_clearance: float = 1e-2
    # achieved convergence modulus is solved to lie in this band (its upper
    # end must stay below margin * bound so margin honesty holds by
    # construction; small values buy geometric tail decay within the radius)
    decay_band: tuple[float, float] = (0.02, 0.12)
    n_range: tuple[int, int] = (1, 3)
    p_range: tuple[int, int] = (1, 2)
    r_range: tuple[int, int] = (1, 2)
    m_max: int = 2
    N_range: tuple[int, int] = (0, 2)
    check_bits: int = 160
    scan_window: int = 28
    max_attempts: int = 400


# ---------------------------------------------------------------------------
# draw helpers (used by the per-identity recipes in the registry)
# ---------------------------------------------------------------------------


def dec(x: float) -> str:
    """Canonical 12-significant-digit decimal form of a draw."""
    return f"{x:.12g}"


def draw_real(rng: random.Random, lo: float, hi: float) -> tuple[str, str]:
    return (dec(rng.uniform(lo, hi)), "0")


def draw_pos(rng: random.Random, cfg: SampleConfig) -> tuple[str, str]:
    return draw_real(rng, *cfg.magnitude_band)


def draw_complex(
    rng: random.Random, cfg: SampleConfig, band: tuple[float, float] | None = None
) -> tuple[str, str]:
    lo, hi = band or cfg.magnitude_band
    r = math.exp(rng.uniform(math.log(lo), math.log(hi)))
    theta = rng.uniform(0.15, math.pi - 0.15) * rng.choice((1, -1))
    return (dec(r * math.cos(theta)), dec(r * math.sin(theta)))


def draw_q(rng: random.Random, cfg: SampleConfig) -> tuple[str, str]:
    r = rng.uniform(*cfg.q_modulus_range)
    theta = rng.uniform(0.1, 0.6) * rng.choice((1, -1))
    return (dec(r * math.cos(theta)), dec(r * math.sin(theta)))


def draw_target(
    rng: random.Random, cfg: SampleConfig, band: tuple[float, float] | None = None
) -> tuple[str, str]:
    """A convergence-modulus target: small modulus, free phase."""
    lo, hi = band or cfg.decay_band
    r = math.exp(rng.uniform(math.log(lo), math.log(hi)))
    theta = rng.uniform(-math.pi, math.pi)
    return (dec(r * math.cos(theta)), dec(r * math.sin(theta)))


def rng_for(seed: int, identity_id: str, index: int) -> random.Random:
    return random.Random(f"{seed}:{identity_id}:{index}")


# ---------------------------------------------------------------------------
# admissibility checks
# ---------------------------------------------------------------------------


def _scan_atoms(bound: Bound, atoms, clearance: float, window: int) -> bool:
    """True when every denominator atom keeps its distance from zero."""
    q = bound.ws.q
    for kind, val in atoms:
        if kind == "q":
            f = val * q ** (-window)
            for _ in range(2 * window + 1):
                if abs(1 - f) < clearance:
                    return False
                f *= q
        elif kind == "qinf":
            f = mpc(val)
            for _ in range(2 * window + 1):
                if abs(1 - f) < clearance:
                    return False
                f *= q
        elif kind == "creal":
            # classical factor (val + j) over the scan window
            re = float(val.real)
            j = round(-re)
            if -window - 1 <= j <= window + 1 and abs(val + j) < clearance:
                return False
        elif kind == "gamma":
            # gamma argument must avoid non-positive integers
            re = float(val.real)
            j = round(re)
            if j <= 0 and abs(val - j) < clearance:
                return False
        elif kind == "nz":
            if abs(val) < clearance:
                return False
        elif kind == "sep":
            vals = val
            for i in range(len(vals)):
                for j in range(i + 1, len(vals)):
                    if abs(vals[i] - vals[j]) < clearance:
                        return False
        else:
            raise ValueError(f"unknown atom kind {kind}")
    return True


def admissible(ps: ParamSet, cfg: SampleConfig) -> bool:
    """Constraints, margin honesty and pole scan for one candidate."""
    from . import registry

    desc = registry.get(ps.identity)
    registry.validate_schema(ps)
    b = Bound(ps, cfg.check_bits)
    for c in desc.constraints:
        if not c.check(b):
            return False
        if c.kind == "modulus_lt_1" and c.achieved is not None:
            if c.achieved(b) > cfg.margin * (c.threshold or 1.0):
                return False
    if desc.atoms is not None:
        if not _scan_atoms(b, desc.atoms(b), cfg.pole_clearance, cfg.scan_window):
            return False
    return True


def sample(identity_id: str, cfg: SampleConfig, count: int) -> list[ParamSet]:
    """``count`` admissible ParamSets, deterministic for (seed, id, cfg)."""
    from . import registry

    desc = registry.get(identity_id)
    out = []
    for idx in range(count):
        rng = rng_for(cfg.seed, identity_id, idx)
        for _ in range(cfg.max_attempts):
            ps = desc.sampler(rng, cfg)
            if admissible(ps, cfg):
                out.append(ps)
                break
        else:
            raise ExhaustedAttempts(
                f"{identity_id}: no admissible set in {cfg.max_attempts} attempts"
            )
    return out


def degenerate_suite(identity_id: str, cfg: SampleConfig | None = None) -> list[ParamSet]:
    """Hand-constructed edge parameter sets for documented degenerations."""
    from . import registry

    cfg = cfg or SampleConfig()
    desc = registry.get(identity_id)
    if desc.degenerations is None:
        raise NoDegenerations(identity_id)
    rng = rng_for(cfg.seed, identity_id + ":degenerate", 0)
    return desc.degenerations(rng, cfg)
