"""Check reports, suite orchestration and convergence sweeps.

A :class:`CheckReport` records one lhs/rhs comparison with every numeric
field serialized as a decimal string, so reports are byte-stable across
runs and machines.  :func:`run_suite` evaluates a batch of identities,
optionally across worker processes, and always emits reports in a fixed
(identity, sample-index) order regardless of completion order.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import json
import time
from typing import Any, Optional, Sequence

from gmpy2 import mpc

from . import registry, sampler
from .errors import KmseriesError
from .lattice import SumDiagnostics, TruncationPolicy
from .params import ParamSet
from .precision import DEFAULT_BITS

SCHEMA_VERSION = "1"

_SMALL = 1e-60  # below this on both sides, compare absolutely


def stop_tol(tol: float) -> float:
    """Per-term stopping tolerance for a target comparison tolerance.

    Shell maxima have to sit two decades under the comparison tolerance
    before truncation stops, so the remainder (a few shells' worth of
    terms) cannot eat the whole error budget.
    """
    return tol * 1e-2


def format_value(v: mpc, bits: int) -> list[str]:
    """A complex value as a [re, im] pair of decimal strings.

    ``str`` on a gmpy2 real prints enough digits to round-trip at the
    value's own precision, which is what we want for byte-stable reports.
    """
    return [str(v.real), str(v.imag)]


def _diag_json(d: SumDiagnostics) -> dict:
    return {
        "terms_evaluated": d.terms_evaluated,
        "largest_shell_tail": f"{d.largest_shell_tail:.6e}",
        "converged": d.converged,
        "pole_hits": d.pole_hits,
    }


@dataclasses.dataclass
class CheckReport:
    """Outcome of one lhs/rhs comparison."""

    identity: str
    params: dict  # ParamSet.to_json()
    lhs: Optional[list]  # [re, im] decimal strings, None on failure
    rhs: Optional[list]
    rel_error: Optional[str]  # decimal string, None on failure
    tolerance: str
    passed: bool
    lhs_diag: Optional[dict]
    rhs_diag: Optional[dict]
    wall_time_ms: str
    precision_bits: int
    seed: int
    sample_index: int = 0
    error: Optional[str] = None

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "CheckReport":
        return cls(**d)


def relative_error(lhs: mpc, rhs: mpc) -> float:
    """|lhs - rhs| scaled by the larger magnitude (absolute near zero)."""
    num = abs(lhs - rhs)
    den = max(abs(lhs), abs(rhs))
    if den < _SMALL:
        return float(num)
    return float(num / den)


def check(
    ps: ParamSet,
    policy: Optional[TruncationPolicy] = None,
    tol: float = 1e-18,
    bits: int = DEFAULT_BITS,
    seed: int = 0,
    sample_index: int = 0,
) -> CheckReport:
    """Evaluate both sides of ``ps.identity`` and compare.

    Evaluator errors (constraint violations, poles, divergence, budget)
    are surfaced as failed reports carrying the cause; this function
    never raises for a bad parameter set.
    """
    if policy is None:
        policy = TruncationPolicy(term_tol=stop_tol(tol))
    t0 = time.perf_counter()
    try:
        lhs, ld = registry.lhs_eval(ps.identity, ps, policy, bits)
        rhs, rd = registry.rhs_eval(ps.identity, ps, policy, bits)
    except KmseriesError as exc:
        ms = (time.perf_counter() - t0) * 1e3
        return CheckReport(
            identity=ps.identity, params=ps.to_json(),
            lhs=None, rhs=None, rel_error=None,
            tolerance=f"{tol:.3e}", passed=False,
            lhs_diag=None, rhs_diag=None,
            wall_time_ms=f"{ms:.1f}", precision_bits=bits,
            seed=seed, sample_index=sample_index,
            error=f"{type(exc).__name__}: {exc}",
        )
    ms = (time.perf_counter() - t0) * 1e3
    rel = relative_error(lhs, rhs)
    passed = rel <= tol and ld.converged and rd.converged
    return CheckReport(
        identity=ps.identity, params=ps.to_json(),
        lhs=format_value(lhs, bits), rhs=format_value(rhs, bits),
        rel_error=f"{rel:.6e}", tolerance=f"{tol:.3e}",
        passed=passed, lhs_diag=_diag_json(ld), rhs_diag=_diag_json(rd),
        wall_time_ms=f"{ms:.1f}", precision_bits=bits,
        seed=seed, sample_index=sample_index,
    )


# ---------------------------------------------------------------------------
# suite orchestration


@dataclasses.dataclass
class SuiteConfig:
    """What to run and how."""

    identities: Any = "all"  # "all" or a list of ids
    samples: int = 5
    tolerance: float = 1e-18
    precision_bits: int = DEFAULT_BITS
    radius: int = 24
    seed: int = 20260826
    workers: int = 0  # 0 = serial
    out: Optional[str] = None
    sample_config: Optional[sampler.SampleConfig] = None

    def __post_init__(self):
        floor = 2.0 ** (8 - self.precision_bits)
        if self.tolerance < floor:
            raise ValueError(
                f"tolerance {self.tolerance:g} below the resolvable floor "
                f"2^(8-{self.precision_bits}) = {floor:g}"
            )

    def resolved_ids(self) -> list[str]:
        if self.identities == "all":
            return [d.id for d in registry.list_identities()]
        return list(self.identities)

    def resolved_sample_config(self) -> sampler.SampleConfig:
        if self.sample_config is not None:
            return self.sample_config
        return sampler.SampleConfig(seed=self.seed)

    def policy(self) -> TruncationPolicy:
        return TruncationPolicy(radius=self.radius,
                                term_tol=stop_tol(self.tolerance))


def _run_job(args: tuple) -> dict:
    ps_doc, tol, bits, radius, seed, index = args
    ps = ParamSet.from_json(ps_doc)
    policy = TruncationPolicy(radius=radius, term_tol=stop_tol(tol))
    return check(ps, policy, tol, bits, seed, index).to_json()


def run_suite(cfg: SuiteConfig) -> dict:
    """Run the configured checks; one JSON-ready document per suite.

    Reports appear in (identity, sample-index) order whatever the
    completion order; the summary carries per-identity pass counts, the
    worst relative error seen, and total runtime.
    """
    scfg = cfg.resolved_sample_config()
    t0 = time.perf_counter()
    jobs: list[tuple] = []
    reports: list[dict] = []
    for ident in cfg.resolved_ids():
        try:
            sets = sampler.sample(ident, scfg, cfg.samples)
        except KmseriesError as exc:
            for i in range(cfg.samples):
                reports.append(CheckReport(
                    identity=ident, params={}, lhs=None, rhs=None,
                    rel_error=None, tolerance=f"{cfg.tolerance:.3e}",
                    passed=False, lhs_diag=None, rhs_diag=None,
                    wall_time_ms="0.0", precision_bits=cfg.precision_bits,
                    seed=cfg.seed, sample_index=i,
                    error=f"{type(exc).__name__}: {exc}",
                ).to_json())
            continue
        for i, ps in enumerate(sets):
            jobs.append((ps.to_json(), cfg.tolerance, cfg.precision_bits,
                         cfg.radius, cfg.seed, i))

    if cfg.workers > 1 and jobs:
        with concurrent.futures.ProcessPoolExecutor(cfg.workers) as pool:
            done = list(pool.map(_run_job, jobs))
    else:
        done = [_run_job(j) for j in jobs]
    reports.extend(done)
    reports.sort(key=lambda r: (r["identity"], r["sample_index"]))

    summary: dict[str, dict] = {}
    for r in reports:
        s = summary.setdefault(r["identity"], {
            "passed": 0, "failed": 0, "worst_rel_error": "0.000000e+00"})
        s["passed" if r["passed"] else "failed"] += 1
        if r["rel_error"] is not None and \
                float(r["rel_error"]) > float(s["worst_rel_error"]):
            s["worst_rel_error"] = r["rel_error"]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": {
            "identities": cfg.resolved_ids(),
            "samples": cfg.samples,
            "tolerance": f"{cfg.tolerance:.3e}",
            "precision_bits": cfg.precision_bits,
            "radius": cfg.radius,
            "seed": cfg.seed,
        },
        "summary": dict(sorted(summary.items())),
        "reports": reports,
        "total_runtime_ms": f"{(time.perf_counter() - t0) * 1e3:.1f}",
        "all_passed": all(r["passed"] for r in reports),
    }
    return doc


def dump_report(doc: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def serialize_report(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_report(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# convergence sweeps


def radius_sweep(
    ps: ParamSet,
    radii: Sequence[int],
    tol: float = 1e-18,
    bits: int = DEFAULT_BITS,
) -> list[dict]:
    """Evaluate the series side at increasing truncation radii.

    Each row records the truncation radius, the partial value, the gap to
    the closed-form side, and the largest summand magnitude on the
    outermost evaluated shell.
    """
    policy0 = TruncationPolicy(radius=max(radii), term_tol=tol)
    rhs, _ = registry.rhs_eval(ps.identity, ps, policy0, bits)
    rows = []
    for radius in radii:
        policy = TruncationPolicy(radius=radius, term_tol=1e-300)
        lhs, diag = registry.lhs_eval(ps.identity, ps, policy, bits)
        rows.append({
            "radius": radius,
            "lhs": format_value(lhs, bits),
            "abs_gap": f"{float(abs(lhs - rhs)):.6e}",
            "outer_shell_max": f"{diag.largest_shell_tail:.6e}",
            "terms_evaluated": diag.terms_evaluated,
        })
    return rows
