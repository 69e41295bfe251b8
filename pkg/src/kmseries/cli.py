"""Command-line front end.

Verbs:

* ``list``          -- show every registered identity
* ``check``         -- sample one parameter set for an identity and verify it
* ``suite``         -- run a batch of identities and emit a JSON report
* ``sweep``         -- tabulate series convergence against the closed form
* ``degenerations`` -- verify an identity's documented special cases
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

import tomli

from . import registry, reports, sampler
from .errors import KmseriesError, NoDegenerations
from .lattice import TruncationPolicy
from .params import ParamSet
from .precision import DEFAULT_BITS


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=20260826)
    p.add_argument("--prec-bits", type=int, default=DEFAULT_BITS)
    p.add_argument("--tol", type=float, default=1e-18)
    p.add_argument("--radius", type=int, default=24)
    p.add_argument("--out", type=str, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="kmseries",
        description="Multiprecision verification of multidimensional "
                    "hypergeometric reduction identities.",
    )
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("list", help="show registered identities")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("check", help="verify one sampled parameter set")
    p.add_argument("--id", required=True)
    p.add_argument("--params", type=str, default=None,
                   help="JSON file with an explicit parameter set")
    p.add_argument("--index", type=int, default=0,
                   help="which sample of the deterministic stream to draw")
    _add_common(p)

    p = sub.add_parser("suite", help="run a batch and write a JSON report")
    p.add_argument("--id", action="append", default=None,
                   help="identity id (repeatable); default is the full registry")
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--config", type=str, default=None,
                   help="TOML file supplying any of the suite options")
    p.add_argument("--terminating", action="store_true",
                   help="accepted for symmetry; terminating draws are the "
                        "default for classical-mode identities")
    _add_common(p)

    p = sub.add_parser("sweep", help="convergence table for one identity")
    p.add_argument("--id", required=True)
    p.add_argument("--radii", type=str, default="4,8,12,16,20,24",
                   help="comma-separated truncation radii")
    p.add_argument("--index", type=int, default=0)
    _add_common(p)

    p = sub.add_parser("degenerations", help="verify documented special cases")
    p.add_argument("--id", required=True)
    _add_common(p)

    return ap


def _load_config(path: str, args) -> reports.SuiteConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise SystemExit(f"config {path}: {exc}")
    table = doc.get("suite", doc)
    known = {"identities", "samples", "tolerance", "precision_bits",
             "radius", "seed", "workers", "out"}
    bad = set(table) - known
    if bad:
        raise SystemExit(f"config {path}: unknown fields {sorted(bad)}")
    return reports.SuiteConfig(**table)


def _sampled(ident: str, seed: int, index: int) -> ParamSet:
    cfg = sampler.SampleConfig(seed=seed)
    return sampler.sample(ident, cfg, index + 1)[index]


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_list(args) -> int:
    rows = [{"id": d.id, "mode": d.mode, "route": d.route, "anchor": d.anchor}
            for d in registry.list_identities()]
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        width = max(len(r["id"]) for r in rows)
        for r in rows:
            print(f"{r['id']:<{width}}  {r['mode']:<9}  {r['route']}")
    return 0


def cmd_check(args) -> int:
    if args.params:
        with open(args.params) as fh:
            ps = ParamSet.from_json(json.load(fh))
    else:
        ps = _sampled(args.id, args.seed, args.index)
    policy = TruncationPolicy(radius=args.radius, term_tol=reports.stop_tol(args.tol))
    rep = reports.check(ps, policy, args.tol, args.prec_bits,
                        args.seed, args.index)
    _emit(json.dumps(rep.to_json(), indent=2, sort_keys=True) + "\n", args.out)
    return 0 if rep.passed else 1


def cmd_suite(args) -> int:
    if args.config:
        cfg = _load_config(args.config, args)
    else:
        cfg = reports.SuiteConfig(
            identities=args.id if args.id else "all",
            samples=args.samples, tolerance=args.tol,
            precision_bits=args.prec_bits, radius=args.radius,
            seed=args.seed, workers=args.workers, out=args.out,
        )
    doc = reports.run_suite(cfg)
    out = args.out or cfg.out
    if out:
        reports.dump_report(doc, out)
    for ident, s in doc["summary"].items():
        print(f"{ident:<22} pass {s['passed']:>3}  fail {s['failed']:>3}  "
              f"worst rel err {s['worst_rel_error']}")
    print(f"total runtime {doc['total_runtime_ms']} ms")
    return 0 if doc["all_passed"] else 1


def cmd_sweep(args) -> int:
    radii = [int(x) for x in args.radii.split(",")]
    ps = _sampled(args.id, args.seed, args.index)
    rows = reports.radius_sweep(ps, radii, args.tol, args.prec_bits)
    lines = [f"{'radius':>6}  {'terms':>8}  {'|lhs-rhs|':>12}  {'shell max':>12}"]
    for r in rows:
        lines.append(f"{r['radius']:>6}  {r['terms_evaluated']:>8}  "
                     f"{r['abs_gap']:>12}  {r['outer_shell_max']:>12}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_degenerations(args) -> int:
    desc = registry.get(args.id)
    if desc.degenerations is None:
        raise NoDegenerations(f"{args.id} documents no degenerate cases")
    rng = sampler.rng_for(args.seed, args.id + ":degenerations", 0)
    cfg = sampler.SampleConfig(seed=args.seed)
    sets = desc.degenerations(rng, cfg)
    ok = True
    for i, ps in enumerate(sets):
        policy = TruncationPolicy(radius=args.radius, term_tol=reports.stop_tol(args.tol))
        rep = reports.check(ps, policy, args.tol, args.prec_bits, args.seed, i)
        status = "pass" if rep.passed else "fail"
        print(f"{args.id} degeneration {i}: {status} "
              f"(rel err {rep.rel_error})")
        ok = ok and rep.passed
    return 0 if ok else 1


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "list": cmd_list,
        "check": cmd_check,
        "suite": cmd_suite,
        "sweep": cmd_sweep,
        "degenerations": cmd_degenerations,
    }[args.verb]
    try:
        return handler(args)
    except KmseriesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
