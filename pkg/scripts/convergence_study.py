#!/usr/bin/env python3
"""Tabulate truncation behaviour of the infinite-series identities.

For each sampled parameter set the series side is re-evaluated at a
ladder of truncation radii with early stopping disabled, and the gap to
the finite side is printed next to the outermost shell maximum.  A
healthy configuration shows the gap tracking the shell maximum down to
the rounding floor.

    python3 scripts/convergence_study.py --id thm1 --samples 3
    python3 scripts/convergence_study.py --radii 8,12,16,20,24 --out sweep.json
"""

import argparse
import json
import sys

from kmseries import registry, reports, sampler

DEFAULT_IDS = [
    "gustafson_6psi6", "thm1", "thm1_shifted", "cor_c1", "cor_st",
    "cor_csc", "cor_chu_un", "cor_pk", "cor_c2", "cor_c3", "cor_2l",
    "cor_3l", "cor_c1p", "cor_cn", "cor_cmn",
]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--id", action="append", dest="ids",
                    help="identity to sweep (repeatable; default: all "
                         "infinite-series identities)")
    ap.add_argument("--samples", type=int, default=2)
    ap.add_argument("--radii", default="8,12,16,20,24",
                    help="comma-separated truncation radii")
    ap.add_argument("--seed", type=int, default=20260826)
    ap.add_argument("--prec-bits", type=int, default=256)
    ap.add_argument("--out", help="also dump every row as JSON")
    args = ap.parse_args(argv)

    radii = [int(r) for r in args.radii.split(",")]
    ids = args.ids or DEFAULT_IDS
    known = {d.id for d in registry.list_identities()}
    for ident in ids:
        if ident not in known:
            ap.error(f"unknown identity {ident!r}")

    cfg = sampler.SampleConfig(seed=args.seed)
    dump = []
    for ident in ids:
        for i, ps in enumerate(sampler.sample(ident, cfg, args.samples)):
            rows = reports.radius_sweep(ps, radii, bits=args.prec_bits)
            print(f"\n{ident} sample {i}")
            print(f"  {'radius':>6}  {'terms':>8}  {'outer shell':>12}  "
                  f"{'gap to finite side':>18}")
            for row in rows:
                print(f"  {row['radius']:>6}  {row['terms_evaluated']:>8}  "
                      f"{row['outer_shell_max']:>12}  {row['abs_gap']:>18}")
            dump.append({"identity": ident, "sample_index": i,
                         "params": ps.to_json(), "rows": rows})
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(dump, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"\nwrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
