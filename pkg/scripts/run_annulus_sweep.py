#!/usr/bin/env python3
"""Run the annulus flux sweep and tally agreement with the sign-count rule.

Every sweep case measures the spectral flow of the flux family and compares
it against w * (1[B_out > 0] - 1[B_in > 0]).  Artifacts (report.csv, per-case
spectra and flow records) land in --out when given.

Usage:
    python3 scripts/run_annulus_sweep.py --out out/annulus
    python3 scripts/run_annulus_sweep.py --resolution 48   # quick pass
"""

import argparse
import sys
from dataclasses import replace

from diracflow.config import parse_config
from diracflow.harness import format_report_lines, run_experiment


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/annulus.yaml")
    ap.add_argument("--out", default=None, help="artifact directory")
    ap.add_argument(
        "--resolution", type=int, default=None, help="radial grid size override"
    )
    args = ap.parse_args(argv)

    cfg = parse_config(args.config)
    if args.resolution is not None:
        cfg = replace(cfg, radial_n=args.resolution)
    report = run_experiment(cfg, out_dir=args.out)

    for line in format_report_lines(report):
        print(line)
    good = sum(1 for r in report.rows if r.status == "ok" and r.agreement)
    print(f"{good}/{len(report.rows)} cases match the winding prediction")
    return report.exit_code()


if __name__ == "__main__":
    sys.exit(main())
