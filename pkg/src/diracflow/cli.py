"""Command-line interface.

Subcommands:
  predict   print the topological flow prediction for each case
  flow      measure the flow for the base case (sweep ignored)
  sweep     measure every case in the sweep cross product
  torus     run the space-time index check for each case
  report    re-audit a persisted output directory

Exit codes: 0 every row agrees, 1 at least one measured disagreement,
2 inconclusive or failed rows (but no disagreement), 3 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import BACKENDS, ExperimentConfig, parse_config
from .errors import ConfigError, DiracflowError
from .gauge import predicted_sf
from .harness import (
    ExperimentReport,
    audit_report,
    case_label,
    expand_cases,
    format_report_lines,
    run_experiment,
)

EXIT_OK = 0
EXIT_DISAGREE = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 3


def _add_common(p: argparse.ArgumentParser, resolution: bool = True):
    p.add_argument("--config", required=True, help="experiment YAML file")
    p.add_argument("--out", default=None, help="artifact directory (overrides config)")
    if resolution:
        p.add_argument(
            "--backend", choices=BACKENDS, default=None,
            help="override the configured backend",
        )
        p.add_argument(
            "--resolution", type=int, default=None,
            help="override the active backend's resolution (radial N or cells "
            "per diameter; with backend=both, both)",
        )
        p.add_argument(
            "--tsamples", type=int, default=None,
            help="override the initial parameter sample count",
        )
        p.add_argument(
            "--max-depth", type=int, default=None,
            help="override the refinement depth limit",
        )


def _load(args) -> ExperimentConfig:
    cfg = parse_config(args.config)
    if getattr(args, "backend", None):
        cfg = replace(cfg, backend=args.backend)
    if getattr(args, "resolution", None):
        if cfg.backend in ("radial", "both"):
            cfg = replace(cfg, radial_n=args.resolution)
        if cfg.backend in ("lattice", "both"):
            cfg = replace(cfg, cells_per_diameter=args.resolution)
    if getattr(args, "tsamples", None):
        cfg = replace(cfg, t_samples_init=args.tsamples)
    if getattr(args, "max_depth", None):
        cfg = replace(cfg, max_depth=args.max_depth)
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    return cfg


def _print_report(report: ExperimentReport) -> int:
    for line in format_report_lines(report):
        print(line)
    if report.out_dir:
        print(f"artifacts in {report.out_dir}")
    return report.exit_code()


def cmd_predict(args) -> int:
    cfg = _load(args)
    for label, case in expand_cases(cfg):
        w = ",".join(str(x) for x in case.gauge.windings)
        s = "".join("+" if sg > 0 else "-" for sg, _ in case.domain.b_data)
        print(f"{label:<18} windings=[{w}] signs={s} predicted={predicted_sf(case.gauge, case.domain):+d}")
    return EXIT_OK


def cmd_flow(args) -> int:
    cfg = _load(args)
    cfg = replace(cfg, sweep_windings=None, sweep_signs=None, torus_enabled=False)
    return _print_report(run_experiment(cfg))


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if cfg.sweep_windings is None and cfg.sweep_signs is None:
        print("config has no sweep section", file=sys.stderr)
        return EXIT_USAGE
    return _print_report(run_experiment(cfg))


def cmd_torus(args) -> int:
    cfg = _load(args)
    cfg = replace(cfg, sweep_windings=None, sweep_signs=None, torus_enabled=True)
    report = run_experiment(cfg)
    filtered = ExperimentReport(rows=(), torus_rows=report.torus_rows,
                                out_dir=report.out_dir)
    return _print_report(filtered)


def cmd_report(args) -> int:
    rows, problems = audit_report(args.dir)
    if not rows and problems:
        print(problems[0], file=sys.stderr)
        return EXIT_USAGE
    bad = inconclusive = 0
    for r in rows:
        mark = "agree" if r["agreement"] == "true" else (
            "DISAGREE" if r["status"] == "ok" else r["status"].upper()
        )
        if r["status"] == "ok" and r["agreement"] != "true":
            bad += 1
        elif r["status"] != "ok":
            inconclusive += 1
        print(
            f"{r['label']:<18} {r['backend']:<8} predicted={r['predicted']} "
            f"measured={r['sf'] or '?'} [{mark}]"
        )
    for p in problems:
        print(f"AUDIT: {p}")
    if problems or bad:
        return EXIT_DISAGREE
    if inconclusive:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diracflow",
        description="Spectral flow of flux families of planar Dirac operators",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="print topological predictions")
    _add_common(p, resolution=False)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("flow", help="measure the base case")
    _add_common(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("sweep", help="measure every sweep case")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("torus", help="space-time index check")
    _add_common(p)
    p.set_defaults(func=cmd_torus)

    p = sub.add_parser("report", help="re-audit a persisted output directory")
    p.add_argument("dir", help="directory holding report.csv and flow records")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DiracflowError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE


if __name__ == "__main__":
    sys.exit(main())
