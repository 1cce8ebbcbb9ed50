"""Experiment driver: expand sweeps, run cases, persist artifacts, report.

A case is one (windings, signs) assignment on the configured domain; each
case runs on each requested backend as an independent row.  Rows never abort
the batch: domain errors surface as status "failed" with the message in the
row, refinement exhaustion as status "inconclusive".

Artifacts per row (when an output directory is set): the sampled window
spectra as CSV (one line per parameter value, 12-significant-digit floats)
and the full flow record as YAML, with the resolved configuration echoed so
a report can be re-audited from the files alone.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import yaml

from .config import ExperimentConfig, config_from_dict
from .errors import DiracflowError, InconclusiveError, ResolutionError
from .flow import FlowResult, run_flow
from .gauge import predicted_sf
from .torus import assemble_torus, fitting_channel_range, index_count

MIN_LATTICE_FLOW_CELLS = 48
TORUS_SPATIAL_N = 48
FLOAT_FMT = "%.12g"


@dataclass(frozen=True)
class RunRow:
    """One (case, backend) flow measurement, flattened for reporting."""

    label: str
    backend: str
    windings: tuple[int, ...]
    signs: tuple[int, ...]
    predicted: int
    sf: int | None
    status: str
    agreement: bool
    n_crossings: int
    refinement_depth: int
    epsilon_shift: float
    n_samples: int
    runtime_s: float
    error: str = ""
    spectra_file: str = ""
    flow_file: str = ""


@dataclass(frozen=True)
class TorusRow:
    label: str
    predicted: int
    index: int | None
    kernel_dim: int | None
    gap_ratio: float | None
    status: str
    agreement: bool
    error: str = ""


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple[RunRow, ...]
    torus_rows: tuple[TorusRow, ...] = ()
    out_dir: str | None = None

    def exit_code(self) -> int:
        """0 all agree, 1 any disagreement, 2 any inconclusive/failed row."""
        all_rows = list(self.rows) + list(self.torus_rows)
        if any(r.status == "ok" and not r.agreement for r in all_rows):
            return 1
        if any(r.status != "ok" for r in all_rows):
            return 2
        return 0


def case_label(cfg: ExperimentConfig) -> str:
    w = ",".join(str(x) for x in cfg.gauge.windings)
    s = "".join("+" if sg > 0 else "-" for sg, _ in cfg.domain.b_data)
    return f"w{w}_s{s}"


def expand_cases(cfg: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    """Sweep cross product (windings x signs), outer first; base config when
    no sweep is present.  Labels encode the case and are deduplicated."""
    windings_rows = cfg.sweep_windings or (tuple(cfg.gauge.windings),)
    signs_rows = cfg.sweep_signs or (tuple(s for s, _ in cfg.domain.b_data),)
    cases = []
    seen: dict[str, int] = {}
    for w_row in windings_rows:
        for s_row in signs_rows:
            case = cfg.with_windings(w_row).with_signs(s_row)
            label = case_label(case)
            if label in seen:
                seen[label] += 1
                label = f"{label}_{seen[label]}"
            else:
                seen[label] = 1
            cases.append((label, case))
    return cases


def _flow_row(label: str, case: ExperimentConfig, backend: str) -> tuple[RunRow, FlowResult | None]:
    predicted = predicted_sf(case.gauge, case.domain)
    windings = tuple(case.gauge.windings)
    signs = tuple(s for s, _ in case.domain.b_data)
    try:
        if backend == "lattice" and case.cells_per_diameter < MIN_LATTICE_FLOW_CELLS:
            raise ResolutionError(
                f"lattice flow needs >= {MIN_LATTICE_FLOW_CELLS} cells per "
                f"diameter, got {case.cells_per_diameter}"
            )
        resolution = case.radial_n if backend == "radial" else case.cells_per_diameter
        result = run_flow(
            case.domain,
            case.gauge,
            backend,
            resolution,
            case.t_samples_init,
            window=case.window,
            gap_margin=case.gap_margin,
            tol_mult=case.tol_mult,
            max_depth=case.max_depth,
            lattice_params=case.lattice_params,
            seed=case.seed,
        )
    except DiracflowError as exc:
        row = RunRow(
            label=label,
            backend=backend,
            windings=windings,
            signs=signs,
            predicted=predicted,
            sf=None,
            status="failed",
            agreement=False,
            n_crossings=0,
            refinement_depth=0,
            epsilon_shift=0.0,
            n_samples=0,
            runtime_s=0.0,
            error=f"{type(exc).__name__}: {exc}",
        )
        return row, None
    row = RunRow(
        label=label,
        backend=backend,
        windings=windings,
        signs=signs,
        predicted=predicted,
        sf=result.sf,
        status=result.status,
        agreement=bool(result.agreement),
        n_crossings=len(result.crossings),
        refinement_depth=result.refinement_depth,
        epsilon_shift=result.epsilon_shift,
        n_samples=result.diagnostics.get("n_samples", len(result.samples)),
        runtime_s=float(result.diagnostics.get("runtime_s", 0.0)),
        error=str(result.diagnostics.get("reason", "")) if result.status != "ok" else "",
    )
    return row, result


def _torus_row(label: str, case: ExperimentConfig) -> TorusRow:
    predicted = predicted_sf(case.gauge, case.domain)
    try:
        j_range = fitting_channel_range(
            case.domain,
            case.gauge,
            N=TORUS_SPATIAL_N,
            n_t=case.torus_n_t,
            cap=case.torus_cap,
            lam=case.window,
        )
        schemes = {"midpoint": "forward", "forward": "midpoint"}
        top, counter = (
            assemble_torus(
                case.domain,
                case.gauge,
                n_t=case.torus_n_t,
                N=TORUS_SPATIAL_N,
                lam=case.window,
                j_range=j_range,
                scheme=scheme,
                cap=case.torus_cap,
            )
            for scheme in (case.torus_scheme, schemes[case.torus_scheme])
        )
        res = index_count(top, counter=counter)
    except InconclusiveError as exc:
        return TorusRow(
            label=label, predicted=predicted, index=None, kernel_dim=None,
            gap_ratio=None, status="inconclusive", agreement=False,
            error=str(exc),
        )
    except DiracflowError as exc:
        return TorusRow(
            label=label, predicted=predicted, index=None, kernel_dim=None,
            gap_ratio=None, status="failed", agreement=False,
            error=f"{type(exc).__name__}: {exc}",
        )
    return TorusRow(
        label=label,
        predicted=predicted,
        index=res.index,
        kernel_dim=res.kernel_dim,
        gap_ratio=float(res.gap_ratio),
        status="ok",
        agreement=res.index == predicted,
    )


def _job(args):
    kind, label, case, backend = args
    if kind == "torus":
        return ("torus", _torus_row(label, case), None, label, "")
    row, result = _flow_row(label, case, backend)
    return ("flow", row, result, label, backend)


def write_spectra_csv(path: str, result: FlowResult):
    """One line per sample: t, then the window eigenvalues (ragged, padded)."""
    samples = result.samples
    width = max((s.eigenvalues.size for s in samples), default=0)
    meta = samples[0].metadata if samples else {}
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# backend={meta.get('backend', '?')} window={meta.get('window', '?')}\n"
        )
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"eig_{k + 1}" for k in range(width)])
        for s in samples:
            vals = [FLOAT_FMT % v for v in s.eigenvalues]
            writer.writerow([FLOAT_FMT % s.t] + vals + [""] * (width - len(vals)))


def _flow_record(label: str, backend: str, case: ExperimentConfig, row: RunRow,
                 result: FlowResult) -> dict:
    rec = {
        "label": label,
        "backend": backend,
        "config": case.to_dict(),
        "predicted": int(row.predicted),
        "sf": None if result.sf is None else int(result.sf),
        "status": result.status,
        "agreement": bool(row.agreement),
        "crossings": [[float(t), int(d)] for t, d in result.crossings],
        "epsilon_shift": float(result.epsilon_shift),
        "refinement_depth": int(result.refinement_depth),
        "diagnostics": {
            k: (float(v) if isinstance(v, (int, float, np.floating)) else str(v))
            for k, v in result.diagnostics.items()
            if k != "blocked_interval"
        },
    }
    if result.ladder is not None:
        rec["ladder"] = {
            "t_points": [float(t) for t in result.ladder.t_points],
            "levels": [float(g) for g in result.ladder.levels],
        }
    return rec


REPORT_COLUMNS = [
    "label", "backend", "windings", "signs", "predicted", "sf", "status",
    "agreement", "n_crossings", "depth", "epsilon", "n_samples", "runtime_s",
    "spectra_file", "flow_file", "error",
]


def _report_csv_row(row: RunRow) -> list[str]:
    return [
        row.label,
        row.backend,
        ";".join(str(w) for w in row.windings),
        ";".join("+" if s > 0 else "-" for s in row.signs),
        str(row.predicted),
        "" if row.sf is None else str(row.sf),
        row.status,
        str(row.agreement).lower(),
        str(row.n_crossings),
        str(row.refinement_depth),
        FLOAT_FMT % row.epsilon_shift,
        str(row.n_samples),
        FLOAT_FMT % row.runtime_s,
        row.spectra_file,
        row.flow_file,
        row.error,
    ]


def format_report_lines(report: ExperimentReport) -> list[str]:
    lines = []
    for r in report.rows:
        sf = "?" if r.sf is None else str(r.sf)
        mark = "agree" if r.agreement else ("DISAGREE" if r.status == "ok" else r.status.upper())
        lines.append(
            f"{r.label:<18} {r.backend:<8} predicted={r.predicted:+d} "
            f"measured={sf:>2} crossings={r.n_crossings} depth={r.refinement_depth} "
            f"[{mark}]" + (f" {r.error}" if r.error else "")
        )
    for r in report.torus_rows:
        idx = "?" if r.index is None else str(r.index)
        mark = "agree" if r.agreement else ("DISAGREE" if r.status == "ok" else r.status.upper())
        gap = "" if r.gap_ratio is None else f" gap_ratio={r.gap_ratio:.1f}"
        lines.append(
            f"{r.label:<18} torus    predicted={r.predicted:+d} "
            f"index={idx:>2}{gap} [{mark}]" + (f" {r.error}" if r.error else "")
        )
    return lines


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str | None = None,
    workers: int | None = None,
) -> ExperimentReport:
    """Run every case on every requested backend; optionally persist artifacts.

    Parallelism: DIRACFLOW_WORKERS (or the workers argument) > 1 runs rows in
    separate processes; rows are independent by construction.
    """
    out_dir = out_dir if out_dir is not None else cfg.out_dir
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    if workers is None:
        workers = int(os.environ.get("DIRACFLOW_WORKERS", "1"))

    backends = ("radial", "lattice") if cfg.backend == "both" else (cfg.backend,)
    jobs = []
    for label, case in expand_cases(cfg):
        for backend in backends:
            jobs.append(("flow", label, case, backend))
        if cfg.torus_enabled:
            jobs.append(("torus", label, case, ""))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_job, jobs))
    else:
        outcomes = [_job(j) for j in jobs]

    case_by_label = dict(expand_cases(cfg))
    rows, torus_rows = [], []
    for kind, row, result, label, backend in outcomes:
        if kind == "torus":
            torus_rows.append(row)
            continue
        if out_dir and result is not None:
            spectra = os.path.join(out_dir, f"{label}_{backend}_spectra.csv")
            flow_f = os.path.join(out_dir, f"{label}_{backend}_flow.yaml")
            write_spectra_csv(spectra, result)
            with open(flow_f, "w") as fh:
                yaml.safe_dump(
                    _flow_record(label, backend, case_by_label[label], row, result),
                    fh,
                    sort_keys=True,
                )
            row = replace(row, spectra_file=os.path.basename(spectra),
                          flow_file=os.path.basename(flow_f))
        rows.append(row)

    report = ExperimentReport(rows=tuple(rows), torus_rows=tuple(torus_rows),
                              out_dir=out_dir)
    if out_dir:
        with open(os.path.join(out_dir, "report.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_COLUMNS)
            for r in report.rows:
                writer.writerow(_report_csv_row(r))
        with open(os.path.join(out_dir, "report.txt"), "w") as fh:
            fh.write("\n".join(format_report_lines(report)) + "\n")
    return report


def audit_report(out_dir: str) -> tuple[list[dict], list[str]]:
    """Re-check a persisted report from its files alone.

    Recomputes the topological prediction from the configuration echoed in
    each flow record and cross-checks the stored prediction, measurement, and
    agreement flag.  Returns (rows, problems)."""
    problems = []
    path = os.path.join(out_dir, "report.csv")
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        return [], [f"cannot read {path}: {exc}"]
    for r in rows:
        name = f"{r['label']}/{r['backend']}"
        if not r["flow_file"]:
            if r["status"] == "ok":
                problems.append(f"{name}: ok row without a flow record")
            continue
        fpath = os.path.join(out_dir, r["flow_file"])
        try:
            with open(fpath) as fh:
                rec = yaml.safe_load(fh)
        except OSError as exc:
            problems.append(f"{name}: cannot read flow record: {exc}")
            continue
        case = config_from_dict(rec["config"])
        fresh = predicted_sf(case.gauge, case.domain)
        if fresh != int(r["predicted"]):
            problems.append(
                f"{name}: stored prediction {r['predicted']} but the echoed "
                f"config predicts {fresh}"
            )
        if rec.get("predicted") != fresh:
            problems.append(f"{name}: flow record prediction mismatch")
        stored_sf = r["sf"]
        claimed = r["agreement"] == "true"
        actual = r["status"] == "ok" and stored_sf != "" and int(stored_sf) == fresh
        if claimed != actual:
            problems.append(
                f"{name}: agreement flag {claimed} inconsistent with "
                f"sf={stored_sf!r}, predicted={fresh}, status={r['status']}"
            )
    return rows, problems
