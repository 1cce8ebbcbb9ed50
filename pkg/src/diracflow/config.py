"""Experiment configuration: schema-checked YAML in, canonical YAML out.

Unknown keys are rejected with their full dotted path, so a typo like
"lattice.wilsn" fails loudly instead of silently using a default.
Serialization always writes every field explicitly (defaults included) with
sorted keys, so parse(serialize(cfg)) reproduces cfg exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import yaml

from .domain import DomainSpec, build_annulus, build_disk_with_holes
from .errors import ConfigError
from .gauge import SCHEDULES, GaugeSpec
from .lattice import LatticeParams
from .torus import SCHEMES

BACKENDS = ("radial", "lattice", "both")

# Allowed keys; None means a scalar/list leaf, a dict means a nested table.
_SCHEMA = {
    "domain": {
        "kind": None,
        "annulus": {"r_inner": None, "r_outer": None},
        "outer": {"center": None, "radius": None},
        "holes": None,
    },
    "boundary": {
        "outer": {"sign": None, "magnitude": None},
        "holes": None,
    },
    "gauge": {"windings": None, "schedule": None},
    "backend": None,
    "window": None,
    "resolution": {"radial_n": None, "cells_per_diameter": None, "n_t": None},
    "lattice": {
        "r_wilson": None,
        "m_wall": None,
        "window_lat": None,
        "margin_cells": None,
        "weight_threshold": None,
    },
    "flow": {
        "gap_margin": None,
        "tol_mult": None,
        "max_depth": None,
        "t_samples_init": None,
    },
    "torus": {"enabled": None, "n_t": None, "cap": None, "scheme": None},
    "seed": None,
    "out_dir": None,
    "sweep": {"windings": None, "signs": None},
}


def _check_keys(data: dict, schema: dict, path: str = ""):
    for key, value in data.items():
        here = f"{path}.{key}" if path else str(key)
        if key not in schema:
            raise ConfigError(f"unknown key {key!r}", key_path=here)
        sub = schema[key]
        if isinstance(sub, dict):
            if value is None:
                continue
            if not isinstance(value, dict):
                raise ConfigError("expected a mapping", key_path=here)
            _check_keys(value, sub, here)


def _sign_of(v, path: str) -> int:
    if v in ("+", 1, "+1"):
        return 1
    if v in ("-", -1, "-1"):
        return -1
    raise ConfigError(f"sign must be '+' or '-', got {v!r}", key_path=path)


def _sign_str(s: int) -> str:
    return "+" if s > 0 else "-"


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description (defaults applied)."""

    domain: DomainSpec
    gauge: GaugeSpec
    backend: str
    window: float
    radial_n: int
    cells_per_diameter: int
    lattice_params: LatticeParams
    gap_margin: float
    tol_mult: float
    max_depth: int
    t_samples_init: int
    torus_enabled: bool
    torus_n_t: int
    torus_cap: int
    torus_scheme: str
    seed: int
    out_dir: str | None
    sweep_windings: tuple[tuple[int, ...], ...] | None
    sweep_signs: tuple[tuple[int, ...], ...] | None
    domain_kind: str

    def with_signs(self, signs: tuple[int, ...]) -> "ExperimentConfig":
        """Same experiment with the per-component B signs replaced."""
        if len(signs) != self.domain.m:
            raise ConfigError(
                f"need {self.domain.m} signs (outer first), got {len(signs)}"
            )
        b_data = tuple(
            (int(s), mag) for s, (_, mag) in zip(signs, self.domain.b_data)
        )
        return replace(
            self,
            domain=replace(self.domain, b_data=b_data),
            sweep_windings=None,
            sweep_signs=None,
        )

    def with_windings(self, windings: tuple[int, ...]) -> "ExperimentConfig":
        if len(windings) != len(self.domain.holes):
            raise ConfigError(
                f"need {len(self.domain.holes)} windings, got {len(windings)}"
            )
        return replace(
            self,
            gauge=GaugeSpec(windings=tuple(int(w) for w in windings),
                            schedule=self.gauge.schedule),
            sweep_windings=None,
            sweep_signs=None,
        )

    def to_dict(self) -> dict:
        """Canonical fully-explicit nested dict."""
        d = self.domain
        if self.domain_kind == "annulus":
            dom = {
                "kind": "annulus",
                "annulus": {
                    "r_inner": float(d.holes[0][1]),
                    "r_outer": float(d.outer_radius),
                },
            }
        else:
            dom = {
                "kind": "disk_with_holes",
                "outer": {
                    "center": [float(d.outer_center[0]), float(d.outer_center[1])],
                    "radius": float(d.outer_radius),
                },
                "holes": [
                    {"center": [float(c[0]), float(c[1])], "radius": float(r)}
                    for c, r in d.holes
                ],
            }
        lp = self.lattice_params
        out = {
            "domain": dom,
            "boundary": {
                "outer": {
                    "sign": _sign_str(d.b_data[0][0]),
                    "magnitude": float(d.b_data[0][1]),
                },
                "holes": [
                    {"sign": _sign_str(s), "magnitude": float(m)}
                    for s, m in d.b_data[1:]
                ],
            },
            "gauge": {
                "windings": [int(w) for w in self.gauge.windings],
                "schedule": self.gauge.schedule,
            },
            "backend": self.backend,
            "window": float(self.window),
            "resolution": {
                "radial_n": int(self.radial_n),
                "cells_per_diameter": int(self.cells_per_diameter),
                "n_t": int(self.torus_n_t),
            },
            "lattice": {
                "r_wilson": float(lp.r_wilson),
                "m_wall": float(lp.m_wall),
                "window_lat": float(lp.window_lat),
                "margin_cells": int(lp.margin_cells),
                "weight_threshold": float(lp.weight_threshold),
            },
            "flow": {
                "gap_margin": float(self.gap_margin),
                "tol_mult": float(self.tol_mult),
                "max_depth": int(self.max_depth),
                "t_samples_init": int(self.t_samples_init),
            },
            "torus": {
                "enabled": bool(self.torus_enabled),
                "n_t": int(self.torus_n_t),
                "cap": int(self.torus_cap),
                "scheme": self.torus_scheme,
            },
            "seed": int(self.seed),
            "out_dir": self.out_dir,
        }
        if self.sweep_windings is not None or self.sweep_signs is not None:
            out["sweep"] = {}
            if self.sweep_windings is not None:
                out["sweep"]["windings"] = [list(w) for w in self.sweep_windings]
            if self.sweep_signs is not None:
                out["sweep"]["signs"] = [
                    [_sign_str(s) for s in row] for row in self.sweep_signs
                ]
        return out


def serialize(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)


def _build_domain(data: dict) -> tuple[DomainSpec, str]:
    dom = data.get("domain")
    if not isinstance(dom, dict) or "kind" not in dom:
        raise ConfigError("missing domain.kind", key_path="domain.kind")
    kind = dom["kind"]
    bnd = data.get("boundary") or {}
    outer_b = bnd.get("outer") or {}
    hole_b = bnd.get("holes") or []
    if not isinstance(hole_b, list):
        raise ConfigError("expected a list", key_path="boundary.holes")
    for i, entry in enumerate(hole_b):
        if not isinstance(entry, dict) or set(entry) - {"sign", "magnitude"}:
            raise ConfigError(
                "each hole boundary entry takes keys sign, magnitude",
                key_path=f"boundary.holes[{i}]",
            )

    def b_pair(entry, path):
        sign = _sign_of(entry.get("sign", "+"), f"{path}.sign")
        mag = float(entry.get("magnitude", 1.0))
        return (sign, mag)

    if kind == "annulus":
        if dom.get("outer") is not None or dom.get("holes") is not None:
            raise ConfigError(
                "annulus takes domain.annulus only", key_path="domain.kind"
            )
        ann = dom.get("annulus") or {}
        if "r_inner" not in ann or "r_outer" not in ann:
            raise ConfigError(
                "annulus needs r_inner and r_outer", key_path="domain.annulus"
            )
        if len(hole_b) != 1:
            raise ConfigError(
                "annulus needs exactly one hole boundary entry",
                key_path="boundary.holes",
            )
        d = build_annulus(
            float(ann["r_inner"]),
            float(ann["r_outer"]),
            b_pair(hole_b[0], "boundary.holes[0]"),
            b_pair(outer_b, "boundary.outer"),
        )
        return d, "annulus"
    if kind == "disk_with_holes":
        if dom.get("annulus") is not None:
            raise ConfigError(
                "disk_with_holes takes domain.outer and domain.holes",
                key_path="domain.annulus",
            )
        outer = dom.get("outer") or {}
        holes = dom.get("holes") or []
        if "center" not in outer or "radius" not in outer:
            raise ConfigError(
                "need domain.outer.center and .radius", key_path="domain.outer"
            )
        if not isinstance(holes, list) or not holes:
            raise ConfigError("need at least one hole", key_path="domain.holes")
        for i, entry in enumerate(holes):
            if not isinstance(entry, dict) or set(entry) - {"center", "radius"}:
                raise ConfigError(
                    "each hole takes keys center, radius",
                    key_path=f"domain.holes[{i}]",
                )
        if len(hole_b) != len(holes):
            raise ConfigError(
                f"need one boundary entry per hole ({len(holes)})",
                key_path="boundary.holes",
            )
        d = build_disk_with_holes(
            tuple(float(x) for x in outer["center"]),
            float(outer["radius"]),
            [(tuple(float(x) for x in h["center"]), float(h["radius"])) for h in holes],
            [b_pair(outer_b, "boundary.outer")]
            + [b_pair(h, f"boundary.holes[{i}]") for i, h in enumerate(hole_b)],
        )
        return d, "disk_with_holes"
    raise ConfigError(
        f"domain.kind must be 'annulus' or 'disk_with_holes', got {kind!r}",
        key_path="domain.kind",
    )


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    _check_keys(data, _SCHEMA)
    domain, kind = _build_domain(data)

    gauge_d = data.get("gauge") or {}
    windings = gauge_d.get("windings")
    if windings is None:
        raise ConfigError("missing gauge.windings", key_path="gauge.windings")
    if len(windings) != len(domain.holes):
        raise ConfigError(
            f"need one winding per hole ({len(domain.holes)}), got {len(windings)}",
            key_path="gauge.windings",
        )
    schedule = gauge_d.get("schedule", "linear")
    if schedule not in SCHEDULES:
        raise ConfigError(
            f"schedule must be one of {sorted(SCHEDULES)}, got {schedule!r}",
            key_path="gauge.schedule",
        )
    gauge = GaugeSpec(windings=tuple(int(w) for w in windings), schedule=schedule)

    backend = data.get("backend", "radial")
    if backend not in BACKENDS:
        raise ConfigError(
            f"backend must be one of {BACKENDS}, got {backend!r}", key_path="backend"
        )
    if backend in ("radial", "both") and not domain.is_concentric_annulus():
        raise ConfigError(
            "the separable backend needs a concentric annulus domain",
            key_path="backend",
        )

    res = data.get("resolution") or {}
    lat = data.get("lattice") or {}
    try:
        lattice_params = LatticeParams(
            r_wilson=float(lat.get("r_wilson", 1.0)),
            m_wall=float(lat.get("m_wall", 1.0)),
            window_lat=float(lat.get("window_lat", 0.3)),
            margin_cells=int(lat.get("margin_cells", 6)),
            weight_threshold=float(lat.get("weight_threshold", 0.5)),
        )
    except Exception as exc:
        raise ConfigError(str(exc), key_path="lattice") from exc

    flow_d = data.get("flow") or {}
    torus_d = data.get("torus") or {}
    scheme = torus_d.get("scheme", "midpoint")
    if scheme not in SCHEMES:
        raise ConfigError(
            f"scheme must be one of {SCHEMES}, got {scheme!r}", key_path="torus.scheme"
        )
    if torus_d.get("enabled", False) and not domain.is_concentric_annulus():
        raise ConfigError(
            "the torus check needs a concentric annulus domain",
            key_path="torus.enabled",
        )

    sweep_d = data.get("sweep") or {}
    sweep_w = sweep_d.get("windings")
    sweep_s = sweep_d.get("signs")
    if sweep_w is not None:
        sweep_w = tuple(tuple(int(w) for w in row) for row in sweep_w)
        for row in sweep_w:
            if len(row) != len(domain.holes):
                raise ConfigError(
                    f"each sweep winding row needs {len(domain.holes)} entries",
                    key_path="sweep.windings",
                )
    if sweep_s is not None:
        sweep_s = tuple(
            tuple(_sign_of(s, f"sweep.signs[{i}]") for s in row)
            for i, row in enumerate(sweep_s)
        )
        for row in sweep_s:
            if len(row) != domain.m:
                raise ConfigError(
                    f"each sweep sign row needs {domain.m} entries (outer first)",
                    key_path="sweep.signs",
                )

    window = float(data.get("window", 1.5))
    if window <= 0:
        raise ConfigError("window must be positive", key_path="window")

    return ExperimentConfig(
        domain=domain,
        gauge=gauge,
        backend=backend,
        window=window,
        radial_n=int(res.get("radial_n", 256)),
        cells_per_diameter=int(res.get("cells_per_diameter", 96)),
        lattice_params=lattice_params,
        gap_margin=float(flow_d.get("gap_margin", 1e-3)),
        tol_mult=float(flow_d.get("tol_mult", 1e-6)),
        max_depth=int(flow_d.get("max_depth", 12)),
        t_samples_init=int(flow_d.get("t_samples_init", 9)),
        torus_enabled=bool(torus_d.get("enabled", False)),
        torus_n_t=int(torus_d.get("n_t", res.get("n_t", 24))),
        torus_cap=int(torus_d.get("cap", 20000)),
        torus_scheme=scheme,
        seed=int(data.get("seed", 0)),
        out_dir=data.get("out_dir"),
        sweep_windings=sweep_w,
        sweep_signs=sweep_s,
        domain_kind=kind,
    )


def parse_config_text(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"bad YAML: {exc}") from exc
    if data is None:
        raise ConfigError("empty configuration")
    return config_from_dict(data)


def parse_config(path: str | os.PathLike) -> ExperimentConfig:
    """Load and validate an experiment configuration file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config_text(text)
