"""
Configuration-driven scenario runner behind the ``dp`` command.

A scenario is described by one JSON file::

    {
      "scenario": "single_peakon",          # identities | single_peakon |
                                            # antipeakon_peakon | train | shock | sweep
      "grid": {"length": 60.0, "n": 8192},
      "time": {"T": 20.0, "cfl": 0.3, "out_every": 100},
      "profile": {
        "c": 1.0,                           # single peakon speed
        "velocities": [-1.0, 1.0],          # trains
        "shifts": [-15.0, 15.0],
        "separation": 30.0,
        "k": 1.0,                           # shock parameter
        "n_moll": 32,
        "delta": 0.001,                     # initial H-distance, needs a perturbation
        "perturbation": {"shape": "bump", "amplitude": 0.01,
                         "center": 2.5, "width": 0.5}
      },
      "diagnostics": {"filter": true, "sign_width": 32.0, "snapshots": true,
                      "track_flow": false},
      "suite": {"count": 100, "n_moll": 64},
      "sweep": {"base": {...}, "vary": {"profile.delta": [0.001, 0.01]}},
      "seed": 7,
      "output_dir": "out"
    }

Missing keys take the defaults of the dataclasses below; unknown keys are
errors. ``DP_OUTPUT_DIR`` (or ``--output-dir``) overrides ``output_dir``.

Every run writes ``manifest.json`` next to its outputs: the config echo,
tool version, wall-clock time, every emitted file with its SHA-256, the
tagged checks and their rollup. JSONL rows and CSV columns are listed in
:data:`SCHEMAS`; their version string is recorded in the manifest.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .experiments import (
    PERTURBATION_SHAPES,
    Perturbation,
    a_priori_checks,
    certify,
    identity_suite,
    linf_envelope_constant,
    perturbed_peakon,
    run_shock,
    run_single_peakon,
    run_train,
    train_initial,
)
from .grid import make_grid, save_binary
from .identities import CSV_FIELDS
from .profiles import TrainSpec, train_problems
from .solver import NO_FILTER, BlowUp, Filter

SCENARIOS = ("identities", "single_peakon", "antipeakon_peakon", "train", "shock", "sweep")
EVOLUTION_SCENARIOS = ("single_peakon", "antipeakon_peakon", "train", "shock")
STABILITY_SCENARIOS = ("single_peakon", "antipeakon_peakon", "train")

SCHEMA_VERSION = "1"
SCHEMAS = {
    "identities.csv": list(CSV_FIELDS),
    "series.csv (single_peakon)": [
        "t", "xi", "h_distance", "linf_distance", "max_abs_u", "y_l1", "certified", "x0",
        "window_mass", "window_bound", "M", "E", "F",
    ],
    "series.csv (trains)": ["t", "xi_<j>...", "h_distance", "max_abs_u", "y_l1", "certified"],
    "series.csv (shock)": ["t", "amplitude", "exact", "max_abs_u"],
    "diagnostics.jsonl": "one object per sample with the series.csv columns as keys",
    "checks.csv": ["name", "value", "threshold", "passed"],
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field."""


# config --------------------------------------------------------------------------

@dataclass(frozen=True)
class GridConfig:
    length: float = 60.0
    n: int = 8192


@dataclass(frozen=True)
class TimeConfig:
    T: float = 20.0
    cfl: float = 0.3
    out_every: int = 100


@dataclass(frozen=True)
class PerturbationConfig:
    shape: str = "bump"
    amplitude: float = 0.01
    center: float = 2.5
    width: float = 0.5

    def build(self) -> Perturbation:
        return Perturbation(self.shape, self.amplitude, self.center, self.width)


@dataclass(frozen=True)
class ProfileConfig:
    c: float = 1.0
    velocities: tuple[float, ...] = (-1.0, 1.0)
    shifts: tuple[float, ...] = (-15.0, 15.0)
    separation: float = 30.0
    k: float = 1.0
    n_moll: int = 32
    delta: float | None = 1e-3
    perturbation: PerturbationConfig | None = PerturbationConfig()


@dataclass(frozen=True)
class DiagnosticsConfig:
    filter: bool = True
    sign_width: float | None = None
    snapshots: bool = True
    track_flow: bool = False


@dataclass(frozen=True)
class SuiteConfig:
    count: int = 100
    n_moll: int = 64


@dataclass(frozen=True)
class SweepConfig:
    base: dict = field(default_factory=dict)
    vary: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "single_peakon"
    grid: GridConfig = GridConfig()
    time: TimeConfig = TimeConfig()
    profile: ProfileConfig = ProfileConfig()
    diagnostics: DiagnosticsConfig = DiagnosticsConfig()
    suite: SuiteConfig = SuiteConfig()
    sweep: SweepConfig | None = None
    seed: int = 7
    output_dir: str = "out"

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    @property
    def sign_width(self) -> float:
        if self.diagnostics.sign_width is not None:
            return self.diagnostics.sign_width
        return 32.0 if self.scenario == "single_peakon" else 64.0

    @property
    def train_spec(self) -> TrainSpec:
        p = self.profile
        return TrainSpec(tuple(p.velocities), tuple(p.shifts), p.separation)

    @property
    def flt(self) -> Filter:
        return Filter() if self.diagnostics.filter else NO_FILTER


_NESTED = {
    "grid": GridConfig, "time": TimeConfig, "profile": ProfileConfig,
    "diagnostics": DiagnosticsConfig, "suite": SuiteConfig, "sweep": SweepConfig,
    "perturbation": PerturbationConfig,
}


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data: Any, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in names:
            raise ConfigError(f"{path}: unknown key")
        if key in _NESTED and value is not None:
            value = _build(_NESTED[key], value, path)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build a config from parsed JSON; unknown keys raise :class:`ConfigError`."""
    return _build(ScenarioConfig, data, "")


def load_config(path: str | os.PathLike) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: not valid JSON ({exc})") from exc
    return config_from_dict(data)


# validation -------------------------------------------------------------------------

def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _static_problems(cfg: ScenarioConfig) -> list[str]:
    out = []
    if cfg.scenario not in SCENARIOS:
        return [f"scenario: {cfg.scenario!r} is not one of {', '.join(SCENARIOS)}"]
    if cfg.scenario == "sweep":
        return out
    g, tm, p = cfg.grid, cfg.time, cfg.profile
    if not _is_number(g.length) or g.length <= 0:
        out.append(f"grid.length: must be a positive number, got {g.length!r}")
    if not _is_int(g.n) or g.n < 16 or g.n & (g.n - 1):
        out.append(f"grid.n: must be a power of two >= 16, got {g.n!r}")
    if not _is_number(tm.T) or tm.T < 0:
        out.append(f"time.T: must be nonnegative, got {tm.T!r}")
    if not _is_number(tm.cfl) or not 0 < tm.cfl <= 1:
        out.append(f"time.cfl: must lie in (0, 1], got {tm.cfl!r}")
    if not _is_int(tm.out_every) or tm.out_every < 1:
        out.append(f"time.out_every: must be a positive integer, got {tm.out_every!r}")
    if not _is_int(cfg.seed):
        out.append(f"seed: must be an integer, got {cfg.seed!r}")
    if cfg.scenario == "identities":
        if not _is_int(cfg.suite.count) or cfg.suite.count < 1:
            out.append(f"suite.count: must be a positive integer, got {cfg.suite.count!r}")
        if not _is_int(cfg.suite.n_moll) or cfg.suite.n_moll < 1:
            out.append(f"suite.n_moll: must be a positive integer, got {cfg.suite.n_moll!r}")
        return out
    if cfg.scenario == "shock":
        if not _is_number(p.k) or p.k <= 0:
            out.append(f"profile.k: must be positive, got {p.k!r}")
        return out
    if not _is_int(p.n_moll) or p.n_moll < 1:
        out.append(f"profile.n_moll: must be a positive integer, got {p.n_moll!r}")
    elif not out and g.length / g.n > 1.0 / (2 * p.n_moll):
        out.append(
            f"profile.n_moll: mollification scale 1/{p.n_moll} needs grid spacing <= 1/{2 * p.n_moll}, "
            f"have {g.length / g.n:.4g}"
        )
    if cfg.scenario == "single_peakon":
        if not _is_number(p.c) or p.c <= 0:
            out.append(f"profile.c: must be positive, got {p.c!r}")
    else:
        for problem in train_problems(p.velocities, p.shifts, p.separation):
            out.append(f"profile.shifts: {problem}" if "separation" in problem else f"profile.velocities: {problem}")
        if cfg.scenario == "antipeakon_peakon" and not (len(p.velocities) == 2 and p.velocities[0] < 0 < p.velocities[1]):
            out.append("profile.velocities: antipeakon_peakon needs exactly (c_-1 < 0 < c_1)")
        if len(p.shifts) and _is_number(g.length) and g.length <= (max(p.shifts) - min(p.shifts)) + 16:
            out.append(f"grid.length: {g.length} too short for the train spread; periodic images overlap")
    if p.perturbation is not None:
        q = p.perturbation
        if q.shape not in PERTURBATION_SHAPES:
            out.append(f"profile.perturbation.shape: must be one of {PERTURBATION_SHAPES}, got {q.shape!r}")
        if not _is_number(q.width) or q.width <= 0:
            out.append(f"profile.perturbation.width: must be positive, got {q.width!r}")
        if not _is_number(q.amplitude) or q.amplitude < 0:
            out.append(f"profile.perturbation.amplitude: must be a nonnegative number, got {q.amplitude!r}")
        if not _is_number(q.center):
            out.append(f"profile.perturbation.center: must be a number, got {q.center!r}")
    if p.delta is not None:
        if not _is_number(p.delta) or p.delta <= 0:
            out.append(f"profile.delta: must be positive, got {p.delta!r}")
        elif p.perturbation is None:
            out.append("profile.delta: a target distance needs a perturbation")
    return out


def initial_field(cfg: ScenarioConfig):
    p = cfg.profile
    grid = make_grid(cfg.grid.length, cfg.grid.n)
    pert = None if p.perturbation is None else p.perturbation.build()
    if cfg.scenario == "single_peakon":
        return perturbed_peakon(p.c, grid, p.n_moll, pert, p.delta)
    return train_initial(cfg.train_spec, grid, p.n_moll, pert, p.delta)


def validate(cfg: ScenarioConfig) -> list[str]:
    """Problems preventing ``run``; empty iff the config is runnable."""
    out = _static_problems(cfg)
    if cfg.scenario == "sweep" and not out:
        try:
            children = expand_sweep(cfg)
        except ConfigError as exc:
            return [str(exc)]
        for i, child in enumerate(children):
            out.extend(f"sweep[{i}].{msg}" for msg in validate(child))
        return out
    if out or cfg.scenario not in STABILITY_SCENARIOS:
        return out
    # the stability statements assume the sign structure of the momentum
    try:
        u0 = initial_field(cfg)
    except ValueError as exc:
        return [f"profile.delta: {exc}"]
    if certify(u0, width_cells=cfg.sign_width) is None:
        out.append(
            "profile.perturbation: initial momentum violates the sign condition "
            "(y >= 0 right of some x0, y <= 0 left of it)"
        )
    return out


def _set_path(data: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"sweep.vary.{dotted}: {key} is not an object")
    node[keys[-1]] = value


def expand_sweep(cfg: ScenarioConfig) -> list[ScenarioConfig]:
    """Cartesian product of ``sweep.vary`` over ``sweep.base``, one config per run."""
    if cfg.sweep is None:
        raise ConfigError("sweep: missing sweep section")
    base = dict(cfg.sweep.base)
    if base.get("scenario", "single_peakon") == "sweep":
        raise ConfigError("sweep.base.scenario: nested sweeps are not supported")
    keys = sorted(cfg.sweep.vary)
    values = []
    for key in keys:
        v = cfg.sweep.vary[key]
        if not isinstance(v, (list, tuple)) or not v:
            raise ConfigError(f"sweep.vary.{key}: expected a non-empty list")
        values.append(list(v))
    out = []
    for i, combo in enumerate(itertools.product(*values)):
        data = json.loads(json.dumps(base))
        for key, value in zip(keys, combo):
            _set_path(data, key, value)
        data["output_dir"] = str(Path(cfg.output_dir) / f"run_{i:03d}")
        data.setdefault("seed", cfg.seed)
        try:
            out.append(config_from_dict(data))
        except (ConfigError, TypeError) as exc:
            raise ConfigError(f"sweep[{i}].{exc}") from exc
    return out


# outputs --------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool


@dataclass(frozen=True)
class RunManifest:
    config: dict
    version: str
    schema_version: str
    wall_clock_s: float
    files: tuple[dict, ...]
    checks: tuple[Check, ...]
    rollup: bool
    blowup: dict | None = None
    children: tuple[dict, ...] = ()

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "version": self.version,
            "schema_version": self.schema_version,
            "schemas": SCHEMAS,
            "wall_clock_s": self.wall_clock_s,
            "files": list(self.files),
            "checks": [dataclasses.asdict(c) for c in self.checks],
            "rollup": self.rollup,
            "blowup": self.blowup,
            "children": list(self.children),
        }


class _Outputs:
    def __init__(self, root: Path):
        self.root = root
        root.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def text(self, name: str, content: str) -> None:
        path = self.root / name
        path.write_text(content)
        self.written.append(path)

    def csv(self, name: str, header: Sequence[str], rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        self.text(name, buf.getvalue())

    def jsonl(self, name: str, header: Sequence[str], rows) -> None:
        lines = [json.dumps({k: _json_value(v) for k, v in zip(header, row)}) for row in rows]
        self.text(name, "\n".join(lines) + "\n")

    def snapshot(self, name: str, u) -> None:
        path = self.root / name
        save_binary(u, path)
        self.written.append(path)

    def inventory(self) -> tuple[dict, ...]:
        out = []
        for path in sorted(self.written):
            data = path.read_bytes()
            out.append({
                "path": str(path.relative_to(self.root)),
                "sha256": hashlib.sha256(data).hexdigest(),
                "bytes": len(data),
            })
        return tuple(out)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return v if math.isfinite(v) else None


def _gnuplot(title: str, data: str, ylabel: str, curves: Sequence[tuple[int, str]],
             log: bool = False, xcol: int = 1) -> str:
    lines = [
        "# gnuplot script; run with: gnuplot -p <this file>",
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
        "set xlabel 't'",
        f"set ylabel '{ylabel}'",
    ]
    if log:
        lines.append("set logscale y")
    plots = [f"'{data}' using {xcol}:{col} with lines title '{label}'" for col, label in curves]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def _check(name: str, value: float, threshold: float, passed: bool) -> Check:
    return Check(name, float(value), float(threshold), bool(passed))


# scenarios ----------------------------------------------------------------------

def _run_identities(cfg: ScenarioConfig, out: _Outputs) -> list[Check]:
    suite = identity_suite(seed=cfg.seed, count=cfg.suite.count, length=cfg.grid.length, n=cfg.grid.n,
                           c=cfg.profile.c, n_moll=cfg.suite.n_moll)
    rows = []
    for i, reports in enumerate(suite):
        for r in reports:
            row = r.row()
            rows.append([i, *[row[k] for k in CSV_FIELDS]])
    out.csv("identities.csv", ["field", *CSV_FIELDS], rows)
    names = [r.name for r in suite[0]]
    resid = {name: [] for name in names}
    for reports in suite:
        for r in reports:
            resid[r.name].append(r)
    checks = []
    for name in names:
        reps = resid[name]
        if reps[0].kind == "identity":
            worst, threshold = max(r.rel_residual for r in reps), reps[0].tolerance
        else:
            worst, threshold = max(r.lhs / r.rhs if r.rhs > 0 else math.inf for r in reps), 1.0
        checks.append(_check(f"{name}:all_pass", worst, threshold, all(r.passed for r in reps)))
    idx_rows = [[i, *[r.rel_residual for r in reports if r.kind == "identity"]] for i, reports in enumerate(suite)]
    id_names = [r.name for r in suite[0] if r.kind == "identity"]
    out.csv("identity_residuals.csv", ["field", *id_names], idx_rows)
    out.text("identities.gp", _gnuplot(
        "relative residuals per field", "identity_residuals.csv", "relative residual",
        [(2 + j, name) for j, name in enumerate(id_names)], log=True,
    ).replace("set xlabel 't'", "set xlabel 'field'"))
    return checks


def _run_single(cfg: ScenarioConfig, out: _Outputs) -> list[Check]:
    p, tm = cfg.profile, cfg.time
    pert = None if p.perturbation is None else p.perturbation.build()
    run = run_single_peakon(
        c=p.c, length=cfg.grid.length, n=cfg.grid.n, n_moll=p.n_moll, pert=pert, delta=p.delta,
        T=tm.T, out_every=tm.out_every, flt=cfg.flt, track_flow=cfg.diagnostics.track_flow,
        cfl=tm.cfl, sign_width=cfg.sign_width,
    )
    header = SCHEMAS["series.csv (single_peakon)"]
    rows = list(zip(run.times, run.xi, run.h_distance, run.linf_distance, run.max_abs_u, run.y_l1,
                    run.certified, run.x0, run.window_mass, run.window_bound, run.M, run.E, run.F))
    out.csv("series.csv", header, rows)
    out.jsonl("diagnostics.jsonl", header, rows)
    if run.x0_flow is not None:
        out.csv("flow.csv", ["t", "x0_flow"], zip(run.times, run.x0_flow))
    if cfg.diagnostics.snapshots:
        out.snapshot("u_final.bin", run.u_final)
    out.text("distance.gp", _gnuplot("H and L-inf distance to the peakon at xi(t)", "series.csv",
                                     "distance", [(3, "h_distance"), (4, "linf_distance")], log=True))
    out.text("conserved.gp", _gnuplot("conserved quantities", "series.csv", "value",
                                      [(11, "M"), (12, "E"), (13, "F")]))
    d0 = run.initial_distance
    h_env = 20 * math.sqrt(d0)
    c_inf = linf_envelope_constant(run)
    ap = a_priori_checks(run)
    return [
        _check("sign_certified_all", float(np.mean(run.certified)), 1.0, bool(np.all(run.certified))),
        _check("h_distance_envelope", float(np.max(run.h_distance)), h_env, float(np.max(run.h_distance)) <= h_env),
        _check("linf_envelope_constant", c_inf, 8 * (2 + p.c) ** 2, c_inf <= 8 * (2 + p.c) ** 2),
        _check("linf_a_priori", ap["linf_margin"], 1.0, ap["linf_ok"]),
        _check("ymass_a_priori", ap["ymass_margin"], 1.0, ap["ymass_ok"]),
    ]


def _run_trains(cfg: ScenarioConfig, out: _Outputs) -> list[Check]:
    p, tm = cfg.profile, cfg.time
    spec = cfg.train_spec
    pert = None if p.perturbation is None else p.perturbation.build()
    run = run_train(spec, cfg.grid.length, cfg.grid.n, n_moll=p.n_moll, pert=pert, delta=p.delta,
                    T=tm.T, out_every=tm.out_every, flt=cfg.flt, cfl=tm.cfl, sign_width=cfg.sign_width)
    nb = spec.size
    header = ["t", *[f"xi_{j}" for j in spec.labels], "h_distance", "max_abs_u", "y_l1", "certified"]
    rows = [[t, *xi, h, m, y, ok] for t, xi, h, m, y, ok in
            zip(run.times, run.xi, run.h_distance, run.max_abs_u, run.y_l1, run.certified)]
    out.csv("series.csv", header, rows)
    out.jsonl("diagnostics.jsonl", header, rows)
    if cfg.diagnostics.snapshots:
        out.snapshot("u_final.bin", run.u_final)
    out.text("positions.gp", _gnuplot("tracked bump positions", "series.csv", "x",
                                      [(2 + j, f"xi_{lab}") for j, lab in enumerate(spec.labels)]))
    out.text("distance.gp", _gnuplot("H distance to the tracked train", "series.csv", "distance",
                                     [(2 + nb, "h_distance")], log=True))
    c = spec.velocities
    slope_min = 0.9 * (c[-1] - c[0]) / 2
    slope = run.gap_slope(t_from=min(2.0, tm.T / 2)) if len(run.times) > 2 and nb > 1 else math.nan
    d0, dT = float(run.h_distance[0]), float(run.h_distance[-1])
    # tail constant fixed a priori at 1
    bound = 5 * d0 + spec.separation ** (-1 / 8)
    ap = a_priori_checks(run)
    checks = [
        _check("ordered", float(np.min(np.diff(run.xi, axis=1))) if nb > 1 else 0.0, 0.0, run.ordered),
        _check("sign_certified_all", float(np.mean(run.certified)), 1.0, bool(np.all(run.certified))),
        _check("terminal_distance", dT, bound, dT <= bound),
        _check("linf_a_priori", ap["linf_margin"], 1.0, ap["linf_ok"]),
        _check("ymass_a_priori", ap["ymass_margin"], 1.0, ap["ymass_ok"]),
    ]
    if nb > 1:
        checks.insert(1, _check("gap_growth_slope", slope, slope_min, slope >= slope_min))
    return checks


def _run_shock(cfg: ScenarioConfig, out: _Outputs) -> list[Check]:
    tm = cfg.time
    run = run_shock(cfg.profile.k, cfg.grid.length, cfg.grid.n, tm.T, tm.out_every, cfg.flt, tm.cfl)
    header = SCHEMAS["series.csv (shock)"]
    rows = list(zip(run.times, run.amplitude, run.exact, run.max_abs_u))
    out.csv("series.csv", header, rows)
    out.jsonl("diagnostics.jsonl", header, rows)
    if cfg.diagnostics.snapshots:
        out.snapshot("u_final.bin", run.u_final)
    out.text("amplitude.gp", _gnuplot("shock amplitude against 1/(t+k)", "series.csv", "amplitude",
                                      [(2, "amplitude"), (3, "exact"), (4, "max_abs_u")]))
    err = float(np.max(run.rel_error))
    return [_check("amplitude_tracks_exact", err, 0.05, err <= 0.05)]


_RUNNERS = {
    "identities": _run_identities,
    "single_peakon": _run_single,
    "antipeakon_peakon": _run_trains,
    "train": _run_trains,
    "shock": _run_shock,
}


def _finish(cfg, out: _Outputs, start: float, checks, blowup=None, children=()) -> RunManifest:
    out.csv("checks.csv", SCHEMAS["checks.csv"], [(c.name, c.value, c.threshold, c.passed) for c in checks])
    manifest = RunManifest(
        config=cfg.to_dict(), version=__version__, schema_version=SCHEMA_VERSION,
        wall_clock_s=time.perf_counter() - start, files=out.inventory(), checks=tuple(checks),
        rollup=blowup is None and bool(checks) and all(c.passed for c in checks),
        blowup=blowup, children=tuple(children),
    )
    (out.root / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    return manifest


def _run_child(data: dict) -> dict:
    return run(config_from_dict(data)).to_dict()


def run(cfg: ScenarioConfig, jobs: int = 1) -> RunManifest:
    """Execute a validated scenario, write its outputs and ``manifest.json``."""
    problems = validate(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
    start = time.perf_counter()
    out = _Outputs(Path(cfg.output_dir))
    if cfg.scenario == "sweep":
        children = expand_sweep(cfg)
        payload = [c.to_dict() for c in children]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_run_child, payload))
        else:
            results = [_run_child(d) for d in payload]
        checks = [
            _check(f"run_{i:03d}", sum(1 for c in r["checks"] if c["passed"]), len(r["checks"]), r["rollup"])
            for i, r in enumerate(results)
        ]
        summary = [{"output_dir": r["config"]["output_dir"], "rollup": r["rollup"],
                    "manifest_files": r["files"]} for r in results]
        return _finish(cfg, out, start, checks, children=summary)
    try:
        checks = _RUNNERS[cfg.scenario](cfg, out)
        blowup = None
    except BlowUp as exc:
        checks = []
        blowup = {"message": str(exc), "t": exc.t, "step": exc.step}
    return _finish(cfg, out, start, checks, blowup)


# command line ------------------------------------------------------------------------

_COMMAND_SCENARIOS = {
    "identities": ("identities",),
    "simulate": EVOLUTION_SCENARIOS,
    "sweep": ("sweep",),
}


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    override = getattr(args, "output_dir", None) or os.environ.get("DP_OUTPUT_DIR")
    if override:
        cfg = dataclasses.replace(cfg, output_dir=override)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="dp", description="Degasperis-Procesi numerical lab")
    parser.add_argument("--version", action="version", version=f"dp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("identities", "run the randomized identity suite"),
        ("simulate", "run one evolution scenario"),
        ("sweep", "run a parameter sweep"),
        ("validate", "check a config without running it"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON scenario file")
        if name != "validate":
            p.add_argument("--output-dir", help="override output_dir")
        if name == "sweep":
            p.add_argument("--jobs", type=int, default=1, help="worker processes")
    args = parser.parse_args(argv)

    try:
        cfg = _load(args)
    except (ConfigError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "validate":
        problems = validate(cfg)
        for problem in problems:
            print(problem)
        if not problems:
            print("ok")
        return 0 if not problems else 1
    allowed = _COMMAND_SCENARIOS[args.command]
    if cfg.scenario not in allowed:
        print(f"error: scenario: `dp {args.command}` runs {', '.join(allowed)}, got {cfg.scenario!r}",
              file=sys.stderr)
        return 2
    try:
        manifest = run(cfg, jobs=getattr(args, "jobs", 1))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for c in manifest.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} value={c.value:.6g} threshold={c.threshold:.6g}")
    if manifest.blowup:
        print(f"BLOWUP {manifest.blowup['message']}")
    print(f"rollup={'true' if manifest.rollup else 'false'} manifest={Path(cfg.output_dir) / 'manifest.json'}")
    return 0 if manifest.rollup else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
