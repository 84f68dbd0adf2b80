"""Experiment configuration, the end-to-end regularity pipeline and report emission."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import platform
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import scipy

from . import __version__
from .exponents import proof_parameters
from .nondeg import estimate_alpha
from .problem import builtin_names, builtin_problem
from .solver import Grid, compactness_diagnostic, dissipation_diagnostic, make_initial, velocity_average, viscosity_sweep
from .spectral import block_norms, build_partition, max_j, sobolev_estimate
from .trajio import write_trajectory

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
COMMANDS = ("exponents", "nondeg", "solve", "spectral", "pipeline")
STOCHASTIC = ("nondeg", "pipeline")
STAGES = ("nondeg", "exponents", "sweep", "velocity_average", "spectral", "verdict")
PASS_MARGIN = 1e-3
DEFAULT_CELLS = 128
# every s_star lies below this; used when the symbol is elliptic
S_STAR_LIMIT = 1.0 / 3.0
NOTE = (
    "s_star is a guaranteed lower bound on the regularity of velocity averages, not a sharp value; "
    "PASS means the measured decay slope is at least s_star - margin."
)


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException, report: "PipelineReport"):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.report = report


@dataclass
class ExperimentConfig:
    """Flat JSON-serializable experiment description.

    Grid ``box`` and ``initial`` default to the problem's own and ``cells`` to
    128 per axis; ``eps`` is the viscosity for ``solve`` (default: last entry
    of ``viscosities``).
    """

    version: int = CONFIG_VERSION
    command: str = "pipeline"
    problem: str = "tt_example"
    params: dict = field(default_factory=dict)
    cells: list | None = None
    box: list | None = None
    cfl: float = 0.9
    initial: dict | None = None
    viscosities: list = field(default_factory=lambda: [0.08, 0.04, 0.02])
    eps: float | None = None
    T: float = 0.25
    save_times: list | None = None
    delta_min: float = 1e-4
    delta_max: float = 1e-1
    n_delta: int = 12
    n_sphere: int = 4096
    n_lambda: int = 100_000
    lambda_points: int = 1001
    rho: str = "indicator"
    window: str | None = "raised-cosine"
    q: float = 2.0
    j_max: int | None = None
    alpha: Any = None
    d: int | None = None
    c: Any = None
    input: str | None = None
    output: str = "out"
    format: str = "json"
    seed: int | None = None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**dict(data))

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, pairs: Sequence[str]) -> "ExperimentConfig":
        """Apply ``key=value`` overrides; values parse as JSON, else as strings.

        Dotted keys reach into dict fields, e.g. ``params.l=2``.
        """
        data = self.to_dict()
        for pair in pairs:
            key, sep, raw = pair.partition("=")
            if not sep or not key:
                raise ConfigError(f"override must look like key=value, got {pair!r}")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            head, _, sub = key.partition(".")
            if head not in data:
                raise ConfigError(f"unknown config key {head!r}")
            if sub:
                target = dict(data[head] or {})
                target[sub] = value
                data[head] = target
            else:
                data[head] = value
        return type(self).from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> None:
        if self.version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {self.version}")
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.command in STOCHASTIC:
            if self.seed is None:
                raise ConfigError(f"command {self.command!r} samples the sphere; a seed is required")
            if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
                raise ConfigError("seed must be a non-negative integer")
        if self.format not in ("json", "csv-bundle"):
            raise ConfigError("format must be 'json' or 'csv-bundle'")
        if self.command == "exponents":
            if self.alpha is None or self.d is None:
                raise ConfigError("exponents needs alpha and d")
            return
        if self.command == "spectral" and self.input is not None:
            return
        if self.problem not in builtin_names():
            raise ConfigError(f"unknown problem {self.problem!r}; known: {list(builtin_names())}")
        visc = [float(v) for v in self.viscosities]
        if not visc or any(v < 0 for v in visc) or any(b >= a for a, b in zip(visc, visc[1:])):
            raise ConfigError("viscosities must be non-negative and strictly decreasing")
        if self.rho != "indicator":
            raise ConfigError("only rho='indicator' is supported")
        if self.lambda_points < 1000:
            raise ConfigError("lambda_points must be at least 1000")
        if not self.T > 0:
            raise ConfigError("T must be positive")

    def problem_spec(self):
        return builtin_problem(self.problem, self.params)

    def grid(self, spec) -> Grid:
        box = self.box if self.box is not None else spec.box
        cells = self.cells if self.cells is not None else [DEFAULT_CELLS] * spec.dim
        return Grid(tuple(cells), tuple(tuple(b) for b in box), self.cfl)

    def initial_descriptor(self, spec) -> dict:
        return dict(self.initial) if self.initial is not None else dict(spec.initial)

    def embedded(self) -> dict:
        """Config as stored in reports: the output location is excluded."""
        out = self.to_dict()
        out.pop("output")
        return out


def parse_number(value: Any):
    """int, float or 'p/q' string; rationals stay exact."""
    if isinstance(value, str):
        try:
            return Fraction(value)
        except ValueError as exc:
            raise ConfigError(f"not a number: {value!r}") from exc
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return value
    raise ConfigError(f"not a number: {value!r}")


@dataclass
class PipelineReport:
    config: dict
    stages: dict = field(default_factory=lambda: {s: {"status": "pending"} for s in STAGES})
    nondeg: dict | None = None
    exponents: dict | None = None
    trajectories: list | None = None
    compactness: list | None = None
    dissipation: list | None = None
    spectrum: dict | None = None
    sobolev: dict | None = None
    verdict: dict | None = None
    fingerprint: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    note: str = NOTE

    @property
    def complete(self) -> bool:
        return all(s["status"] == "ok" for s in self.stages.values())

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def fingerprint(config: ExperimentConfig) -> dict:
    return {
        "package": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
        "cells": config.cells,
        "seed": config.seed,
    }


def write_rows(path: Path, header: Sequence[str], rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def run_pipeline(config: ExperimentConfig, out_dir: str | Path | None = None) -> PipelineReport:
    """Measure regularity of a velocity average and compare with s_star.

    Stages run in order and each writes its artifact into `out_dir` as soon as
    it finishes.  A failing stage raises :class:`StageError` carrying the
    partial report, after the report and manifest have been emitted.
    """
    config.validate()
    out = Path(out_dir if out_dir is not None else config.output)
    out.mkdir(parents=True, exist_ok=True)
    report = PipelineReport(config=config.embedded(), fingerprint=fingerprint(config))
    spec = config.problem_spec()
    grid = config.grid(spec)
    report.fingerprint["cells"] = list(grid.cells)
    timings: dict[str, float] = {}
    ctx: dict[str, Any] = {}

    def stage_nondeg():
        rep = estimate_alpha(
            spec, spec.interval, config.delta_min, config.delta_max, config.n_delta,
            config.n_sphere, config.n_lambda, config.seed,
        )
        ctx["alpha"] = rep.alpha_hat
        report.nondeg = rep.to_dict()
        dump_json(out / "nondeg.json", report.nondeg)
        write_rows(out / "measure_vs_delta.csv", ["x", "y"], zip(rep.deltas, rep.sup_measures))
        return ["nondeg.json", "measure_vs_delta.csv"]

    def stage_exponents():
        a, d = ctx["alpha"], spec.dim + 1
        if not math.isfinite(a):
            # elliptic symbol: s_star increases to 1/3 as alpha grows
            report.exponents = {"alpha": a, "d": d, "s_star": S_STAR_LIMIT, "limit": True}
        elif not a > 0:
            raise ValueError(f"estimated alpha {a} is not positive")
        else:
            report.exponents = proof_parameters(float(a), d).to_dict()
            report.exponents["limit"] = False
        ctx["s_star"] = report.exponents["s_star"]
        dump_json(out / "exponents.json", report.exponents)
        return ["exponents.json"]

    def stage_sweep():
        u0 = make_initial(config.initial_descriptor(spec), grid)
        trajs = viscosity_sweep(spec, grid, config.viscosities, u0, config.T, config.save_times)
        ctx["trajs"] = trajs
        lam = np.linspace(*spec.interval, config.lambda_points)
        rho = np.ones_like(lam)
        ctx["lam"], ctx["rho"] = lam, rho
        files, meta = [], []
        for i, tr in enumerate(trajs):
            name = f"trajectory_{i}.dgpr"
            write_trajectory(tr, out / name)
            files.append(name)
            m = dict(tr.meta)
            meta.append({
                "epsilon": tr.epsilon, "file": name, "dt": m["dt"], "steps": m["steps"],
                "min": m["min"], "max": m["max"],
                "mass_drift": float(max(abs(x - m["mass"][0]) for x in m["mass"])),
                "times": tr.times,
            })
        report.trajectories = meta
        report.compactness = compactness_diagnostic(trajs, rho, lam) if len(trajs) > 1 else []
        report.dissipation = [
            {k: v for k, v in dissipation_diagnostic(tr, spec).items() if k != "norms"} for tr in trajs
        ]
        write_rows(
            out / "trajectories.csv", ["epsilon", "dt", "steps", "min", "max", "mass_drift"],
            ([m["epsilon"], m["dt"], m["steps"], m["min"], m["max"], m["mass_drift"]] for m in meta),
        )
        return files + ["trajectories.csv"]

    def stage_average():
        final = ctx["trajs"][-1].final
        avg = velocity_average(final, ctx["rho"], ctx["lam"])
        ctx["avg"] = avg
        coords = [c.ravel() for c in grid.mesh()]
        write_rows(
            out / "velocity_average.csv", ["x", "y"][: grid.dim] + ["value"],
            zip(*coords, avg.values.ravel()),
        )
        return ["velocity_average.csv"]

    def stage_spectral():
        j = config.j_max if config.j_max is not None else max_j(grid)
        part = build_partition(grid.dim, j)
        sp = block_norms(ctx["avg"], part, config.q, window=config.window)
        report.spectrum = sp.to_dict()
        write_rows(out / "spectrum.csv", ["K", "norm", "log2_norm", "informative"], sp.csv_rows())
        write_rows(out / "log2norm_vs_K.csv", ["x", "y"], zip(sp.ks, sp.log2_norms))
        est = sobolev_estimate(sp)
        report.sobolev = est.to_dict()
        ctx["s_hat"] = est.s_hat
        return ["spectrum.csv", "log2norm_vs_K.csv"]

    def stage_verdict():
        s_hat, s_star = ctx["s_hat"], ctx["s_star"]
        margin = s_hat - s_star
        report.verdict = {
            "s_hat": s_hat,
            "s_star": s_star,
            "alpha_hat": ctx["alpha"],
            "margin": margin,
            "threshold": PASS_MARGIN,
            "pass": bool(s_hat >= s_star - PASS_MARGIN),
            "super_algebraic": bool(report.sobolev["super_algebraic"]),
            "sources": {
                "s_hat": "spectrum.csv",
                "s_star": "exponents.json",
                "alpha_hat": "nondeg.json",
            },
        }
        return []

    runners = {
        "nondeg": stage_nondeg,
        "exponents": stage_exponents,
        "sweep": stage_sweep,
        "velocity_average": stage_average,
        "spectral": stage_spectral,
        "verdict": stage_verdict,
    }
    for name in STAGES:
        t0 = time.perf_counter()
        try:
            files = runners[name]()
        except Exception as exc:
            report.stages[name] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
            for rest in STAGES[STAGES.index(name) + 1:]:
                report.stages[rest] = {"status": "skipped"}
            report.verdict = None
            timings[name] = time.perf_counter() - t0
            emit_report(report, out, config.format, timings)
            raise StageError(name, exc, report) from exc
        timings[name] = time.perf_counter() - t0
        report.stages[name] = {"status": "ok"}
        report.artifacts[name] = files
        log.info("stage %s done in %.1fs", name, timings[name])
    emit_report(report, out, config.format, timings)
    return report


def dump_json(path: Path, obj) -> Path:
    # allow_nan keeps inf (elliptic alpha, super-algebraic slope) round-trippable
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return path


def emit_report(
    report: PipelineReport,
    out_dir: str | Path,
    fmt: str = "json",
    timings: Mapping[str, float] | None = None,
) -> list[Path]:
    """Write the report plus a manifest; returns the manifest's file list.

    The report itself carries no timestamp so that reruns are byte-identical;
    wall-clock information lives in ``manifest.json`` only.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    written: list[str] = []
    if fmt == "json":
        dump_json(out / "report.json", report.to_dict())
        written.append("report.json")
    elif fmt == "csv-bundle":
        written += _csv_bundle(report, out)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    # plot series are always part of the bundle, empty if their stage did not run
    for name, data in (
        ("measure_vs_delta.csv", zip(*(report.nondeg[k] for k in ("deltas", "sup_measures"))) if report.nondeg else []),
        ("log2norm_vs_K.csv", zip(*(report.spectrum[k] for k in ("K", "log2_norms"))) if report.spectrum else []),
    ):
        write_rows(out / name, ["x", "y"], data)
        written.append(name)
    for files in report.artifacts.values():
        written += [f for f in files if f not in written]
    missing = [s for s, v in report.stages.items() if v["status"] != "ok"]
    manifest = {
        "files": sorted(set(written)) + ["manifest.json"],
        "stages": report.stages,
        "missing_stages": missing,
        "complete": report.complete,
        "format": fmt,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "timings": dict(timings or {}),
    }
    dump_json(out / "manifest.json", manifest)
    return [out / f for f in manifest["files"]]


def _csv_bundle(report: PipelineReport, out: Path) -> list[str]:
    files = []

    def table(name, header, rows):
        write_rows(out / name, header, rows)
        files.append(name)

    table("config.csv", ["key", "value"], ((k, json.dumps(v)) for k, v in sorted(report.config.items())))
    table("stages.csv", ["stage", "status", "error"],
          ((k, v["status"], v.get("error", "")) for k, v in report.stages.items()))
    table("fingerprint.csv", ["key", "value"], sorted(report.fingerprint.items()))
    if report.nondeg:
        nd = report.nondeg
        table("nondeg.csv", ["delta", "sup_measure"], zip(nd["deltas"], nd["sup_measures"]))
    if report.exponents:
        table("exponents.csv", ["name", "value"],
              ((k, v) for k, v in sorted(report.exponents.items()) if not isinstance(v, dict)))
    if report.trajectories:
        table("trajectories.csv", ["epsilon", "dt", "steps", "min", "max", "mass_drift"],
              ([m[k] for k in ("epsilon", "dt", "steps", "min", "max", "mass_drift")] for m in report.trajectories))
    if report.compactness:
        table("compactness.csv", ["eps_coarse", "eps_fine", "time", "l1"],
              ([r[k] for k in ("eps_coarse", "eps_fine", "time", "l1")] for r in report.compactness))
    if report.dissipation:
        table("dissipation.csv", ["epsilon", "max_norm"], ([r["epsilon"], r["max_norm"]] for r in report.dissipation))
    if report.spectrum:
        sp = report.spectrum
        table("spectrum.csv", ["K", "norm", "log2_norm", "informative"],
              zip(sp["K"], sp["norms"], sp["log2_norms"], map(int, sp["informative"])))
    if report.verdict:
        table("verdict.csv", ["key", "value"],
              ((k, v) for k, v in sorted(report.verdict.items()) if not isinstance(v, dict)))
    return files


def load_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
