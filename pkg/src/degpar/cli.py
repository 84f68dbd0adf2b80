"""Command-line entry point.

    degpar exponents --alpha 1/2 --dim 3
    degpar nondeg --set problem=tt_example --set params.l=2 --set seed=0
    degpar solve --set problem=burgers_1d --set cells=[1024] --set T=0.5 --set eps=0
    degpar spectral --set input=out/trajectory.dgpr
    degpar pipeline --config experiment.json --set seed=7

Exit status: 0 on success or PASS, 2 on a FAIL verdict, 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .exponents import proof_parameters
from .nondeg import estimate_alpha
from .pipeline import (
    COMMANDS,
    ConfigError,
    ExperimentConfig,
    StageError,
    dump_json,
    parse_number,
    run_pipeline,
    write_rows,
)
from .solver import make_initial, solve
from .spectral import block_norms, build_partition, max_j, sobolev_estimate
from .trajio import export_csv, read_trajectory, write_trajectory

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

ALIASES = {
    "--alpha": "alpha",
    "--dim": "d",
    "--c": "c",
    "--problem": "problem",
    "--params": "params",
    "--delta-min": "delta_min",
    "--delta-max": "delta_max",
    "--n-sphere": "n_sphere",
    "--seed": "seed",
    "--input": "input",
    "--format": "format",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="degpar", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="JSON experiment config")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override one config field (repeatable; JSON values)")
    ap.add_argument("--output", help="output directory (overrides config)")
    ap.add_argument("-v", "--verbose", action="store_true")
    shortcuts = ap.add_argument_group("shortcuts", "each flag is equivalent to --set on the named field")
    for flag, key in ALIASES.items():
        shortcuts.add_argument(flag, dest=f"alias_{key}", metavar=key.upper(), help=f"same as --set {key}=...")
    return ap


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    extra = [f"{key}={getattr(args, f'alias_{key}')}" for key in ALIASES.values()
             if getattr(args, f"alias_{key}") is not None]
    extra.append(f"command={json.dumps(args.command)}")
    if args.output:
        extra.append(f"output={json.dumps(args.output)}")
    cfg = cfg.with_overrides(list(args.overrides) + extra)
    cfg.validate()
    return cfg


def cmd_exponents(cfg: ExperimentConfig) -> int:
    c = None if cfg.c is None else parse_number(cfg.c)
    params = proof_parameters(parse_number(cfg.alpha), int(cfg.d), c)
    params.check()
    print(json.dumps(params.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_nondeg(cfg: ExperimentConfig) -> int:
    spec = cfg.problem_spec()
    rep = estimate_alpha(spec, spec.interval, cfg.delta_min, cfg.delta_max, cfg.n_delta,
                         cfg.n_sphere, cfg.n_lambda, cfg.seed)
    out = _outdir(cfg)
    dump_json(out / "nondeg.json", rep.to_dict())
    write_rows(out / "measure_vs_delta.csv", ["x", "y"], zip(rep.deltas, rep.sup_measures))
    print(f"alpha_hat={rep.alpha_hat:.4f} R^2={rep.r_squared:.5f} elliptic={rep.elliptic}")
    return EXIT_OK


def cmd_solve(cfg: ExperimentConfig) -> int:
    spec = cfg.problem_spec()
    grid = cfg.grid(spec)
    eps = float(cfg.eps if cfg.eps is not None else cfg.viscosities[-1])
    traj = solve(spec, grid, eps, make_initial(cfg.initial_descriptor(spec), grid), cfg.T, cfg.save_times)
    out = _outdir(cfg)
    write_trajectory(traj, out / "trajectory.dgpr")
    export_csv(traj, out)
    meta = {k: v for k, v in traj.meta.items() if k != "mass"}
    print(json.dumps(meta, sort_keys=True))
    return EXIT_OK


def cmd_spectral(cfg: ExperimentConfig) -> int:
    if cfg.input:
        fld = read_trajectory(cfg.input).final
    else:
        spec = cfg.problem_spec()
        fld = make_initial(cfg.initial_descriptor(spec), cfg.grid(spec))
    grid = fld.grid
    part = build_partition(grid.dim, cfg.j_max if cfg.j_max is not None else max_j(grid))
    sp = block_norms(fld, part, cfg.q, window=cfg.window)
    out = _outdir(cfg)
    write_rows(out / "spectrum.csv", ["K", "norm", "log2_norm", "informative"], sp.csv_rows())
    record = sp.to_dict()
    try:
        record["sobolev"] = sobolev_estimate(sp).to_dict()
    except ValueError as exc:
        record["sobolev"] = {"error": str(exc)}
    dump_json(out / "spectrum.json", record)
    print(f"slope={sp.slope:.4f} R^2={sp.r_squared:.4f} super_algebraic={sp.super_algebraic}")
    return EXIT_OK


def cmd_pipeline(cfg: ExperimentConfig) -> int:
    report = run_pipeline(cfg)
    v = report.verdict
    print(f"s_hat={v['s_hat']:.6g} s_star={v['s_star']:.6g} margin={v['margin']:.6g} "
          f"verdict={'PASS' if v['pass'] else 'FAIL'}")
    return EXIT_OK if v["pass"] else EXIT_FAIL


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


HANDLERS = {
    "exponents": cmd_exponents,
    "nondeg": cmd_nondeg,
    "solve": cmd_solve,
    "spectral": cmd_spectral,
    "pipeline": cmd_pipeline,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, which would read as a FAIL verdict
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        return HANDLERS[cfg.command](cfg)
    except (StageError, ConfigError, ValueError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
