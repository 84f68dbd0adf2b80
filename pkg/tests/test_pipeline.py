import json
import math

import pytest

from degpar import pipeline
from degpar.cli import main
from degpar.pipeline import ConfigError, ExperimentConfig, StageError, emit_report, load_report, run_pipeline

FAST = {
    "problem": "tt_example",
    "params": {"l": 1, "n": 1},
    "cells": [64, 64],
    "viscosities": [0.08, 0.04],
    "T": 0.05,
    "n_sphere": 1024,
    "n_lambda": 20000,
    "seed": 3,
}


def fast_config(**kw):
    return ExperimentConfig.from_dict({**FAST, **kw})


def same_numbers(a, b):
    """Structural equality with bit-exact floats; tuples and lists compare equal."""
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and all(same_numbers(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)):
        return isinstance(b, (list, tuple)) and len(a) == len(b) and all(map(same_numbers, a, b))
    if isinstance(a, float) and math.isnan(a):
        return isinstance(b, float) and math.isnan(b)
    return a == b and type(a) is type(b)


def test_config_defaults_and_validation():
    cfg = ExperimentConfig()
    assert cfg.version == 1 and cfg.command == "pipeline"
    with pytest.raises(ConfigError, match="seed"):
        cfg.validate()
    cfg.with_overrides(["seed=0"]).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError, match="unknown problem"):
        fast_config(problem="wave").validate()
    with pytest.raises(ConfigError):
        fast_config(viscosities=[0.01, 0.02]).validate()
    with pytest.raises(ConfigError):
        fast_config(seed=True).validate()
    with pytest.raises(ConfigError):
        fast_config(version=2).validate()


def test_overrides_parse_json_and_dotted_keys():
    cfg = ExperimentConfig().with_overrides(["params.l=2", "cells=[32]", "problem=heat", "alpha=1/2"])
    assert cfg.params == {"l": 2}
    assert cfg.cells == [32]
    assert cfg.problem == "heat"
    assert cfg.alpha == "1/2"
    with pytest.raises(ConfigError):
        cfg.with_overrides(["nokey"])
    with pytest.raises(ConfigError):
        cfg.with_overrides(["zzz=1"])


def test_config_file_roundtrip(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(FAST))
    assert ExperimentConfig.from_file(p) == fast_config()
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(p)


def test_missing_seed_fails_before_computation(tmp_path):
    out = tmp_path / "never"
    cfg = fast_config(seed=None)
    with pytest.raises(ConfigError, match="seed"):
        run_pipeline(cfg, out)
    assert not out.exists()


def test_pipeline_small_run(tmp_path):
    rep = run_pipeline(fast_config(), tmp_path / "a")
    assert rep.complete
    v = rep.verdict
    assert v["pass"] and v["s_hat"] >= v["s_star"] - 1e-3
    assert v["margin"] == v["s_hat"] - v["s_star"]
    assert "lower bound" in rep.note
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert len(manifest["files"]) >= 5 and not manifest["missing_stages"]
    for key, src in v["sources"].items():
        assert src in manifest["files"]
    loaded = load_report(tmp_path / "a" / "report.json")
    assert same_numbers(json.loads(json.dumps(rep.to_dict())), loaded)
    assert loaded["verdict"]["s_hat"] == v["s_hat"]
    assert "output" not in loaded["config"]


def test_pipeline_deterministic(tmp_path):
    run_pipeline(fast_config(), tmp_path / "a")
    run_pipeline(fast_config(), tmp_path / "b")
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_heat_pipeline_super_algebraic(tmp_path):
    cfg = fast_config(problem="heat", params={}, cells=[512], viscosities=[0.0])
    rep = run_pipeline(cfg, tmp_path)
    assert rep.nondeg["elliptic"]
    assert rep.sobolev["super_algebraic"]
    assert math.isinf(rep.verdict["s_hat"]) and rep.verdict["pass"]
    # inf survives the JSON round trip
    assert math.isinf(load_report(tmp_path / "report.json")["verdict"]["s_hat"])


def test_partial_report_on_stage_failure(tmp_path):
    cfg = fast_config(initial={"profile": "constant", "value": 5.0})
    with pytest.raises(StageError) as info:
        run_pipeline(cfg, tmp_path)
    assert info.value.stage == "sweep"
    rep = info.value.report
    assert rep.verdict is None and not rep.complete
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["missing_stages"] == ["sweep", "velocity_average", "spectral", "verdict"]
    assert manifest["stages"]["sweep"]["status"] == "failed"
    assert "nondeg.json" in manifest["files"] and (tmp_path / "nondeg.json").exists()


def test_csv_bundle(tmp_path):
    rep = run_pipeline(fast_config(format="csv-bundle"), tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    files = manifest["files"]
    assert len(files) >= 5
    for name in ("measure_vs_delta.csv", "log2norm_vs_K.csv", "spectrum.csv", "verdict.csv", "exponents.csv"):
        assert name in files and (tmp_path / name).exists()
    rows = (tmp_path / "log2norm_vs_K.csv").read_text().splitlines()
    assert rows[0] == "x,y" and len(rows) == 1 + len(rep.spectrum["K"])
    assert not (tmp_path / "report.json").exists()


def test_emit_report_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    rep = pipeline.PipelineReport(config={})
    with pytest.raises(OSError):
        emit_report(rep, blocker / "sub")


# command line


def test_cli_exponents(capsys):
    assert main(["exponents", "--alpha", "1/2", "--dim", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["rational"]["s_star"] == "9/2983"
    assert main(["exponents", "--set", "alpha=1", "--set", "d=2", "--c", "1"]) == 1


def test_cli_nondeg_needs_seed(tmp_path, capsys):
    assert main(["nondeg", "--output", str(tmp_path / "x")]) == 1
    assert "seed" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()


def test_cli_usage_error_is_one():
    assert main(["frobnicate"]) == 1
    assert main(["solve", "--set", "noequals"]) == 1


def test_cli_solve_then_spectral(tmp_path, capsys):
    out = tmp_path / "s"
    code = main(["solve", "--problem", "burgers_1d", "--set", "cells=[256]", "--set", "T=0.2",
                 "--set", "eps=0.0", "--set", "save_times=[0.1,0.2]", "--output", str(out)])
    assert code == 0
    assert (out / "trajectory.dgpr").exists() and (out / "field_002.csv").exists()
    assert json.loads(capsys.readouterr().out)["steps"] > 0
    code = main(["spectral", "--input", str(out / "trajectory.dgpr"), "--set", "window=null",
                 "--output", str(out)])
    assert code == 0
    rows = (out / "spectrum.csv").read_text().splitlines()
    assert rows[0] == "K,norm,log2_norm,informative"


def test_cli_pipeline_pass_and_fail(tmp_path, monkeypatch, tmp_path_factory):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(FAST))
    assert main(["pipeline", "--config", str(cfg), "--output", str(tmp_path / "p")]) == 0
    # an impossible margin turns the same run into a FAIL verdict
    monkeypatch.setattr(pipeline, "PASS_MARGIN", -100.0)
    assert main(["pipeline", "--config", str(cfg), "--output", str(tmp_path / "q")]) == 2
