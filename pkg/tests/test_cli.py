import csv
import hashlib
import json
import os
import subprocess
import sys

import pytest
import yaml

from levyholder import cli
from levyholder import config as cf
from levyholder.errors import ConfigError, PreconditionError

import oracles


def stable_riesz(alpha=1.0, beta=0.5, **extra):
    cfg = {"schema": cf.SCHEMA,
           "model": {"family": "isotropic_stable", "params": {"alpha": alpha}},
           "measure": {"family": "riesz_like", "params": {"beta": beta}},
           "kernel": "heat", "horizon": 1.0, "stages": ["indices"],
           "indices": {"kernel_indices": False}}
    cfg.update(extra)
    return cfg


def write(tmp_path, cfg, name="exp.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def file_hashes(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for f in files:
            p = os.path.join(dirpath, f)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, root)] = hashlib.sha256(fh.read()).hexdigest()
    return out


# --- config validation ---

def test_validate_ok(tmp_path, capsys):
    assert cli.main(["validate", write(tmp_path, stable_riesz())]) == 0
    assert capsys.readouterr().out.startswith("ok ")


@pytest.mark.parametrize("patch", [
    {"stages": ["classify"]},
    {"stages": ["variogram"], "variogram": {"mode": "empirical"}},
    {"stages": ["fly"]},
    {"kernel": "schrodinger"},
    {"horizon": -1},
    {"seed": -3},
    {"replicas": 0},
    {"schema": "other/9"},
    {"stages": ["simulate"]},
])
def test_validate_rejects(tmp_path, patch):
    assert cli.main(["validate", write(tmp_path, stable_riesz(**patch))]) == cli.EXIT_CONFIG


def test_parse_errors_carry_stage():
    with pytest.raises(ConfigError) as info:
        cf.parse(stable_riesz(stages=["classify"]))
    assert info.value.stage == "validate"


def test_missing_file_is_config_error(tmp_path):
    assert cli.main(["run", str(tmp_path / "nope.yaml")]) == cli.EXIT_CONFIG


def test_grids_required_for_simulation():
    with pytest.raises(ConfigError):
        cf.parse(stable_riesz(stages=["simulate"], grids={"time": [0.5]}))
    cfg = cf.parse(stable_riesz(stages=["simulate"], grids={"time": {"start": 0.1, "stop": 0.5, "num": 5},
                                                           "space": [0.0, 0.5]}))
    assert cfg.time_grid().size == 5


# --- run ---

def test_diagnose_brownian(tmp_path):
    cfg = stable_riesz(stages=["diagnose"])
    cfg["model"] = {"family": "brownian"}
    report, out = cli.run(cfg, str(tmp_path))
    assert report["stages"]["diagnose"]["bochner_ratio"] == pytest.approx(0.5, abs=1e-3)
    assert os.path.exists(os.path.join(out, "report.json"))


def test_dalang_failure_exit_code(tmp_path, capsys):
    path = write(tmp_path, stable_riesz(0.5, 0.25))
    assert cli.main(["run", path, "--out", str(tmp_path / "o")]) == cli.EXIT_PRECONDITION
    assert "Dalang" in capsys.readouterr().err
    with pytest.raises(PreconditionError) as info:
        cli.run(stable_riesz(0.5, 0.25), str(tmp_path / "o"))
    assert info.value.stage == "indices"
    digest = cf.digest(stable_riesz(0.5, 0.25))
    with open(tmp_path / "o" / digest / "report.json") as fh:
        assert json.load(fh)["error"]["stage"] == "indices"


def test_exit_code_mapping():
    from levyholder import errors as er
    assert cli.exit_code(er.PreconditionError("x")) == 4
    assert cli.exit_code(er.IndeterminateError("x")) == 3
    assert cli.exit_code(er.DegenerateTableError("x")) == 3
    assert cli.exit_code(er.ConfigError("x")) == 2
    assert cli.exit_code(er.StepSizeError("x")) == 2
    assert len({cli.EXIT_OK, cli.EXIT_CONFIG, cli.EXIT_INDETERMINATE, cli.EXIT_PRECONDITION}) == 4


FULL = stable_riesz(1.0, 0.5, stages=["indices", "simulate", "variogram", "classify"], seed=7, replicas=20,
                    indices={"kernel_indices": False}, lattice={"n_modes": 64},
                    grids={"time": {"start": 0.25, "stop": 1.0, "num": 4}, "space": {"start": 0, "stop": 1, "num": 5}},
                    variogram={"mode": "exact", "base_times": [1.0]})


def test_full_pipeline_agrees(tmp_path):
    report, out = cli.run(FULL, str(tmp_path))
    assert report["stages"]["classify"]["agreement"] == {"time": "agree", "space": "agree"}
    for rel in ("tables/indices.csv", "tables/variogram_time.csv", "tables/variogram_space.csv",
                "tables/classification.csv", "tables/field_replica0.csv", "fields/linear.bin", "fields/linear.json"):
        assert os.path.exists(os.path.join(out, rel)), rel
    assert os.path.basename(out) == cf.digest(FULL)
    assert report["config_digest"] == cf.digest(FULL)
    assert report["version"]
    prov = report["stages"]["indices"]["provenance"]
    assert {"log_cutoffs", "bisection_budget", "probe_range", "quadrature_nodes"} <= set(prov)
    assert "truncation_error" in report["provenance"]["lattice"]


def test_rerun_is_bit_identical(tmp_path):
    _, a = cli.run(FULL, str(tmp_path / "a"))
    _, b = cli.run(FULL, str(tmp_path / "b"))
    assert file_hashes(a) == file_hashes(b)


def test_seed_override_changes_digest_and_field(tmp_path):
    path = write(tmp_path, FULL)
    assert cli.main(["run", path, "--out", str(tmp_path / "x"), "--seed", "8", "--threads", "1"]) == 0
    assert (tmp_path / "x" / cf.digest(dict(FULL, seed=8))).is_dir()


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cf.OUT_ENV, str(tmp_path / "env"))
    _, out = cli.run(stable_riesz(1.5, 0.5))
    assert out.startswith(str(tmp_path / "env"))


def test_csv_numbers_use_17_digits(tmp_path):
    _, out = cli.run(stable_riesz(1.5, 0.5), str(tmp_path))
    row = read_csv(os.path.join(out, "tables", "indices.csv"))[0]
    assert float(row["ind_H"]) == json.load(open(os.path.join(out, "report.json")))["stages"]["indices"]["ind_H"]["value"]
    assert cf.format_number(0.1) == "0.10000000000000001"
    assert cf.write_csv([{"a": 1, "b": 0.5, "c": True}]) == "a,b,c\n1,0.5,true\n"


def test_nonlinear_stage(tmp_path):
    cfg = stable_riesz(1.5, 0.5, stages=["nonlinear"], lattice={"n_modes": 32}, replicas=2,
                       grids={"time": {"start": 0.0, "stop": 0.5, "num": 11},
                              "space": {"start": 0.0, "stop": 6.0, "num": 16}},
                       nonlinear={"g": {"kind": "constant", "a0": 2.0}, "noise": False})
    report, out = cli.run(cfg, str(tmp_path))
    assert report["stages"]["nonlinear"]["shape"] == [2, 11, 16]
    with pytest.raises(ConfigError):
        cli.run(dict(cfg, kernel="wave"), str(tmp_path))


# --- sweep ---

def test_sweep_beta_matches_oracle(tmp_path):
    rows, _, out = cli.sweep(stable_riesz(1.0, 0.5), "measure.params.beta", [0.25, 0.5, 1.0], str(tmp_path))
    for r, beta in zip(rows, [0.25, 0.5, 1.0]):
        assert r["status"] == "ok"
        assert abs(r["ind_L"] - oracles.golden_ind_l(1.0, beta)) <= 0.02
    table = read_csv(os.path.join(out, "tables", "sweep.csv"))
    assert [float(r["value"]) for r in table] == [0.25, 0.5, 1.0]


def test_sweep_alpha_records_failures(tmp_path):
    rows, _, _ = cli.sweep(stable_riesz(1.0, 0.25), "model.params.alpha", [0.5, 1.0, 1.5], str(tmp_path))
    assert rows[0]["status"] == f"exit_{cli.EXIT_PRECONDITION}" and "Dalang" in rows[0]["error"]
    for r, alpha in zip(rows[1:], [1.0, 1.5]):
        assert r["status"] == "ok"
        assert abs(r["ind_H"] - oracles.golden_ind_h(alpha, 0.25)) <= 0.02


def test_empty_sweep(tmp_path, capsys):
    path = write(tmp_path, stable_riesz())
    assert cli.main(["sweep", path, "--param", "measure.params.beta", "--values", "", "--out", str(tmp_path)]) == 0
    out_dir = capsys.readouterr().out.split()[0]
    with open(os.path.join(out_dir, "tables", "sweep.csv")) as fh:
        assert fh.read().count("\n") == 1


def test_sweep_bad_path(tmp_path):
    path = write(tmp_path, stable_riesz())
    assert cli.main(["sweep", path, "--param", "model.params.gamma", "--values", "1,2"]) == cli.EXIT_CONFIG


def test_value_parsing():
    assert cli._parse_values("0.5, 1, 1.5") == [0.5, 1, 1.5]
    assert cli._parse_values("[0.25, 0.5]") == [0.25, 0.5]
    assert cli._parse_values("  ") == []


def test_module_entry_point(tmp_path):
    path = write(tmp_path, stable_riesz())
    res = subprocess.run([sys.executable, "-m", "levyholder", "validate", path], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("ok ")
