import csv
import json

import numpy as np
import pytest

from mpqmc.cli import main
from mpqmc.errors import ConfigError
from mpqmc.runner import (ExperimentSpec, checkpoints_for, default_workers, fmt, output_root,
                          run_experiment)

SMALL_SPEC = """
[experiment]
name = "tiny"
replicates = 3
seed = 40
target = {{ kind = "gaussian", mean = [0.5], cov = [[1.0]] }}
kernel = {{ kind = "independent", init_mean = [0.0], init_cov = [[4.0]] }}
x0 = [0.0]
N_values = [4, 8, 16]
L = 64

[[experiment.variants]]
name = "psr"
mode = "importance"
driving = "pseudo_random"

[[experiment.variants]]
name = "qmc"
mode = "importance"
driving = "cud_lfsr"
{extra}compare_to = "psr"
"""

RUN_CONFIG = """
seed = 3
[target]
kind = "gaussian"
mean = [0.0, 1.0]
[kernel]
kind = "random_walk"
init_cov = [0.5, 0.5]
[sampler]
N = 4
L = 50
M = 2
[driving]
kind = "pseudo_random"
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_sample_writes_outputs(tmp_path, capsys):
    cfg = write(tmp_path, "run.toml", RUN_CONFIG)
    assert main(["sample", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    out = tmp_path / "a"
    with open(out / "samples.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iter", "m", "coord_0", "coord_1"] and len(rows) == 101
    with open(out / "diagnostics.csv", newline="") as fh:
        head = next(csv.reader(fh))
    assert head[:3] == ["iter", "acpt_rate", "msjd"] and "trace_Sigma" in head
    meta = json.loads((out / "meta.json").read_text())
    assert meta["config"]["N"] == 4 and "config_hash" in meta
    # byte-identical rerun with another worker count
    assert main(["sample", "--config", cfg, "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    for f in ("samples.csv", "diagnostics.csv", "meta.json"):
        assert (out / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_experiment_determinism_and_metrics(tmp_path, capsys):
    spec = write(tmp_path, "exp.toml", SMALL_SPEC.format(extra=""))
    assert main(["experiment", "--spec", spec, "--out", str(tmp_path / "one")]) == 0
    assert main(["experiment", "--spec", spec, "--out", str(tmp_path / "two"),
                 "--workers", "2", "--checkpoints", "1"]) == 0
    a = (tmp_path / "one" / "metrics.csv").read_bytes()
    assert a == (tmp_path / "two" / "metrics.csv").read_bytes()
    assert b"\r\n" in a
    with open(tmp_path / "one" / "metrics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"experiment", "n", "N", "variant", "metric", "value", "stderr"}
    metrics = {r["metric"] for r in rows}
    assert {"variance", "bias2", "mse", "msd", "rate_mse", "reduction_mse"} <= metrics
    meta = json.loads((tmp_path / "one" / "meta.json").read_text())
    assert meta["seeds"]["psr/N=4"] == [40, 41, 42]
    out = capsys.readouterr().out
    assert "reduction_mse" in out
    assert main(["report", "--in", str(tmp_path / "one")]) == 0


def test_empty_variant_list_is_config_error(tmp_path, capsys):
    spec = write(tmp_path, "bad.toml", """
[experiment]
name = "empty"
target = { kind = "gaussian" }
kernel = { kind = "independent" }
N_values = [4]
variants = []
""")
    assert main(["experiment", "--spec", spec, "--out", str(tmp_path / "x")]) == 1
    assert capsys.readouterr().err.startswith("error[config]")


def test_cud_budget_fails_before_sampling(tmp_path, capsys):
    spec = write(tmp_path, "big.toml", SMALL_SPEC.format(extra="m = 10\n").replace(
        "L = 64", "L = 5000"))
    assert main(["experiment", "--spec", spec, "--out", str(tmp_path / "x")]) == 1
    assert "CUD budget" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()


def test_unknown_keys_and_arguments(tmp_path, capsys):
    with pytest.raises(ConfigError):
        ExperimentSpec.from_dict({"name": "x", "target": {}, "kernel": {}, "variants": [{}],
                                  "N_values": [1], "colour": "red"})
    assert main(["bogus"]) == 1
    assert main(["report", "--in", str(tmp_path / "missing")]) == 1
    cfg = write(tmp_path, "bad.toml", RUN_CONFIG.replace('"random_walk"', '"hmc"'))
    assert main(["sample", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


def test_runtime_error_exit_code(tmp_path, capsys):
    # a start outside the support has zero density
    cfg = write(tmp_path, "zero.toml", """
seed = 1
x0 = [-1.0, 1.0, 1.0, 1.0]
[target]
kind = "lotka_volterra"
n_obs = 5
[kernel]
kind = "random_walk"
init_cov = 0.01
[sampler]
N = 2
L = 3
[driving]
kind = "pseudo_random"
""")
    assert main(["sample", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert capsys.readouterr().err.startswith("error[runtime]")


def test_cud_gen_and_check(tmp_path, capsys):
    seq = tmp_path / "u.csv"
    assert main(["cud", "gen", "--kind", "lfsr", "--m", "10", "--out", str(seq)]) == 0
    assert len(seq.read_text().splitlines()) == 1024
    assert main(["cud", "check", "--in", str(seq), "--d", "2", "--mode", "overlap"]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("n=1022 d=2 mode=overlap star_discrepancy=")
    assert float(line.split("=")[-1]) < 0.05
    vdc = tmp_path / "v.csv"
    assert main(["cud", "gen", "--kind", "vdc", "--n", "64", "--out", str(vdc)]) == 0
    assert main(["cud", "check", "--in", str(vdc), "--mode", "overlap"]) == 0
    assert float(capsys.readouterr().out.split("=")[-1]) >= 0.25
    tup = tmp_path / "t.csv"
    assert main(["cud", "gen", "--m", "10", "--d", "3", "--out", str(tup)]) == 0
    assert np.loadtxt(tup, delimiter=",", skiprows=1).shape[1] == 3
    assert main(["cud", "gen", "--kind", "psr", "--out", str(tup)]) == 1


def test_helpers(tmp_path, monkeypatch):
    assert fmt(0.1) == "0.10000000000000001"
    assert checkpoints_for(1000, 1) == [1000]
    cps = checkpoints_for(1024, 5)
    assert cps[-1] == 1024 and cps == sorted(set(cps))
    monkeypatch.setenv("MPQMC_WORKERS", "3")
    assert default_workers() == 3 and default_workers(2) == 2
    monkeypatch.setenv("MPQMC_OUTPUT_ROOT", str(tmp_path))
    assert output_root("res") == tmp_path / "res"


def test_run_experiment_in_memory():
    spec = {"name": "mem", "replicates": 2, "target": {"kind": "gaussian"},
            "kernel": {"kind": "independent", "init_cov": 4.0}, "N_values": [4], "L": 20,
            "variants": [{"name": "a", "mode": "importance"}]}
    res = run_experiment(spec)
    assert any(r[4] == "mse" for r in res.rows)
    assert res.meta["cells"][0]["L"] == 20
