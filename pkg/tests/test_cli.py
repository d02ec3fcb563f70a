import json
import os

import pandas as pd
import pytest
from click.testing import CliRunner

from main import cli


def write_config(tmp_path, name, config):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


@pytest.fixture
def runner(monkeypatch):
    monkeypatch.delenv("PEAKED_SEED", raising=False)
    monkeypatch.delenv("PEAKED_OUT_DIR", raising=False)
    return CliRunner()


@pytest.fixture
def grover(tmp_path):
    return write_config(tmp_path, "grover.json", {"n_qubits": 4, "T": 1, "shots": 200})


@pytest.fixture
def shallow(tmp_path):
    return write_config(tmp_path, "shallow.json", {"n_qubits": 4, "method": "shallow", "shots": 0})


def test_run_writes_report(runner, grover, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["run", "--config", grover, "--out", str(out), "--quiet"])
    assert result.exit_code == 0, result.output
    with open(out / "grover_n4_T1_s0.json") as f:
        report = json.load(f)
    assert report["c_ab_projected"] == pytest.approx(1.0)
    assert report["shots_used"] == 200
    assert report["config_echo"]["T"] == 1


def test_run_overrides_and_env(runner, grover, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(
        cli,
        ["run", "--config", grover, "--shots", "0", "--format", "csv", "--quiet"],
        env={"PEAKED_SEED": "5", "PEAKED_OUT_DIR": str(out)},
    )
    assert result.exit_code == 0, result.output
    df = pd.read_csv(out / "grover_n4_T1_s5.csv")
    assert df.loc[0, "seed"] == 5
    assert df.loc[0, "shots"] == 0


def test_env_seed_only_fills_missing_seed(runner, tmp_path):
    out = tmp_path / "out"
    seeded = write_config(tmp_path, "seeded.json", {"n_qubits": 4, "T": 1, "shots": 0, "seed": 2})
    env = {"PEAKED_SEED": "5", "PEAKED_OUT_DIR": str(out)}
    result = runner.invoke(cli, ["run", "--config", seeded, "--quiet"], env=env)
    assert result.exit_code == 0, result.output
    assert os.path.exists(out / "grover_n4_T1_s2.json")
    result = runner.invoke(cli, ["run", "--config", seeded, "--seed", "7", "--quiet"], env=env)
    assert result.exit_code == 0, result.output
    assert os.path.exists(out / "grover_n4_T1_s7.json")
    result = runner.invoke(cli, ["run", "--config", seeded, "--quiet"], env={"PEAKED_SEED": "x"})
    assert result.exit_code == 2


def test_run_dumps_trajectories(runner, grover, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(
        cli,
        ["run", "--config", grover, "--noise", "0.001,0.01,20", "--dump-trajectories", "--out", str(out), "--quiet"],
    )
    assert result.exit_code == 0, result.output
    assert len(pd.read_csv(out / "grover_n4_T1_s0_trajectories.csv")) == 20


def test_run_prints_status(runner, shallow, tmp_path):
    result = runner.invoke(cli, ["run", "--config", shallow, "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert "running shallow on 4 qubits" in result.output
    assert "building circuit..." in result.output
    assert "report saved to" in result.output


def test_config_errors_exit_2(runner, tmp_path):
    bad = write_config(tmp_path, "bad.json", {"n_qubits": 4, "colour": "red"})
    result = runner.invoke(cli, ["run", "--config", bad, "--out", str(tmp_path)])
    assert result.exit_code == 2
    haar = write_config(tmp_path, "haar.json", {"n_qubits": 4, "method": "haar"})
    result = runner.invoke(cli, ["run", "--config", haar, "--noise", "nisq", "--out", str(tmp_path)])
    assert result.exit_code == 2
    result = runner.invoke(cli, ["run", "--config", haar, "--noise", "0.1", "--out", str(tmp_path)])
    assert result.exit_code == 2
    broken = tmp_path / "broken.json"
    broken.write_text('{"n_qubits": 4,')
    result = runner.invoke(cli, ["run", "--config", str(broken), "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert "config error" in result.output


def test_runtime_error_exits_3(runner, tmp_path):
    # a two-element marked set has no parity-network lowering
    config = write_config(tmp_path, "set.json", {"n_qubits": 3, "oracle": "set:[1,2]", "T": 1})
    result = runner.invoke(cli, ["export-qasm", "--config", config, "--out", str(tmp_path)])
    assert result.exit_code == 3


def test_output_error_exits_4(runner, grover, tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    result = runner.invoke(cli, ["run", "--config", grover, "--out", str(blocker / "sub"), "--quiet"])
    assert result.exit_code == 4
    missing = str(tmp_path / "missing.json")
    result = runner.invoke(cli, ["run", "--config", missing, "--out", str(tmp_path)])
    assert result.exit_code == 4


def test_sweep(runner, grover, tmp_path):
    result = runner.invoke(
        cli, ["sweep", "--config", grover, "--shots", "0", "--format", "csv", "--out", str(tmp_path), "--quiet"]
    )
    assert result.exit_code == 0, result.output
    df = pd.read_csv(tmp_path / "sweep_n4_s0_T1-10.csv")
    assert list(df["T"]) == list(range(1, 11))
    result = runner.invoke(cli, ["sweep", "--config", grover, "--t-min", "5", "--t-max", "2", "--out", str(tmp_path)])
    assert result.exit_code == 2


def test_compare(runner, grover, shallow, tmp_path):
    result = runner.invoke(
        cli, ["compare", "--config", grover, "--config", shallow, "--shots", "0", "--out", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    assert "grover (T=1)" in result.output
    with open(tmp_path / "compare_n4_s0.json") as f:
        rows = json.load(f)
    assert [r["method"] for r in rows] == ["grover (T=1)", "shallow"]
    result = runner.invoke(cli, ["compare", "--config", grover, "--out", str(tmp_path)])
    assert result.exit_code == 3


def test_export_qasm(runner, grover, tmp_path):
    result = runner.invoke(cli, ["export-qasm", "--config", grover, "--out", str(tmp_path), "--quiet"])
    assert result.exit_code == 0, result.output
    text = (tmp_path / "grover_n4_T1_s0.qasm").read_text()
    assert text.startswith("OPENQASM 2.0;")
    assert "qreg q[4];" in text


def test_sample(runner, grover, tmp_path):
    result = runner.invoke(cli, ["sample", "--config", grover, "--format", "csv", "--out", str(tmp_path), "--quiet"])
    assert result.exit_code == 0, result.output
    df = pd.read_csv(tmp_path / "grover_n4_T1_s0_counts.csv", dtype={"bitstring": str})
    assert list(df.columns) == ["bitstring", "count"]
    assert df["count"].sum() == 200
    result = runner.invoke(cli, ["sample", "--config", grover, "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert "sampling 200 shots..." in result.output
    result = runner.invoke(cli, ["sample", "--config", grover, "--shots", "0", "--out", str(tmp_path)])
    assert result.exit_code == 2


def test_profile(runner, shallow, tmp_path):
    result = runner.invoke(cli, ["profile", "--config", shallow, "--top", "3", "--out", str(tmp_path)])
    assert result.exit_code == 0, result.output
    df = pd.read_csv(tmp_path / "shallow_n4_s0_profile.csv")
    assert len(df) == 16
    assert df["contribution"].sum() == pytest.approx(2**-0.5)
    result = runner.invoke(
        cli, ["profile", "--config", shallow, "--format", "json", "--out", str(tmp_path), "--quiet"]
    )
    assert result.exit_code == 0, result.output
    with open(tmp_path / "shallow_n4_s0_profile.json") as f:
        rows = json.load(f)
    assert len(rows) == 16
    assert sum(r["contribution"] for r in rows) == pytest.approx(2**-0.5)


def test_tradeoff_and_noise_scan(runner, grover, shallow, tmp_path):
    result = runner.invoke(
        cli,
        ["tradeoff", "--config", grover, "--config", shallow, "--noise", "0.001,0.01,50", "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    with open(tmp_path / "tradeoff_n4_s0.json") as f:
        rows = json.load(f)
    assert {r["method"] for r in rows} == {"grover (T=1)", "shallow"}
    result = runner.invoke(
        cli,
        ["tradeoff", "--config", grover, "--noise", "0.001,0.01,20", "--scales", "1,2", "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    assert os.path.exists(tmp_path / "noisescan_n4_T1_s0.json")
    result = runner.invoke(cli, ["tradeoff", "--config", grover, "--scales", "1,x", "--out", str(tmp_path)])
    assert result.exit_code == 2


def test_show_config(runner, shallow):
    result = runner.invoke(cli, ["show-config", "--config", shallow])
    assert result.exit_code == 0, result.output
    assert '"method": "shallow"' in result.output or '"method":"shallow"' in result.output
    assert "assumption" in result.output
