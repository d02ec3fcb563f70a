import math
import os
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest
import ujson

from circuits import default_shallow_spec, grover_success_probability
from estimators import CSV_FIELDS
from experiments import (
    ExperimentConfig,
    SweepResult,
    compare_methods,
    emit_outputs,
    load_config,
    noise_scan,
    profile_experiment,
    read_report_json,
    read_sweep_json,
    run_experiment,
    sample_experiment,
    sweep_grover_T,
    tradeoff_table,
)
from noiselab import NoiseParams
from observables import zstring
from utils import ConfigError, DegenerateOracleError, OutputError

WORKED_EXAMPLE = {
    "n_qubits": 5,
    "method": "shallow",
    "observable": "Z@[0,2,4]",
    "projector": "P_up@1",
    "shallow": {
        "rotations": [[0, "y", math.pi / 4], [2, "y", math.pi / 4], [4, "y", math.pi / 4]],
        "entangling_pairs": [[0, 2, "cnot"], [2, 4, "cnot"]],
    },
    "shots": 0,
}


def config(**kwargs):
    return ExperimentConfig.from_dict(kwargs)


######## Config ########


def test_defaults():
    c = config()
    assert (c.n_qubits, c.method, c.shots, c.seed) == (12, "grover", 8192, 0)
    assert (c.observable, c.projector, c.oracle, c.T) == ("Z@[0]", "P_up@1", "sign_positive_and_up", 3)
    assert len(c.assumptions()) == 3
    haar = config(method="haar")
    assert haar.haar_samples == 1
    shallow = config(method="shallow")
    assert shallow.shallow == default_shallow_spec(zstring(12, [0]))
    assert any("shallow spec" in note for note in shallow.assumptions())


def test_config_echo_closure():
    for c in (
        config(),
        config(method="haar", haar_samples=3, shots=0),
        ExperimentConfig.from_dict(WORKED_EXAMPLE),
        config(n_qubits=4, noise={"p1": 0.01, "p2": 0.02, "trajectories": 7}),
    ):
        assert ExperimentConfig.from_dict(c.to_dict()) == c
        assert ExperimentConfig.from_dict(ujson.loads(ujson.dumps(c.to_dict()))) == c


def test_optimal_T():
    assert config(T="optimal").T == 1
    assert config(n_qubits=12, oracle="set:[5]", T="optimal").T == 50


@pytest.mark.parametrize(
    "raw,path",
    [
        ({"colour": 1}, "colour"),
        ({"n_qubits": 30}, "n_qubits"),
        ({"n_qubits": "12"}, "n_qubits"),
        ({"method": "qaoa"}, "method"),
        ({"observable": "Z@[0,1]"}, "projector"),
        ({"observable": "X@[0]"}, "observable"),
        ({"oracle": "set:[]"}, "oracle"),
        ({"oracle": "sign_positive", "observable": "Z@[]"}, "oracle"),
        ({"T": -1}, "T"),
        ({"method": "haar", "T": 3}, "T"),
        ({"method": "grover", "shallow": {}}, "shallow"),
        ({"method": "shallow", "shallow": {"rotations": [[0, "y", 0.1], [1, "x", 0.1]]}}, "shallow.rotations[1].axis"),
        ({"method": "shallow", "shallow": {"entangling_pairs": [[0, 0]]}}, "shallow.entangling_pairs[0]"),
        ({"method": "shallow", "shallow": {"final_phases": [[99, 0.1]]}}, "shallow.final_phases[0].qubit"),
        ({"noise": {"p1": 2.0}}, "noise.p1"),
        ({"noise": {"trajectories": 0}}, "noise.trajectories"),
        ({"noise": {"p3": 0.1}}, "noise.p3"),
        ({"method": "haar", "noise": {"p1": 0.1}}, "noise"),
        ({"shots": -5}, "shots"),
        ({"seed": 1.5}, "seed"),
    ],
)
def test_config_errors_name_the_field(raw, path):
    with pytest.raises(ConfigError) as e:
        ExperimentConfig.from_dict(raw)
    assert e.value.path == path


def test_load_config_list_and_overrides(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(ujson.dumps([{"method": "haar"}, {"method": "shallow", "seed": 4}]))
    configs = load_config(str(p), {"seed": 9, "shots": None})
    assert [c.seed for c in configs] == [9, 9]
    assert [c.shots for c in configs] == [8192, 8192]
    filled = load_config(str(p), defaults={"seed": 5})
    assert [c.seed for c in filled] == [5, 4]
    with pytest.raises(OutputError):
        load_config(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text('{"n_qubits": 4,')
    with pytest.raises(ConfigError) as e:
        load_config(str(broken))
    assert e.value.path == str(broken)


######## Runs ########


def test_haar_run():
    r = run_experiment(config(method="haar", shots=0))
    assert r.method == "haar"
    assert abs(r.c_ab_projected) < 0.1
    assert 0.45 <= r.s_a <= 0.55
    assert r.shots_used == "exact"


def test_haar_run_with_shots():
    r = run_experiment(config(method="haar", n_qubits=6, haar_samples=4, shots=2000))
    assert r.shots_used == 2000
    assert r.num_states == 4
    assert abs(r.e_a * r.s_a - r.c_ab_projected) < 1e-12


def test_worked_example_run():
    r = run_experiment(ExperimentConfig.from_dict(WORKED_EXAMPLE))
    assert r.c_ab_projected == pytest.approx(0.5, abs=1e-12)
    assert r.s_a == pytest.approx(1.0, abs=1e-12)
    assert r.e_a == pytest.approx(0.5, abs=1e-12)
    assert r.c_ab_full == pytest.approx(0.015625, abs=1e-12)
    assert r.circuit["method"] == "shallow"
    assert r.circuit["depth"] <= 1 + 2 + 1


def test_grover_run_exact_and_shots():
    r = run_experiment(config(T=1))
    assert r.exact_c_ab_projected == pytest.approx(1.0, abs=1e-12)
    assert r.marked_probability == pytest.approx(1.0, abs=1e-12)
    assert r.shots_used == 8192
    # T=1 peaks exactly on the marked set, so shots agree with the amplitudes
    assert r.c_ab_projected == pytest.approx(1.0, abs=1e-9)
    assert r.circuit["predicate_id"].startswith("sign_positive_and_up")
    assert r.circuit["lowered_depth"] > r.circuit["depth"]


def test_degenerate_oracle_without_validation():
    c = replace(config(n_qubits=3), oracle="set:[]")
    with pytest.raises(DegenerateOracleError):
        run_experiment(c)


def test_run_is_deterministic_and_reproducible_from_echo():
    c = config(n_qubits=6, shots=1000, seed=12)
    a, b = run_experiment(c), run_experiment(c)
    assert a == b
    again = run_experiment(ExperimentConfig.from_dict(a.config_echo))
    assert again == a


def test_ratio_identity_on_reports():
    for c in (config(method="haar", n_qubits=8, shots=0), config(n_qubits=8), config(method="shallow", n_qubits=8)):
        r = run_experiment(c)
        assert abs(r.e_a * r.s_a - r.c_ab_projected) < 1e-12


def test_noisy_run_and_trajectory_dump():
    c = config(n_qubits=4, T=1, shots=0, noise={"p1": 1e-3, "p2": 1e-2, "trajectories": 100})
    report, run = run_experiment(c, keep_trajectories=True)
    assert report.noise == {"p1": 1e-3, "p2": 1e-2, "trajectories": 100}
    assert report.c_ab_projected < report.exact_c_ab_projected
    assert run.trajectory_probabilities.shape == (100, 16)
    assert len(run.per_trajectory) == 100


######## Sweeps and tables ########


def test_conjoined_sweep_tracks_closed_form():
    result = sweep_grover_T(config(shots=0))
    assert result.axis == "T"
    assert [T for T, _ in result.points] == list(range(1, 11))
    for T, r in result.points:
        p = grover_success_probability(1, 4, T)
        assert abs(r.c_ab_projected - (p - (1 - p) / 3)) < 1e-9
        assert abs(r.s_a - (p + (1 - p) / 3)) < 1e-9


def test_sweep_uses_derived_seeds():
    result = sweep_grover_T(config(n_qubits=4, shots=100, seed=1), range(1, 4))
    seeds = [r.seed for _, r in result.points]
    assert len(set(seeds)) == 3
    with pytest.raises(ValueError):
        sweep_grover_T(config(method="haar"))


def test_noisy_sweep_peak_below_noiseless():
    base = config(n_qubits=4, shots=0)
    ideal = sweep_grover_T(base, range(1, 4))
    noisy = sweep_grover_T(replace(base, noise=NoiseParams(1e-3, 1e-2, 200)), range(1, 4))
    peak = max(r.c_ab_projected for _, r in ideal.points)
    assert max(r.c_ab_projected for _, r in noisy.points) < peak


def test_sweep_axis_must_increase():
    r = run_experiment(config(n_qubits=3, shots=0, T=1))
    with pytest.raises(ValueError):
        SweepResult("T", [(2, r), (1, r)])


def test_noise_scan_monotone():
    c = config(n_qubits=4, T=1, shots=0, noise={"p1": 1e-3, "p2": 1e-2, "trajectories": 300})
    result = noise_scan(c, [1, 4, 16])
    assert result.axis == "noise_scale"
    values = [r.c_ab_projected for _, r in result.points]
    assert values[0] > values[1] > values[2]
    with pytest.raises(ValueError):
        noise_scan(replace(c, noise=None), [1, 2])


def test_compare_methods_dominance():
    haar = config(method="haar", shots=0)
    grover = config(T="optimal", shots=0)
    shallow = config(method="shallow", shots=0)
    table = compare_methods([haar, grover, shallow])
    assert list(table.columns) == ["method", "S_A", "C_AB", "E_A"]
    assert list(table["method"]) == ["haar", "grover (T=1)", "shallow"]
    haar_c, haar_e = [], []
    for seed in range(9):
        r = run_experiment(replace(haar, seed=seed))
        haar_c.append(abs(r.c_ab_projected))
        haar_e.append(abs(r.e_a))
    for row in table.itertuples():
        if row.method == "haar":
            continue
        assert row.C_AB >= 10 * np.median(haar_c)
        assert row.E_A >= 10 * np.median(haar_e)
        assert row.S_A > 0.5


def test_compare_methods_errors():
    with pytest.raises(ValueError):
        compare_methods([config()])
    with pytest.raises(ValueError):
        compare_methods([config(), config(n_qubits=8)])


def test_tradeoff_table():
    configs = [
        config(n_qubits=4, oracle="bits:[0=0,1=0]", T=1, shots=0),
        config(method="shallow", n_qubits=4, shots=0),
    ]
    table = tradeoff_table(configs, NoiseParams(1e-3, 1e-2, 200))
    assert list(table.columns) == [
        "method",
        "depth",
        "lowered_depth",
        "one_qubit_gates",
        "two_qubit_gates",
        "c_ab_ideal",
        "c_ab_noisy",
        "relative_signal_loss",
        "note",
    ]
    grover, shallow = table.iloc[0], table.iloc[1]
    assert grover["note"] is None
    assert grover["two_qubit_gates"] > shallow["two_qubit_gates"]
    assert grover["lowered_depth"] > shallow["lowered_depth"]
    with pytest.raises(ValueError):
        tradeoff_table([config(method="haar", n_qubits=4)], NoiseParams())


def test_tradeoff_zero_ideal_signal_has_no_loss():
    # conjoined oracle at T=3 rotates to c_ab = 0 up to rounding
    grover = config(n_qubits=5, shots=0)
    assert abs(run_experiment(grover).c_ab_projected) < 1e-12
    table = tradeoff_table([grover, config(method="shallow", n_qubits=5, shots=0)], NoiseParams(1e-3, 1e-2, 50))
    row = table.iloc[0]
    assert row["method"] == "grover (T=3)"
    assert pd.isna(row["relative_signal_loss"])
    assert "zero" in row["note"]
    assert table.iloc[1]["relative_signal_loss"] == pytest.approx(0.0, abs=0.2)


def test_profile_and_sample():
    df = profile_experiment(ExperimentConfig.from_dict(WORKED_EXAMPLE))
    assert df["contribution"].sum() == pytest.approx(0.5)
    hist = sample_experiment(config(n_qubits=4, T=1, shots=500))
    assert hist.total_shots == 500
    assert all(b[-1] == "0" and b[-2] == "0" for b in hist.counts)
    with pytest.raises(ConfigError):
        sample_experiment(config(n_qubits=4, shots=0))


######## Persistence ########


def test_json_roundtrip(tmp_path):
    r = run_experiment(config(n_qubits=5, shots=300, noise={"p1": 0.01, "p2": 0.02, "trajectories": 5}))
    path = emit_outputs(r, "json", str(tmp_path / "r.json"))
    assert read_report_json(path) == r
    with open(path) as f:
        keys = list(ujson.load(f))
    assert keys[:9] == CSV_FIELDS
    assert keys[-1] == "notes"


def test_csv_header_and_sweep_rows(tmp_path):
    r = run_experiment(config(n_qubits=4, shots=0))
    emit_outputs(r, "csv", str(tmp_path / "r.csv"))
    with open(tmp_path / "r.csv") as f:
        assert f.readline().strip() == "method,n,T,shots,seed,c_ab_projected,c_ab_full,s_a,e_a"
    sweep = sweep_grover_T(config(n_qubits=4, shots=0))
    emit_outputs(sweep, "csv", str(tmp_path / "s.csv"))
    assert len(pd.read_csv(tmp_path / "s.csv")) == 10
    emit_outputs(sweep, "json", str(tmp_path / "s.json"))
    assert read_sweep_json(str(tmp_path / "s.json")).to_dict() == sweep.to_dict()


def test_outputs_are_byte_identical(tmp_path):
    c = config(n_qubits=6, shots=1000, seed=3)
    for i in range(2):
        emit_outputs(run_experiment(c), "json", str(tmp_path / f"{i}.json"))
        emit_outputs(run_experiment(c), "csv", str(tmp_path / f"{i}.csv"))
    for ext in ("json", "csv"):
        assert (tmp_path / f"0.{ext}").read_bytes() == (tmp_path / f"1.{ext}").read_bytes()


def test_output_errors(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    r = run_experiment(config(n_qubits=3, shots=0, T=1))
    with pytest.raises(OutputError) as e:
        emit_outputs(r, "json", str(blocker / "r.json"))
    assert str(blocker) in str(e.value)
    with pytest.raises(ValueError):
        emit_outputs(r, "xml", str(tmp_path / "r.xml"))


CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


@pytest.mark.parametrize("name", sorted(os.listdir(CONFIG_DIR)))
def test_shipped_configs_load(name):
    configs = load_config(os.path.join(CONFIG_DIR, name))
    assert configs
    if len(configs) > 1:
        assert len({(c.n_qubits, c.observable, c.projector) for c in configs}) == 1


def test_shipped_tradeoff_pairs_entangling_circuits():
    configs = load_config(os.path.join(CONFIG_DIR, "tradeoff_n5.json"))
    table = tradeoff_table(configs, NoiseParams(1e-3, 1e-2, 300))
    grover, shallow = table.iloc[0], table.iloc[1]
    assert shallow["two_qubit_gates"] == 2
    assert grover["c_ab_ideal"] > 0.9
    assert grover["relative_signal_loss"] > shallow["relative_signal_loss"] + 0.2
