# Experiment harness: config validation, single runs, T sweeps, method
# comparisons, noise scans, and persistence of reports.
#
# Seed streams: Haar sample i uses derive_seed(seed, i); shot sampling uses
# stream SHOT_STREAM and noise trajectories stream NOISE_STREAM, so adding
# shots or noise never perturbs the other random draws.

import math
import os
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
import ujson
from tqdm import tqdm

from circuits import (
    ShallowSpec,
    build_grover,
    build_shallow,
    circuit_depth,
    default_shallow_spec,
    gate_counts,
    lower_circuit,
    optimal_iterations,
)
from estimators import (
    CSV_FIELDS,
    EstimateReport,
    estimates_from_probabilities,
    haar_average_itcf,
    marked_probability,
    shot_estimates,
    state_report,
    weight_profile,
)
from noiselab import NoiseParams, apply_noisy_circuit, relative_signal_loss
from observables import check_disjoint, parse_observable, parse_oracle, parse_projector
from statevec import (
    ShotHistogram,
    apply_circuit,
    haar_random_state,
    histogram_from_counts,
    measure_sample,
    sample_counts,
    zero_state,
)
from utils import (
    MAX_QUBITS,
    ConfigError,
    OutputError,
    UnsupportedOracleError,
    derive_rng,
    derive_seed,
)

SHOT_STREAM = 1
NOISE_STREAM = 2

EXPERIMENT_METHODS = ("haar", "grover", "shallow")
DEFAULT_OBSERVABLE = "Z@[0]"
DEFAULT_PROJECTOR = "P_up@1"
DEFAULT_ORACLE = "sign_positive_and_up"
DEFAULT_T = 3
DEFAULT_SHOTS = 8192
DEFAULT_N = 12

_KNOWN_KEYS = (
    "n_qubits",
    "method",
    "observable",
    "projector",
    "oracle",
    "T",
    "shallow",
    "shots",
    "haar_samples",
    "noise",
    "seed",
)


def _require_int(d, key, path=None, low=None, high=None):
    path = path or key
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if low is not None and v < low:
        raise ConfigError(path, f"must be >= {low}, got {v}")
    if high is not None and v > high:
        raise ConfigError(path, f"must be <= {high}, got {v}")
    return v


def _require_number(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    return float(v)


def _parse_shallow(d, n):
    if not isinstance(d, dict):
        raise ConfigError("shallow", "expected an object")
    unknown = set(d) - {"hadamard_set", "rotations", "entangling_pairs", "final_phases"}
    if unknown:
        raise ConfigError(f"shallow.{sorted(unknown)[0]}", "unknown field")

    def qubit(v, path):
        if isinstance(v, bool) or not isinstance(v, int) or not (0 <= v < n):
            raise ConfigError(path, f"expected a qubit index in [0, {n}), got {v!r}")
        return v

    hadamards = [qubit(q, f"shallow.hadamard_set[{i}]") for i, q in enumerate(d.get("hadamard_set", []))]
    rotations = []
    for i, r in enumerate(d.get("rotations", [])):
        path = f"shallow.rotations[{i}]"
        if not isinstance(r, (list, tuple)) or len(r) != 3:
            raise ConfigError(path, "expected [qubit, axis, angle]")
        if r[1] not in ("y", "z"):
            raise ConfigError(f"{path}.axis", f"expected 'y' or 'z', got {r[1]!r}")
        rotations.append((qubit(r[0], f"{path}.qubit"), r[1], _require_number(r[2], f"{path}.angle")))
    pairs = []
    for i, p in enumerate(d.get("entangling_pairs", [])):
        path = f"shallow.entangling_pairs[{i}]"
        if not isinstance(p, (list, tuple)) or len(p) not in (2, 3):
            raise ConfigError(path, "expected [control, target] or [control, target, kind]")
        kind = p[2] if len(p) == 3 else "cnot"
        if kind not in ("cnot", "cz"):
            raise ConfigError(f"{path}.kind", f"expected 'cnot' or 'cz', got {kind!r}")
        c, t = qubit(p[0], f"{path}.control"), qubit(p[1], f"{path}.target")
        if c == t:
            raise ConfigError(path, "control and target must differ")
        pairs.append((c, t, kind))
    phases = []
    for i, p in enumerate(d.get("final_phases", [])):
        path = f"shallow.final_phases[{i}]"
        if not isinstance(p, (list, tuple)) or len(p) != 2:
            raise ConfigError(path, "expected [qubit, angle]")
        phases.append((qubit(p[0], f"{path}.qubit"), _require_number(p[1], f"{path}.angle")))
    return ShallowSpec(tuple(hadamards), tuple(rotations), tuple(pairs), tuple(phases))


def _parse_noise(d):
    if not isinstance(d, dict):
        raise ConfigError("noise", "expected an object {p1, p2, trajectories}")
    unknown = set(d) - {"p1", "p2", "trajectories"}
    if unknown:
        raise ConfigError(f"noise.{sorted(unknown)[0]}", "unknown field")
    kwargs = {}
    for key in ("p1", "p2"):
        if key in d:
            p = _require_number(d[key], f"noise.{key}")
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"noise.{key}", f"must be in [0, 1], got {p}")
            kwargs[key] = p
    if "trajectories" in d:
        kwargs["trajectories"] = _require_int(d, "trajectories", "noise.trajectories", low=1)
    return NoiseParams(**kwargs)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment inputs. Build with from_dict for field-path errors."""

    n_qubits: int = DEFAULT_N
    method: str = "grover"
    observable: str = DEFAULT_OBSERVABLE
    projector: str = DEFAULT_PROJECTOR
    oracle: Optional[str] = None
    T: Optional[int] = None
    shallow: Optional[ShallowSpec] = None
    shots: int = DEFAULT_SHOTS
    haar_samples: Optional[int] = None
    noise: Optional[NoiseParams] = None
    seed: int = 0

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        for key in d:
            if key not in _KNOWN_KEYS:
                raise ConfigError(key, "unknown field")
        d = dict(d)
        d.setdefault("n_qubits", DEFAULT_N)
        n = _require_int(d, "n_qubits", low=1, high=MAX_QUBITS)
        method = d.get("method", "grover")
        if method not in EXPERIMENT_METHODS:
            raise ConfigError("method", f"expected one of {EXPERIMENT_METHODS}, got {method!r}")

        try:
            obs = parse_observable(d.get("observable", DEFAULT_OBSERVABLE), n)
        except (ValueError, AttributeError) as e:
            raise ConfigError("observable", str(e)) from None
        try:
            proj = parse_projector(d.get("projector", DEFAULT_PROJECTOR), n)
            check_disjoint(obs, proj)
        except (ValueError, AttributeError) as e:
            raise ConfigError("projector", str(e)) from None

        for key, owner in (("oracle", "grover"), ("T", "grover"), ("shallow", "shallow"), ("haar_samples", "haar")):
            if key in d and d[key] is not None and method != owner:
                raise ConfigError(key, f"only valid for method={owner}, got method={method}")

        oracle = T = shallow = haar_samples = None
        if method == "grover":
            oracle = d.get("oracle", DEFAULT_ORACLE)
            try:
                predicate = parse_oracle(oracle, obs, proj)
            except (ValueError, AttributeError) as e:
                raise ConfigError("oracle", str(e)) from None
            M = predicate.marked_count()
            if M == 0 or M == 2**n:
                raise ConfigError("oracle", f"{oracle} marks {M} of {2**n} states; nothing to amplify")
            d.setdefault("T", DEFAULT_T)
            if d["T"] == "optimal":
                d["T"] = optimal_iterations(M, 2**n)
            T = _require_int(d, "T", low=0, high=64)
        elif method == "shallow":
            shallow = _parse_shallow(d["shallow"], n) if d.get("shallow") is not None else default_shallow_spec(obs)
        else:
            d.setdefault("haar_samples", 1)
            haar_samples = _require_int(d, "haar_samples", low=1)

        d.setdefault("shots", DEFAULT_SHOTS)
        shots = _require_int(d, "shots", low=0)
        noise = _parse_noise(d["noise"]) if d.get("noise") is not None else None
        if noise is not None and method == "haar":
            raise ConfigError("noise", "haar states are sampled directly; there is no circuit to attach noise to")
        d.setdefault("seed", 0)
        seed = _require_int(d, "seed", low=0)
        return cls(
            n_qubits=n,
            method=method,
            observable=obs.spec(),
            projector=proj.spec(),
            oracle=oracle,
            T=T,
            shallow=shallow,
            shots=shots,
            haar_samples=haar_samples,
            noise=noise,
            seed=seed,
        )

    def to_dict(self):
        """Config echo; from_dict(to_dict()) rebuilds an equal config."""
        d = {
            "n_qubits": self.n_qubits,
            "method": self.method,
            "observable": self.observable,
            "projector": self.projector,
        }
        if self.method == "grover":
            d["oracle"] = self.oracle
            d["T"] = self.T
        if self.method == "shallow":
            d["shallow"] = self.shallow.to_dict()
        if self.method == "haar":
            d["haar_samples"] = self.haar_samples
        d["shots"] = self.shots
        if self.noise is not None:
            d["noise"] = self.noise.to_dict()
        d["seed"] = self.seed
        return d

    def obs(self):
        return parse_observable(self.observable, self.n_qubits)

    def proj(self):
        return parse_projector(self.projector, self.n_qubits)

    def label(self):
        return f"grover (T={self.T})" if self.method == "grover" else self.method

    def assumptions(self):
        """Notes for defaults the harness filled in on its own."""
        notes = []
        if self.observable == DEFAULT_OBSERVABLE:
            notes.append("assumption: observable Z@[0] is the harness default; no qubit for A was given")
        if self.projector == DEFAULT_PROJECTOR:
            notes.append("assumption: projector P_up@1 is the harness default; no qubit for P_up was given")
        if self.method == "grover" and self.oracle == DEFAULT_ORACLE:
            notes.append("assumption: oracle sign_positive_and_up is the harness default; no oracle was given")
        if self.method == "shallow" and self.shallow == default_shallow_spec(self.obs()):
            notes.append("assumption: shallow spec is the harness default (Ry(pi/4) on the support, CNOT chain)")
        return notes


@dataclass
class SweepResult:
    axis: str
    points: List[Tuple[float, EstimateReport]] = field(default_factory=list)

    def __post_init__(self):
        values = [v for v, _ in self.points]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError(f"sweep axis {self.axis} must be strictly increasing, got {values}")

    def to_frame(self):
        return pd.DataFrame([r.csv_row() for _, r in self.points], columns=CSV_FIELDS)

    def to_dict(self):
        return {"axis": self.axis, "points": [{"value": v, "report": r.to_dict()} for v, r in self.points]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["axis"], [(p["value"], EstimateReport.from_dict(p["report"])) for p in d["points"]])


######## Runs ########


def build_circuit(config):
    obs, proj = config.obs(), config.proj()
    if config.method == "grover":
        predicate = parse_oracle(config.oracle, obs, proj)
        return build_grover(config.n_qubits, predicate, config.T), predicate
    if config.method == "shallow":
        return build_shallow(config.n_qubits, config.shallow), None
    raise ValueError(f"method {config.method} has no circuit")


def _circuit_summary(circuit):
    summary = dict(circuit.metadata)
    summary["depth"] = circuit_depth(circuit)
    try:
        lowered = lower_circuit(circuit)
    except UnsupportedOracleError:
        summary["lowered_depth"] = None
        return summary
    counts = gate_counts(lowered)
    summary["lowered_depth"] = circuit_depth(lowered)
    summary["one_qubit_gates"] = counts["one_qubit"]
    summary["two_qubit_gates"] = counts["two_qubit"]
    return summary


def _apply_headline(report, est):
    report.c_ab_projected = est["c_ab_projected"]
    report.c_ab_full = est["c_ab_full"]
    report.s_a = est["s_a"]
    report.e_a = est["e_a"]
    report.a_expectation = est["a_expectation"]


def _run_haar(config, progress):
    obs, proj = config.obs(), config.proj()
    report, samples = haar_average_itcf(config.n_qubits, obs, proj, config.haar_samples, config.seed, progress)
    if config.shots > 0:
        shot_rows = []
        for i, sample_seed in enumerate(samples["seed"]):
            state = haar_random_state(config.n_qubits, int(sample_seed))
            hist = measure_sample(state, config.shots, derive_seed(config.seed, i, SHOT_STREAM))
            shot_rows.append(shot_estimates(hist, obs, proj).to_dict())
        shots_df = pd.DataFrame(shot_rows)
        mean_c = float(shots_df["c_ab_projected"].mean())
        report.c_ab_projected = mean_c
        report.c_ab_full = float(shots_df["c_ab_full"].mean())
        report.s_a = float(shots_df["s_a"].mean())
        report.a_expectation = float(shots_df["a_expectation"].mean())
        # +-1 observables: sum |a| w = s_a
        report.e_a = mean_c / report.s_a if report.s_a > 0 else None
        report.shots_used = config.shots
    return report


def run_experiment(config, progress=False, keep_trajectories=False):
    """Build the state for `config`, optionally add noise, and estimate.

    Returns an EstimateReport; with keep_trajectories=True and noise set,
    returns (report, NoisyRun) so per-trajectory data can be dumped.
    """
    n = config.n_qubits
    obs, proj = config.obs(), config.proj()
    run = None
    if config.method == "haar":
        report = _run_haar(config, progress)
    else:
        circuit, predicate = build_circuit(config)
        state = apply_circuit(zero_state(n), circuit)
        report = state_report(state, obs, proj, method=config.method, seed=config.seed, T=config.T)
        report.shots = config.shots
        report.circuit = _circuit_summary(circuit)
        if predicate is not None:
            report.marked_probability = marked_probability(state, predicate)
        probs = state.probabilities()
        if config.noise is not None:
            run = apply_noisy_circuit(
                zero_state(n),
                circuit,
                config.noise,
                derive_seed(config.seed, NOISE_STREAM),
                obs,
                proj,
                keep_trajectories=keep_trajectories,
                progress=progress,
            )
            probs = run.probabilities
            _apply_headline(report, estimates_from_probabilities(probs, obs, proj))
            report.noise = config.noise.to_dict()
            report.notes.append(f"noisy values averaged over {config.noise.trajectories} trajectories")
        if config.shots > 0:
            counts = sample_counts(probs, config.shots, derive_rng(config.seed, SHOT_STREAM))
            hist = histogram_from_counts(counts, n)
            _apply_headline(report, estimates_from_probabilities(hist.counts_array() / hist.total_shots, obs, proj))
            report.shots_used = config.shots
    report.shots = config.shots
    report.config_echo = config.to_dict()
    report.notes.extend(config.assumptions())
    undefined = "e_a undefined: zero projected mass on the observable's support"
    if report.e_a is None and undefined not in report.notes:
        report.notes.append(undefined)
    if keep_trajectories:
        return report, run
    return report


def sample_experiment(config):
    """Shot histogram for the state `config` prepares (noise included)."""
    if config.shots < 1:
        raise ConfigError("shots", "sampling needs shots >= 1")
    if config.method == "haar":
        state = haar_random_state(config.n_qubits, derive_seed(config.seed, 0))
        return measure_sample(state, config.shots, derive_seed(config.seed, 0, SHOT_STREAM))
    circuit, _ = build_circuit(config)
    if config.noise is None:
        probs = apply_circuit(zero_state(config.n_qubits), circuit).probabilities()
    else:
        run = apply_noisy_circuit(
            zero_state(config.n_qubits), circuit, config.noise, derive_seed(config.seed, NOISE_STREAM)
        )
        probs = run.probabilities
    counts = sample_counts(probs, config.shots, derive_rng(config.seed, SHOT_STREAM))
    return histogram_from_counts(counts, config.n_qubits)


def profile_experiment(config):
    """Noiseless basis-weight profile of the prepared state."""
    if config.method == "haar":
        state = haar_random_state(config.n_qubits, derive_seed(config.seed, 0))
    else:
        circuit, _ = build_circuit(config)
        state = apply_circuit(zero_state(config.n_qubits), circuit)
    return weight_profile(state, config.obs(), config.proj())


def sweep_grover_T(config, T_range=range(1, 11), progress=False):
    if config.method != "grover":
        raise ValueError(f"T sweep needs method=grover, got {config.method}")
    values = sorted(set(int(T) for T in T_range))
    points = []
    for T in tqdm(values, disable=not progress, desc="T sweep"):
        point = replace(config, T=T, seed=derive_seed(config.seed, T))
        points.append((T, run_experiment(point)))
    return SweepResult("T", points)


def noise_scan(config, scales, progress=False):
    """Scale (p1, p2) by each factor; common base seed across points."""
    if config.noise is None:
        raise ValueError("noise scan needs a config with noise set")
    points = []
    for s in tqdm(sorted(set(scales)), disable=not progress, desc="noise scan"):
        points.append((float(s), run_experiment(replace(config, noise=config.noise.scaled(s)))))
    return SweepResult("noise_scale", points)


def _check_shared(configs, minimum=2):
    if len(configs) < minimum:
        raise ValueError(f"need at least {minimum} configs, got {len(configs)}")
    shared = {(c.n_qubits, c.observable, c.projector) for c in configs}
    if len(shared) != 1:
        raise ValueError(f"configs must share (n_qubits, observable, projector), got {sorted(shared)}")


def compare_methods(configs, progress=False):
    """Comparison rows (method, S_A, C_AB, E_A), one per config."""
    _check_shared(configs)
    rows = []
    for config in tqdm(configs, disable=not progress, desc="methods"):
        report = run_experiment(config)
        rows.append({"method": config.label(), "S_A": report.s_a, "C_AB": report.c_ab_projected, "E_A": report.e_a})
    return pd.DataFrame(rows, columns=["method", "S_A", "C_AB", "E_A"])


def tradeoff_table(configs, noise, progress=False):
    """Depth, gate counts and noisy signal loss per circuit method."""
    _check_shared(configs, minimum=1)
    rows = []
    for config in tqdm(configs, disable=not progress, desc="tradeoff"):
        if config.method == "haar":
            raise ValueError("trade-off table compares circuit methods; haar has no circuit")
        ideal = run_experiment(replace(config, shots=0, noise=None))
        noisy = run_experiment(replace(config, shots=0, noise=noise))
        try:
            loss, note = relative_signal_loss(ideal.c_ab_projected, noisy.c_ab_projected), None
        except ValueError:
            loss, note = None, "ideal c_ab is zero; relative loss undefined"
        rows.append(
            {
                "method": config.label(),
                "depth": ideal.circuit["depth"],
                "lowered_depth": ideal.circuit["lowered_depth"],
                "one_qubit_gates": ideal.circuit.get("one_qubit_gates"),
                "two_qubit_gates": ideal.circuit.get("two_qubit_gates"),
                "c_ab_ideal": ideal.c_ab_projected,
                "c_ab_noisy": noisy.c_ab_projected,
                "relative_signal_loss": loss,
                "note": note,
            }
        )
    return pd.DataFrame(rows)


######## Persistence ########


def _native(v):
    if isinstance(v, dict):
        return {k: _native(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_native(x) for x in v]
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def _payload(obj):
    if isinstance(obj, (EstimateReport, SweepResult, ShotHistogram)):
        return _native(obj.to_dict())
    if isinstance(obj, pd.DataFrame):
        return _native(obj.to_dict(orient="records"))
    raise ValueError(f"cannot emit {type(obj).__name__}")


def _frame(obj):
    if isinstance(obj, EstimateReport):
        return pd.DataFrame([obj.csv_row()], columns=CSV_FIELDS)
    if isinstance(obj, SweepResult):
        return obj.to_frame()
    if isinstance(obj, ShotHistogram):
        rows = sorted(obj.counts.items())
        return pd.DataFrame(rows, columns=["bitstring", "count"])
    if isinstance(obj, pd.DataFrame):
        return obj
    raise ValueError(f"cannot emit {type(obj).__name__}")


def emit_outputs(obj, fmt, path):
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    try:
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        if fmt == "csv":
            _frame(obj).to_csv(path, index=False)
        else:
            with open(path, "w") as f:
                f.write(ujson.dumps(_payload(obj), indent=2))
                f.write("\n")
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e
    return path


def _read_json(path):
    try:
        with open(path) as f:
            return ujson.load(f)
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e


def read_report_json(path):
    return EstimateReport.from_dict(_read_json(path))


def read_sweep_json(path):
    return SweepResult.from_dict(_read_json(path))


def load_config(path, overrides=None, defaults=None):
    """Read a JSON config (object or list of objects) and apply CLI overrides.

    `defaults` fill keys a config leaves out; `overrides` replace keys it sets.
    None values in either are ignored.
    """
    try:
        raw = _read_json(path)
    except ValueError as e:
        raise ConfigError(path, f"not valid JSON: {e}") from None
    items = raw if isinstance(raw, list) else [raw]
    configs = []
    for item in items:
        if not isinstance(item, dict):
            raise ConfigError("<root>", "config must be a JSON object or a list of objects")
        merged = {k: v for k, v in (defaults or {}).items() if v is not None}
        merged.update(item)
        for k, v in (overrides or {}).items():
            if v is not None:
                merged[k] = v
        configs.append(ExperimentConfig.from_dict(merged))
    return configs
