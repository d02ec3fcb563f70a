# ITCF estimators at t = 0 and peakedness metrics.
#
# Conventions: w_z = |<z|P_up|r>|^2 (projected weight), a_z = <z|A|z>.
#   c_ab_projected = sum_z w_z a_z                 (unnormalized, plotting convention)
#   c_ab_full      = c_ab_projected / 2^(n-1) - <r|A|r> / 2^n
#   s_a            = sum_{z: a_z != 0} w_z
#   e_a            = sum_z a_z w_z / sum_z |a_z| w_z
# All of these are linear in p(z), so exact amplitudes, shot histograms and
# trajectory-averaged noisy distributions go through the same code path.

from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from observables import DiagonalObservable, check_pairing, observable_values
from statevec import haar_random_state
from utils import (
    MAX_EXACT_QUBITS,
    CapacityError,
    ContractError,
    UndefinedRatioError,
    bitstring,
    derive_seed,
)

CSV_FIELDS = ["method", "n", "T", "shots", "seed", "c_ab_projected", "c_ab_full", "s_a", "e_a"]
METHODS = ("haar", "grover", "shallow", "custom")


@dataclass
class EstimateReport:
    method: str
    n: int
    T: Optional[int]
    shots: int
    seed: int
    c_ab_projected: float
    c_ab_full: float
    s_a: float
    e_a: Optional[float]
    shots_used: Union[int, str] = "exact"
    a_expectation: Optional[float] = None
    exact_c_ab_projected: Optional[float] = None
    exact_c_ab_full: Optional[float] = None
    exact_s_a: Optional[float] = None
    exact_trace: Optional[float] = None
    marked_probability: Optional[float] = None
    num_states: int = 1
    c_ab_projected_variance: Optional[float] = None
    c_ab_full_variance: Optional[float] = None
    noise: Optional[Dict[str, Any]] = None
    circuit: Optional[Dict[str, Any]] = None
    config_echo: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown report fields {sorted(unknown)}")
        return cls(**d)

    def csv_row(self):
        return {k: getattr(self, k) for k in CSV_FIELDS}


def _probabilities(state):
    if state.is_projected:
        raise ContractError("estimators take the normalized state |r>, not a projected vector")
    return state.probabilities()


def estimates_from_probabilities(probs, obs, proj):
    """All estimator quantities from a probability vector p(z).

    e_a is None when the projected mass on the observable's support is zero.
    """
    probs = np.asarray(probs, dtype=float)
    n = int(np.log2(len(probs)))
    check_pairing(obs, proj, n)
    a = observable_values(obs)
    w = np.where(proj.keep_mask(n), probs, 0.0)
    c = float(np.dot(w, a))
    denom = float(np.dot(w, np.abs(a)))
    a_exp = float(np.dot(probs, a))
    return {
        "c_ab_projected": c,
        "c_ab_full": c / 2 ** (n - 1) - a_exp / 2**n,
        "s_a": float(w[a != 0].sum()),
        "e_a": c / denom if denom > 0 else None,
        "a_expectation": a_exp,
        "abs_weight": denom,
    }


def projected_weights(state, proj):
    probs = _probabilities(state)
    return np.where(proj.keep_mask(state.n_qubits), probs, 0.0)


def itcf_projected(state, obs, proj):
    return estimates_from_probabilities(_probabilities(state), obs, proj)["c_ab_projected"]


def itcf_full(state, obs, proj):
    return estimates_from_probabilities(_probabilities(state), obs, proj)["c_ab_full"]


def a_expectation(state, obs):
    return float(np.dot(_probabilities(state), observable_values(obs)))


def support_overlap(state, obs, proj):
    return estimates_from_probabilities(_probabilities(state), obs, proj)["s_a"]


def biased_ratio(state, obs, proj):
    est = estimates_from_probabilities(_probabilities(state), obs, proj)
    if est["e_a"] is None:
        raise UndefinedRatioError("no projected weight on the observable's support; E_A is undefined")
    return est["e_a"]


def exact_trace_itcf(obs, proj, n):
    """(1/2^n) Tr(A B) with B = 2 P_up - I, by exhaustive sum."""
    if n > MAX_EXACT_QUBITS:
        raise CapacityError(f"exhaustive trace capped at {MAX_EXACT_QUBITS} qubits, got {n}")
    a = observable_values(obs)
    if len(a) != 2**n:
        raise ValueError(f"observable has {len(a)} diagonal entries, expected {2**n}")
    b = np.where(proj.keep_mask(n), 1.0, -1.0)
    return float(np.dot(a, b) / 2**n)


def marked_probability(state, predicate):
    return float(_probabilities(state)[predicate.mask(state.n_qubits)].sum())


def weight_profile(state, obs, proj):
    """Per-basis-state projected weights p_j against a_j, plot-ready."""
    check_pairing(obs, proj, state.n_qubits)
    n = state.n_qubits
    w = projected_weights(state, proj)
    a = observable_values(obs)
    return pd.DataFrame(
        {
            "z": np.arange(2**n),
            "bitstring": [bitstring(z, n) for z in range(2**n)],
            "p": w,
            "a": a,
            "contribution": w * a,
        }
    )


def _exact_trace_or_none(obs, proj, n):
    if n > MAX_EXACT_QUBITS or not isinstance(obs, DiagonalObservable):
        return None
    return exact_trace_itcf(obs, proj, n)


def state_report(state, obs, proj, method="custom", seed=0, T=None):
    """Amplitude-exact report for one state."""
    est = estimates_from_probabilities(_probabilities(state), obs, proj)
    report = EstimateReport(
        method=method,
        n=state.n_qubits,
        T=T,
        shots=0,
        seed=seed,
        c_ab_projected=est["c_ab_projected"],
        c_ab_full=est["c_ab_full"],
        s_a=est["s_a"],
        e_a=est["e_a"],
        a_expectation=est["a_expectation"],
        exact_c_ab_projected=est["c_ab_projected"],
        exact_c_ab_full=est["c_ab_full"],
        exact_s_a=est["s_a"],
        exact_trace=_exact_trace_or_none(obs, proj, state.n_qubits),
    )
    if report.e_a is None:
        report.notes.append("e_a undefined: zero projected mass on the observable's support")
    return report


def shot_estimates(hist, obs, proj, seed=0):
    if hist.total_shots < 1:
        raise ValueError("histogram has no shots")
    probs = hist.counts_array() / hist.total_shots
    est = estimates_from_probabilities(probs, obs, proj)
    report = EstimateReport(
        method="custom",
        n=hist.n_qubits,
        T=None,
        shots=hist.total_shots,
        seed=seed,
        c_ab_projected=est["c_ab_projected"],
        c_ab_full=est["c_ab_full"],
        s_a=est["s_a"],
        e_a=est["e_a"],
        shots_used=hist.total_shots,
        a_expectation=est["a_expectation"],
    )
    if report.e_a is None:
        report.notes.append("e_a undefined: zero projected counts on the observable's support")
    return report


def haar_average_itcf(n, obs, proj, num_states, seed, progress=False):
    """Average the estimators over `num_states` Haar states.

    Sample i uses seed derive_seed(seed, i); rows are accumulated in index
    order so sums are reproducible. Returns (report, per-sample DataFrame).
    """
    if num_states < 1:
        raise ValueError(f"need at least one Haar sample, got {num_states}")
    rows = []
    for i in tqdm(range(num_states), disable=not progress, desc="haar samples"):
        sample_seed = derive_seed(seed, i)
        state = haar_random_state(n, sample_seed)
        est = estimates_from_probabilities(state.probabilities(), obs, proj)
        rows.append({"index": i, "seed": sample_seed, **est})
    samples = pd.DataFrame(rows)
    ddof = 1 if num_states > 1 else 0
    mean_c = float(samples["c_ab_projected"].mean())
    mean_abs = float(samples["abs_weight"].mean())
    report = EstimateReport(
        method="haar",
        n=n,
        T=None,
        shots=0,
        seed=seed,
        c_ab_projected=mean_c,
        c_ab_full=float(samples["c_ab_full"].mean()),
        s_a=float(samples["s_a"].mean()),
        e_a=mean_c / mean_abs if mean_abs > 0 else None,
        a_expectation=float(samples["a_expectation"].mean()),
        exact_c_ab_projected=mean_c,
        exact_c_ab_full=float(samples["c_ab_full"].mean()),
        exact_s_a=float(samples["s_a"].mean()),
        exact_trace=_exact_trace_or_none(obs, proj, n),
        num_states=num_states,
        c_ab_projected_variance=float(samples["c_ab_projected"].var(ddof=ddof)),
        c_ab_full_variance=float(samples["c_ab_full"].var(ddof=ddof)),
    )
    return report, samples
