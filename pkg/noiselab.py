# Stochastic Pauli (depolarizing) trajectories over lowered circuits.
#
# After every elementary gate, with probability p1 (one-qubit gate) a uniformly
# random X/Y/Z hits its qubit; with probability p2 (two-qubit gate) one of the
# 15 non-identity two-qubit Paulis hits the pair. Abstract oracle/diffusion
# blocks are lowered first, so noise exposure tracks the real gate count.
# No readout error model.

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from circuits import lower_circuit
from estimators import estimates_from_probabilities
from statevec import ONE_QUBIT_KINDS, PAULI_MATRICES, apply_matrix, gate_matrix
from utils import derive_rng, standard_error

DEFAULT_TRAJECTORIES = 1000
_PAULI_NAMES = (None, "x", "y", "z")
# below this an ideal signal counts as zero
SIGNAL_ATOL = 1e-12


@dataclass(frozen=True)
class NoiseParams:
    p1: float = 1e-3
    p2: float = 1e-2
    trajectories: int = DEFAULT_TRAJECTORIES

    def __post_init__(self):
        for name in ("p1", "p2"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if int(self.trajectories) != self.trajectories or self.trajectories < 1:
            raise ValueError(f"trajectories must be a positive integer, got {self.trajectories}")

    @property
    def is_noiseless(self):
        return self.p1 == 0.0 and self.p2 == 0.0

    def scaled(self, factor):
        return NoiseParams(min(1.0, self.p1 * factor), min(1.0, self.p2 * factor), self.trajectories)

    def to_dict(self):
        return asdict(self)


# typical superconducting-device magnitudes: 1e-3 single-qubit, 1e-2 two-qubit
NISQ_NOISE = NoiseParams(1e-3, 1e-2, DEFAULT_TRAJECTORIES)


def parse_noise(text):
    """'p1,p2,trajectories' or the preset name 'nisq'."""
    text = text.strip()
    if text == "nisq":
        return NISQ_NOISE
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"noise must be 'p1,p2,trajectories' or 'nisq', got {text!r}")
    try:
        return NoiseParams(float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError as e:
        raise ValueError(f"bad noise spec {text!r}: {e}") from None


@dataclass
class NoisyRun:
    n_qubits: int
    seed: int
    noise: NoiseParams
    probabilities: np.ndarray  # trajectory-averaged p(z)
    per_trajectory: Optional[pd.DataFrame] = None
    trajectory_probabilities: Optional[np.ndarray] = None

    def estimates(self, obs, proj):
        est = estimates_from_probabilities(self.probabilities, obs, proj)
        if self.per_trajectory is not None:
            est["c_ab_projected_stderr"] = standard_error(self.per_trajectory["c_ab_projected"])
        return est


def _compile(lowered):
    ops = []
    for g in lowered.gates:
        ops.append((gate_matrix(g), g.qubits, g.kind in ONE_QUBIT_KINDS))
    return ops


def _run_trajectory(amps, ops, noise, rng, n):
    for matrix, qubits, one_qubit in ops:
        amps = apply_matrix(amps, matrix, qubits, n)
        u = rng.random()
        if one_qubit:
            if u < noise.p1:
                pauli = _PAULI_NAMES[1 + rng.integers(3)]
                amps = apply_matrix(amps, PAULI_MATRICES[pauli], qubits, n)
        elif u < noise.p2:
            k = int(rng.integers(1, 16))
            for q, idx in zip(qubits, (k >> 2, k & 3)):
                if idx:
                    amps = apply_matrix(amps, PAULI_MATRICES[_PAULI_NAMES[idx]], (q,), n)
    return amps


def apply_noisy_circuit(
    state,
    circuit,
    noise,
    seed,
    obs=None,
    proj=None,
    keep_trajectories=False,
    progress=False,
):
    """Run `noise.trajectories` noisy trajectories of `circuit` from `state`.

    Trajectory t draws from derive_rng(seed, t). When obs and proj are given,
    per-trajectory estimator values are collected for standard errors.
    """
    if circuit.n_qubits != state.n_qubits:
        raise ValueError(f"circuit has {circuit.n_qubits} qubits but state has {state.n_qubits}")
    n = state.n_qubits
    ops = _compile(lower_circuit(circuit))
    count = 1 if noise.is_noiseless else noise.trajectories
    total = np.zeros(2**n)
    rows, kept = [], []
    for t in tqdm(range(count), disable=not progress, desc="trajectories"):
        amps = _run_trajectory(np.array(state.amplitudes), ops, noise, derive_rng(seed, t), n)
        probs = np.abs(amps) ** 2
        total += probs
        if obs is not None and proj is not None:
            est = estimates_from_probabilities(probs, obs, proj)
            rows.append({"trajectory": t, **est})
        if keep_trajectories:
            kept.append(probs)
    if noise.is_noiseless:
        # every trajectory is identical; replicate instead of recomputing
        rows = [{**rows[0], "trajectory": t} for t in range(noise.trajectories)] if rows else rows
        kept = kept * noise.trajectories
        total *= noise.trajectories
    return NoisyRun(
        n_qubits=n,
        seed=seed,
        noise=noise,
        probabilities=total / noise.trajectories,
        per_trajectory=pd.DataFrame(rows) if rows else None,
        trajectory_probabilities=np.array(kept) if keep_trajectories else None,
    )


def relative_signal_loss(ideal, noisy):
    if abs(ideal) < SIGNAL_ATOL:
        raise ValueError(f"ideal signal {ideal!r} is zero; relative loss undefined")
    return (ideal - noisy) / abs(ideal)
