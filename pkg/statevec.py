# Dense statevector engine.
# Bit ordering: bit i of a basis-state index is qubit i (little-endian), so
# index 5 = 0b101 has qubits 0 and 2 set. Every module in this repo uses it.

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from observables import get_predicate
from utils import (
    NORM_CHECK_ATOL,
    ContractError,
    bitstring,
    check_qubit_count,
    check_qubit_index,
    derive_rng,
)

GATE_KINDS = ("h", "x", "ry", "rz", "cnot", "cz", "oracle", "diffusion")
ONE_QUBIT_KINDS = ("h", "x", "ry", "rz")
TWO_QUBIT_KINDS = ("cnot", "cz")

_SQ2 = 1.0 / np.sqrt(2.0)
H_MATRIX = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex)
X_MATRIX = np.array([[0, 1], [1, 0]], dtype=complex)
Y_MATRIX = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z_MATRIX = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_MATRICES = {"x": X_MATRIX, "y": Y_MATRIX, "z": Z_MATRIX}


def ry_matrix(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(phi):
    return np.array([[np.exp(-0.5j * phi), 0], [0, np.exp(0.5j * phi)]], dtype=complex)


@dataclass(frozen=True)
class StateVector:
    """2^n amplitudes. Treated as immutable: every operation returns a new one.

    `is_projected` marks deliberately unnormalized vectors (e.g. P_up|r>);
    sampling and the estimators refuse them.
    """

    n_qubits: int
    amplitudes: np.ndarray
    is_projected: bool = False

    def __post_init__(self):
        check_qubit_count(self.n_qubits)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if len(amps) != 2**self.n_qubits:
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, got {len(amps)}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        if not self.is_projected and abs(self.norm() - 1.0) > NORM_CHECK_ATOL:
            raise ContractError(
                f"state norm {self.norm():.12g} != 1; pass is_projected=True for unnormalized vectors"
            )

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2

    def project_up(self, qubit):
        """P_up on `qubit`: zero every amplitude with that bit set."""
        check_qubit_index(qubit, self.n_qubits)
        keep = ((np.arange(2**self.n_qubits) >> qubit) & 1) == 0
        return StateVector(self.n_qubits, np.where(keep, self.amplitudes, 0), is_projected=True)

    def __len__(self):
        return len(self.amplitudes)


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: Tuple[int, ...] = ()
    params: Tuple[float, ...] = ()
    predicate_id: Optional[str] = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind in TWO_QUBIT_KINDS and self.qubits[0] == self.qubits[1]:
            raise ValueError(f"{self.kind} endpoints must be distinct, got {self.qubits}")
        if self.kind == "oracle" and not self.predicate_id:
            raise ValueError("oracle gate needs a predicate_id")

    @property
    def is_abstract(self):
        return self.kind in ("oracle", "diffusion")


def h(q):
    return Gate("h", (q,))


def x(q):
    return Gate("x", (q,))


def ry(q, theta):
    return Gate("ry", (q,), (theta,))


def rz(q, phi):
    return Gate("rz", (q,), (phi,))


def cnot(control, target):
    return Gate("cnot", (control, target))


def cz(q1, q2):
    return Gate("cz", (q1, q2))


def phase_oracle(predicate_id):
    return Gate("oracle", (), (), predicate_id)


def diffusion():
    return Gate("diffusion")


@dataclass
class ShotHistogram:
    n_qubits: int
    counts: Dict[str, int] = field(default_factory=dict)
    total_shots: int = 0

    def __post_init__(self):
        if sum(self.counts.values()) != self.total_shots:
            raise ValueError(
                f"counts sum to {sum(self.counts.values())}, total_shots is {self.total_shots}"
            )

    def counts_array(self):
        arr = np.zeros(2**self.n_qubits, dtype=np.int64)
        for bits, c in self.counts.items():
            arr[int(bits, 2)] = c
        return arr

    def to_dict(self):
        return {"n_qubits": self.n_qubits, "total_shots": self.total_shots, "counts": dict(self.counts)}


def zero_state(n):
    check_qubit_count(n)
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = 1.0
    return StateVector(n, amps)


def apply_matrix(amps, matrix, qubits, n):
    """Contract a 2^k x 2^k matrix into the listed qubits.

    The vector is viewed as an n-axis tensor in C order, so qubit q lives on
    axis n-1-q. The first listed qubit is the most significant bit of the
    matrix index.
    """
    k = len(qubits)
    psi = amps.reshape([2] * n)
    axes = [n - 1 - q for q in qubits]
    op = matrix.reshape([2] * (2 * k))
    psi = np.tensordot(op, psi, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the contracted axes first; move them back
    psi = np.moveaxis(psi, list(range(k)), axes)
    return psi.reshape(-1)


def _cnot_matrix():
    m = np.eye(4, dtype=complex)
    m[[2, 3]] = m[[3, 2]]
    return m


CNOT_MATRIX = _cnot_matrix()
CZ_MATRIX = np.diag([1, 1, 1, -1]).astype(complex)


def gate_matrix(gate):
    """Dense matrix of an elementary gate (first qubit = most significant)."""
    if gate.kind == "h":
        return H_MATRIX
    if gate.kind == "x":
        return X_MATRIX
    if gate.kind == "ry":
        return ry_matrix(gate.params[0])
    if gate.kind == "rz":
        return rz_matrix(gate.params[0])
    if gate.kind == "cnot":
        return CNOT_MATRIX
    if gate.kind == "cz":
        return CZ_MATRIX
    raise ValueError(f"{gate.kind} is an abstract block with no fixed-size matrix")


def apply_gate(state, gate):
    if state.is_projected:
        raise ContractError("gates act on normalized states only")
    n = state.n_qubits
    for q in gate.qubits:
        check_qubit_index(q, n)
    if gate.kind == "oracle":
        mask = get_predicate(gate.predicate_id).mask(n)
        new = np.where(mask, -state.amplitudes, state.amplitudes)
    elif gate.kind == "diffusion":
        # (2|psi><psi| - I) a with |psi> uniform: 2*mean(a) - a
        amps = state.amplitudes
        new = 2.0 * amps.mean() - amps
    else:
        new = apply_matrix(state.amplitudes, gate_matrix(gate), gate.qubits, n)
    return StateVector(n, new)


def apply_circuit(state, circuit):
    if circuit.n_qubits != state.n_qubits:
        raise ValueError(
            f"circuit has {circuit.n_qubits} qubits but state has {state.n_qubits}"
        )
    for gate in circuit.gates:
        state = apply_gate(state, gate)
    return state


def haar_random_state(n, seed):
    """Normalized i.i.d. standard complex Gaussians: one Haar-distributed column."""
    check_qubit_count(n)
    rng = derive_rng(seed)
    amps = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    amps /= np.linalg.norm(amps)
    return StateVector(n, amps)


def sample_counts(probs, shots, rng):
    probs = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    probs = probs / probs.sum()
    return rng.multinomial(shots, probs)


def histogram_from_counts(counts, n):
    nz = np.flatnonzero(counts)
    return ShotHistogram(
        n_qubits=n,
        counts={bitstring(z, n): int(counts[z]) for z in nz},
        total_shots=int(counts.sum()),
    )


def measure_sample(state, shots, seed):
    if state.is_projected:
        raise ContractError("cannot sample from a projected (unnormalized) vector")
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    counts = sample_counts(state.probabilities(), shots, derive_rng(seed))
    return histogram_from_counts(counts, state.n_qubits)
