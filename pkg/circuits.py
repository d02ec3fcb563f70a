# Peaked-circuit builders (Grover and shallow), closed-form Grover analysis,
# lowering of abstract oracle/diffusion blocks to elementary gates, and
# OpenQASM 2.0 export.

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

from observables import Oracle_Predicate, get_predicate, register_predicate
from statevec import (
    ONE_QUBIT_KINDS,
    TWO_QUBIT_KINDS,
    cnot,
    cz,
    diffusion,
    h,
    phase_oracle,
    ry,
    rz,
    x,
)
from utils import (
    DegenerateOracleError,
    UnsupportedOracleError,
    check_qubit_count,
    check_qubit_index,
)

MAX_GROVER_ITERATIONS = 64
QASM_HEADER = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: Tuple = ()
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        check_qubit_count(self.n_qubits)
        object.__setattr__(self, "gates", tuple(self.gates))
        for gate in self.gates:
            for q in gate.qubits:
                check_qubit_index(q, self.n_qubits)
            if gate.kind == "oracle":
                pred = get_predicate(gate.predicate_id)
                if pred.n_qubits != self.n_qubits:
                    raise ValueError(
                        f"oracle {gate.predicate_id} is on {pred.n_qubits} qubits, circuit has {self.n_qubits}"
                    )

    def __len__(self):
        return len(self.gates)


@dataclass(frozen=True)
class ShallowSpec:
    """Inputs of the shallow peaked circuit.

    rotations: (qubit, axis in {"y", "z"}, angle)
    entangling_pairs: (control, target, kind in {"cnot", "cz"})
    final_phases: (qubit, angle), applied as rz
    """

    hadamard_set: Tuple[int, ...] = ()
    rotations: Tuple[Tuple[int, str, float], ...] = ()
    entangling_pairs: Tuple[Tuple[int, int, str], ...] = ()
    final_phases: Tuple[Tuple[int, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "hadamard_set", tuple(sorted(set(int(q) for q in self.hadamard_set))))
        object.__setattr__(
            self, "rotations", tuple((int(q), str(a), float(t)) for q, a, t in self.rotations)
        )
        object.__setattr__(
            self,
            "entangling_pairs",
            tuple((int(c), int(t), str(k)) for c, t, k in self.entangling_pairs),
        )
        object.__setattr__(self, "final_phases", tuple((int(q), float(p)) for q, p in self.final_phases))
        for _, axis, _ in self.rotations:
            if axis not in ("y", "z"):
                raise ValueError(f"rotation axis must be 'y' or 'z', got {axis!r}")
        for c, t, kind in self.entangling_pairs:
            if kind not in TWO_QUBIT_KINDS:
                raise ValueError(f"entangler kind must be one of {TWO_QUBIT_KINDS}, got {kind!r}")
            if c == t:
                raise ValueError(f"entangling pair endpoints must differ, got ({c}, {t})")

    def validate(self, n):
        for q in self.hadamard_set:
            check_qubit_index(q, n, "hadamard")
        for q, _, _ in self.rotations:
            check_qubit_index(q, n, "rotation")
        for c, t, _ in self.entangling_pairs:
            check_qubit_index(c, n, "control")
            check_qubit_index(t, n, "target")
        for q, _ in self.final_phases:
            check_qubit_index(q, n, "phase")

    def to_dict(self):
        return {
            "hadamard_set": list(self.hadamard_set),
            "rotations": [list(r) for r in self.rotations],
            "entangling_pairs": [list(p) for p in self.entangling_pairs],
            "final_phases": [list(p) for p in self.final_phases],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            hadamard_set=tuple(d.get("hadamard_set", ())),
            rotations=tuple(tuple(r) for r in d.get("rotations", ())),
            entangling_pairs=tuple(tuple(p) for p in d.get("entangling_pairs", ())),
            final_phases=tuple(tuple(p) for p in d.get("final_phases", ())),
        )


def default_shallow_spec(obs, angle=math.pi / 4):
    """Ry tilt on every support qubit, then a CNOT chain along the support."""
    support = sorted(obs.support)
    return ShallowSpec(
        rotations=tuple((q, "y", angle) for q in support),
        entangling_pairs=tuple((a, b, "cnot") for a, b in zip(support, support[1:])),
    )


######## Grover ########


def _grover_angle(M, N):
    if not (1 <= M < N):
        raise ValueError(f"marked count must satisfy 1 <= M < N, got M={M}, N={N}")
    return math.asin(math.sqrt(M / N))


def grover_success_probability(M, N, T):
    if T < 0:
        raise ValueError(f"iteration count must be >= 0, got {T}")
    theta = _grover_angle(M, N)
    return math.sin((2 * T + 1) * theta) ** 2


def optimal_iterations(M, N):
    """floor(pi / (4 theta)); exact ties go to the smaller T (less depth)."""
    theta = _grover_angle(M, N)
    T = int(math.floor(math.pi / (4 * theta)))
    if T >= 1 and grover_success_probability(M, N, T - 1) >= grover_success_probability(M, N, T) - 1e-12:
        T -= 1
    return T


def build_grover(n, predicate, T):
    check_qubit_count(n)
    if isinstance(predicate, str):
        predicate = get_predicate(predicate)
    if not isinstance(predicate, Oracle_Predicate):
        raise ValueError(f"expected an oracle predicate, got {type(predicate).__name__}")
    if not (0 <= T <= MAX_GROVER_ITERATIONS):
        raise ValueError(f"T must be in [0, {MAX_GROVER_ITERATIONS}], got {T}")
    if predicate.n_qubits != n:
        raise ValueError(f"predicate is on {predicate.n_qubits} qubits, circuit on {n}")
    pid = register_predicate(predicate)
    M, N = predicate.marked_count(), 2**n
    if M == 0 or M == N:
        raise DegenerateOracleError(f"oracle {pid} marks {M} of {N} states; nothing to amplify")
    gates = [h(q) for q in range(n)]
    for _ in range(T):
        gates += [phase_oracle(pid), diffusion()]
    metadata = {"method": "grover", "T": T, "predicate_id": pid, "marked": M, "space": N}
    return Circuit(n, gates, metadata)


######## Shallow ########


def build_shallow(n, spec):
    check_qubit_count(n)
    spec.validate(n)
    gates = [h(q) for q in spec.hadamard_set]
    for q, axis, angle in spec.rotations:
        gates.append(ry(q, angle) if axis == "y" else rz(q, angle))
    for c, t, kind in spec.entangling_pairs:
        gates.append(cnot(c, t) if kind == "cnot" else cz(c, t))
    for q, angle in spec.final_phases:
        gates.append(rz(q, angle))
    return Circuit(n, gates, {"method": "shallow", "spec": spec.to_dict()})


######## Lowering ########


def mcz_gates(qubits):
    """Ancilla-free multi-controlled Z on `qubits` (phase -1 iff all are 1),
    exact up to global phase.

    Uses prod_i x_i = 2^(1-k) sum_{S != {}} (-1)^(|S|-1) parity_S(x): each
    parity phase is an rz on a target holding that parity. Subsets containing
    the last qubit are walked in Gray-code order (one CNOT per step), then the
    rest are handled recursively on the remaining qubits.
    """
    qubits = list(qubits)
    k = len(qubits)
    if k == 0:
        return []
    if k == 1:
        return [rz(qubits[0], math.pi)]
    if k == 2:
        return [cz(qubits[0], qubits[1])]
    gates = []
    _parity_network(qubits, k, gates)
    return gates


def _parity_network(qubits, k, gates):
    if not qubits:
        return
    target, rest = qubits[-1], qubits[:-1]
    m = len(rest)
    prev = 0
    for i in range(2**m):
        code = i ^ (i >> 1)
        if i:
            j = (code ^ prev).bit_length() - 1
            gates.append(cnot(rest[j], target))
        size = bin(code).count("1") + 1
        angle = math.pi / 2 ** (k - 1)
        gates.append(rz(target, angle if size % 2 else -angle))
        prev = code
    if m:
        # Gray sequence ends on a single set bit; clear it
        gates.append(cnot(rest[prev.bit_length() - 1], target))
    _parity_network(rest, k, gates)


def oracle_gates(predicate):
    constraints = predicate.parity_constraints()
    if constraints is None:
        raise UnsupportedOracleError(
            f"oracle {predicate.predicate_id} has no bit-constraint/parity structure to lower"
        )
    compute, flips, targets = [], [], []
    for qubits, value in constraints:
        if not qubits:
            if value:
                raise UnsupportedOracleError(f"oracle {predicate.predicate_id} marks nothing")
            continue
        t = qubits[-1]
        compute += [cnot(q, t) for q in qubits[:-1]]
        if value == 0:
            flips.append(x(t))
        targets.append(t)
    # no constraints left means every state is marked: a global phase
    if not targets:
        return []
    return compute + flips + mcz_gates(targets) + flips[::-1] + compute[::-1]


def diffusion_gates(n):
    # 2|psi><psi| - I = -H^n X^n C^(n-1)Z X^n H^n
    hs = [h(q) for q in range(n)]
    xs = [x(q) for q in range(n)]
    return hs + xs + mcz_gates(range(n)) + xs + hs


def lower_circuit(circuit):
    """Replace abstract oracle/diffusion blocks with elementary gates.
    The result equals the abstract circuit up to global phase."""
    gates = []
    oracle_cache = {}
    diffusion_cache = None
    for gate in circuit.gates:
        if gate.kind == "oracle":
            if gate.predicate_id not in oracle_cache:
                oracle_cache[gate.predicate_id] = oracle_gates(get_predicate(gate.predicate_id))
            gates += oracle_cache[gate.predicate_id]
        elif gate.kind == "diffusion":
            if diffusion_cache is None:
                diffusion_cache = diffusion_gates(circuit.n_qubits)
            gates += diffusion_cache
        else:
            gates.append(gate)
    metadata = dict(circuit.metadata)
    metadata["lowered"] = True
    return Circuit(circuit.n_qubits, gates, metadata)


def circuit_depth(circuit):
    """ASAP layer count; abstract blocks occupy every qubit."""
    layer = [0] * circuit.n_qubits
    for gate in circuit.gates:
        touched = range(circuit.n_qubits) if gate.is_abstract else gate.qubits
        top = max(layer[q] for q in touched) + 1
        for q in touched:
            layer[q] = top
    return max(layer) if layer else 0


def gate_counts(circuit):
    counts = {}
    for gate in circuit.gates:
        counts[gate.kind] = counts.get(gate.kind, 0) + 1
    counts["one_qubit"] = sum(counts.get(k, 0) for k in ONE_QUBIT_KINDS)
    counts["two_qubit"] = sum(counts.get(k, 0) for k in TWO_QUBIT_KINDS)
    return counts


######## Export ########


def _fmt_angle(a):
    return format(a, ".17g")


def export_qasm(circuit):
    lowered = lower_circuit(circuit)
    lines = [QASM_HEADER, f"qreg q[{circuit.n_qubits}];\n"]
    for g in lowered.gates:
        if g.kind in ("h", "x"):
            lines.append(f"{g.kind} q[{g.qubits[0]}];\n")
        elif g.kind in ("ry", "rz"):
            lines.append(f"{g.kind}({_fmt_angle(g.params[0])}) q[{g.qubits[0]}];\n")
        elif g.kind == "cnot":
            lines.append(f"cx q[{g.qubits[0]}],q[{g.qubits[1]}];\n")
        elif g.kind == "cz":
            lines.append(f"cz q[{g.qubits[0]}],q[{g.qubits[1]}];\n")
        else:
            raise UnsupportedOracleError(f"gate {g.kind} survived lowering")
    return "".join(lines)
