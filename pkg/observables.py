# Diagonal Z-string observables, the up-projector, and the phase-oracle
# predicates built from an observable's sign structure.
#
# Textual grammar (config files and CLI):
#   Z@[0,2,4]          Z-string on qubits 0, 2, 4   (Z@[] is the identity)
#   P_up@5             up-projector on qubit 5
#   sign_positive | sign_positive_and_up | set:[3,5] | bits:[0=0,3=1]

import hashlib
import re
from dataclasses import dataclass
from typing import Dict, FrozenSet

import numpy as np

from utils import DegenerateOracleError, check_qubit_count, check_qubit_index


@dataclass(frozen=True)
class DiagonalObservable:
    """a_z = prod_{i in support} (1 - 2 bit_i(z)), i.e. (-1)^(parity of supported bits)."""

    n_qubits: int
    support: FrozenSet[int]

    def __post_init__(self):
        check_qubit_count(self.n_qubits)
        support = frozenset(int(q) for q in self.support)
        for q in support:
            check_qubit_index(q, self.n_qubits, "support")
        object.__setattr__(self, "support", support)

    @property
    def mask(self):
        m = 0
        for q in self.support:
            m |= 1 << q
        return m

    def values(self):
        """materialize a_z for all 2^n basis states"""
        z = np.arange(2**self.n_qubits, dtype=np.int64)
        parity = np.zeros(len(z), dtype=np.int64)
        for q in self.support:
            parity ^= (z >> q) & 1
        return (1 - 2 * parity).astype(float)

    def spec(self):
        return f"Z@[{','.join(str(q) for q in sorted(self.support))}]"


@dataclass(frozen=True)
class UpProjector:
    """P_up = |0><0| on one qubit; B = 2 P_up - I is implied, never stored."""

    qubit: int

    def __post_init__(self):
        if not isinstance(self.qubit, (int, np.integer)) or self.qubit < 0:
            raise ValueError(f"projector qubit must be a non-negative integer, got {self.qubit!r}")

    def spec(self):
        return f"P_up@{self.qubit}"

    def keep_mask(self, n):
        check_qubit_index(self.qubit, n, "projector")
        return ((np.arange(2**n, dtype=np.int64) >> self.qubit) & 1) == 0


def zstring(n, support):
    return DiagonalObservable(n, frozenset(support))


def diag_value(obs, z):
    if not isinstance(z, (int, np.integer)) or z < 0 or z >= 2**obs.n_qubits:
        raise ValueError(f"basis index {z!r} out of range for {obs.n_qubits} qubits")
    parity = bin(int(z) & obs.mask).count("1") & 1
    return 1.0 - 2.0 * parity


def check_disjoint(obs, proj):
    if proj.qubit in obs.support:
        raise ValueError(
            f"projector qubit {proj.qubit} overlaps observable support {sorted(obs.support)}"
        )


# Predicate registry. Ids are derived from the definition, so rebuilding the
# same predicate is idempotent and ids survive a config round-trip.
_REGISTRY = {}


def register_predicate(predicate):
    _REGISTRY[predicate.predicate_id] = predicate
    return predicate.predicate_id


def get_predicate(predicate_id):
    try:
        return _REGISTRY[predicate_id]
    except KeyError:
        raise KeyError(f"no oracle predicate registered under {predicate_id!r}") from None


class Oracle_Predicate:
    """abstract base for phase-oracle predicates over n-bit basis indices"""

    kind = "abstract"

    def __init__(self, n_qubits):
        check_qubit_count(n_qubits)
        self.n_qubits = n_qubits

    def __call__(self, z):
        return bool(self.forward(np.asarray([z], dtype=np.int64))[0])

    def forward(self, z):
        """vectorized predicate over an int array of basis indices"""
        raise NotImplementedError("subclass this method")

    def mask(self, n=None):
        if n is not None and n != self.n_qubits:
            raise ValueError(f"predicate is defined on {self.n_qubits} qubits, circuit has {n}")
        return self.forward(np.arange(2**self.n_qubits, dtype=np.int64))

    def marked_count(self):
        return int(self.mask().sum())

    def parity_constraints(self):
        """Lowering structure: list of (qubits, required parity) with disjoint
        qubit sets, whose conjunction is the predicate. None if not expressible."""
        return None

    @property
    def predicate_id(self):
        return f"{self.spec()}#n{self.n_qubits}"

    def spec(self):
        raise NotImplementedError("subclass this method")


class Sign_Positive_Oracle(Oracle_Predicate):
    """f(z) = Theta(a_z): marks a_z > 0 (Theta(0) = 0)."""

    kind = "sign_positive"

    def __init__(self, obs):
        super().__init__(obs.n_qubits)
        self.obs = obs

    def forward(self, z):
        parity = np.zeros(len(z), dtype=np.int64)
        for q in self.obs.support:
            parity ^= (z >> q) & 1
        return parity == 0

    def marked_count(self):
        return 2 ** (self.n_qubits - 1) if self.obs.support else 2**self.n_qubits

    def parity_constraints(self):
        return [(tuple(sorted(self.obs.support)), 0)]

    def spec(self):
        return f"sign_positive:{self.obs.spec()}"


class Sign_Positive_And_Up_Oracle(Sign_Positive_Oracle):
    """a_z > 0 and bit_p(z) = 0: exactly the positive terms of the projected sum."""

    kind = "sign_positive_and_up"

    def __init__(self, obs, proj):
        check_disjoint(obs, proj)
        check_qubit_index(proj.qubit, obs.n_qubits, "projector")
        super().__init__(obs)
        self.proj = proj

    def forward(self, z):
        return super().forward(z) & (((z >> self.proj.qubit) & 1) == 0)

    def marked_count(self):
        return 2 ** (self.n_qubits - 2) if self.obs.support else 2 ** (self.n_qubits - 1)

    def parity_constraints(self):
        return [(tuple(sorted(self.obs.support)), 0), ((self.proj.qubit,), 0)]

    def spec(self):
        return f"sign_positive_and_up:{self.obs.spec()}:{self.proj.spec()}"


class Explicit_Set_Oracle(Oracle_Predicate):
    kind = "set"

    def __init__(self, n_qubits, marked):
        super().__init__(n_qubits)
        marked = sorted(set(int(z) for z in marked))
        for z in marked:
            if z < 0 or z >= 2**n_qubits:
                raise ValueError(f"marked index {z} out of range for {n_qubits} qubits")
        self.marked = tuple(marked)

    def forward(self, z):
        return np.isin(z, np.asarray(self.marked, dtype=np.int64))

    def marked_count(self):
        return len(self.marked)

    def parity_constraints(self):
        # only a single marked string is a plain bit conjunction
        if len(self.marked) != 1:
            return None
        z0 = self.marked[0]
        return [((q,), (z0 >> q) & 1) for q in range(self.n_qubits)]

    def spec(self):
        return f"set:[{','.join(str(z) for z in self.marked)}]"


class Bit_Conjunction_Oracle(Oracle_Predicate):
    """conjunction of fixed-bit constraints, e.g. {0: 0, 3: 1}"""

    kind = "bits"

    def __init__(self, n_qubits, constraints: Dict[int, int]):
        super().__init__(n_qubits)
        if not constraints:
            raise ValueError("bit conjunction needs at least one constraint")
        for q, v in constraints.items():
            check_qubit_index(q, n_qubits)
            if v not in (0, 1):
                raise ValueError(f"bit value for qubit {q} must be 0 or 1, got {v!r}")
        self.constraints = dict(sorted((int(q), int(v)) for q, v in constraints.items()))

    def forward(self, z):
        ok = np.ones(len(z), dtype=bool)
        for q, v in self.constraints.items():
            ok &= ((z >> q) & 1) == v
        return ok

    def marked_count(self):
        return 2 ** (self.n_qubits - len(self.constraints))

    def parity_constraints(self):
        return [((q,), v) for q, v in self.constraints.items()]

    def spec(self):
        return f"bits:[{','.join(f'{q}={v}' for q, v in self.constraints.items())}]"


class Array_Sign_Oracle(Oracle_Predicate):
    """Theta(a_z) for a general real diagonal array; a_z = 0 stays unmarked."""

    kind = "sign_positive_array"

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        n = int(np.log2(len(values)))
        if 2**n != len(values):
            raise ValueError(f"diagonal array length {len(values)} is not a power of two")
        super().__init__(n)
        self.values = values

    def forward(self, z):
        return self.values[z] > 0

    def spec(self):
        # content hash keeps ids distinct for distinct arrays
        digest = hashlib.sha1(self.values.tobytes()).hexdigest()[:12]
        return f"sign_positive_array:{digest}"


def heaviside_oracle(obs):
    if isinstance(obs, DiagonalObservable):
        if not obs.support:
            raise DegenerateOracleError(
                "identity observable has a_z = +1 everywhere, so every state is marked and Grover cannot amplify"
            )
        pred = Sign_Positive_Oracle(obs)
    else:
        pred = Array_Sign_Oracle(obs)
        m = pred.marked_count()
        if m == 0 or m == 2**pred.n_qubits:
            raise DegenerateOracleError(f"diagonal array marks {m} of {2**pred.n_qubits} states")
    register_predicate(pred)
    return pred


def conjoined_oracle(obs, proj):
    pred = Sign_Positive_And_Up_Oracle(obs, proj)
    register_predicate(pred)
    return pred


def explicit_oracle(n, marked):
    pred = Explicit_Set_Oracle(n, marked)
    register_predicate(pred)
    return pred


def bits_oracle(n, constraints):
    pred = Bit_Conjunction_Oracle(n, constraints)
    register_predicate(pred)
    return pred


######## Parsing ########

_INT_LIST = r"\[\s*(\d+(?:\s*,\s*\d+)*)?\s*\]"
_ZSTRING_RE = re.compile(rf"^Z@{_INT_LIST}$")
_PROJ_RE = re.compile(r"^P_up@(\d+)$")
_SET_RE = re.compile(rf"^set:{_INT_LIST}$")
_BITS_RE = re.compile(r"^bits:\[\s*(\d+\s*=\s*[01](?:\s*,\s*\d+\s*=\s*[01])*)\s*\]$")


def _int_list(group):
    if not group:
        return []
    return [int(tok) for tok in group.split(",")]


def parse_observable(text, n):
    m = _ZSTRING_RE.match(text.strip())
    if not m:
        raise ValueError(f"bad observable spec {text!r}; expected e.g. Z@[0,2,4]")
    support = _int_list(m.group(1))
    if len(set(support)) != len(support):
        raise ValueError(f"repeated qubit in observable spec {text!r}")
    return zstring(n, support)


def parse_projector(text, n):
    m = _PROJ_RE.match(text.strip())
    if not m:
        raise ValueError(f"bad projector spec {text!r}; expected e.g. P_up@1")
    proj = UpProjector(int(m.group(1)))
    check_qubit_index(proj.qubit, n, "projector")
    return proj


def parse_oracle(text, obs, proj):
    """Build (and register) the predicate named by an oracle spec."""
    text = text.strip()
    n = obs.n_qubits
    if text == "sign_positive":
        return heaviside_oracle(obs)
    if text == "sign_positive_and_up":
        return conjoined_oracle(obs, proj)
    m = _SET_RE.match(text)
    if m:
        return explicit_oracle(n, _int_list(m.group(1)))
    m = _BITS_RE.match(text)
    if m:
        constraints = {}
        for tok in m.group(1).split(","):
            q, v = (int(s) for s in tok.split("="))
            if q in constraints:
                raise ValueError(f"qubit {q} constrained twice in {text!r}")
            constraints[q] = v
        return bits_oracle(n, constraints)
    raise ValueError(
        f"bad oracle spec {text!r}; expected sign_positive | sign_positive_and_up | set:[...] | bits:[q=v,...]"
    )


def observable_values(obs):
    """a_z array for a DiagonalObservable or a raw real diagonal array."""
    if isinstance(obs, DiagonalObservable):
        return obs.values()
    values = np.asarray(obs, dtype=float).reshape(-1)
    if 2 ** int(np.log2(len(values))) != len(values):
        raise ValueError(f"diagonal array length {len(values)} is not a power of two")
    return values


def check_pairing(obs, proj, n):
    """Projector must sit on a valid qubit outside the observable's support.
    For raw arrays that means a_z may not depend on bit p."""
    check_qubit_index(proj.qubit, n, "projector")
    if isinstance(obs, DiagonalObservable):
        if obs.n_qubits != n:
            raise ValueError(f"observable is on {obs.n_qubits} qubits, state has {n}")
        check_disjoint(obs, proj)
        return
    values = observable_values(obs)
    if len(values) != 2**n:
        raise ValueError(f"diagonal array has {len(values)} entries, state has {2**n}")
    z = np.arange(2**n, dtype=np.int64)
    if not np.array_equal(values, values[z ^ (1 << proj.qubit)]):
        raise ValueError(f"diagonal array depends on projector qubit {proj.qubit}")
