"""Independent dense-matrix reference built from Kronecker products.

Qubit q is bit q of the basis index, so the leftmost Kronecker factor is
qubit n-1. Nothing here touches the tensordot kernels under test.
"""
from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)
P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)


def ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(phi):
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])


def embed(ops, n):
    """ops: {qubit: 2x2}; identity elsewhere."""
    return reduce(np.kron, [ops.get(q, I2) for q in reversed(range(n))])


def cnot(c, t, n):
    return embed({c: P0}, n) + embed({c: P1, t: X}, n)


def cz(a, b, n):
    return np.eye(2**n, dtype=complex) - 2 * embed({a: P1, b: P1}, n)


def gate_unitary(gate, n):
    if gate.kind == "h":
        return embed({gate.qubits[0]: H}, n)
    if gate.kind == "x":
        return embed({gate.qubits[0]: X}, n)
    if gate.kind == "ry":
        return embed({gate.qubits[0]: ry(gate.params[0])}, n)
    if gate.kind == "rz":
        return embed({gate.qubits[0]: rz(gate.params[0])}, n)
    if gate.kind == "cnot":
        return cnot(gate.qubits[0], gate.qubits[1], n)
    if gate.kind == "cz":
        return cz(gate.qubits[0], gate.qubits[1], n)
    raise ValueError(gate.kind)


def circuit_unitary(gates, n):
    u = np.eye(2**n, dtype=complex)
    for g in gates:
        u = gate_unitary(g, n) @ u
    return u


def zstring_matrix(support, n):
    return embed({q: Z for q in support}, n)


def up_projector(p, n):
    return embed({p: P0}, n)


def dense_estimates(psi, support, p, n):
    A = zstring_matrix(support, n)
    P = up_projector(p, n)
    projected = np.real(np.conj(psi) @ P @ A @ P @ psi)
    overlap = np.real(np.conj(psi) @ P @ psi)
    a_exp = np.real(np.conj(psi) @ A @ psi)
    return {
        "c_ab_projected": projected,
        "c_ab_full": projected / 2 ** (n - 1) - a_exp / 2**n,
        "s_a": overlap,
        "e_a": projected / overlap,
    }


def equal_up_to_phase(a, b, atol=1e-9):
    k = np.argmax(np.abs(b))
    if abs(b[k]) < atol:
        return np.allclose(a, b, atol=atol)
    phase = a[k] / b[k]
    return abs(abs(phase) - 1) < atol and np.allclose(a, phase * b, atol=atol)
