"""Dense state-vector reference used by several test modules."""

from __future__ import annotations

from itertools import product as iproduct

import numpy as np

from ftbench.pauli import PauliOperator

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
ONE_QUBIT = {
    **PAULI,
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "S": np.diag([1, 1j]),
    "SDG": np.diag([1, -1j]),
}


def dense(op: PauliOperator, n: int) -> np.ndarray:
    out = np.array([[op.sign]], dtype=complex)
    for q in range(n):
        out = np.kron(out, PAULI[op.support.get(q, "I")])
    return out


def embed(mat: np.ndarray, qubit: int, n: int) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for q in range(n):
        out = np.kron(out, mat if q == qubit else np.eye(2))
    return out


def gate_matrix(gate: tuple, n: int) -> np.ndarray:
    name = gate[0].upper()
    if name in ONE_QUBIT:
        return embed(ONE_QUBIT[name], gate[1], n)
    c, t = gate[1], gate[2]
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        bits = [(i >> (n - 1 - q)) & 1 for q in range(n)]
        if name == "CNOT":
            if bits[c]:
                bits[t] ^= 1
            j = sum(b << (n - 1 - q) for q, b in enumerate(bits))
            out[j, i] = 1
        elif name == "CZ":
            out[i, i] = -1 if bits[c] and bits[t] else 1
        elif name == "SWAP":
            bits[c], bits[t] = bits[t], bits[c]
            j = sum(b << (n - 1 - q) for q, b in enumerate(bits))
            out[j, i] = 1
        else:
            raise ValueError(name)
    return out


def run_unitary(gates, n: int) -> np.ndarray:
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1
    for g in gates:
        psi = gate_matrix(g, n) @ psi
    return psi


def expectation(psi: np.ndarray, op: PauliOperator, n: int) -> float:
    return float(np.real(np.vdot(psi, dense(op, n) @ psi)))


def all_paulis(n: int):
    for letters in iproduct("IXYZ", repeat=n):
        op = PauliOperator({q: c for q, c in enumerate(letters) if c != "I"})
        if not op.is_identity:
            yield op
