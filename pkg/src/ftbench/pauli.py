"""Sparse Pauli operators and GF(2) symplectic linear algebra.

Phases are tracked modulo the global factor of i: an operator carries a sign
of +1 or -1 only.  When a product picks up a factor i**k we keep the sign
(-1)**(k // 2), so ``X * Z`` (which is ``-iY``) is stored as ``-Y`` and
``Z * X`` (``+iY``) as ``+Y``.  Products of commuting operators are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

LETTERS = ("X", "Y", "Z")

# (x, z) symplectic bits for each letter
_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_FROM_BITS = {(1, 0): "X", (1, 1): "Y", (0, 1): "Z"}

# exponent of i picked up by the single-qubit product a*b
_PHASE = {
    ("X", "Y"): 1, ("Y", "Z"): 1, ("Z", "X"): 1,
    ("Y", "X"): 3, ("Z", "Y"): 3, ("X", "Z"): 3,
}
_PRODUCT = {
    ("X", "Y"): "Z", ("Y", "X"): "Z",
    ("Y", "Z"): "X", ("Z", "Y"): "X",
    ("Z", "X"): "Y", ("X", "Z"): "Y",
}


@dataclass(frozen=True)
class PauliOperator:
    """A signed tensor product of single-qubit Paulis.

    ``support`` maps a qubit id to one of ``"X"``, ``"Y"``, ``"Z"``; identity
    factors are never stored.
    """

    support: Mapping[int, str] = field(default_factory=dict)
    sign: int = 1

    def __post_init__(self):
        clean = {}
        for q, letter in dict(self.support).items():
            letter = letter.upper()
            if letter == "I":
                continue
            if letter not in _BITS:
                raise ValueError(f"bad Pauli letter {letter!r} on qubit {q}")
            clean[int(q)] = letter
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        object.__setattr__(self, "support", dict(sorted(clean.items())))

    @classmethod
    def from_string(cls, text: str, qubits: Iterable[int] | None = None) -> "PauliOperator":
        """Parse a dense string such as ``"-XIZY"``."""
        text = text.strip()
        sign = 1
        if text and text[0] in "+-":
            sign = -1 if text[0] == "-" else 1
            text = text[1:]
        qubits = list(range(len(text))) if qubits is None else list(qubits)
        if len(qubits) != len(text):
            raise ValueError("qubit list length does not match string")
        return cls({q: c for q, c in zip(qubits, text) if c not in "I_"}, sign)

    @classmethod
    def single(cls, qubit: int, letter: str, sign: int = 1) -> "PauliOperator":
        return cls({qubit: letter}, sign)

    @property
    def weight(self) -> int:
        return len(self.support)

    @property
    def is_identity(self) -> bool:
        return not self.support

    def __len__(self):
        return len(self.support)

    def __hash__(self):
        return hash((tuple(self.support.items()), self.sign))

    def __eq__(self, other):
        if not isinstance(other, PauliOperator):
            return NotImplemented
        return self.sign == other.sign and self.support == other.support

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        return multiply(self, other)

    def __neg__(self):
        return PauliOperator(self.support, -self.sign)

    def unsigned(self) -> "PauliOperator":
        return PauliOperator(self.support, 1)

    def to_string(self, n_qubits: int) -> str:
        body = "".join(self.support.get(q, "I") for q in range(n_qubits))
        return ("+" if self.sign > 0 else "-") + body

    def __repr__(self):
        body = " ".join(f"{c}{q}" for q, c in self.support.items()) or "I"
        return f"PauliOperator({'+' if self.sign > 0 else '-'}{body})"

    def to_json(self) -> dict:
        return {"sign": self.sign, "support": {str(q): c for q, c in self.support.items()}}

    @classmethod
    def from_json(cls, obj: dict) -> "PauliOperator":
        return cls({int(q): c for q, c in obj["support"].items()}, int(obj.get("sign", 1)))

    def symplectic(self, n_qubits: int) -> np.ndarray:
        """Length-2n uint8 vector ``[x | z]``."""
        v = np.zeros(2 * n_qubits, dtype=np.uint8)
        for q, c in self.support.items():
            x, z = _BITS[c]
            v[q] = x
            v[n_qubits + q] = z
        return v

    @classmethod
    def from_symplectic(cls, vec: np.ndarray, sign: int = 1) -> "PauliOperator":
        vec = np.asarray(vec)
        n = vec.shape[0] // 2
        support = {}
        for q in np.flatnonzero(vec[:n] | vec[n:]):
            support[int(q)] = _FROM_BITS[(int(vec[q]), int(vec[n + q]))]
        return cls(support, sign)


def commutes(p: PauliOperator, q: PauliOperator) -> bool:
    """True iff the symplectic product of ``p`` and ``q`` vanishes mod 2."""
    if len(p.support) > len(q.support):
        p, q = q, p
    odd = 0
    qs = q.support
    for k, a in p.support.items():
        b = qs.get(k)
        if b is not None and b != a:
            odd ^= 1
    return odd == 0


def multiply(p: PauliOperator, q: PauliOperator) -> PauliOperator:
    """Operator product ``p * q`` (``q`` acts first), sign kept modulo i."""
    out = dict(p.support)
    k = 0
    for idx, b in q.support.items():
        a = out.get(idx)
        if a is None:
            out[idx] = b
        elif a == b:
            del out[idx]
        else:
            k += _PHASE[(a, b)]
            out[idx] = _PRODUCT[(a, b)]
    sign = p.sign * q.sign * (-1 if (k % 4) // 2 else 1)
    return PauliOperator(out, sign)


def product(ops: Iterable[PauliOperator]) -> PauliOperator:
    acc = PauliOperator()
    for op in ops:
        acc = multiply(acc, op)
    return acc


def symplectic_matrix(ops: Iterable[PauliOperator], n_qubits: int) -> np.ndarray:
    ops = list(ops)
    m = np.zeros((len(ops), 2 * n_qubits), dtype=np.uint8)
    for i, op in enumerate(ops):
        for q, c in op.support.items():
            x, z = _BITS[c]
            m[i, q] = x
            m[i, n_qubits + q] = z
    return m


def symplectic_form(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise symplectic products of the rows of ``a`` and ``b`` (mod 2)."""
    n = a.shape[1] // 2
    a = a.astype(np.int64)
    b = b.astype(np.int64)
    return (a[:, :n] @ b[:, n:].T + a[:, n:] @ b[:, :n].T) % 2


def gf2_row_reduce(mat: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2) and the pivot columns.

    Columns are scanned left to right, so pivots follow qubit-id order.
    """
    a = (np.asarray(mat) & 1).astype(np.uint8, copy=True)
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        hits = np.flatnonzero(a[r:, c])
        if hits.size == 0:
            continue
        p = r + int(hits[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        others = np.flatnonzero(a[:, c])
        others = others[others != r]
        if others.size:
            a[others] ^= a[r]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def gf2_rank_matrix(mat: np.ndarray) -> int:
    if np.asarray(mat).size == 0:
        return 0
    return len(gf2_row_reduce(mat)[1])


def gf2_nullspace(mat: np.ndarray) -> np.ndarray:
    """Basis (as rows) of the right null space of ``mat`` over GF(2)."""
    mat = np.asarray(mat, dtype=np.uint8)
    cols = mat.shape[1]
    if mat.shape[0] == 0:
        return np.eye(cols, dtype=np.uint8)
    rref, pivots = gf2_row_reduce(mat)
    free = [c for c in range(cols) if c not in set(pivots)]
    basis = np.zeros((len(free), cols), dtype=np.uint8)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for r, pc in enumerate(pivots):
            basis[i, pc] = rref[r, f]
    return basis


def in_rowspace(vec: np.ndarray, mat: np.ndarray) -> bool:
    if np.asarray(mat).size == 0:
        return not np.any(vec)
    base = gf2_rank_matrix(mat)
    return gf2_rank_matrix(np.vstack([mat, vec])) == base


def to_bits(vec) -> int:
    """Pack a 0/1 vector into a python int (bit i = entry i)."""
    idx = np.flatnonzero(np.asarray(vec))
    return sum(1 << int(i) for i in idx)


def from_bits(bits: int, length: int) -> np.ndarray:
    out = np.zeros(length, dtype=np.uint8)
    i = 0
    while bits:
        if bits & 1:
            out[i] = 1
        bits >>= 1
        i += 1
    return out


class GF2Basis:
    """Incrementally grown GF(2) row space over packed-int vectors."""

    def __init__(self):
        self.rows = {}  # leading bit -> row

    def reduce(self, bits: int) -> int:
        while bits:
            top = bits.bit_length() - 1
            row = self.rows.get(top)
            if row is None:
                return bits
            bits ^= row
        return 0

    def add(self, bits: int) -> bool:
        """Insert; returns False when ``bits`` was already in the span."""
        r = self.reduce(bits)
        if not r:
            return False
        self.rows[r.bit_length() - 1] = r
        return True

    def __len__(self):
        return len(self.rows)


class NonCommutingError(ValueError):
    pass


@dataclass(frozen=True)
class StabilizerGroup:
    generators: tuple[PauliOperator, ...]
    n_qubits: int

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        for g in self.generators:
            if g.support and max(g.support) >= self.n_qubits:
                raise ValueError("generator acts outside the register")

    def __len__(self):
        return len(self.generators)

    def matrix(self) -> np.ndarray:
        return symplectic_matrix(self.generators, self.n_qubits)

    def check_commuting(self) -> None:
        m = self.matrix()
        if m.shape[0] and symplectic_form(m, m).any():
            i, j = np.argwhere(symplectic_form(m, m))[0]
            raise NonCommutingError(f"generators {i} and {j} anticommute")

    def contains(self, op: PauliOperator) -> bool:
        """Membership up to sign."""
        return in_rowspace(op.symplectic(self.n_qubits), self.matrix())


def gf2_rank(group: StabilizerGroup) -> int:
    """Rank of the generators' symplectic matrix; rejects anticommuting sets."""
    group.check_commuting()
    return gf2_rank_matrix(group.matrix())


def logical_qubit_count(group: StabilizerGroup) -> int:
    return group.n_qubits - gf2_rank(group)
