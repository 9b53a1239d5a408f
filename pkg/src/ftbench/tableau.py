"""Stabilizer tableau simulator used as an exact oracle.

The tableau keeps ``n`` destabilizer rows followed by ``n`` stabilizer rows in
symplectic form with a sign bit per row.  Gates act by conjugation, and a
measurement of an arbitrary Pauli product is either deterministic (the operator
or its negative is in the stabilizer group) or a fair coin.

Outcomes are reported as eigenvalues ``+1`` / ``-1``.  Random outcomes can be
forced, which lets :func:`outcome_distribution` enumerate every branch with
exact dyadic probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .pauli import PauliOperator

SINGLE_QUBIT_GATES = ("H", "S", "SDG", "X", "Y", "Z", "I")
TWO_QUBIT_GATES = ("CNOT", "CZ", "SWAP")


class TableauError(ValueError):
    """Raised for malformed circuits or impossible forced outcomes."""


def _phase_exponent(x1, z1, x2, z2):
    """Per-qubit exponent of i picked up by P1*P2 (Aaronson-Gottesman g)."""
    x1 = x1.astype(np.int64)
    z1 = z1.astype(np.int64)
    x2 = x2.astype(np.int64)
    z2 = z2.astype(np.int64)
    return np.where(
        (x1 == 1) & (z1 == 1),
        z2 - x2,
        np.where(
            (x1 == 1) & (z1 == 0),
            z2 * (2 * x2 - 1),
            np.where((x1 == 0) & (z1 == 1), x2 * (1 - 2 * z2), 0),
        ),
    )


def apply_gate_rows(x: np.ndarray, z: np.ndarray, r: np.ndarray, gate: str, qubits: Sequence[int]) -> None:
    """Conjugate every row ``P -> G P G^dagger`` in place.

    ``x`` and ``z`` are ``(rows, n)`` uint8 arrays and ``r`` the sign bits.
    """
    g = gate.upper()
    if g in SINGLE_QUBIT_GATES:
        if len(qubits) != 1:
            raise TableauError(f"{g} acts on one qubit")
        (a,) = qubits
        xa, za = x[:, a], z[:, a]
        if g == "H":
            r ^= xa & za
            x[:, a], z[:, a] = za.copy(), xa.copy()
        elif g == "S":
            r ^= xa & za
            z[:, a] ^= xa
        elif g == "SDG":
            z[:, a] ^= xa
            r ^= x[:, a] & z[:, a]
        elif g == "X":
            r ^= za
        elif g == "Z":
            r ^= xa
        elif g == "Y":
            r ^= xa ^ za
        return
    if g in TWO_QUBIT_GATES:
        if len(qubits) != 2 or qubits[0] == qubits[1]:
            raise TableauError(f"{g} needs two distinct qubits")
        a, b = qubits
        if g == "CNOT":
            r ^= x[:, a] & z[:, b] & (x[:, b] ^ z[:, a] ^ 1)
            x[:, b] ^= x[:, a]
            z[:, a] ^= z[:, b]
        elif g == "CZ":
            apply_gate_rows(x, z, r, "H", (b,))
            apply_gate_rows(x, z, r, "CNOT", (a, b))
            apply_gate_rows(x, z, r, "H", (b,))
        else:
            x[:, [a, b]] = x[:, [b, a]]
            z[:, [a, b]] = z[:, [b, a]]
        return
    raise TableauError(f"unknown gate {gate!r}")


def conjugate(op: PauliOperator, gates: Iterable[tuple], n_qubits: int) -> PauliOperator:
    """Return ``V op V^dagger`` where ``V`` applies ``gates`` in order."""
    v = op.symplectic(n_qubits)
    x = v[:n_qubits].reshape(1, -1).copy()
    z = v[n_qubits:].reshape(1, -1).copy()
    r = np.array([0 if op.sign > 0 else 1], dtype=np.uint8)
    for gate in gates:
        apply_gate_rows(x, z, r, gate[0], gate[1:])
    return PauliOperator.from_symplectic(np.concatenate([x[0], z[0]]), -1 if r[0] else 1)


_INVERSE = {"S": "SDG", "SDG": "S"}


def heisenberg(op: PauliOperator, gates: Sequence[tuple], n_qubits: int) -> PauliOperator:
    """Return ``U^dagger op U`` for the unitary ``U`` that applies ``gates`` in order."""
    inverse = [(_INVERSE.get(g[0].upper(), g[0]),) + tuple(g[1:]) for g in reversed(gates)]
    return conjugate(op, inverse, n_qubits)


class Tableau:
    """Aaronson-Gottesman tableau, initialised to ``|0...0>``."""

    def __init__(self, n_qubits: int):
        if n_qubits < 0:
            raise TableauError("n_qubits must be non-negative")
        n = n_qubits
        self.n_qubits = n
        self.x = np.zeros((2 * n, n), dtype=np.uint8)
        self.z = np.zeros((2 * n, n), dtype=np.uint8)
        self.r = np.zeros(2 * n, dtype=np.uint8)
        idx = np.arange(n)
        self.x[idx, idx] = 1
        self.z[n + idx, idx] = 1

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.n_qubits = self.n_qubits
        t.x, t.z, t.r = self.x.copy(), self.z.copy(), self.r.copy()
        return t

    # gates -----------------------------------------------------------------

    def _check(self, qubits: Sequence[int]) -> None:
        for q in qubits:
            if not 0 <= q < self.n_qubits:
                raise TableauError(f"qubit {q} out of range for {self.n_qubits} qubits")

    def apply(self, gate: str, *qubits: int) -> None:
        self._check(qubits)
        apply_gate_rows(self.x, self.z, self.r, gate, qubits)

    # measurement -------------------------------------------------------------

    def _vector(self, op: PauliOperator) -> tuple[np.ndarray, np.ndarray]:
        if op.is_identity:
            raise TableauError("cannot measure the identity")
        self._check(list(op.support))
        v = op.symplectic(self.n_qubits)
        return v[: self.n_qubits], v[self.n_qubits:]

    def _anticommuting(self, px, pz) -> np.ndarray:
        return ((self.x @ pz + self.z @ px) & 1).astype(bool) if self.n_qubits else np.zeros(0, bool)

    def _rowmul(self, h: np.ndarray, i: int) -> None:
        """Rows ``h`` <- row ``i`` * rows ``h`` (signs exact for commuting pairs)."""
        if h.size == 0:
            return
        e = _phase_exponent(self.x[i], self.z[i], self.x[h], self.z[h]).sum(axis=1)
        total = 2 * self.r[h].astype(np.int64) + 2 * int(self.r[i]) + e
        self.r[h] = ((total % 4) // 2).astype(np.uint8)
        self.x[h] ^= self.x[i]
        self.z[h] ^= self.z[i]

    def _stabilizer_sign(self, anti: np.ndarray) -> int:
        """Sign bit of the product of stabilizers picked out by anticommuting destabilizers."""
        n = self.n_qubits
        sx = np.zeros(n, dtype=np.uint8)
        sz = np.zeros(n, dtype=np.uint8)
        sr = 0
        for j in np.flatnonzero(anti[:n]):
            row = n + j
            e = int(_phase_exponent(self.x[row], self.z[row], sx, sz).sum())
            sr = ((2 * sr + 2 * int(self.r[row]) + e) % 4) // 2
            sx ^= self.x[row]
            sz ^= self.z[row]
        return sr

    def peek(self, op: PauliOperator) -> int:
        """Expectation of ``op``: ``+1`` or ``-1`` if determined, ``0`` otherwise."""
        px, pz = self._vector(op)
        anti = self._anticommuting(px, pz)
        if anti[self.n_qubits:].any():
            return 0
        sr = self._stabilizer_sign(anti)
        eig = -1 if sr else 1
        return eig * op.sign

    def is_deterministic(self, op: PauliOperator) -> bool:
        return self.peek(op) != 0

    def measure(self, op: PauliOperator, rng: np.random.Generator | None = None, force: int | None = None) -> int:
        """Measure ``op`` and return its eigenvalue.

        A random outcome is drawn from ``rng`` unless ``force`` is given.
        Forcing a deterministic measurement to the wrong value raises.
        """
        n = self.n_qubits
        px, pz = self._vector(op)
        anti = self._anticommuting(px, pz)
        stab_hits = np.flatnonzero(anti[n:])
        if stab_hits.size == 0:
            eig = (-1 if self._stabilizer_sign(anti) else 1) * op.sign
            if force is not None and force != eig:
                raise TableauError(f"forced outcome {force} impossible, measurement is deterministic {eig}")
            return eig
        p = n + int(stab_hits[0])
        others = np.flatnonzero(anti)
        others = others[others != p]
        self._rowmul(others, p)
        self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p], self.z[p], self.r[p]
        if force is None:
            if rng is None:
                raise TableauError("random outcome needs an rng or a forced value")
            eig = 1 if rng.integers(2) == 0 else -1
        else:
            if force not in (1, -1):
                raise TableauError("forced outcome must be +1 or -1")
            eig = force
        self.x[p], self.z[p] = px, pz
        self.r[p] = 0 if eig * op.sign > 0 else 1
        return eig

    def reset(self, qubit: int, rng: np.random.Generator | None = None, force: int | None = None) -> None:
        """Prepare ``qubit`` in ``|0>`` (measure Z, flip on -1)."""
        if self.measure(PauliOperator.single(qubit, "Z"), rng, force) < 0:
            self.apply("X", qubit)

    # inspection ----------------------------------------------------------------

    def stabilizers(self) -> list[PauliOperator]:
        n = self.n_qubits
        return [
            PauliOperator.from_symplectic(np.concatenate([self.x[n + i], self.z[n + i]]), -1 if self.r[n + i] else 1)
            for i in range(n)
        ]


def _gf2_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Solve ``a @ v = b`` over GF(2); returns one solution or None."""
    a = a.copy() & 1
    b = b.copy() & 1
    rows, cols = a.shape
    pivots = []
    row = 0
    for col in range(cols):
        hit = np.flatnonzero(a[row:, col]) if row < rows else np.array([], dtype=int)
        if hit.size == 0:
            continue
        k = row + int(hit[0])
        a[[row, k]] = a[[k, row]]
        b[[row, k]] = b[[k, row]]
        mask = a[:, col].astype(bool)
        mask[row] = False
        a[mask] ^= a[row]
        b[mask] ^= b[row]
        pivots.append(col)
        row += 1
        if row == rows:
            break
    if b[row:].any():
        return None
    v = np.zeros(cols, dtype=np.uint8)
    for i, col in enumerate(pivots):
        v[col] = b[i]
    return v


def prepare(n_qubits: int, stabilizers: Sequence[PauliOperator]) -> Tableau:
    """Tableau of a state stabilized by every operator in ``stabilizers`` (with signs).

    Starts from ``|0...0>``, measures each generator and repairs wrong signs
    with a Pauli that anticommutes only with that generator.
    """
    t = Tableau(n_qubits)
    done: list[PauliOperator] = []
    for g in stabilizers:
        eig = t.peek(g)
        if eig == 0:
            t.measure(g, force=1)
        elif eig < 0:
            n = n_qubits
            rows = [h.symplectic(n) for h in done + [g]]
            # symplectic product <v, f> = v_x . f_z + v_z . f_x
            mat = np.array([np.concatenate([v[n:], v[:n]]) for v in rows], dtype=np.uint8)
            rhs = np.zeros(len(rows), dtype=np.uint8)
            rhs[-1] = 1
            sol = _gf2_solve(mat, rhs)
            if sol is None:
                raise TableauError(f"generator {g!r} has sign incompatible with earlier generators")
            fix = PauliOperator.from_symplectic(sol)
            for q, letter in fix.support.items():
                t.apply(letter, q)
        done.append(g)
    return t


Instruction = tuple


def run_instruction(t: Tableau, ins: Instruction, rng=None, force: int | None = None) -> int | None:
    """Apply one instruction; return the outcome for measurements.

    Instructions are tuples: ``("H", q)``, ``("CNOT", c, t)``, ``("init", q)``
    or ``("M", PauliOperator)``.
    """
    name = str(ins[0])
    if name == "M":
        op = ins[1]
        if not isinstance(op, PauliOperator):
            raise TableauError("measurement needs a PauliOperator")
        return t.measure(op, rng, force)
    if name.lower() == "init":
        t.reset(int(ins[1]), rng, force)
        return None
    t.apply(name, *[int(q) for q in ins[1:]])
    return None


def tableau_run(
    circuit: Sequence[Instruction],
    n_qubits: int,
    initial_stabilizers: Sequence[PauliOperator] = (),
    seed: int | None = 0,
) -> tuple[list[int], Tableau]:
    """Run ``circuit`` from a state stabilized by ``initial_stabilizers``.

    Returns the list of measurement outcomes (in order) and the final tableau.
    """
    rng = np.random.default_rng(seed)
    t = prepare(n_qubits, initial_stabilizers)
    outcomes = []
    for ins in circuit:
        out = run_instruction(t, ins, rng)
        if ins[0] == "M":
            outcomes.append(out)
    return outcomes, t


@dataclass(frozen=True)
class Branch:
    probability: Fraction
    outcomes: tuple[int, ...]
    tableau: Tableau


def enumerate_branches(
    t: Tableau,
    steps: Sequence[Callable[[Tableau, int | None], int | None]],
) -> list[Branch]:
    """Enumerate all measurement branches of a sequence of steps.

    Each step is called as ``step(tableau, force)`` and returns an outcome or
    None.  A step returning an outcome may be a random measurement; it is first
    probed on a copy with ``force=None`` semantics replaced by trying both forced
    values.  Probabilities are exact fractions.
    """
    out: list[Branch] = []

    def rec(tab: Tableau, k: int, prob: Fraction, outs: tuple[int, ...]):
        if k == len(steps):
            out.append(Branch(prob, outs, tab))
            return
        step = steps[k]
        results = []
        for forced in (1, -1):
            trial = tab.copy()
            try:
                res = step(trial, forced)
            except TableauError:
                continue
            results.append((trial, res))
            if res is None:
                break
        if len(results) == 1:
            trial, res = results[0]
            rec(trial, k + 1, prob, outs if res is None else outs + (res,))
        else:
            for trial, res in results:
                rec(trial, k + 1, prob / 2, outs + (res,))

    rec(t, 0, Fraction(1), ())
    return out


def outcome_distribution(branches: Iterable[Branch], key: Callable[[Branch], tuple] | None = None) -> dict:
    """Aggregate branch probabilities by ``key`` (default: outcome tuple)."""
    dist: dict = {}
    for b in branches:
        k = b.outcomes if key is None else key(b)
        dist[k] = dist.get(k, Fraction(0)) + b.probability
    return dist

