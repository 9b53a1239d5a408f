"""Eight-round syndrome-extraction circuits for uniform-gauge layouts.

Every stabilizer ``Z_nw X_ne X_sw Z_se`` gets one ancilla and the same schedule:

1. initialise the ancilla in ``|0>``
2. CNOT data(nw) -> ancilla
3. H on the ancilla
4. CNOT ancilla -> data(ne)
5. CNOT ancilla -> data(sw)
6. H on the ancilla
7. CNOT data(se) -> ancilla
8. measure the ancilla in the Z basis

Stabilizers with missing corners skip those CNOTs.  Five-qubit stabilizers have
no such circuit and are reported as unscheduled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .lattice import CodeLayout
from .pauli import PauliOperator
from .tableau import Tableau

N_ROUNDS = 8
ROLE_ROUND = {"nw": 1, "ne": 3, "sw": 4, "se": 6}  # zero-based round of each CNOT
ROLE_LETTER = {"nw": "Z", "ne": "X", "sw": "X", "se": "Z"}
_OFFSET_ROLE = {(0, 0): "nw", (0, 2): "ne", (2, 0): "sw", (2, 2): "se"}
SCHEMA = "ftbench.circuit/1"


class CircuitError(ValueError):
    """Layout cannot be given a uniform-gauge syndrome circuit."""


@dataclass
class SyndromeCircuit:
    """Gates per round.  Gates are tuples ``("init", a)``, ``("CNOT", c, t)``,
    ``("H", a)`` and ``("MZ", a)``; ancillas are numbered after the data qubits."""

    n_data: int
    rounds: list
    ancilla_of: dict
    roles: dict
    unscheduled: list = field(default_factory=list)

    @property
    def n_qubits(self) -> int:
        return self.n_data + len(self.ancilla_of)

    @property
    def stabilizer_of(self) -> dict:
        return {a: s for s, a in self.ancilla_of.items()}

    def count(self, name: str) -> int:
        return sum(1 for rnd in self.rounds for g in rnd if g[0] == name)

    def interaction_rounds(self) -> dict:
        """``(stabilizer, data qubit) -> round index`` of every CNOT."""
        stab_of = self.stabilizer_of
        out = {}
        for r, rnd in enumerate(self.rounds):
            for g in rnd:
                if g[0] != "CNOT":
                    continue
                c, t = g[1], g[2]
                anc, data = (t, c) if t in stab_of else (c, t)
                out[(stab_of[anc], data)] = r
        return out

    def swap_rounds(self, stabilizer: int, r1: int, r2: int) -> "SyndromeCircuit":
        """Copy with the gates of one ancilla exchanged between two rounds (zero-based)."""
        anc = self.ancilla_of[stabilizer]
        rounds = [list(rnd) for rnd in self.rounds]
        mine1 = [g for g in rounds[r1] if anc in g[1:]]
        mine2 = [g for g in rounds[r2] if anc in g[1:]]
        rounds[r1] = [g for g in rounds[r1] if anc not in g[1:]] + mine2
        rounds[r2] = [g for g in rounds[r2] if anc not in g[1:]] + mine1
        return SyndromeCircuit(self.n_data, rounds, dict(self.ancilla_of), dict(self.roles), list(self.unscheduled))

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "n_data": self.n_data,
            "ancillas": {str(s): a for s, a in self.ancilla_of.items()},
            "roles": {str(s): r for s, r in self.roles.items()},
            "unscheduled": list(self.unscheduled),
            "rounds": [[list(g) for g in rnd] for rnd in self.rounds],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def from_json(cls, obj: dict) -> "SyndromeCircuit":
        return cls(
            n_data=int(obj["n_data"]),
            rounds=[[tuple(g) for g in rnd] for rnd in obj["rounds"]],
            ancilla_of={int(s): int(a) for s, a in obj["ancillas"].items()},
            roles={int(s): dict(r) for s, r in obj["roles"].items()},
            unscheduled=[int(s) for s in obj.get("unscheduled", [])],
        )


def _boundary_roles(layout: CodeLayout, stab: PauliOperator, face) -> dict:
    r, c = face
    period = layout.period
    roles = {}
    for q in stab.support:
        y, x = layout.coords[q]
        dy, dx = y - 2 * r, x - 2 * c
        if period is not None:
            dy %= period[0]
            dx %= period[1]
        role = _OFFSET_ROLE.get((dy, dx))
        if role is None:
            raise CircuitError(f"qubit {q} is not a corner of face {face}")
        roles[role] = q
    return roles


def stabilizer_roles(layout: CodeLayout, index: int) -> dict | None:
    """Map corner role -> data qubit, or None for stabilizers without a circuit."""
    info = layout.stab_info[index]
    stab = layout.stabilizers[index]
    kind = info.get("kind")
    if kind == "pentagon":
        return None
    if "corners" in info:
        roles = {k: v for k, v in info["corners"].items() if k in ROLE_ROUND and v in stab.support}
    elif info.get("face") is not None:
        roles = _boundary_roles(layout, stab, info["face"])
    elif stab.weight == 1:
        # single-qubit corner stabilizer: use the first slot measuring its letter
        (q, letter), = stab.support.items()
        roles = {"nw" if letter == "Z" else "ne": q}
    else:
        raise CircuitError(f"stabilizer {index} has no corner geometry")
    if set(roles.values()) != set(stab.support):
        raise CircuitError(f"stabilizer {index} has qubits outside the four corners")
    for role, q in roles.items():
        if stab.support[q] != ROLE_LETTER[role]:
            raise CircuitError(
                f"stabilizer {index} has {stab.support[q]} on its {role} corner; "
                f"the uniform circuit measures {ROLE_LETTER[role]} there"
            )
    return roles


def generate_syndrome_circuit(layout: CodeLayout) -> SyndromeCircuit:
    """Build the eight-round circuit for every stabilizer except five-qubit ones."""
    if layout.gauge != "uniform":
        raise CircuitError("syndrome circuits need a layout in the uniform gauge")
    n = layout.n_qubits
    rounds: list[list[tuple]] = [[] for _ in range(N_ROUNDS)]
    ancilla_of: dict[int, int] = {}
    roles_of: dict[int, dict] = {}
    unscheduled = []
    for s in range(layout.n_stabilizers):
        roles = stabilizer_roles(layout, s)
        if roles is None:
            unscheduled.append(s)
            continue
        a = n + len(ancilla_of)
        ancilla_of[s] = a
        roles_of[s] = roles
        rounds[0].append(("init", a))
        if "nw" in roles:
            rounds[1].append(("CNOT", roles["nw"], a))
        rounds[2].append(("H", a))
        if "ne" in roles:
            rounds[3].append(("CNOT", a, roles["ne"]))
        if "sw" in roles:
            rounds[4].append(("CNOT", a, roles["sw"]))
        rounds[5].append(("H", a))
        if "se" in roles:
            rounds[6].append(("CNOT", roles["se"], a))
        rounds[7].append(("MZ", a))
    return SyndromeCircuit(n, rounds, ancilla_of, roles_of, unscheduled)


@dataclass
class VerificationReport:
    tableau_ok: bool
    ordering_ok: bool
    schedule_ok: bool
    tableau_failures: list
    ordering_failures: list
    schedule_conflicts: list
    n_pairs_checked: int
    unscheduled: list

    @property
    def passed(self) -> bool:
        return self.tableau_ok and self.ordering_ok and self.schedule_ok

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "tableau_ok": self.tableau_ok,
            "ordering_ok": self.ordering_ok,
            "schedule_ok": self.schedule_ok,
            "tableau_failures": self.tableau_failures,
            "ordering_failures": [list(f) for f in self.ordering_failures],
            "schedule_conflicts": [list(c) for c in self.schedule_conflicts],
            "pairs_checked": self.n_pairs_checked,
            "unscheduled": self.unscheduled,
        }


def schedule_conflicts(circuit: SyndromeCircuit) -> list:
    """``(round, qubit)`` pairs where a qubit is touched by more than one gate."""
    out = []
    for r, rnd in enumerate(circuit.rounds):
        seen: dict[int, int] = {}
        for g in rnd:
            for q in g[1:]:
                seen[q] = seen.get(q, 0) + 1
        out.extend((r, q) for q, k in sorted(seen.items()) if k > 1)
    return out


def ordering_violations(circuit: SyndromeCircuit) -> tuple[list, int]:
    """Pairs of stabilizers sharing two qubits whose ancillas meet them in opposite orders.

    Returns ``(violations, pairs_checked)``; a violation is
    ``(stab1, stab2, qubit_s, qubit_t)``.  Simultaneous interactions count as
    violations because the order is then undefined.
    """
    when = circuit.interaction_rounds()
    by_qubit: dict[int, list[int]] = {}
    for (s, q) in when:
        by_qubit.setdefault(q, []).append(s)
    shared: dict[tuple[int, int], list[int]] = {}
    for q, stabs in by_qubit.items():
        for s1, s2 in combinations(sorted(stabs), 2):
            shared.setdefault((s1, s2), []).append(q)
    bad = []
    checked = 0
    for (s1, s2), qs in sorted(shared.items()):
        if len(qs) != 2:
            continue
        checked += 1
        s, t = sorted(qs)
        ds = when[(s1, s)] - when[(s2, s)]
        dt = when[(s1, t)] - when[(s2, t)]
        if ds == 0 or dt == 0 or (ds > 0) != (dt > 0):
            bad.append((s1, s2, s, t))
    return bad, checked


def _run(t: Tableau, circuit: SyndromeCircuit, expected_anc: dict) -> list:
    """Apply the circuit; return stabilizers whose ancilla readout was wrong or random."""
    wrong = []
    stab_of = circuit.stabilizer_of
    for rnd in circuit.rounds:
        for g in rnd:
            if g[0] == "init":
                t.reset(g[1], force=t.peek(PauliOperator.single(g[1], "Z")) or 1)
            elif g[0] == "MZ":
                z = PauliOperator.single(g[1], "Z")
                value = t.peek(z)
                s = stab_of[g[1]]
                if value != expected_anc[s]:
                    wrong.append(s)
                t.measure(z, force=value if value else 1)
            else:
                t.apply(g[0], *g[1:])
    return wrong


def verify_syndrome_circuit(circuit: SyndromeCircuit, layout: CodeLayout, trials: int = 2, seed: int = 0) -> VerificationReport:
    """Check the circuit against a stabilizer simulation and the ordering rule.

    Each trial prepares a data state with random stabilizer signs (measure all
    stabilizers from ``|0...0>``, then apply a random Pauli), runs the circuit,
    and requires every ancilla to read its stabilizer's sign deterministically
    and every stabilizer to keep its sign afterwards.
    """
    rng = np.random.default_rng(seed)
    n = circuit.n_data
    failures: set[int] = set()
    for _ in range(trials):
        t = Tableau(circuit.n_qubits)
        for stab in layout.stabilizers:
            t.measure(stab, rng)
        letters = rng.integers(0, 4, size=n)
        for q in np.flatnonzero(letters):
            t.apply("XYZ"[letters[q] - 1], int(q))
        signs = [t.peek(stab) for stab in layout.stabilizers]
        expected = {s: signs[s] for s in circuit.ancilla_of}
        failures.update(_run(t, circuit, expected))
        for s, stab in enumerate(layout.stabilizers):
            if t.peek(stab) != signs[s]:
                failures.add(s)
    ordering, checked = ordering_violations(circuit)
    conflicts = schedule_conflicts(circuit)
    return VerificationReport(
        tableau_ok=not failures,
        ordering_ok=not ordering,
        schedule_ok=not conflicts and len(circuit.rounds) == N_ROUNDS,
        tableau_failures=sorted(failures),
        ordering_failures=ordering,
        schedule_conflicts=conflicts,
        n_pairs_checked=checked,
        unscheduled=list(circuit.unscheduled),
    )
