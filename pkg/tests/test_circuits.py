from __future__ import annotations

import json

import pytest

from ftbench.circuits import (
    N_ROUNDS,
    CircuitError,
    SyndromeCircuit,
    generate_syndrome_circuit,
    ordering_violations,
    schedule_conflicts,
    verify_syndrome_circuit,
)
from ftbench.lattice import GeometrySpec, build_layout, figure2_spec


@pytest.fixture(scope="module")
def patch4():
    layout = build_layout(GeometrySpec("patch_square", 4))
    return layout, generate_syndrome_circuit(layout)


def _bulk(circuit):
    return [s for s, roles in circuit.roles.items() if len(roles) == 4]


def test_four_corner_stabilizer_uses_eight_rounds(patch4):
    _, circuit = patch4
    s = _bulk(circuit)[0]
    anc = circuit.ancilla_of[s]
    roles = circuit.roles[s]
    mine = [[g for g in rnd if anc in g[1:]] for rnd in circuit.rounds]
    assert len(circuit.rounds) == N_ROUNDS
    assert mine == [
        [("init", anc)],
        [("CNOT", roles["nw"], anc)],
        [("H", anc)],
        [("CNOT", anc, roles["ne"])],
        [("CNOT", anc, roles["sw"])],
        [("H", anc)],
        [("CNOT", roles["se"], anc)],
        [("MZ", anc)],
    ]


def test_gate_counts_follow_stabilizer_weights(patch4):
    layout, circuit = patch4
    assert circuit.count("CNOT") == sum(s.weight for s in layout.stabilizers)
    assert circuit.count("H") == 2 * layout.n_stabilizers
    assert circuit.count("MZ") == circuit.count("init") == layout.n_stabilizers
    assert circuit.n_qubits == layout.n_qubits + layout.n_stabilizers


@pytest.mark.parametrize("L", [2, 3, 4, 5, 6, 7, 8])
def test_patch_circuits_verify(L):
    layout = build_layout(GeometrySpec("patch_square", L))
    circuit = generate_syndrome_circuit(layout)
    report = verify_syndrome_circuit(circuit, layout, trials=2, seed=L)
    assert report.passed, report.to_json()
    assert not schedule_conflicts(circuit)


def test_torus_circuit_verifies():
    layout = build_layout(GeometrySpec("torus", 6))
    report = verify_syndrome_circuit(generate_syndrome_circuit(layout), layout)
    assert report.passed and report.n_pairs_checked > 0


def test_pentagons_are_left_unscheduled():
    layout = build_layout(GeometrySpec("dislocation_patch", 4))
    circuit = generate_syndrome_circuit(layout)
    pentagons = [i for i, info in enumerate(layout.stab_info) if info.get("kind") == "pentagon"]
    assert pentagons and circuit.unscheduled == pentagons
    report = verify_syndrome_circuit(circuit, layout)
    assert report.passed and report.unscheduled == pentagons


def test_original_gauge_is_rejected():
    layout = build_layout(figure2_spec())
    assert layout.gauge != "uniform"
    with pytest.raises(CircuitError):
        generate_syndrome_circuit(layout)


def test_swapping_outer_cnots_breaks_ordering_and_readout(patch4):
    layout, circuit = patch4
    mutated = circuit.swap_rounds(_bulk(circuit)[1], 1, 6)
    report = verify_syndrome_circuit(mutated, layout)
    assert not report.passed
    assert not report.ordering_ok and not report.tableau_ok


def test_swapping_middle_cnots_collides_with_neighbours(patch4):
    layout, circuit = patch4
    report = verify_syndrome_circuit(circuit.swap_rounds(_bulk(circuit)[1], 3, 4), layout)
    assert not report.passed and not report.schedule_ok


def test_ordering_check_flags_simultaneous_interactions():
    # stabilizers 0 and 1 share data qubits 0 and 1; both meet qubit 1 in round 1
    rounds = [[("CNOT", 0, 2)], [("CNOT", 1, 2), ("CNOT", 0, 3), ("CNOT", 1, 3)]]
    circuit = SyndromeCircuit(2, rounds, {0: 2, 1: 3}, {})
    bad, checked = ordering_violations(circuit)
    assert checked == 1 and bad == [(0, 1, 0, 1)]
    assert schedule_conflicts(circuit) == [(1, 1), (1, 3)]


def test_ordering_check_accepts_consistent_order():
    rounds = [[("CNOT", 0, 2)], [("CNOT", 1, 2), ("CNOT", 0, 3)], [("CNOT", 1, 3)]]
    assert ordering_violations(SyndromeCircuit(2, rounds, {0: 2, 1: 3}, {})) == ([], 1)


def test_circuit_json_round_trip(patch4):
    _, circuit = patch4
    again = SyndromeCircuit.from_json(json.loads(circuit.dumps()))
    assert again == circuit
