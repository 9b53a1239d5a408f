from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dense_oracle import all_paulis, dense, expectation, gate_matrix, run_unitary
from ftbench.pauli import PauliOperator, gf2_rank_matrix
from ftbench.tableau import (
    Tableau,
    TableauError,
    conjugate,
    enumerate_branches,
    heisenberg,
    outcome_distribution,
    prepare,
    tableau_run,
)

N = 3
gates = st.one_of(
    st.tuples(st.sampled_from(["H", "S", "SDG", "X", "Y", "Z"]), st.integers(0, N - 1)),
    st.tuples(st.sampled_from(["CNOT", "CZ", "SWAP"]), st.integers(0, N - 1), st.integers(0, N - 1)).filter(
        lambda g: g[1] != g[2]
    ),
)


def Z(q):
    return PauliOperator.single(q, "Z")


def X(q):
    return PauliOperator.single(q, "X")


@settings(max_examples=60, deadline=None)
@given(st.lists(gates, max_size=25))
def test_expectations_match_state_vector(circuit):
    t = Tableau(N)
    for g in circuit:
        t.apply(*g)
    psi = run_unitary(circuit, N)
    for op in all_paulis(N):
        assert t.peek(op) == pytest.approx(expectation(psi, op, N), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(gates, max_size=15), st.lists(st.sampled_from("IXYZ"), min_size=N, max_size=N), st.sampled_from((1, -1)))
def test_conjugation_matches_dense_matrices(circuit, letters, sign):
    op = PauliOperator({q: c for q, c in enumerate(letters) if c != "I"}, sign)
    u = np.eye(2**N, dtype=complex)
    for g in circuit:
        u = gate_matrix(g, N) @ u
    assert np.allclose(dense(conjugate(op, circuit, N), N), u @ dense(op, N) @ u.conj().T)
    assert np.allclose(dense(heisenberg(op, circuit, N), N), u.conj().T @ dense(op, N) @ u)


def test_z_on_zero_is_deterministic_and_x_is_random():
    t = Tableau(1)
    assert t.peek(Z(0)) == 1 and t.peek(X(0)) == 0
    rng = np.random.default_rng(3)
    shots = 10_000
    plus = sum(Tableau(1).measure(X(0), rng) == 1 for _ in range(shots))
    assert abs(plus - shots / 2) < 3 * np.sqrt(shots / 4)


def test_measurement_collapses_state():
    t = Tableau(2)
    t.apply("H", 0)
    t.apply("CNOT", 0, 1)
    out = t.measure(Z(0), force=-1)
    assert out == -1 and t.peek(Z(1)) == -1 and t.peek(X(0)) == 0


def test_forced_outcome_rules():
    t = Tableau(1)
    with pytest.raises(TableauError):
        t.measure(Z(0), force=-1)
    with pytest.raises(TableauError):
        t.measure(X(0))
    with pytest.raises(TableauError):
        t.measure(X(0), force=0)
    with pytest.raises(TableauError):
        t.apply("H", 4)


def test_reset_returns_qubit_to_zero():
    t = Tableau(1)
    t.apply("H", 0)
    t.reset(0, force=-1)
    assert t.peek(Z(0)) == 1


def test_prepare_respects_signs():
    gens = [PauliOperator.from_string("-XXX"), PauliOperator.from_string("ZZI"), PauliOperator.from_string("-IZZ")]
    t = prepare(3, gens)
    for g in gens:
        assert t.peek(g) == 1
    with pytest.raises(TableauError):
        prepare(1, [Z(0), PauliOperator.single(0, "Z", -1)])


def test_row_operations_keep_stabilizer_rank():
    rng = np.random.default_rng(0)
    t = Tableau(4)
    for _ in range(40):
        q = int(rng.integers(4))
        t.apply(["H", "S", "X"][rng.integers(3)], q)
        if rng.random() < 0.3:
            t.apply("CNOT", q, (q + 1) % 4)
        if rng.random() < 0.2:
            t.measure(PauliOperator({int(rng.integers(4)): "X", int(rng.integers(4)): "Z"}), rng)
        stabs = t.stabilizers()
        assert gf2_rank_matrix(np.array([s.symplectic(4) for s in stabs])) == 4
        assert all(t.peek(s) == 1 for s in stabs)


def test_tableau_run_records_measurements():
    outs, t = tableau_run([("H", 0), ("CNOT", 0, 1), ("M", Z(0)), ("M", Z(1))], 2, seed=5)
    assert outs[0] == outs[1]
    assert t.peek(PauliOperator.from_string("ZZ")) == 1


def test_branch_enumeration_gives_exact_probabilities():
    def meas(op):
        return lambda tab, force: tab.measure(op, force=force)

    t = Tableau(2)
    t.apply("H", 0)
    t.apply("CNOT", 0, 1)
    branches = enumerate_branches(t, [meas(Z(0)), meas(Z(1)), meas(X(0))])
    dist = outcome_distribution(branches)
    assert sum(dist.values()) == 1
    # Z0 is random, Z1 copies it, and X0 is random again after the collapse
    assert dist == {(a, a, b): Fraction(1, 4) for a in (1, -1) for b in (1, -1)}
