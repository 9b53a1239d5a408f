from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftbench.frame import (
    FrameError,
    FrameState,
    MeasurementRequest,
    Op,
    apply_frame_gate,
    compile_program,
    compiled_distribution,
    direct_distribution,
    execute,
    load_program,
    parse_program,
    random_clifford_program,
)
from ftbench.pauli import PauliOperator
from ftbench.tableau import heisenberg

words = st.lists(st.sampled_from(["H", "S", "X", "Y", "Z"]), max_size=40)


def frame_of(word, qubit=0, start=None):
    f = start if start is not None else FrameState()
    for g in word:
        f = apply_frame_gate(f, g, qubit)
    return f


def test_hadamard_twice_is_identity_and_s_maps_x_to_y():
    assert frame_of(["H", "H"]).is_identity
    img, _ = frame_of(["S"]).image(PauliOperator.single(0, "X"))
    assert img.support == {0: "Y"}
    assert frame_of(["S"] * 4).is_identity


@settings(max_examples=200, deadline=None)
@given(words, st.sampled_from("XYZ"), st.sampled_from((1, -1)))
def test_frame_images_match_tableau_pullback(word, letter, sign):
    op = PauliOperator.single(0, letter, sign)
    img, deps = frame_of(word).image(op)
    assert not deps
    assert img == heisenberg(op, [(g, 0) for g in word], 1)


def test_long_random_words_match_tableau_pullback():
    rng = np.random.default_rng(2)
    word = [str(g) for g in rng.choice(["H", "S", "X", "Y", "Z"], size=1000)]
    f = frame_of(word)
    for letter in "XYZ":
        op = PauliOperator.single(0, letter)
        assert f.image(op)[0] == heisenberg(op, [(g, 0) for g in word], 1)


@settings(max_examples=100, deadline=None)
@given(words, words)
def test_frame_updates_compose(w1, w2):
    assert frame_of(w2, start=frame_of(w1)) == frame_of(w1 + w2)


def test_worked_cnot_example():
    compiled = compile_program([("H", 1), ("H", 2), ("S", 2), ("CNOT", 1, 2)])
    assert compiled.ancillas == (3,)
    assert [str(r) for r in compiled.requests[:2]] == ["X1X3", "Y2Z3"]
    assert compiled.requests[0].loops() == {1: "gamma1 gamma3", 3: "gamma1 gamma3"}
    assert compiled.requests[1].loops() == {2: "gamma2 gamma3", 3: "gamma1 gamma2"}


def test_identity_program_has_empty_schedule():
    compiled = compile_program([], 3)
    assert compiled.requests == () and compiled.frame.is_identity
    assert compile_program([("H", 0), ("H", 0)]).requests == ()


@pytest.mark.parametrize("c,t", [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_cnot_acts_on_basis_states(c, t):
    prog = [("X", q) for q, bit in ((0, c), (1, t)) if bit]
    prog += [("CNOT", 0, 1), ("MEASURE", "Z", 0), ("MEASURE", "Z", 1)]
    dist = compiled_distribution(compile_program(prog))
    out = (1 - 2 * c, 1 - 2 * (c ^ t))
    assert dist == {out: Fraction(1)}


def test_cnot_makes_bell_pair_from_plus_state():
    prog = [("H", 0), ("CNOT", 0, 1), ("MEASURE", "ZZ", 0, 1), ("MEASURE", "XX", 0, 1), ("MEASURE", "Z", 0)]
    dist = compiled_distribution(compile_program(prog))
    assert dist == {(1, 1, 1): Fraction(1, 2), (1, 1, -1): Fraction(1, 2)}


@pytest.mark.parametrize("seed", range(50))
def test_random_programs_match_direct_simulation(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    prog = random_clifford_program(rng, n, 14, max_cnots=3)
    compiled = compile_program(prog, n)
    assert compiled_distribution(compiled) == direct_distribution(prog, n)


def test_schedule_is_measurement_only():
    prog = random_clifford_program(np.random.default_rng(7), 4, 30)
    compiled = compile_program(prog, 4)
    assert all(isinstance(r, MeasurementRequest) for r in compiled.requests)
    assert set(compiled.to_json()) == {"n_qubits", "ancillas", "program_outcomes", "requests"}


def test_sampled_run_lands_in_distribution_support():
    prog = [("H", 0), ("CNOT", 0, 1), ("S", 1), ("MEASURE", "Z", 0), ("MEASURE", "Y", 1), ("MEASURE", "Z", 1)]
    compiled = compile_program(prog)
    dist = compiled_distribution(compiled)
    for seed in range(20):
        outs, _ = execute(compiled, seed)
        assert tuple(outs[i] for i in compiled.program_outcomes) in dist


def test_init_resets_qubit_mid_program():
    prog = [("X", 0), ("init", 0), ("MEASURE", "Z", 0)]
    assert compiled_distribution(compile_program(prog)) == {(1,): Fraction(1)}
    assert direct_distribution(prog) == {(1,): Fraction(1)}


def test_json_program_round_trip():
    text = json.dumps({"n_qubits": 3, "ops": [
        {"gate": "H", "qubits": [0]},
        {"gate": "CNOT", "qubits": [0, 2]},
        {"gate": "MEASURE", "qubits": [0, 2], "basis": "ZZ", "key": "m"},
    ]})
    ops, n = load_program(text)
    assert n == 3 and ops[2] == Op("MEASURE", (0, 2), "ZZ", "m")
    assert parse_program([op.to_json() for op in ops]) == ops
    assert load_program(json.dumps([{"gate": "S", "qubits": [1]}]))[1] is None


def test_malformed_programs_are_rejected():
    with pytest.raises(FrameError):
        parse_program([("T", 0)])
    with pytest.raises(FrameError):
        parse_program([("CNOT", 1, 1)])
    with pytest.raises(FrameError):
        parse_program([("MEASURE", "ZQ", 0, 1)])
    with pytest.raises(FrameError):
        load_program(json.dumps({"n_qubits": 1}))
    with pytest.raises(FrameError):
        compile_program([Op("IF", (0,), "X", cond=("missing",))])
    with pytest.raises(FrameError):
        direct_distribution([Op("IF", (0,), "X", cond=())])
