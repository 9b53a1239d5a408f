from __future__ import annotations

import itertools

import numpy as np
import pytest

from ftbench.lattice import (
    KINDS,
    CodeLayout,
    GeometrySpec,
    LayoutError,
    build_layout,
    code_distance,
    density_report,
    figure1_spec,
    figure2_spec,
    find_logicals,
    majorana_loop,
)
from ftbench.pauli import commutes, gf2_rank_matrix, symplectic_form

SMALL = [
    GeometrySpec("patch_square", 4),
    GeometrySpec("patch_square", 5),
    GeometrySpec("patch_rotated", 3),
    GeometrySpec("torus", 4),
    GeometrySpec("dislocation_torus", 3),
    GeometrySpec("dislocation_patch", 3),
    GeometrySpec("hole_lattice", 8, l=2),
    figure1_spec(),
    figure2_spec(),
]


def _ids(specs):
    return [f"{s.kind}-{s.L}-{s.gauge}" for s in specs]


@pytest.mark.parametrize("spec", SMALL, ids=_ids(SMALL))
def test_stabilizers_commute_pairwise(spec):
    layout = build_layout(spec)
    m = layout.stab_matrix
    assert not symplectic_form(m, m).any()


@pytest.mark.parametrize("spec", SMALL, ids=_ids(SMALL))
def test_gauge_swap_is_an_involution(spec):
    layout = build_layout(spec)
    other = "original" if layout.gauge == "uniform" else "uniform"
    swapped = layout.with_gauge(other)
    back = swapped.with_gauge(layout.gauge)
    assert back.stabilizers == layout.stabilizers
    assert swapped.logical_qubit_count == layout.logical_qubit_count
    m = swapped.stab_matrix
    assert not symplectic_form(m, m).any()


@pytest.mark.parametrize("spec", SMALL, ids=_ids(SMALL))
def test_json_round_trip(spec):
    layout = build_layout(spec)
    again = CodeLayout.from_json(layout.to_json())
    assert again.stabilizers == layout.stabilizers
    assert again.coords == [tuple(c) for c in layout.coords]
    assert again.dumps() == layout.dumps()


def test_figure1_counts():
    layout = build_layout(figure1_spec())
    assert (layout.n_qubits, layout.n_stabilizers, layout.rank, layout.logical_qubit_count) == (36, 37, 36, 0)
    with pytest.raises(LayoutError):
        find_logicals(layout)


def test_figure2_counts():
    layout = build_layout(figure2_spec())
    assert layout.logical_qubit_count == 1


def test_uniform_bulk_plaquettes_have_standard_letters():
    layout = build_layout(GeometrySpec("patch_square", 6))
    seen = 0
    for stab, info in zip(layout.stabilizers, layout.stab_info):
        corners = info.get("corners")
        if info["kind"] != "plaquette" or not corners or len(stab.support) != 4:
            continue
        letters = {role: stab.support[q] for role, q in corners.items()}
        assert letters == {"nw": "Z", "ne": "X", "sw": "X", "se": "Z"}
        seen += 1
    assert seen > 0


@pytest.mark.parametrize("spec", [GeometrySpec("dislocation_torus", 3), GeometrySpec("dislocation_patch", 4)],
                         ids=["torus", "patch"])
def test_pentagons_have_five_qubits_and_one_y(spec):
    layout = build_layout(spec)
    pents = layout.five_qubit_stabilizers
    assert len(pents) == len(layout.dislocations) and len(pents) % 2 == 0
    for i in pents:
        letters = list(layout.stabilizers[i].support.values())
        assert len(letters) == 5 and letters.count("Y") == 1


@pytest.mark.parametrize("spec", SMALL[1:7], ids=_ids(SMALL[1:7]))
@pytest.mark.parametrize("minimize", [False, True], ids=["raw", "min"])
def test_logicals_commute_with_stabilizers_and_pair_up(spec, minimize):
    layout = build_layout(spec)
    if minimize and layout.n_qubits > 40:
        pytest.skip("minimum-weight search is slow on large layouts")
    pairs = find_logicals(layout, minimize=minimize)
    assert len(pairs) == layout.logical_qubit_count
    for pair in pairs:
        for op in (pair.x, pair.z):
            assert all(commutes(op, s) for s in layout.stabilizers)
        assert not commutes(pair.x, pair.z)
    for a, b in itertools.combinations(pairs, 2):
        for p in (a.x, a.z):
            for q in (b.x, b.z):
                assert commutes(p, q)


def test_figure2_logicals_are_straight_chains():
    layout = build_layout(figure2_spec())
    (pair,) = find_logicals(layout, minimize=True)
    xs = {layout.coords[q][1] for q in pair.x.support}
    zs = {layout.coords[q][0] for q in pair.z.support}
    # electric north/south: X strings run north-south, Z strings east-west
    assert len(xs) == 1 and len(zs) == 1
    assert pair.x.weight == 6 and pair.z.weight == 6


def test_dislocation_loops_anticommute():
    layout = build_layout(GeometrySpec("dislocation_torus", 4))
    z_loop = majorana_loop(layout, 1, 2)
    x_loop = majorana_loop(layout, 1, 3)
    for op in (z_loop, x_loop):
        assert all(commutes(op, s) for s in layout.stabilizers)
    assert not commutes(z_loop, x_loop)


def test_rank_of_three_pair_torus_matches_independent_reduction():
    layout = build_layout(GeometrySpec("dislocation_torus", 3, n_pairs=3))
    assert layout.rank == gf2_rank_matrix(layout.stab_matrix[::-1].copy())
    assert layout.rank == layout.n_qubits - layout.logical_qubit_count


@pytest.mark.parametrize("L", [3, 4, 5, 6])
def test_square_patch_distance_is_linear_size(L):
    assert int(code_distance(build_layout(GeometrySpec("patch_square", L)))) == L


@pytest.mark.parametrize("spec", [GeometrySpec("patch_square", 3), GeometrySpec("patch_rotated", 3),
                                  GeometrySpec("torus", 4), GeometrySpec("dislocation_patch", 3),
                                  figure2_spec().__class__("patch_square", 4, gauge="original")],
                         ids=["square3", "rotated3", "torus4", "dispatch3", "square4-original"])
def test_distance_methods_agree_with_exhaustive_search(spec):
    layout = build_layout(spec)
    fast = code_distance(layout)
    slow = code_distance(layout, method="search")
    assert int(fast) == int(slow)
    w = fast.witness
    assert w is not None and w.weight == int(fast)
    assert all(commutes(w, s) for s in layout.stabilizers)


def test_distance_cap_reports_exceeded():
    d = code_distance(build_layout(GeometrySpec("patch_square", 6)), weight_cap=4)
    assert d.exceeded and repr(d) == "> 4"


def test_distance_rejects_codes_without_logicals():
    with pytest.raises(LayoutError):
        code_distance(build_layout(figure1_spec()))


def test_torus_density_is_exact():
    (row,) = density_report([GeometrySpec("torus", 6)])
    assert row.ratio == row.law_value == 18


def test_unknown_kind_rejected():
    assert "patch_square" in KINDS
    with pytest.raises((LayoutError, ValueError)):
        build_layout(GeometrySpec("klein_bottle", 4))


def test_odd_boundary_tiling_rejected():
    with pytest.raises((LayoutError, ValueError)):
        build_layout(GeometrySpec("patch_square", 5, boundaries={"north": [["electric", 3]]}))


def test_distance_witness_is_nontrivial():
    layout = build_layout(GeometrySpec("patch_square", 4))
    w = code_distance(layout).witness
    pairs = find_logicals(layout)
    assert any(not commutes(w, op) for p in pairs for op in (p.x, p.z))
    assert np.all(layout.stab_matrix.sum(axis=1) > 0)
