"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Every clause is checked at its stated tolerance.  Clauses that do not hold for
this implementation fail loudly; they are not relaxed here.
"""

from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from ftbench import ancilla, circuits, decoder, experiments, frame, lasvegas
from ftbench.lattice import GeometrySpec, build_layout, code_distance, density_report, figure1_spec, figure2_spec, find_logicals
from ftbench.pauli import commutes

pytestmark = pytest.mark.acceptance


def _within(x, lo, hi):
    return x is not None and lo <= x <= hi


# 1 --------------------------------------------------------------------------------


def test_criterion_1_structure(verdict):
    clauses = {}
    t0 = time.perf_counter()
    fig1 = build_layout(figure1_spec())
    counts = (fig1.n_qubits, fig1.n_stabilizers, fig1.rank, fig1.logical_qubit_count)
    elapsed = time.perf_counter() - t0
    clauses["fig1 counts"] = (counts == (36, 37, 36, 0) and elapsed < 1.0, f"{counts} in {elapsed:.3f}s")

    fig2 = build_layout(figure2_spec())
    (pair,) = find_logicals(fig2)
    pair_ok = all(commutes(op, s) for op in (pair.x, pair.z) for s in fig2.stabilizers) and not commutes(pair.x, pair.z)
    clauses["fig2 logical pair"] = (fig2.logical_qubit_count == 1 and pair_ok, f"k={fig2.logical_qubit_count}")

    for k in (2, 3):
        torus = build_layout(GeometrySpec("dislocation_torus", 4, n_pairs=k)).logical_qubit_count
        planar = build_layout(GeometrySpec("dislocation_patch", 4, n_pairs=k)).logical_qubit_count
        clauses[f"{k}-pair torus"] = (torus == k - 1, f"torus k={torus}, planar patch k={planar}, want {k - 1}")
    assert verdict(1, clauses)


# 2 --------------------------------------------------------------------------------


def test_criterion_2_distance_laws(verdict):
    clauses = {}
    t0 = time.perf_counter()
    dis = [int(code_distance(build_layout(GeometrySpec("dislocation_torus", L)), 12)) for L in (3, 4, 5)]
    steps = np.diff(dis).tolist()
    clauses["dislocation increments"] = (steps == [2, 2], f"d(L=3,4,5)={dis}, increments {steps}")

    holes = []
    for l, L in ((2, 8), (3, 12), (4, 16)):
        d = int(code_distance(build_layout(GeometrySpec("hole_lattice", L, l=l)), 16))
        holes.append((l, L, d, min(4 * l, L - l)))
    clauses["hole law"] = (all(abs(d - law) <= 2 for *_, d, law in holes),
                           ", ".join(f"(l={l},L={L}) d={d} law={law}" for l, L, d, law in holes))

    patch = {L: int(code_distance(build_layout(GeometrySpec("patch_square", L)), 12)) for L in (3, 5, 7, 9)}
    clauses["aligned patch"] = (all(d == L for L, d in patch.items()), str(patch))
    elapsed = time.perf_counter() - t0
    clauses["runtime"] = (elapsed <= 600, f"{elapsed:.0f}s")
    assert verdict(2, clauses)


# 3 --------------------------------------------------------------------------------


def test_criterion_3_density(verdict):
    clauses = {}
    (torus,) = density_report([GeometrySpec("torus", 6)])
    clauses["torus d^2/2"] = (torus.ratio == torus.law_value, f"{torus.ratio} vs {torus.law_value}")
    (aligned,) = density_report([GeometrySpec("patch_square", 7)])
    clauses["aligned d^2"] = (aligned.ratio == aligned.law_value, f"{aligned.ratio} vs {aligned.law_value}")
    for d in (5, 7):
        (rot,) = density_report([GeometrySpec("patch_rotated", d)])
        rel = rot.ratio / rot.law_value
        clauses[f"rotated d={d}"] = (abs(rel - 1) <= 0.15, f"{rot.physical} qubits vs 2d^2={rot.law_value:.0f}, ratio {rel:.3f}")
    for l, L in ((3, 12), (4, 16)):
        (hole,) = density_report([GeometrySpec("hole_lattice", L, l=l)], weight_cap=20)
        rel = hole.ratio / hole.law_value
        clauses[f"holes l={l}"] = (abs(rel - 1) <= 0.15, f"d={hole.distance}, {hole.ratio:.0f} vs 3d^2={hole.law_value:.0f}, ratio {rel:.3f}")
    rows = {r.geometry: r for r in density_report([GeometrySpec("dislocation_torus", 4)])}
    factor = (1 / rows["dislocation/3"].ratio) / (1 / rows["dislocation/4"].ratio)
    clauses["3 vs 4 per qubit"] = (abs(factor - 4 / 3) <= 0.05 * 4 / 3, f"factor {factor:.4f}")
    assert verdict(3, clauses)


# 4 --------------------------------------------------------------------------------


def test_criterion_4_mwpm_guarantee(verdict):
    clauses = {}
    for d, kmax in ((3, 1), (5, 2), (7, 3)):
        layout = build_layout(GeometrySpec("patch_square", d))
        for k in range(1, kmax + 1):
            t0 = time.perf_counter()
            res = experiments.enumerate_failure_probability(layout, "mwpm", k)
            elapsed = time.perf_counter() - t0
            ok = res.by_observable["any"] == 0 and ((d, k) != (7, 3) or elapsed <= 900)
            clauses[f"d={d} k={k}"] = (ok, f"{res.by_observable['any']}/{res.cases} failures, {elapsed:.0f}s")
    assert verdict(4, clauses)


# 5 --------------------------------------------------------------------------------

ENUMERATION_TARGETS = [
    ("greedy", 5, 2, lambda x: abs(x - 0.034) <= 0.005, "0.034 +- 0.005"),
    ("mwpm", 5, 3, lambda x: abs(x - 0.037) <= 0.01, "0.037 +- 0.01"),
    ("greedy", 5, 3, lambda x: abs(x - 0.11) <= 0.02, "0.11 +- 0.02"),
    ("greedy", 7, 2, lambda x: 0 < x <= 0.002, "(0, 0.002]"),
]
# exact counts of this implementation (Z-type logical failures), frozen as regression baselines
ENUMERATION_BASELINES = {("greedy", 5, 2): (76, 2700), ("mwpm", 5, 3): (2336, 62100),
                         ("greedy", 5, 3): (6132, 62100), ("greedy", 7, 2): (16, 10584)}


def test_criterion_5_enumeration(verdict):
    clauses = {}
    layouts = {d: build_layout(GeometrySpec("patch_square", d)) for d in (5, 7)}
    for dec, d, k, check, target in ENUMERATION_TARGETS:
        res = experiments.enumerate_failure_probability(layouts[d], dec, k, observable="Z")
        rate = float(res.probability)
        clauses[f"{dec} d={d} k={k}"] = (check(rate), f"{res.failures}/{res.cases} = {rate:.4f}, target {target}")
        base = ENUMERATION_BASELINES[(dec, d, k)]
        clauses[f"baseline {dec} d={d} k={k}"] = ((res.failures, res.cases) == base, f"{base[0]}/{base[1]}")
    assert verdict(5, clauses)


# 6 and 7: shared sweep --------------------------------------------------------------

SWEEP_GRID = {"mwpm": [round(0.12 + 0.01 * i, 3) for i in range(7)],
              "greedy": [round(0.07 + 0.01 * i, 3) for i in range(7)]}
SWEEP_SIZES = {"patch_square": (5, 7, 9, 11), "dislocation_torus": (3, 4, 5, 6)}
SWEEP_TRIALS = 10_000
SWEEP_SEED = 11


@pytest.fixture(scope="session")
def threshold_sweep():
    t0 = time.perf_counter()
    out = {}
    for dec, ps in SWEEP_GRID.items():
        for kind, sizes in SWEEP_SIZES.items():
            recs = []
            for L in sizes:
                recs += experiments.estimate_logical_rate(build_layout(GeometrySpec(kind, L)), dec, ps,
                                                          SWEEP_TRIALS, SWEEP_SEED)
            out[(dec, kind)] = recs
    return out, time.perf_counter() - t0


def test_criterion_6_thresholds(verdict, threshold_sweep):
    sweep, elapsed = threshold_sweep
    cross = {key: experiments.crossing_point(recs)["crossing"] for key, recs in sweep.items()}
    clauses = {}
    for dec, lo, hi in (("mwpm", 0.14, 0.16), ("greedy", 0.10, 0.12)):
        sq = cross[(dec, "patch_square")]
        dis = cross[(dec, "dislocation_torus")]
        clauses[f"{dec} square"] = (_within(sq, lo, hi), f"crossing {sq:.4f}, band [{lo}, {hi}]")
        gap = abs(dis - sq)
        clauses[f"{dec} dislocation"] = (gap <= 0.01, f"crossing {dis:.4f}, gap {gap:.4f}")
    clauses["trials"] = (all(r.trials >= 10_000 for recs in sweep.values() for r in recs), f"{SWEEP_TRIALS} per point")
    clauses["runtime"] = (elapsed <= 3600, f"{elapsed:.0f}s")
    assert verdict(6, clauses)


def _planted(p_c, theta):
    recs = []
    for L in (5, 7, 9, 11):
        for p in np.linspace(p_c - 0.03, p_c + 0.03, 13):
            rate = 0.5 * (1 + np.tanh(3 * (p - p_c) * L**theta))
            recs.append(experiments.ExperimentRecord("synthetic", "uniform", "mwpm", L, L, float(p), 10**6,
                                                     int(round(rate * 10**6)), 0))
    return recs


def test_criterion_7_collapse(verdict, threshold_sweep):
    sweep, _ = threshold_sweep
    clauses = {}
    greedy = experiments.fit_collapse(sweep[("greedy", "patch_square")], 0.10, 0.6, n_boot=50, seed=1)
    clauses["greedy p_c"] = (_within(greedy.p_c, 0.10, 0.12), f"{greedy.p_c:.4f}")
    clauses["greedy theta"] = (_within(greedy.theta, 0.45, 0.75), f"{greedy.theta:.3f}")
    mwpm = experiments.fit_collapse(sweep[("mwpm", "patch_square")], 0.14, 0.6, n_boot=50, seed=1)
    clauses["mwpm p_c"] = (_within(mwpm.p_c, 0.14, 0.16), f"{mwpm.p_c:.4f} (theta {mwpm.theta:.3f})")
    for p_c, theta in ((0.12, 0.7), (0.15, 0.55)):
        fit = experiments.fit_collapse(_planted(p_c, theta), p_c - 0.01, theta - 0.1, n_boot=0)
        ok = abs(fit.p_c - p_c) <= 0.002 and abs(fit.theta - theta) <= 0.05
        clauses[f"planted ({p_c}, {theta})"] = (ok, f"({fit.p_c:.4f}, {fit.theta:.3f})")
    assert verdict(7, clauses)


# 8 --------------------------------------------------------------------------------


def test_criterion_8_frame_engine(verdict):
    clauses = {}
    compiled = frame.compile_program([("H", 1), ("H", 2), ("S", 2), ("CNOT", 1, 2)])
    first = [str(r) for r in compiled.requests[:2]]
    clauses["worked example"] = (first == ["X1X3", "Y2Z3"], f"{first} with ancilla 3")
    mismatches = 0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(2, 7))
        prog = frame.random_clifford_program(rng, n, 16)
        if frame.compiled_distribution(frame.compile_program(prog, n)) != frame.direct_distribution(prog, n):
            mismatches += 1
    clauses["random programs"] = (mismatches == 0, f"{mismatches}/50 mismatches")
    assert verdict(8, clauses)


# 9 --------------------------------------------------------------------------------


def test_criterion_9_circuits(verdict):
    clauses = {}
    failed = []
    for L in range(2, 9):
        layout = build_layout(GeometrySpec("patch_square", L))
        report = circuits.verify_syndrome_circuit(circuits.generate_syndrome_circuit(layout), layout, seed=L)
        if not report.passed:
            failed.append(L)
    clauses["patches 2..8"] = (not failed, f"failures at {failed}" if failed else "all pass")
    layout = build_layout(GeometrySpec("patch_square", 5))
    circuit = circuits.generate_syndrome_circuit(layout)
    bulk = [s for s, roles in circuit.roles.items() if len(roles) == 4]
    report = circuits.verify_syndrome_circuit(circuit.swap_rounds(bulk[0], 1, 6), layout)
    clauses["mutated rejected"] = (not report.passed,
                                   f"tableau_ok={report.tableau_ok}, ordering_ok={report.ordering_ok}")
    assert verdict(9, clauses)


# 10 -------------------------------------------------------------------------------


def test_criterion_10_scheduler(verdict):
    t0 = time.perf_counter()
    clauses = {}
    rng = np.random.default_rng(0)
    exact = 0
    for _ in range(1000):
        dag = lasvegas.random_layered_dag(int(rng.integers(1, 65)), int(rng.integers(1, 30)), 2, rng)
        exact += bool(np.all(lasvegas.simulate_schedule(dag, 1.0, 1, seed=int(rng.integers(10**6))).T == dag.r_tot))
    clauses["P=1"] = (exact == 1000, f"{exact}/1000 exact")

    fit = lasvegas.fit_completion_model([16, 64, 256], [10, 20, 50], 0.5, 10_000, 2, seed=0,
                                        tail_config=(256, 50), tail_trials=100_000)
    clauses["mean model"] = (fit.r2 >= 0.95, f"R^2={fit.r2:.4f}, c1={fit.c1:.3f}, c2={fit.c2:.3f}")
    clauses["survival tail"] = (fit.tail_r2 >= 0.9 and fit.tail_rate > 0, f"R^2={fit.tail_r2:.4f}, rate={fit.tail_rate:.4f}")

    dag = lasvegas.random_layered_dag(256, 50, 2, np.random.default_rng(5))
    batch = lasvegas.simulate_schedule(dag, 0.5, 10_000, seed=7)
    clauses["W invariants"] = (batch.violations == 0, f"{batch.violations} violations over {batch.T.size} trajectories")

    T = lasvegas.simulate_schedule(lasvegas.chain_dag(30), 0.5, 10_000, seed=8).T
    mean, var = lasvegas.chain_moments(30, 0.5)
    z_chain = abs(T.mean() - mean) / math.sqrt(var / T.size)
    T = lasvegas.simulate_schedule(lasvegas.parallel_dag(100), 0.5, 10_000, seed=9).T
    z_par = abs(T.mean() - lasvegas.max_geometric_mean(100, 0.5)) / math.sqrt(lasvegas.max_geometric_var(100, 0.5) / T.size)
    clauses["analytic oracles"] = (z_chain <= 3 and z_par <= 3, f"chain {z_chain:.2f} sigma, max-geometric {z_par:.2f} sigma")
    elapsed = time.perf_counter() - t0
    clauses["runtime"] = (elapsed <= 1200, f"{elapsed:.0f}s")
    assert verdict(10, clauses)


# 11 -------------------------------------------------------------------------------


def test_criterion_11_ancilla(verdict):
    clauses = {}
    eps = 1e-3
    offsets = {A: ancilla.plan_budget([1] * A, eps=eps).max_levels - math.ceil(math.log2(A)) for A in (16, 1024)}
    clauses["levels"] = (offsets[1024] == offsets[16], f"levels - ceil(log2 A) = {offsets} at eps={eps}")

    plan = ancilla.plan_budget([100] * 16, eps=eps)
    res = ancilla.simulate_consumption(plan, 100_000, np.random.default_rng(11))
    z = abs(res.mean_per_gate - 2.0) / res.stderr_per_gate
    clauses["mean consumption"] = (z <= 3, f"{res.mean_per_gate:.5f} per gate, {z:.2f} sigma")
    clauses["exhaustion"] = (res.exhaustion_rate <= 2e-3, f"{res.exhausted}/{res.trials}, planned bound {plan.bound:.2e}")

    worst = Fraction(0)
    delta = Fraction(1, 1000)
    for rule in (ancilla.grid_rounding(Fraction(1, 10_000)), ancilla.offset_rounding(delta),
                 ancilla.offset_rounding(-delta)):
        chain = ancilla.build_angle_chain(math.pi / 8, delta, rule, length=21)
        worst = max(worst, chain.max_error(20))
    clauses["angle chain"] = (worst <= delta, f"max error {float(worst):.2e} <= {float(delta)}")
    assert verdict(11, clauses)
