from __future__ import annotations

import json
import math

import numpy as np
import pytest

from ftbench.lasvegas import (
    CircuitDAG,
    DAGError,
    Gate,
    chain_dag,
    chain_moments,
    compile_dag,
    default_weight_constant,
    drift_check,
    fit_mean_model,
    fit_survival_tail,
    max_geometric_mean,
    max_geometric_var,
    normalize_dag,
    omega,
    parallel_dag,
    random_layered_dag,
    simulate_schedule,
    survival_curve,
    trajectory,
    weight_trajectory,
)


def reference_finish_times(dag: CircuitDAG, P: float, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Plain step-by-step simulation: a gate can finish once all producers finished earlier."""
    producer = {w: i for i, g in enumerate(dag.gates) for w in g.outputs}
    parents = [[producer[w] for w in g.inputs if w in producer] for g in dag.gates]
    out = np.empty(trials, dtype=np.int64)
    for k in range(trials):
        done = [False] * len(dag.gates)
        t = 0
        while not all(done):
            t += 1
            ready = [i for i, g in enumerate(dag.gates) if not done[i] and all(done[j] for j in parents[i])]
            for i in ready:
                if rng.random() < P:
                    done[i] = True
        out[k] = t
    return out


def test_certain_gates_finish_in_r_tot_steps():
    rng = np.random.default_rng(0)
    for _ in range(100):
        dag = random_layered_dag(int(rng.integers(1, 40)), int(rng.integers(1, 15)), int(rng.integers(1, 4)), rng)
        batch = simulate_schedule(dag, 1.0, trials=3, seed=int(rng.integers(1000)))
        assert np.all(batch.T == dag.r_tot)


def test_chain_matches_negative_binomial_moments():
    trials, r, P = 20_000, 12, 0.4
    T = simulate_schedule(chain_dag(r), P, trials, seed=1).T
    mean, var = chain_moments(r, P)
    assert abs(T.mean() - mean) < 3 * math.sqrt(var / trials)
    assert abs(T.var() / var - 1) < 0.05


def test_parallel_gates_match_max_of_geometrics():
    trials, n, P = 20_000, 50, 0.5
    T = simulate_schedule(parallel_dag(n), P, trials, seed=2).T
    mean, var = max_geometric_mean(n, P), max_geometric_var(n, P)
    assert abs(T.mean() - mean) < 3 * math.sqrt(var / trials)


def test_max_geometric_oracle_against_sampling():
    assert max_geometric_mean(1, 0.25) == pytest.approx(4.0)
    assert max_geometric_var(1, 0.25) == pytest.approx(0.75 / 0.0625)
    rng = np.random.default_rng(3)
    samples = rng.geometric(0.3, size=(200_000, 7)).max(axis=1)
    assert samples.mean() == pytest.approx(max_geometric_mean(7, 0.3), abs=0.03)
    assert samples.var() == pytest.approx(max_geometric_var(7, 0.3), rel=0.03)


def test_kernel_agrees_with_reference_simulation():
    dag = random_layered_dag(12, 6, 2, np.random.default_rng(4))
    trials, P = 3000, 0.6
    fast = simulate_schedule(dag, P, trials, seed=5).T
    slow = reference_finish_times(dag, P, trials, np.random.default_rng(6))
    se = math.sqrt(fast.var() / trials + slow.var() / trials)
    assert abs(fast.mean() - slow.mean()) < 4 * se


def test_invariants_hold_on_random_dags():
    rng = np.random.default_rng(7)
    for _ in range(5):
        dag = random_layered_dag(64, 20, 2, rng)
        assert simulate_schedule(dag, 0.5, 500, seed=int(rng.integers(100))).violations == 0


def test_weight_is_monotone_and_bounded_by_lowest_level():
    dag = random_layered_dag(32, 10, 2, np.random.default_rng(8))
    for k in range(20):
        tr = trajectory(dag, 0.5, seed=3, trial=k)
        diag = weight_trajectory(tr)
        assert np.all(np.diff(tr.W) >= -1e-12)
        assert np.all(tr.W <= tr.r_last + 1e-12)
        assert np.allclose(diag.W, tr.W)
        assert tr.C[0, 0] == 32


def test_runs_are_deterministic_and_trial_addressable():
    dag = compile_dag(random_layered_dag(20, 8, 2, np.random.default_rng(9)))
    a = simulate_schedule(dag, 0.5, 50, seed=11).T
    assert np.array_equal(a, simulate_schedule(dag, 0.5, 50, seed=11).T)
    assert np.array_equal(a[10:20], simulate_schedule(dag, 0.5, 10, seed=11, first_trial=10).T)
    assert trajectory(dag, 0.5, seed=11, trial=7).T == a[7]
    assert not np.array_equal(a, simulate_schedule(dag, 0.5, 50, seed=12).T)


def test_finish_time_is_monotone_in_p_per_trial():
    dag = compile_dag(random_layered_dag(16, 6, 2, np.random.default_rng(10)))
    lo = simulate_schedule(dag, 0.3, 200, seed=1).T
    hi = simulate_schedule(dag, 0.7, 200, seed=1).T
    assert np.all(hi <= lo)


def test_per_gate_probability_overrides_global():
    dag = CircuitDAG([Gate((0,), (1,), p=1.0), Gate((1,), (2,), p=1.0)], 1)
    assert np.all(simulate_schedule(dag, 0.1, 20).T == 2)


def test_normalisation_inserts_identities():
    # wire 1 skips round 1, so it needs one identity gate
    dag = CircuitDAG([Gate((0,), (2,)), Gate((2,), (3,)), Gate((1, 3), (4, 5))], 2)
    assert not dag.is_normalized()
    norm = normalize_dag(dag)
    assert norm.is_normalized()
    assert sum(g.identity for g in norm.gates) == 2
    assert norm.r_tot == dag.r_tot == 3
    assert normalize_dag(norm) is norm


def test_malformed_dags_are_rejected():
    with pytest.raises(DAGError):
        CircuitDAG([Gate((0, 1, 2), (3, 4, 5))], 2)
    with pytest.raises(DAGError):
        CircuitDAG([Gate((0,), (1, 2))], 2)
    with pytest.raises(DAGError):
        CircuitDAG([Gate((0,), (1,)), Gate((2,), (1,))], 1)
    with pytest.raises(DAGError):
        CircuitDAG([Gate((0,), (1,)), Gate((0,), (2,))], 1)
    with pytest.raises(DAGError):
        CircuitDAG([Gate((0,), (1,)), Gate((1,), (0,))], 1)
    with pytest.raises(DAGError):
        CircuitDAG([Gate((0,), (1,), p=0.0)], 1)
    with pytest.raises(DAGError):
        CircuitDAG.from_json({"gates": []})
    with pytest.raises(ValueError):
        simulate_schedule(chain_dag(3), 0.0)


def test_dag_json_round_trip():
    dag = random_layered_dag(10, 4, 3, np.random.default_rng(12))
    again = CircuitDAG.from_json(json.loads(json.dumps(dag.to_json())))
    assert again.gates == dag.gates and again.rounds == dag.rounds


def test_weight_constant_keeps_omega_positive():
    for D in (1, 2, 3, 5, 8):
        assert omega(default_weight_constant(D), D) > 0
    tr = trajectory(chain_dag(3), 0.5)
    with pytest.raises(ValueError):
        weight_trajectory(tr, A=0.0)


def test_survival_fit_recovers_geometric_rate():
    rng = np.random.default_rng(13)
    T = rng.geometric(0.2, size=200_000)
    fit = fit_survival_tail(T)
    assert fit.rate == pytest.approx(-math.log(0.8), rel=0.05)
    assert fit.r2 > 0.99
    t, s = survival_curve(np.array([1, 1, 2, 3]))
    assert np.allclose(s, [1.0, 0.5, 0.25, 0.0])


def test_mean_model_fit_is_exact_on_planted_data():
    table = [(N, r, 1.5 * r + 0.7 * math.log(N)) for N in (8, 32, 128) for r in (5, 10, 20)]
    c1, c2, r2 = fit_mean_model(table)
    assert (c1, c2) == pytest.approx((1.5, 0.7)) and r2 == pytest.approx(1.0)


def test_drift_check_reports_decaying_fraction():
    dag = random_layered_dag(32, 12, 2, np.random.default_rng(14))
    v, rate, frac = drift_check(dag, 0.5, 50, seed=1)
    assert v > 0 and frac[0] == 1.0
    assert rate > 0
