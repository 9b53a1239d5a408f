from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ftbench.ancilla import (
    AngleBudget,
    BudgetPlan,
    angle_exhaustion,
    build_angle_chain,
    exact_rounding,
    grid_rounding,
    offset_rounding,
    plan_budget,
    simulate_consumption,
)


@pytest.mark.parametrize("A", [2, 8, 64, 512, 4096])
def test_single_use_angles_need_log_a_levels(A):
    plan = plan_budget([1] * A, eps=1e-3)
    offset = plan.max_levels - math.ceil(math.log2(A))
    # the offset only depends on eps: about log2(1/eps) + 1
    assert offset == math.ceil(math.log2(1e3)) + 1
    assert set(plan.budgets[0].copies) == {1}
    assert plan.bound <= 1e-3


def test_one_failure_level_at_even_odds():
    (b,) = plan_budget([1], eps=0.5).budgets
    assert b.copies == (1, 1) and b.levels == 2


def test_large_demand_overhead_is_geometric():
    plan = plan_budget([10_000] * 100, shrink=0.6, eps=1e-3)
    assert 2.0 < plan.overhead <= 1 / (1 - 0.6) + 0.01
    copies = plan.budgets[0].copies
    assert copies[:4] == (10_000, 6000, 3600, 2160)
    assert plan.reserve_reference == math.ceil(math.log(100) ** 2)


def test_plan_accepts_angle_mapping_and_rejects_bad_input():
    plan = plan_budget({0.1: 5, 0.2: 0}, eps=0.01)
    assert [b.theta for b in plan.budgets] == [0.1, 0.2]
    assert plan.budgets[1].copies == () and plan.demand == 5
    for kwargs in ({"shrink": 0.5}, {"shrink": 1.0}, {"eps": 0.0}, {"eps": 1.0}):
        with pytest.raises(ValueError):
            plan_budget([3], **kwargs)
    with pytest.raises(ValueError):
        plan_budget([-1])


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3000), st.integers(1, 500), st.sampled_from([1e-1, 1e-2, 1e-3, 1e-5]))
def test_budget_is_monotone_in_demand(n, extra, eps):
    a = plan_budget([n, 7], eps=eps).budgets[0].copies
    b = plan_budget([n + extra, 7], eps=eps).budgets[0].copies
    assert len(b) >= len(a)
    assert all(y >= x for x, y in zip(a, b))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 1000), min_size=1, max_size=6), st.floats(1e-6, 0.5), st.floats(0.05, 0.99))
def test_budget_is_monotone_in_eps(demands, eps, factor):
    assert plan_budget(demands, eps=eps * factor).total >= plan_budget(demands, eps=eps).total


def test_exact_exhaustion_matches_monte_carlo():
    budget = AngleBudget(0.0, 20, (20, 10, 5, 2), 0.6, 0.0)
    plan = BudgetPlan([budget], 0.1, 0.6, 0, 0.1)
    exact = angle_exhaustion(budget, exact=True)
    trials = 100_000
    res = simulate_consumption(plan, trials, np.random.default_rng(0))
    sigma = math.sqrt(exact * (1 - exact) / trials)
    assert 0.01 < exact < 0.99
    assert abs(res.exhaustion_rate - exact) < 4 * sigma
    # the union bound used for large demands is never below the exact value
    assert angle_exhaustion(budget, exact=False) >= exact


def test_planned_budget_is_rarely_exhausted():
    plan = plan_budget([50] * 8, eps=0.05)
    trials = 20_000
    res = simulate_consumption(plan, trials, np.random.default_rng(1))
    assert plan.bound <= 0.05
    assert res.exhaustion_rate <= plan.bound + 4 * math.sqrt(plan.bound / trials)


def test_certain_success_uses_one_ancilla_per_gate():
    plan = plan_budget([10, 3], eps=1e-2)
    res = simulate_consumption(plan, 100, np.random.default_rng(2), success=1.0)
    assert np.all(res.used_per_gate == 1.0) and res.exhausted == 0
    assert res.histogram.tolist() == [1300]
    with pytest.raises(ValueError):
        simulate_consumption(plan, 10, np.random.default_rng(0), success=0.0)


def test_fair_coin_consumption_is_geometric_with_mean_two():
    plan = plan_budget([200] * 5, eps=1e-3)
    res = simulate_consumption(plan, 2000, np.random.default_rng(3))
    assert abs(res.mean_per_gate - 2.0) < 3 * res.stderr_per_gate
    hist = res.histogram
    k = 8
    observed = np.append(hist[:k], hist[k:].sum())
    probs = np.append(0.5 ** np.arange(1, k + 1), 0.5**k)
    assert stats.chisquare(observed, probs * observed.sum()).pvalue > 1e-3


def test_exact_rounding_gives_doubling_chain():
    theta = Fraction(1, 7)
    chain = build_angle_chain(theta, Fraction(0), exact_rounding, length=6)
    assert chain.angles == [theta * 2**k for k in range(6)]
    assert chain.max_error() == 0


def _rz(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


@pytest.mark.parametrize(
    "theta,delta,rule",
    [
        (math.pi / 8, Fraction(1, 1000), grid_rounding(Fraction(1, 10_000))),
        (math.pi / 8, Fraction(1, 1000), offset_rounding(Fraction(1, 1000))),
        (Fraction(1, 10), Fraction(1, 1000), grid_rounding(Fraction(2, 1000))),
        (0.3, Fraction(1, 100), offset_rounding(Fraction(-1, 100))),
    ],
)
def test_net_rotation_stays_within_accuracy(theta, delta, rule):
    chain = build_angle_chain(theta, delta, rule, length=21)
    for k in range(21):
        assert abs(chain.net_rotation(k) - chain.theta) <= delta
        # second route: compose the rotations that were actually applied
        u = np.eye(2)
        for a in chain.angles[:k]:
            u = _rz(-float(a)) @ u
        u = _rz(float(chain.angles[k])) @ u
        net = 2 * np.angle(u[1, 1] / abs(u[1, 1]))
        assert abs(net - float(chain.theta)) <= float(delta) + 1e-9
    assert chain.max_error(20) <= delta


def test_rounding_that_misses_by_more_than_delta_is_rejected():
    with pytest.raises(ValueError):
        build_angle_chain(0.105, Fraction(1, 1000), grid_rounding(Fraction(1, 100)))
    with pytest.raises(ValueError):
        build_angle_chain(0.1, 0, grid_rounding(Fraction(1, 100)))
