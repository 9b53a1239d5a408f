"""Finish-time statistics of a probabilistic circuit and ancilla budgets for its rotations."""

from __future__ import annotations

import numpy as np

from ftbench.ancilla import build_angle_chain, grid_rounding, plan_budget, simulate_consumption
from ftbench.lasvegas import fit_survival_tail, random_layered_dag, simulate_schedule


def main() -> None:
    rng = np.random.default_rng(0)
    for N, r in ((16, 10), (64, 20), (256, 50)):
        batch = simulate_schedule(random_layered_dag(N, r, 2, rng), 0.5, 2000, seed=1)
        tail = fit_survival_tail(batch.T)
        print(f"N={N:4d} r_tot={r:3d} mean T={batch.T.mean():7.2f} tail rate={tail.rate:.3f} "
              f"violations={batch.violations}")

    plan = plan_budget([1] * 1024, eps=1e-3)
    print(f"1024 single-use angles: {plan.max_levels} levels, {plan.total} ancillas")
    plan = plan_budget([500] * 20, eps=1e-3)
    sim = simulate_consumption(plan, 5000, np.random.default_rng(2))
    print(f"20 x 500 rotations: overhead {plan.overhead:.3f}, mean use {sim.mean_per_gate:.4f} per gate, "
          f"exhausted {sim.exhausted}/{sim.trials}")

    chain = build_angle_chain(np.pi / 8, 1e-3, grid_rounding(1e-4), length=8)
    print("angle chain:", [round(float(a), 4) for a in chain.angles], "max error", float(chain.max_error()))


if __name__ == "__main__":
    main()
