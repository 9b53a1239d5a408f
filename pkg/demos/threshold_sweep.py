"""Small logical-error sweep on the aligned patch and its crossing estimate.

Uses far fewer trials than the acceptance suite; expect a noisy crossing.
"""

from __future__ import annotations

import sys

from ftbench.experiments import crossing_point, estimate_logical_rate, fit_collapse, write_csv
from ftbench.lattice import GeometrySpec, build_layout


def main(trials: int = 2000) -> None:
    ps = [0.12, 0.13, 0.14, 0.15, 0.16, 0.17]
    records = []
    for L in (5, 7, 9):
        records += estimate_logical_rate(build_layout(GeometrySpec("patch_square", L)), "mwpm", ps, trials, seed=1)
    sys.stdout.write(write_csv(records))
    print("crossing:", crossing_point(records)["crossing"])
    fit = fit_collapse(records, 0.14, 0.6, n_boot=0)
    print(f"collapse: p_c={fit.p_c:.4f} theta={fit.theta:.3f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 2000)
