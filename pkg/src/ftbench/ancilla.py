"""Ancilla budgets for repeat-until-success angle injection.

A rotation by ``theta`` consumes a copy of ``Y(theta)``; with probability 1/2
it applies the inverse rotation instead, which is repaired by injecting
``Y(2 theta)``, then ``Y(4 theta)`` and so on.  Of ``n`` demanded rotations the
number reaching doubling level ``a`` is ``Bin(n, 2^-a)``, so a budget lists how
many copies to keep at each level.

Sizing: the per-angle failure allowance ``eps_i = 1 - (1 - eps)^(1/A)`` is
split as ``eps_i / 2^(a+1)`` for running out at level ``a >= 1`` and
``eps_i / 2`` for needing a level beyond the last one.  Each level keeps
``max(ceil(c^a n), q_a)`` copies while ``c^a n`` stays above ``ln A`` and
``q_a`` afterwards, where ``q_a`` is the smallest count whose binomial tail
fits the allowance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

DEFAULT_SHRINK = 0.6
EXACT_LIMIT = 2000


@dataclass(frozen=True)
class AngleBudget:
    """Copies per doubling level for one angle."""

    theta: float
    demand: int
    copies: tuple[int, ...]
    shrink: float
    eps: float

    @property
    def levels(self) -> int:
        return len(self.copies)

    @property
    def total(self) -> int:
        return int(sum(self.copies))

    def to_json(self) -> dict:
        return {"theta": self.theta, "demand": self.demand, "copies": list(self.copies),
                "total": self.total, "eps": self.eps}


@dataclass
class BudgetPlan:
    budgets: list
    eps: float
    shrink: float
    reserve_reference: int
    per_angle_eps: float
    bound: float = field(default=math.nan)

    @property
    def total(self) -> int:
        return sum(b.total for b in self.budgets)

    @property
    def demand(self) -> int:
        return sum(b.demand for b in self.budgets)

    @property
    def overhead(self) -> float:
        return self.total / self.demand if self.demand else math.nan

    @property
    def max_levels(self) -> int:
        return max((b.levels for b in self.budgets), default=0)

    def to_json(self) -> dict:
        return {
            "eps": self.eps, "shrink": self.shrink, "per_angle_eps": self.per_angle_eps,
            "reserve_reference": self.reserve_reference, "total": self.total, "demand": self.demand,
            "overhead": self.overhead, "max_levels": self.max_levels, "exhaustion_bound": self.bound,
            "angles": [b.to_json() for b in self.budgets],
        }


def _min_copies(n: int, p: float, target: float) -> int:
    """Smallest ``m`` with ``Pr[Bin(n, p) > m] <= target``."""
    if target <= 0:
        return n
    m = int(stats.binom.ppf(max(1.0 - target, 0.0), n, p)) if target > 1e-12 else 0
    m = max(0, min(m, n))
    while m < n and stats.binom.sf(m, n, p) > target:
        m += 1
    while m > 0 and stats.binom.sf(m - 1, n, p) <= target:
        m -= 1
    return m


def level_copies(n: int, n_angles: int, eps_i: float, shrink: float) -> tuple[int, ...]:
    """Copies per level for one angle with demand ``n``."""
    floor = max(math.log(max(n_angles, 1)), 1.0)
    copies = [n]
    a = 0
    # stop once needing level a+1 has probability at most eps_i / 2
    while -math.expm1(n * math.log1p(-(2.0 ** -(a + 1)))) > eps_i / 2:
        a += 1
        q = _min_copies(n, 2.0 ** -a, eps_i / 2 ** (a + 1))
        geo = shrink**a * n
        copies.append(max(math.ceil(geo), q) if geo >= floor else q)
    return tuple(copies)


def plan_budget(
    demands: Sequence[int] | Mapping[float, int],
    shrink: float = DEFAULT_SHRINK,
    eps: float = 1e-3,
    beta: float = 1.0,
    thetas: Sequence[float] | None = None,
) -> BudgetPlan:
    """Per-angle copies so that any angle runs out with probability at most ``eps``.

    ``demands`` is a list of ``n_i`` or a mapping ``theta -> n_i``.
    """
    if not 0.5 < shrink < 1:
        raise ValueError("shrink factor must lie in (1/2, 1)")
    if not 0 < eps < 1:
        raise ValueError("exhaustion probability must lie in (0, 1)")
    if isinstance(demands, Mapping):
        thetas = [float(t) for t in demands]
        ns = [int(v) for v in demands.values()]
    else:
        ns = [int(v) for v in demands]
        thetas = list(thetas) if thetas is not None else [math.nan] * len(ns)
    if any(n < 0 for n in ns):
        raise ValueError("demands must be non-negative")
    A = len(ns)
    eps_i = -math.expm1(math.log1p(-eps) / A) if A else eps
    cache: dict[int, tuple[int, ...]] = {}
    budgets = []
    for theta, n in zip(thetas, ns):
        if n not in cache:
            cache[n] = level_copies(n, A, eps_i, shrink) if n > 0 else ()
        budgets.append(AngleBudget(theta, n, cache[n], shrink, eps_i))
    reserve = math.ceil(beta * math.log(A) ** 2) if A > 1 else 0
    plan = BudgetPlan(budgets, eps, shrink, reserve, eps_i)
    plan.bound = exhaustion_probability(plan)
    return plan


def angle_exhaustion(budget: AngleBudget, exact: bool | None = None) -> float:
    """Probability one angle runs out (exact chain for small demand, union bound otherwise)."""
    n, copies = budget.demand, budget.copies
    if n == 0:
        return 0.0
    exact = n <= EXACT_LIMIT if exact is None else exact
    if not exact:
        bound = sum(stats.binom.sf(m, n, 2.0 ** -a) for a, m in enumerate(copies) if a > 0)
        bound += -math.expm1(n * math.log1p(-(2.0 ** -len(copies))))
        return float(min(bound, 1.0))
    # X_{a+1} ~ Bin(X_a, 1/2); survive while X_a <= copies[a] and nobody passes the last level
    dist = np.zeros(n + 1)
    dist[n] = 1.0
    for a in range(1, len(copies) + 1):
        cap = copies[a] if a < len(copies) else 0
        new = np.zeros(n + 1)
        for x in np.flatnonzero(dist):
            new[: x + 1] += dist[x] * stats.binom.pmf(np.arange(x + 1), x, 0.5)
        new[cap + 1:] = 0.0
        dist = new
    return float(max(0.0, 1.0 - dist.sum()))


def exhaustion_probability(plan: BudgetPlan) -> float:
    """Probability that at least one angle runs out (angles independent)."""
    cache: dict = {}
    log_ok = 0.0
    for b in plan.budgets:
        key = (b.demand, b.copies)
        if key not in cache:
            cache[key] = angle_exhaustion(b)
        if cache[key] >= 1.0:
            return 1.0
        log_ok += math.log1p(-cache[key])
    return -math.expm1(log_ok)


@dataclass
class ConsumptionResult:
    trials: int
    exhausted: int
    used_per_gate: np.ndarray
    histogram: np.ndarray

    @property
    def exhaustion_rate(self) -> float:
        return self.exhausted / self.trials

    @property
    def mean_per_gate(self) -> float:
        return float(self.used_per_gate.mean())

    @property
    def stderr_per_gate(self) -> float:
        return float(self.used_per_gate.std(ddof=1) / math.sqrt(self.used_per_gate.size))

    def to_json(self) -> dict:
        return {"trials": self.trials, "exhausted": self.exhausted, "exhaustion_rate": self.exhaustion_rate,
                "mean_per_gate": self.mean_per_gate, "stderr_per_gate": self.stderr_per_gate,
                "histogram": self.histogram.tolist()}


def simulate_consumption(plan: BudgetPlan, trials: int, rng: np.random.Generator,
                         success: float = 0.5, max_levels: int = 64) -> ConsumptionResult:
    """Monte Carlo of injection attempts against the planned copies.

    ``histogram[k]`` counts gates that needed ``k + 1`` injections.  Demand is
    tallied even in trials that run out, so ``used_per_gate`` is unaffected by
    the budget.
    """
    if not 0 < success <= 1:
        raise ValueError("success probability must lie in (0, 1]")
    ns = np.array([b.demand for b in plan.budgets], dtype=np.int64)
    caps = np.zeros((len(plan.budgets), max_levels), dtype=np.int64)
    for i, b in enumerate(plan.budgets):
        k = min(len(b.copies), max_levels)
        caps[i, :k] = b.copies[:k]
    exhausted = np.zeros(trials, dtype=bool)
    used = np.zeros(trials, dtype=np.int64)
    hist = np.zeros(max_levels, dtype=np.int64)
    chunk = max(1, 2_000_000 // max(ns.size, 1))
    for lo in range(0, trials, chunk):
        hi = min(trials, lo + chunk)
        x = np.broadcast_to(ns, (hi - lo, ns.size)).copy()
        for a in range(max_levels):
            if not x.any():
                break
            exhausted[lo:hi] |= (x > caps[:, a]).any(axis=1)
            used[lo:hi] += x.sum(axis=1)
            nxt = rng.binomial(x, 1.0 - success) if success < 1 else np.zeros_like(x)
            hist[a] += int((x - nxt).sum())
            x = nxt
        else:
            exhausted[lo:hi] |= x.any(axis=1)
    total = int(ns.sum())
    per_gate = used / total if total else np.zeros(trials)
    return ConsumptionResult(trials, int(exhausted.sum()), per_gate, hist[: np.flatnonzero(hist).max() + 1 if hist.any() else 0])


# angle chains -------------------------------------------------------------------

Rounding = Callable[[Fraction], Fraction]


def grid_rounding(step: Fraction | float) -> Rounding:
    """Round to the nearest multiple of ``step``."""
    step = Fraction(step)

    def rule(x: Fraction) -> Fraction:
        return round(x / step) * step

    return rule


def offset_rounding(offset: Fraction | float) -> Rounding:
    """Always miss by exactly ``offset`` (worst case for drift)."""
    offset = Fraction(offset)
    return lambda x: x + offset


def exact_rounding(x: Fraction) -> Fraction:
    return x


@dataclass
class AngleChain:
    """Angles ``theta'_1, theta'_2, ...`` for successive injection attempts.

    ``theta'_{k+1}`` approximates ``theta + theta'_1 + ... + theta'_k``, so after
    ``k`` failures and one success the net rotation is
    ``theta'_{k+1} - sum_{j<=k} theta'_j``.
    """

    theta: Fraction
    delta: Fraction
    angles: list

    def net_rotation(self, failures: int) -> Fraction:
        return self.angles[failures] - sum(self.angles[:failures], Fraction(0))

    def max_error(self, max_failures: int | None = None) -> Fraction:
        k = len(self.angles) - 1 if max_failures is None else max_failures
        return max(abs(self.net_rotation(j) - self.theta) for j in range(k + 1))

    def to_json(self) -> dict:
        return {"theta": float(self.theta), "delta": float(self.delta),
                "angles": [float(a) for a in self.angles],
                "errors": [float(self.net_rotation(k) - self.theta) for k in range(len(self.angles))]}


def build_angle_chain(theta: float | Fraction, delta: float | Fraction, rounding: Rounding = exact_rounding,
                      length: int = 21) -> AngleChain:
    """Chain of ``length`` angles using ``rounding`` for each approximation.

    Arithmetic is exact on ``Fraction`` values; a float ``theta`` is taken at its
    exact binary value.  Raises if ``rounding`` misses a target by more than ``delta``.
    """
    theta = Fraction(theta)
    delta = Fraction(delta)
    if delta <= 0 and rounding is not exact_rounding:
        raise ValueError("accuracy must be positive")
    angles: list[Fraction] = []
    acc = Fraction(0)
    for _ in range(length):
        target = theta + acc
        got = Fraction(rounding(target))
        if abs(got - target) > delta:
            raise ValueError(f"rounding rule missed {float(target)} by {float(abs(got - target))} > delta")
        angles.append(got)
        acc += got
    return AngleChain(theta, delta, angles)
