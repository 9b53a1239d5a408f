"""Markov scheduling of probabilistically finishing gates on a layered circuit.

A gate may start once all its input wires are labelled; at every time step each
startable gate finishes independently with probability ``P``.  The circuit of
``r_tot`` rounds is done at time ``T`` when every gate in those rounds has
finished.

Levels: the ``N`` incoming wires sit on level 0 and a gate in round ``r``
(zero-based) moves its wires to level ``r + 1``.  ``n(t, r)`` counts wires
waiting on level ``r``, ``C(t, r)`` is its cumulative sum and the weight is
``W(t) = min_r r - ln C(t, r) / A`` over levels with ``C > 0``.  Wires that leave
round ``r_tot - 1`` are parked on level ``r_tot``; the identity rounds that
would carry them further are never materialised.

Randomness is counter based: the uniform used by gate ``g`` at time ``t`` in
trial ``k`` depends only on ``(seed, k, g, t)``.  Runs at different ``P`` (or
with some gates forced to ``P = 1``) therefore use common random numbers, and
finish times are monotone in ``P`` trial by trial.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

SCHEMA = "ftbench.dag/1"


class DAGError(ValueError):
    """Malformed circuit graph."""


@dataclass(frozen=True)
class Gate:
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    p: float | None = None
    identity: bool = False


@dataclass
class CircuitDAG:
    """Gates connected by wire ids.  Incoming wires are those no gate produces."""

    gates: list
    max_fan_in: int
    rounds: list = field(default_factory=list)

    def __post_init__(self):
        self.gates = [g if isinstance(g, Gate) else Gate(tuple(g[0]), tuple(g[1])) for g in self.gates]
        self.rounds = _compute_rounds(self.gates, self.max_fan_in)

    @property
    def r_tot(self) -> int:
        return max(self.rounds) + 1 if self.rounds else 0

    @property
    def incoming(self) -> list[int]:
        produced = {w for g in self.gates for w in g.outputs}
        return sorted({w for g in self.gates for w in g.inputs} - produced)

    @property
    def n_wires(self) -> int:
        return len(self.incoming)

    def wires_into_round(self) -> list[int]:
        counts = [0] * self.r_tot
        for g, r in zip(self.gates, self.rounds):
            counts[r] += len(g.inputs)
        return counts

    def is_normalized(self) -> bool:
        n = self.n_wires
        return all(c == n for c in self.wires_into_round()) and not _long_wires(self)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "max_fan_in": self.max_fan_in,
            "gates": [
                {"inputs": list(g.inputs), "outputs": list(g.outputs), "round": r,
                 **({"p": g.p} if g.p is not None else {}), **({"identity": True} if g.identity else {})}
                for g, r in zip(self.gates, self.rounds)
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CircuitDAG":
        try:
            gates = [Gate(tuple(g["inputs"]), tuple(g["outputs"]), g.get("p"), bool(g.get("identity", False)))
                     for g in obj["gates"]]
            return cls(gates, int(obj["max_fan_in"]))
        except KeyError as exc:
            raise DAGError(f"DAG JSON missing {exc}") from None


def _compute_rounds(gates: Sequence[Gate], max_fan_in: int) -> list[int]:
    producer: dict[int, int] = {}
    consumed: set[int] = set()
    for i, g in enumerate(gates):
        if len(g.inputs) != len(g.outputs):
            raise DAGError(f"gate {i} has {len(g.inputs)} inputs but {len(g.outputs)} outputs")
        if not 1 <= len(g.inputs) <= max_fan_in:
            raise DAGError(f"gate {i} has fan-in {len(g.inputs)}, bound is {max_fan_in}")
        if g.p is not None and not 0 < g.p <= 1:
            raise DAGError(f"gate {i} has finishing probability {g.p}")
        for w in g.outputs:
            if w in producer:
                raise DAGError(f"wire {w} produced twice")
            producer[w] = i
        for w in g.inputs:
            if w in consumed:
                raise DAGError(f"wire {w} consumed twice")
            consumed.add(w)
    rounds = [-1] * len(gates)

    def round_of(i: int, stack: set) -> int:
        if rounds[i] >= 0:
            return rounds[i]
        if i in stack:
            raise DAGError("circuit graph has a cycle")
        stack.add(i)
        r = 0
        for w in gates[i].inputs:
            if w in producer:
                r = max(r, 1 + round_of(producer[w], stack))
        stack.discard(i)
        rounds[i] = r
        return r

    for i in range(len(gates)):
        round_of(i, set())
    return rounds


def _long_wires(dag: CircuitDAG) -> list:
    """Wires whose consumer is more than one round after their producer."""
    producer = {w: i for i, g in enumerate(dag.gates) for w in g.outputs}
    out = []
    for j, g in enumerate(dag.gates):
        for w in g.inputs:
            start = dag.rounds[producer[w]] if w in producer else -1
            if dag.rounds[j] > start + 1:
                out.append((w, start, dag.rounds[j]))
    return out


def normalize_dag(dag: CircuitDAG) -> CircuitDAG:
    """Insert one-wire identity gates so every wire joins adjacent rounds.

    Wires that skip rounds get an identity gate on each skipped round, and
    outputs of early rounds are carried to the last round, so that every round
    receives exactly ``N`` wires.
    """
    gates = list(dag.gates)
    rounds = list(dag.rounds)
    r_tot = dag.r_tot
    producer = {w: i for i, g in enumerate(gates) for w in g.outputs}
    consumer = {w: i for i, g in enumerate(gates) for w in g.inputs}
    next_wire = 1 + max([w for g in gates for w in g.inputs + g.outputs], default=-1)
    rewired: dict[int, dict[int, int]] = {}
    extra: list[Gate] = []

    wires = set(producer) | set(consumer)
    for w in sorted(wires):
        start = rounds[producer[w]] if w in producer else -1
        end = rounds[consumer[w]] if w in consumer else r_tot
        if end <= start + 1:
            continue
        cur = w
        for r in range(start + 1, end):
            new = next_wire
            next_wire += 1
            extra.append(Gate((cur,), (new,), None, True))
            cur = new
        if w in consumer:
            rewired.setdefault(consumer[w], {})[w] = cur
    if not extra:
        return dag
    out = []
    for i, g in enumerate(gates):
        sub = rewired.get(i)
        out.append(g if not sub else Gate(tuple(sub.get(w, w) for w in g.inputs), g.outputs, g.p, g.identity))
    return CircuitDAG(out + extra, dag.max_fan_in)


def random_layered_dag(n_wires: int, r_tot: int, max_fan_in: int, rng: np.random.Generator) -> CircuitDAG:
    """Random normalised DAG: each round permutes the wires and cuts them into
    gates of uniformly random size in ``1..max_fan_in``."""
    if n_wires < 1 or r_tot < 1 or max_fan_in < 1:
        raise DAGError("need positive wire count, rounds and fan-in")
    gates = []
    current = np.arange(n_wires)
    next_wire = n_wires
    for _ in range(r_tot):
        perm = rng.permutation(current)
        pos = 0
        new_level = []
        while pos < n_wires:
            k = min(int(rng.integers(1, max_fan_in + 1)), n_wires - pos)
            ins = tuple(int(w) for w in perm[pos:pos + k])
            outs = tuple(range(next_wire, next_wire + k))
            next_wire += k
            gates.append(Gate(ins, outs))
            new_level.extend(outs)
            pos += k
        current = np.array(new_level)
    return CircuitDAG(gates, max_fan_in)


def chain_dag(r_tot: int) -> CircuitDAG:
    """One wire through ``r_tot`` one-wire gates."""
    return CircuitDAG([Gate((k,), (k + 1,)) for k in range(r_tot)], 1)


def parallel_dag(n_wires: int) -> CircuitDAG:
    """``n_wires`` independent one-wire gates in a single round."""
    return CircuitDAG([Gate((k,), (n_wires + k,)) for k in range(n_wires)], 1)


# compiled form ----------------------------------------------------------------


@dataclass(frozen=True)
class CompiledDAG:
    n_wires: int
    r_tot: int
    gate_round: np.ndarray
    gate_size: np.ndarray
    gate_p: np.ndarray
    out_ptr: np.ndarray
    out_consumer: np.ndarray
    initial: np.ndarray
    has_own_p: np.ndarray


def compile_dag(dag: CircuitDAG) -> CompiledDAG:
    """Flatten a normalised DAG into arrays for the simulator."""
    if not dag.is_normalized():
        dag = normalize_dag(dag)
    n_gates = len(dag.gates)
    consumer = {w: i for i, g in enumerate(dag.gates) for w in g.inputs}
    out_ptr = np.zeros(n_gates + 1, dtype=np.int64)
    cons = []
    for i, g in enumerate(dag.gates):
        for w in g.outputs:
            cons.append(consumer.get(w, -1))
        out_ptr[i + 1] = len(cons)
    rounds = np.asarray(dag.rounds, dtype=np.int64)
    return CompiledDAG(
        n_wires=dag.n_wires,
        r_tot=dag.r_tot,
        gate_round=rounds,
        gate_size=np.array([len(g.inputs) for g in dag.gates], dtype=np.int64),
        gate_p=np.array([np.nan if g.p is None else g.p for g in dag.gates], dtype=np.float64),
        out_ptr=out_ptr,
        out_consumer=np.array(cons, dtype=np.int64),
        initial=np.flatnonzero(rounds == 0).astype(np.int64),
        has_own_p=np.array([g.p is not None for g in dag.gates], dtype=np.bool_),
    )


@numba.njit(cache=True)
def _splitmix(x):
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = x
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _uniform(seed, trial, gate, t):
    h = _splitmix(np.uint64(seed) ^ (np.uint64(trial) * np.uint64(0xD1B54A32D192ED03)))
    h = _splitmix(h ^ np.uint64(gate))
    h = _splitmix(h ^ (np.uint64(t) * np.uint64(0x9E3779B97F4A7C15)))
    return (h >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True)
def _weight(cnt, r_hi, inv_a):
    """Return (W, r_last) from per-level counts ``cnt[0..r_hi]``."""
    c = 0
    best = np.inf
    r_last = -1
    for r in range(r_hi + 1):
        if cnt[r] > 0:
            if r_last < 0:
                r_last = r
            c += cnt[r]
            w = r - np.log(c) * inv_a
            if w < best:
                best = w
    return best, r_last


@numba.njit(cache=True)
def _simulate(n_wires, r_tot, gate_round, gate_size, gate_p, out_ptr, out_consumer, initial,
              seed, trial, inv_a, t_max, record, w_out, n_out):
    """One trajectory.  Returns (T, monotonicity violations, bound violations, C violations).

    When ``record`` is set, ``w_out[t]`` holds W(t) and ``n_out[t, r]`` holds n(t, r)
    for ``t <= min(T, t_max)``.
    """
    n_gates = gate_round.shape[0]
    waiting = np.zeros(n_gates, dtype=np.int64)
    ready = np.empty(n_gates, dtype=np.int64)
    nxt = np.empty(n_gates, dtype=np.int64)
    n_ready = 0
    for i in range(initial.shape[0]):
        ready[n_ready] = initial[i]
        n_ready += 1
    cnt = np.zeros(r_tot + 1, dtype=np.int64)
    cnt[0] = n_wires
    cum_prev = np.empty(r_tot + 1, dtype=np.int64)
    c = 0
    for r in range(r_tot + 1):
        c += cnt[r]
        cum_prev[r] = c
    unfinished = 0
    for i in range(n_gates):
        if gate_round[i] < r_tot:
            unfinished += 1
    w_prev, _ = _weight(cnt, r_tot, inv_a)
    if record:
        w_out[0] = w_prev
        for r in range(r_tot + 1):
            n_out[0, r] = cnt[r]
    mono = 0
    bound = 0
    cviol = 0
    t = 0
    while unfinished > 0:
        t += 1
        n_next = 0
        kept = 0
        for k in range(n_ready):
            g = ready[k]
            if _uniform(seed, trial, g, t) < gate_p[g]:
                unfinished -= 1
                r = gate_round[g]
                cnt[r] -= gate_size[g]
                cnt[r + 1] += gate_size[g]
                for j in range(out_ptr[g], out_ptr[g + 1]):
                    cg = out_consumer[j]
                    if cg >= 0:
                        waiting[cg] += 1
                        if waiting[cg] == gate_size[cg]:
                            nxt[n_next] = cg
                            n_next += 1
            else:
                ready[kept] = g
                kept += 1
        for k in range(n_next):
            ready[kept + k] = nxt[k]
        n_ready = kept + n_next
        c = 0
        for r in range(r_tot + 1):
            c += cnt[r]
            if c > cum_prev[r]:
                cviol += 1
            cum_prev[r] = c
        w, r_last = _weight(cnt, r_tot, inv_a)
        if w < w_prev - 1e-12:
            mono += 1
        if unfinished > 0 and w > r_last + 1e-12:
            bound += 1
        w_prev = w
        if record and t <= t_max:
            w_out[t] = w
            for r in range(r_tot + 1):
                n_out[t, r] = cnt[r]
    return t, mono, bound, cviol


@numba.njit(cache=True)
def _simulate_many(n_wires, r_tot, gate_round, gate_size, gate_p, out_ptr, out_consumer, initial,
                   seed, first_trial, trials, inv_a):
    T = np.empty(trials, dtype=np.int64)
    viol = np.zeros(3, dtype=np.int64)
    dummy_w = np.empty(1)
    dummy_n = np.empty((1, 1), dtype=np.int64)
    for k in range(trials):
        t, a, b, c = _simulate(n_wires, r_tot, gate_round, gate_size, gate_p, out_ptr, out_consumer,
                               initial, seed, first_trial + k, inv_a, 0, False, dummy_w, dummy_n)
        T[k] = t
        viol[0] += a
        viol[1] += b
        viol[2] += c
    return T, viol


def default_weight_constant(max_fan_in: int) -> float:
    """``A = 2 ln D + 1``; keeps ``omega = 1 - D exp(-A/2)`` positive."""
    return 2.0 * math.log(max(max_fan_in, 1)) + 1.0


def omega(A: float, max_fan_in: int) -> float:
    return 1.0 - max_fan_in * math.exp(-A / 2.0)


def _check_a(A: float, max_fan_in: int) -> None:
    if not A > 2.0 * math.log(max(max_fan_in, 1)):
        raise ValueError(f"weight constant A={A} must exceed 2 ln D = {2 * math.log(max_fan_in):.4f}")


def _gate_p(c: CompiledDAG, P: float) -> np.ndarray:
    if not 0 < P <= 1:
        raise ValueError("finishing probability must lie in (0, 1]")
    return np.where(c.has_own_p, c.gate_p, P)


@dataclass
class ScheduleBatch:
    """Finish times of many trials plus invariant violation counts."""

    T: np.ndarray
    monotonicity_violations: int
    bound_violations: int
    cumulative_violations: int
    n_wires: int
    r_tot: int
    P: float
    seed: int

    @property
    def violations(self) -> int:
        return self.monotonicity_violations + self.bound_violations + self.cumulative_violations


def simulate_schedule(dag: CircuitDAG | CompiledDAG, P: float, trials: int = 1, seed: int = 0,
                      A: float | None = None, first_trial: int = 0) -> ScheduleBatch:
    """Run ``trials`` independent trajectories; per-gate ``p`` overrides ``P``."""
    c = dag if isinstance(dag, CompiledDAG) else compile_dag(dag)
    D = int(c.gate_size.max()) if c.gate_size.size else 1
    A = default_weight_constant(D) if A is None else A
    T, viol = _simulate_many(c.n_wires, c.r_tot, c.gate_round, c.gate_size, _gate_p(c, P), c.out_ptr,
                             c.out_consumer, c.initial, np.uint64(seed), first_trial, trials, 1.0 / A)
    return ScheduleBatch(T, int(viol[0]), int(viol[1]), int(viol[2]), c.n_wires, c.r_tot, P, seed)


@dataclass
class ScheduleTrajectory:
    """One trajectory with per-time diagnostics (rows are t = 0..T)."""

    T: int
    n: np.ndarray
    W: np.ndarray
    A: float
    max_fan_in: int

    @property
    def C(self) -> np.ndarray:
        return np.cumsum(self.n, axis=1)

    @property
    def r_last(self) -> np.ndarray:
        occupied = self.n > 0
        return np.where(occupied.any(axis=1), occupied.argmax(axis=1), -1)


def trajectory(dag: CircuitDAG | CompiledDAG, P: float, seed: int = 0, trial: int = 0,
               A: float | None = None, t_max: int = 100_000) -> ScheduleTrajectory:
    """Record ``n(t, r)`` and ``W(t)`` for a single trial."""
    c = dag if isinstance(dag, CompiledDAG) else compile_dag(dag)
    D = int(c.gate_size.max()) if c.gate_size.size else 1
    A = default_weight_constant(D) if A is None else A
    w_out = np.full(t_max + 1, np.nan)
    n_out = np.zeros((t_max + 1, c.r_tot + 1), dtype=np.int64)
    T, _, _, _ = _simulate(c.n_wires, c.r_tot, c.gate_round, c.gate_size, _gate_p(c, P), c.out_ptr,
                           c.out_consumer, c.initial, np.uint64(seed), trial, 1.0 / A, t_max, True,
                           w_out, n_out)
    last = min(T, t_max)
    return ScheduleTrajectory(int(T), n_out[: last + 1], w_out[: last + 1], A, D)


@dataclass
class WeightDiagnostics:
    W: np.ndarray
    W_r: np.ndarray
    K: np.ndarray
    important: np.ndarray
    omega: float
    r_last: np.ndarray


def weight_trajectory(traj: ScheduleTrajectory, A: float | None = None) -> WeightDiagnostics:
    """Per-time weights ``W(t, r)``, ``W(t)``, ``K(t, r)`` and important rounds.

    ``K(t, r) = n(t, r) - (D - 1) C(t, r - 1)``; round ``r`` is important when
    ``W(t, r) <= W(t) + 1/2``.
    """
    A = traj.A if A is None else A
    D = traj.max_fan_in
    _check_a(A, D)
    if traj.n.shape[0] == 0:
        empty = np.zeros((0, traj.n.shape[1]))
        return WeightDiagnostics(np.zeros(0), empty, empty, empty.astype(bool), omega(A, D), np.zeros(0, int))
    C = traj.C.astype(np.float64)
    with np.errstate(divide="ignore"):
        levels = np.arange(C.shape[1])
        W_r = np.where(C > 0, levels - np.log(C) / A, np.inf)
    W = W_r.min(axis=1)
    C_prev = np.concatenate([np.zeros((C.shape[0], 1)), C[:, :-1]], axis=1)
    K = traj.n - (D - 1) * C_prev
    important = W_r <= W[:, None] + 0.5
    return WeightDiagnostics(W, W_r, K, important, omega(A, D), traj.r_last)


# analytic oracles ----------------------------------------------------------------


def chain_moments(r_tot: int, P: float) -> tuple[float, float]:
    """Mean and variance of the finish time of a chain of ``r_tot`` gates."""
    return r_tot / P, r_tot * (1 - P) / P**2


def max_geometric_mean(n: int, P: float, tol: float = 1e-15) -> float:
    """``E[max of n geometric(P)]`` by summing ``Pr[T > t]``."""
    total = 0.0
    t = 0
    q = 1.0 - P
    while True:
        s = 1.0 - (1.0 - q**t) ** n
        total += s
        if s < tol and t > 0:
            return total
        t += 1


def max_geometric_var(n: int, P: float, tol: float = 1e-15) -> float:
    """Variance of the maximum of ``n`` geometric(P) variables."""
    q = 1.0 - P
    m1 = 0.0
    m2 = 0.0
    t = 0
    while True:
        s = 1.0 - (1.0 - q**t) ** n
        m1 += s
        m2 += (2 * t + 1) * s
        if s < tol and t > 0:
            break
        t += 1
    return m2 - m1 * m1


# fitting -----------------------------------------------------------------------


def _r2(y: np.ndarray, pred: np.ndarray) -> float:
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)


@dataclass
class SurvivalFit:
    rate: float
    intercept: float
    t0: float
    r2: float
    t: np.ndarray
    survival: np.ndarray


def survival_curve(T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Empirical ``Pr[T > t]`` for ``t = 0..max(T)``."""
    T = np.asarray(T)
    counts = np.bincount(T, minlength=int(T.max()) + 1)
    surv = 1.0 - np.cumsum(counts) / T.size
    return np.arange(surv.size), surv


def fit_survival_tail(T: np.ndarray, quantile: float = 0.9, min_count: int = 10) -> SurvivalFit:
    """Weighted least-squares fit of ``ln Pr[T > t] = a - c3 t`` beyond a quantile.

    Points whose tail holds fewer than ``min_count`` trials are dropped; the
    rest are weighted by the inverse binomial variance of ``ln Pr[T > t]``.
    """
    t, s = survival_curve(T)
    start = float(np.quantile(T, quantile))
    keep = (t >= start) & (s * len(T) >= min_count)
    if keep.sum() < 3:
        raise ValueError("too few tail points to fit")
    x, y = t[keep].astype(float), np.log(s[keep])
    sk = s[keep]
    slope, intercept = np.polyfit(x, y, 1, w=np.sqrt(len(T) * sk / (1.0 - sk)))
    r2 = _r2(y, slope * x + intercept)
    rate = -slope
    return SurvivalFit(rate, intercept, intercept / rate if rate > 0 else math.nan, r2, t, s)


@dataclass
class CompletionFit:
    c1: float
    c2: float
    r2: float
    tail_rate: float
    t0: float
    tail_r2: float
    drift_v: float
    drift_rate: float
    table: list

    def to_json(self) -> dict:
        return {
            "c1": self.c1, "c2": self.c2, "r2": self.r2, "tail_rate": self.tail_rate, "t0": self.t0,
            "tail_r2": self.tail_r2, "drift_v": self.drift_v, "drift_rate": self.drift_rate,
            "table": self.table,
        }


def fit_mean_model(table: Sequence[tuple[int, int, float]]) -> tuple[float, float, float]:
    """Fit ``mean T = c1 r_tot + c2 ln N`` (no intercept); returns (c1, c2, R^2)."""
    arr = np.asarray(table, dtype=float)
    N, r, y = arr[:, 0], arr[:, 1], arr[:, 2]
    X = np.column_stack([r, np.log(N)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(coef[0]), float(coef[1]), _r2(y, X @ coef)


def drift_check(dag: CircuitDAG | CompiledDAG, P: float, trials: int, seed: int = 0,
                A: float | None = None, v: float | None = None) -> tuple[float, float, np.ndarray]:
    """Fraction of trajectories with ``W(t) <= W(0) + v t`` as a function of ``t``.

    ``v`` defaults to 0.8 times the median average speed ``(W(T) - W(0)) / T``.
    Finished trajectories count as above the line.  The decay rate comes from a
    count-weighted fit of the log fraction over ``t >= 1``.  Returns
    ``(v, decay rate, fractions)``; the rate is infinite when no trajectory is
    below the line after ``t = 0``.
    """
    c = dag if isinstance(dag, CompiledDAG) else compile_dag(dag)
    trajs = [trajectory(c, P, seed, k, A) for k in range(trials)]
    if v is None:
        speeds = [(tr.W[-1] - tr.W[0]) / max(tr.T, 1) for tr in trajs]
        v = 0.8 * float(np.median(speeds))
    horizon = max(tr.T for tr in trajs)
    frac = np.zeros(horizon + 1)
    for tr in trajs:
        ts = np.arange(tr.W.size)
        below = tr.W <= tr.W[0] + v * ts + 1e-12
        frac[: tr.W.size] += below
    frac /= trials
    pos = np.flatnonzero(frac[1:] > 0) + 1
    if not pos.size:
        rate = math.inf  # nobody falls below the line after t = 0
    elif pos.size >= 3 and v > 0:
        slope, _ = np.polyfit(pos.astype(float), np.log(frac[pos]), 1, w=np.sqrt(frac[pos] * trials))
        rate = -float(slope)
    else:
        rate = math.nan
    return v, rate, frac


def fit_completion_model(
    sizes: Sequence[int],
    depths: Sequence[int],
    P: float,
    trials: int,
    max_fan_in: int = 2,
    seed: int = 0,
    tail_config: tuple[int, int] | None = None,
    tail_trials: int = 100_000,
    drift_trials: int = 200,
    A: float | None = None,
) -> CompletionFit:
    """Fit the mean-time model over a grid and the survival tail at one point.

    One random layered DAG is drawn per ``(N, r_tot)`` from ``seed``.
    """
    if len(set(sizes)) < 3 or len(set(depths)) < 3:
        raise ValueError("need at least three distinct wire counts and depths")
    rng = np.random.default_rng(seed)
    table = []
    for N in sizes:
        for r in depths:
            dag = compile_dag(random_layered_dag(N, r, max_fan_in, rng))
            batch = simulate_schedule(dag, P, trials, seed=seed, A=A)
            table.append((N, r, float(batch.T.mean())))
    c1, c2, r2 = fit_mean_model(table)
    tail_config = tail_config or (sorted(sizes)[len(sizes) // 2], sorted(depths)[len(depths) // 2])
    tail_dag = compile_dag(random_layered_dag(tail_config[0], tail_config[1], max_fan_in, rng))
    tail = fit_survival_tail(simulate_schedule(tail_dag, P, tail_trials, seed=seed + 1, A=A).T)
    v, drift_rate, _ = drift_check(tail_dag, P, drift_trials, seed + 2, A)
    return CompletionFit(c1, c2, r2, tail.rate, tail.t0, tail.r2, v, drift_rate, table)


def dumps_batch_csv(batch: ScheduleBatch) -> str:
    lines = ["N,r_tot,P,trial,T"]
    lines += [f"{batch.n_wires},{batch.r_tot},{batch.P},{k},{int(t)}" for k, t in enumerate(batch.T)]
    return "\n".join(lines) + "\n"


def dumps_dag(dag: CircuitDAG) -> str:
    return json.dumps(dag.to_json())
