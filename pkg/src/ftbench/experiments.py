"""Noise sampling, Monte Carlo logical error rates, exact enumeration and
finite-size scaling collapse."""

from __future__ import annotations

import csv
import json
import io
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .decoder import DecodingGraph, DecodingError, bits_to_pauli, build_decoding_graph
from .lattice import CodeLayout, GeometrySpec, build_layout, code_distance
from .pauli import PauliOperator

CSV_FIELDS = ("geometry", "gauge", "decoder", "L", "distance", "p", "trials", "failures", "rate", "stderr", "seed")
ENUMERATION_BUDGET = 10**8
_LETTER_BITS = ((1, 0), (1, 1), (0, 1))  # X, Y, Z as (x, z)


@dataclass(frozen=True)
class NoiseModel:
    """Independent single-qubit Pauli noise: an error with probability ``p``,
    whose letter is drawn from ``letters`` = (P[X], P[Y], P[Z])."""

    p: float
    letters: tuple = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if len(self.letters) != 3 or any(w < 0 for w in self.letters):
            raise ValueError("letters must be three non-negative weights")
        if not math.isclose(sum(self.letters), 1.0, abs_tol=1e-12):
            raise ValueError("letter probabilities must sum to 1")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream for one trial: Philox keyed by ``seed XOR trial``."""
    return np.random.Generator(np.random.Philox(key=(int(seed) ^ int(trial)) & (2**64 - 1)))


def sample_error_bits(n_qubits: int, noise: NoiseModel, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``(x, z)`` bit vectors of one sampled error.

    Two uniforms are drawn per qubit whatever ``p`` is, so one stream gives
    nested error sets across ``p`` (common random numbers).
    """
    u = rng.random(n_qubits)
    v = rng.random(n_qubits)
    hit = u < noise.p
    cum = np.cumsum(noise.letters)
    letter = np.searchsorted(cum[:-1], v, side="right")
    table = np.array(_LETTER_BITS, np.uint8)
    ex = np.where(hit, table[letter, 0], 0).astype(np.uint8)
    ez = np.where(hit, table[letter, 1], 0).astype(np.uint8)
    return ex, ez


def sample_error(layout: CodeLayout, noise: NoiseModel, rng: np.random.Generator) -> PauliOperator:
    ex, ez = sample_error_bits(layout.n_qubits, noise, rng)
    return bits_to_pauli(ex, ez)


@dataclass(frozen=True)
class ExperimentRecord:
    geometry: str
    gauge: str
    decoder: str
    L: int
    distance: int | None
    p: float
    trials: int
    failures: int
    seed: int

    def __post_init__(self):
        if not 0 <= self.failures <= self.trials:
            raise ValueError("failures must lie in [0, trials]")

    @property
    def rate(self) -> float:
        return self.failures / self.trials if self.trials else 0.0

    @property
    def stderr(self) -> float:
        if not self.trials:
            return 0.0
        r = self.rate
        return math.sqrt(r * (1 - r) / self.trials)

    def row(self) -> dict:
        out = asdict(self)
        out["rate"] = self.rate
        out["stderr"] = self.stderr
        out["distance"] = "" if self.distance is None else self.distance
        return {k: out[k] for k in CSV_FIELDS}


def write_csv(records: Iterable[ExperimentRecord], fh=None) -> str:
    buf = io.StringIO() if fh is None else fh
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow(r.row())
    return buf.getvalue() if fh is None else ""


def read_csv(fh) -> list[ExperimentRecord]:
    """Parse records written by :func:`write_csv`; ``#`` comment lines are skipped."""
    out = []
    for row in csv.DictReader(line for line in fh if not line.startswith("#")):
        out.append(ExperimentRecord(
            geometry=row["geometry"],
            gauge=row["gauge"],
            decoder=row["decoder"],
            L=int(row["L"]),
            distance=int(row["distance"]) if row["distance"] not in ("", None) else None,
            p=float(row["p"]),
            trials=int(row["trials"]),
            failures=int(row["failures"]),
            seed=int(row["seed"]),
        ))
    return out


def scaling_size(layout: CodeLayout) -> int:
    """Size used on the collapse axis: the dislocation separation for
    dislocation layouts, the linear patch size otherwise."""
    return int(layout.spec.L)


def reported_distance(layout: CodeLayout) -> int | None:
    """Exact code distance when it is cheap (CSS layouts), else None."""
    from .lattice import _css_form

    if layout.logical_qubit_count == 0 or _css_form(layout) is None:
        return None
    d = code_distance(layout)
    return None if d.exceeded else int(d)


# Monte Carlo


_WORKER: dict = {}


def _worker_graph(spec_json: str, exclude_pentagons: bool) -> DecodingGraph:
    key = (spec_json, exclude_pentagons)
    if key not in _WORKER:
        layout = build_layout(GeometrySpec.from_json(json.loads(spec_json)))
        _WORKER.clear()
        _WORKER[key] = build_decoding_graph(layout, exclude_pentagons)
    return _WORKER[key]


def _run_chunk(args) -> list[int]:
    spec_json, exclude_pentagons, decoder, ps, letters, seed, start, stop, observable = args
    graph = _worker_graph(spec_json, exclude_pentagons)
    return _count_failures(graph, decoder, ps, letters, seed, start, stop, observable)


def _count_failures(graph, decoder, ps, letters, seed, start, stop, observable) -> list[int]:
    n = graph.n_qubits
    fails = [0] * len(ps)
    cum = np.cumsum(letters)
    table = np.array(_LETTER_BITS, np.uint8)
    for t in range(start, stop):
        rng = trial_rng(seed, t)
        u = rng.random(n)
        v = rng.random(n)
        letter = np.searchsorted(cum[:-1], v, side="right")
        bx, bz = table[letter, 0], table[letter, 1]
        for k, p in enumerate(ps):
            hit = u < p
            ex = np.where(hit, bx, 0).astype(np.uint8)
            ez = np.where(hit, bz, 0).astype(np.uint8)
            defects = graph.defects(graph.syndrome_bits(ex, ez))
            try:
                cx, cz = graph.correct(defects, decoder)
            except DecodingError as exc:
                raise DecodingError(f"trial {t} at p={p}: {exc}") from exc
            fails[k] += graph.failed(ex ^ cx, ez ^ cz, observable)
    return fails


def estimate_logical_rate(
    layout: CodeLayout,
    decoder: str,
    ps: Sequence[float],
    trials: int,
    seed: int,
    *,
    noise_letters: tuple = (1 / 3, 1 / 3, 1 / 3),
    exclude_pentagons: bool = False,
    workers: int | None = None,
    distance: int | None = None,
    observable: str = "any",
    chunk: int = 500,
) -> list[ExperimentRecord]:
    """Monte Carlo logical failure rate at each ``p``.

    Trial ``t`` draws its error from :func:`trial_rng` ``(seed, t)``; the same
    uniforms serve every ``p`` so failure counts are comparable across the
    grid.  Results do not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    NoiseModel(0.0, tuple(noise_letters))
    for p in ps:
        NoiseModel(float(p), tuple(noise_letters))
    ps = [float(p) for p in ps]
    spec_json = json.dumps(layout.spec.to_json(), sort_keys=True)
    bounds = [(s, min(s + chunk, trials)) for s in range(0, trials, chunk)]
    jobs = [(spec_json, exclude_pentagons, decoder, ps, tuple(noise_letters), seed, a, b, observable) for a, b in bounds]
    workers = default_workers() if workers is None else workers
    totals = np.zeros(len(ps), np.int64)
    if workers <= 1 or len(jobs) == 1:
        graph = build_decoding_graph(layout, exclude_pentagons)
        for a, b in bounds:
            totals += _count_failures(graph, decoder, ps, tuple(noise_letters), seed, a, b, observable)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_chunk, jobs):
                totals += part
    if distance is None:
        distance = reported_distance(layout)
    geometry = layout.spec.kind + ("-nopent" if exclude_pentagons else "")
    return [
        ExperimentRecord(geometry, layout.gauge, decoder, scaling_size(layout), distance, p, trials, int(f), int(seed))
        for p, f in zip(ps, totals)
    ]


def default_workers() -> int:
    env = os.environ.get("FTBENCH_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, min(8, os.cpu_count() or 1))


def crossing_point(records: Sequence[ExperimentRecord]) -> dict:
    """Where the logical-rate curves of different sizes intersect.

    ``crossing`` is a joint estimate over all sizes: at every ``p`` on the
    shared grid a weighted least-squares slope of rate against ``L`` is
    computed (weights from the binomial errors), a weighted line is fitted to
    those slopes as a function of ``p`` (using the four grid points around
    the first sign change when there is one), and its root is returned.  Below the
    crossing larger codes do better (negative slope), above it worse.
    ``pairs`` holds the root of a line fitted to ``rate_large - rate_small``
    for each adjacent size pair (None without a positive slope) and ``mean``
    their average; these are noisier and kept as diagnostics.
    """
    by_size: dict[int, dict[float, ExperimentRecord]] = {}
    for r in records:
        by_size.setdefault(r.L, {})[r.p] = r
    sizes = sorted(by_size)
    pairs = {}
    for a, b in zip(sizes, sizes[1:]):
        ps = np.array(sorted(set(by_size[a]) & set(by_size[b])))
        if len(ps) < 2:
            pairs[(a, b)] = None
            continue
        diff = np.array([by_size[b][p].rate - by_size[a][p].rate for p in ps])
        slope, icpt = np.polyfit(ps, diff, 1)
        pairs[(a, b)] = float(-icpt / slope) if slope > 0 else None
    found = [c for c in pairs.values() if c is not None]
    shared = sorted(set.intersection(*(set(v) for v in by_size.values()))) if by_size else []
    joint = None
    if len(sizes) >= 2 and len(shared) >= 2:
        Ls = np.array(sizes, dtype=float)
        slopes, slope_var = [], []
        for p in shared:
            recs = [by_size[L][p] for L in sizes]
            var = np.array([max(r.stderr**2, 1.0 / r.trials**2) for r in recs])
            w = 1.0 / var
            y = np.array([r.rate for r in recs])
            xm = np.sum(w * Ls) / w.sum()
            sxx = np.sum(w * (Ls - xm) ** 2)
            slopes.append(float(np.sum(w * (Ls - xm) * y) / sxx))
            slope_var.append(float(1.0 / sxx))
        slopes = np.array(slopes)
        keep = np.arange(len(shared))
        change = np.flatnonzero((slopes[:-1] < 0) & (slopes[1:] >= 0))
        if change.size and len(shared) > 4:
            k = int(change[0])
            keep = keep[max(0, k - 1): k + 3]
        ps_arr = np.array(shared)[keep]
        coef = np.polyfit(ps_arr, slopes[keep], 1, w=1.0 / np.sqrt(np.array(slope_var)[keep]))
        if coef[0] > 0:
            joint = float(-coef[1] / coef[0])
    return {"crossing": joint, "pairs": pairs, "mean": float(np.mean(found)) if found else None}


# exact enumeration


@dataclass(frozen=True)
class EnumerationResult:
    weight: int
    cases: int
    failures: int
    observable: str
    by_observable: dict = field(default_factory=dict)

    @property
    def probability(self) -> Fraction:
        return Fraction(self.failures, self.cases)

    def __float__(self):
        return self.failures / self.cases


def enumerate_failure_probability(
    layout: CodeLayout | DecodingGraph,
    decoder: str,
    k: int,
    *,
    observable: str = "any",
    budget: int = ENUMERATION_BUDGET,
    exclude_pentagons: bool = False,
) -> EnumerationResult:
    """Exact failure probability over every error on ``k`` distinct qubits
    with independent uniform letters (``C(n, k) * 3**k`` equally likely cases).

    ``observable`` selects the failure notion used for ``failures`` (see
    :meth:`DecodingGraph.failed`); counts for ``"any"``, ``"X"`` and ``"Z"``
    are all reported in ``by_observable``.
    """
    graph = layout if isinstance(layout, DecodingGraph) else build_decoding_graph(layout, exclude_pentagons)
    n = graph.n_qubits
    cases = math.comb(n, k) * 3**k
    if cases > budget:
        raise ValueError(f"{cases} cases exceed the enumeration budget {budget}")
    counts = {"any": 0, "X": 0, "Z": 0}
    labelled = graph.labelled_logicals if graph.layout.logical_qubit_count else None
    L_any = graph.logical_matrix
    for qs in itertools.combinations(range(n), k):
        for letters in itertools.product(range(3), repeat=k):
            ex = np.zeros(n, np.uint8)
            ez = np.zeros(n, np.uint8)
            for q, l in zip(qs, letters):
                ex[q], ez[q] = _LETTER_BITS[l]
            defects = graph.defects(graph.syndrome_bits(ex, ez))
            cx, cz = graph.correct(defects, decoder)
            rx, rz = ex ^ cx, ez ^ cz
            if graph.absorbed and np.any(graph.syndrome_bits(rx, rz)[list(graph.absorbed)]):
                for key in counts:
                    counts[key] += 1
                continue
            if L_any.shape[0] == 0:
                continue
            counts["any"] += _anticommutes(L_any, rx, rz, n)
            counts["X"] += _anticommutes(labelled["X"], rx, rz, n)
            counts["Z"] += _anticommutes(labelled["Z"], rx, rz, n)
    if observable not in counts:
        raise ValueError(f"unknown observable {observable!r}")
    return EnumerationResult(k, cases, counts[observable], observable, dict(counts))


def _anticommutes(L: np.ndarray, rx, rz, n) -> bool:
    return bool(np.any((L[:, :n].astype(np.int32) @ rz + L[:, n:].astype(np.int32) @ rx) & 1))


# finite-size scaling collapse


@dataclass(frozen=True)
class CollapseFit:
    p_c: float
    theta: float
    residual: float
    ci_p_c: tuple = (math.nan, math.nan)
    ci_theta: tuple = (math.nan, math.nan)

    def as_dict(self) -> dict:
        return asdict(self)


def _group(data) -> dict:
    """``{L: (p array, rate array)}`` from records or a ready mapping."""
    if isinstance(data, dict):
        return {int(L): (np.asarray(p, float), np.asarray(y, float)) for L, (p, y) in data.items()}
    groups = {}
    for r in data:
        groups.setdefault(int(r.L), []).append((r.p, r.rate))
    out = {}
    for L, pts in groups.items():
        pts.sort()
        out[L] = (np.array([a for a, _ in pts]), np.array([b for _, b in pts]))
    return out


def collapse_objective(groups: dict, p_c: float, theta: float, min_overlap: float = 0.5) -> float:
    """Mean squared deviation of each point from the other sizes' curves.

    Every size's points are rescaled to ``x = (p - p_c) * L**theta``; each
    point is compared with the piecewise-linear interpolation of every other
    size at the same ``x`` (only where that size covers ``x``).  Returns
    ``inf`` when fewer than ``min_overlap`` of the possible comparisons exist.
    """
    scaled = {L: ((p - p_c) * float(L) ** theta, y) for L, (p, y) in groups.items()}
    total = 0.0
    count = 0
    possible = 0
    for L, (x, y) in scaled.items():
        for L2, (x2, y2) in scaled.items():
            if L2 == L:
                continue
            possible += len(x)
            inside = (x >= x2[0]) & (x <= x2[-1])
            if not np.any(inside):
                continue
            interp = np.interp(x[inside], x2, y2)
            total += float(np.sum((y[inside] - interp) ** 2))
            count += int(inside.sum())
    if possible == 0 or count < min_overlap * possible:
        return math.inf
    return total / count


def fit_collapse(
    data,
    p_c0: float,
    theta0: float,
    *,
    n_boot: int = 200,
    seed: int = 0,
    trials: dict | None = None,
) -> CollapseFit:
    """Fit ``(p_c, theta)`` by Nelder-Mead on :func:`collapse_objective`.

    ``data`` is a list of :class:`ExperimentRecord` or ``{L: (ps, rates)}``.
    Confidence intervals (2.5 and 97.5 percentiles) come from a parametric
    bootstrap that redraws each failure count binomially; pass ``n_boot=0``
    to skip it.  ``trials`` gives per-size trial counts for mapping input.
    """
    groups = _group(data)
    if len(groups) < 3:
        raise ValueError("collapse fitting needs at least three sizes")
    for L in groups:
        order = np.argsort(groups[L][0])
        groups[L] = (groups[L][0][order], groups[L][1][order])
    if not math.isfinite(collapse_objective(groups, p_c0, theta0)):
        raise ValueError("scaled ranges do not overlap at the initial guess")
    best = _nelder_mead(groups, p_c0, theta0)
    ci_pc = ci_theta = (math.nan, math.nan)
    if n_boot:
        counts = _trial_counts(data, groups, trials)
        rng = np.random.default_rng(seed)
        fits = []
        for _ in range(n_boot):
            resampled = {
                L: (p, rng.binomial(counts[L], np.clip(y, 0, 1)) / counts[L]) for L, (p, y) in groups.items()
            }
            f = _nelder_mead(resampled, best[0], best[1])
            if math.isfinite(f[2]):
                fits.append(f[:2])
        if fits:
            arr = np.array(fits)
            ci_pc = tuple(float(v) for v in np.percentile(arr[:, 0], [2.5, 97.5]))
            ci_theta = tuple(float(v) for v in np.percentile(arr[:, 1], [2.5, 97.5]))
    return CollapseFit(best[0], best[1], best[2], ci_pc, ci_theta)


def _trial_counts(data, groups, trials) -> dict:
    if trials is not None:
        return {L: int(trials[L]) for L in groups}
    if isinstance(data, dict):
        return {L: 10**4 for L in groups}
    out = {}
    for r in data:
        out[int(r.L)] = int(r.trials)
    return out


def _nelder_mead(groups, p0, t0):
    def f(v):
        return collapse_objective(groups, v[0], v[1])

    res = minimize(f, x0=[p0, t0], method="Nelder-Mead",
                   options={"xatol": 1e-5, "fatol": 1e-12, "maxiter": 2000, "initial_simplex": [[p0, t0], [p0 + 0.01, t0], [p0, t0 + 0.1]]})
    return float(res.x[0]), float(res.x[1]), float(res.fun)


__all__ = [
    "CSV_FIELDS",
    "NoiseModel",
    "ExperimentRecord",
    "EnumerationResult",
    "CollapseFit",
    "trial_rng",
    "sample_error",
    "sample_error_bits",
    "estimate_logical_rate",
    "enumerate_failure_probability",
    "collapse_objective",
    "fit_collapse",
    "crossing_point",
    "write_csv",
    "read_csv",
    "reported_distance",
    "default_workers",
]
