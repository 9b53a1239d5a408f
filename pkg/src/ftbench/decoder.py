"""Matching decoders on stabilizer decoding graphs.

Every single-qubit X or Z flip anticommutes with at most two checks in the
layouts built by :mod:`ftbench.lattice`, so a flip is an edge between two
stabilizer nodes, or between one node and the boundary node when it
anticommutes with a single check.  A Y error is the composite of an X and a Z
edge.  Pairwise distances avoid the boundary node; distances to the boundary
are stored separately and enter matching through one virtual partner per
defect.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from numba import njit
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .lattice import CodeLayout, _generic_pairs
from .matching import _max_weight_matching, min_weight_perfect_matching
from .pauli import PauliOperator

UNREACHABLE = -1
DECODERS = ("mwpm", "greedy")

Syndrome = frozenset


class DecodingError(ValueError):
    """Raised when a syndrome cannot be matched (e.g. odd parity on a closed surface)."""


@dataclass(frozen=True, eq=False)
class DecodingGraph:
    """Immutable decoding graph with all-pairs shortest paths.

    Node ``i < n_nodes`` is stabilizer ``i``; ``n_nodes`` is the boundary.
    ``absorbed`` stabilizers (5-qubit plaquettes when ``exclude_pentagons``) are
    merged into the boundary node and never appear as defects.
    """

    layout: CodeLayout
    exclude_pentagons: bool
    n_nodes: int
    absorbed: frozenset
    edges: tuple  # (u, v, qubit, letter), v == n_nodes for boundary edges
    dist: np.ndarray  # node-to-node, UNREACHABLE where disconnected
    pred: np.ndarray
    boundary_dist: np.ndarray
    boundary_pred: np.ndarray
    edge_table: np.ndarray  # (n+1, n+1) -> 2*qubit + (1 if Z flip)
    check_x: np.ndarray = field(repr=False)
    check_z: np.ndarray = field(repr=False)
    logical_matrix: np.ndarray = field(repr=False)
    active: np.ndarray = field(repr=False)

    @property
    def boundary(self) -> int:
        return self.n_nodes

    @property
    def has_boundary(self) -> bool:
        return bool(np.any(self.boundary_dist >= 0))

    @property
    def n_qubits(self) -> int:
        return self.layout.n_qubits

    def distance(self, a: int, b: int | None) -> int | None:
        """Path weight between two nodes, or to the boundary when ``b`` is None."""
        d = self.boundary_dist[a] if b is None else self.dist[a, b]
        return None if d < 0 else int(d)

    def path(self, a: int, b: int | None) -> PauliOperator:
        """Explicit Pauli chain whose syndrome is ``{a, b}`` (or ``{a}`` for the boundary)."""
        cx = np.zeros(self.n_qubits, np.uint8)
        cz = np.zeros(self.n_qubits, np.uint8)
        if b is None:
            if self.boundary_dist[a] < 0:
                raise DecodingError(f"node {a} cannot reach the boundary")
            _walk_boundary(a, self.n_nodes, self.boundary_pred, self.edge_table, cx, cz)
        else:
            if self.dist[a, b] < 0:
                raise DecodingError(f"nodes {a} and {b} are not connected")
            _walk_pair(a, b, self.pred, self.edge_table, cx, cz)
        return bits_to_pauli(cx, cz)

    # array fast paths used by the Monte Carlo drivers

    def syndrome_bits(self, ex: np.ndarray, ez: np.ndarray) -> np.ndarray:
        """Per-stabilizer syndrome bits; accepts single errors or ``(trials, n)`` batches."""
        s = (ez.astype(np.int32) @ self.check_x.T + ex.astype(np.int32) @ self.check_z.T) & 1
        return s.astype(np.uint8)

    def defects(self, bits: np.ndarray) -> np.ndarray:
        return np.flatnonzero(bits[: self.n_nodes] & self.active).astype(np.int64)

    def correct(self, defects: np.ndarray, decoder: str = "mwpm") -> tuple[np.ndarray, np.ndarray]:
        partner = self.match(defects, decoder)
        cx = np.zeros(self.n_qubits, np.uint8)
        cz = np.zeros(self.n_qubits, np.uint8)
        _apply_matching(defects, partner, self.n_nodes, self.pred, self.boundary_pred, self.edge_table, cx, cz)
        return cx, cz

    def match(self, defects: np.ndarray, decoder: str = "mwpm") -> np.ndarray:
        """Partner index per defect (position in ``defects``), -1 for the boundary."""
        defects = np.asarray(defects, dtype=np.int64)
        if len(defects) == 0:
            return np.zeros(0, np.int64)
        if decoder == "mwpm":
            partner = _mwpm_partners(defects, self.dist, self.boundary_dist)
        elif decoder == "greedy":
            partner = _greedy_partners(defects, self.dist, self.boundary_dist)
        else:
            raise ValueError(f"unknown decoder {decoder!r}")
        if len(partner) and partner[0] == -2:
            raise DecodingError(_parity_message(self, defects))
        return partner

    def failed(self, rx: np.ndarray, rz: np.ndarray, observable: str = "any") -> bool:
        """Whether a residual (error times correction) is a logical failure.

        ``observable="any"`` flags a residual that anticommutes with any
        logical operator.  ``"Z"`` flags only flips of a logical Z readout
        (anticommutes with some Z-bar), ``"X"`` only flips of an X readout.  A
        residual that still violates an absorbed stabilizer always fails.
        """
        if self.absorbed:
            bits = self.syndrome_bits(rx, rz)
            if np.any(bits[list(self.absorbed)]):
                return True
        if observable == "any":
            L = self.logical_matrix
        elif observable in ("X", "Z"):
            L = self.labelled_logicals[observable]
        else:
            raise ValueError(f"unknown observable {observable!r}")
        if L.shape[0] == 0:
            return False
        n = self.n_qubits
        anti = (L[:, :n].astype(np.int32) @ rz + L[:, n:].astype(np.int32) @ rx) & 1
        return bool(np.any(anti))

    @cached_property
    def labelled_logicals(self) -> dict:
        """Symplectic rows of the X-bar and Z-bar representatives from ``find_logicals``."""
        n = self.n_qubits
        pairs = self.layout.logicals if self.layout.logical_qubit_count else []
        empty = np.zeros((0, 2 * n), np.uint8)
        return {
            "X": np.array([p.x.symplectic(n) for p in pairs], np.uint8) if pairs else empty,
            "Z": np.array([p.z.symplectic(n) for p in pairs], np.uint8) if pairs else empty,
        }


def _parity_message(graph: DecodingGraph, defects) -> str:
    if not graph.has_boundary:
        return f"odd defect parity ({len(defects)} defects) on a closed geometry"
    return "syndrome cannot be matched: a connected component has odd parity and no boundary"


def bits_to_pauli(cx: np.ndarray, cz: np.ndarray) -> PauliOperator:
    letters = {}
    for q in np.flatnonzero(cx | cz):
        letters[int(q)] = "Y" if cx[q] and cz[q] else ("X" if cx[q] else "Z")
    return PauliOperator(letters)


def pauli_to_bits(op: PauliOperator, n_qubits: int) -> tuple[np.ndarray, np.ndarray]:
    v = op.symplectic(n_qubits)
    return v[:n_qubits].astype(np.uint8), v[n_qubits:].astype(np.uint8)


def build_decoding_graph(layout: CodeLayout, exclude_pentagons: bool = False) -> DecodingGraph:
    """Decoding graph of single X/Z flips with shortest paths between all checks."""
    S = layout.stab_matrix
    n = layout.n_qubits
    m = layout.n_stabilizers
    check_x = np.ascontiguousarray(S[:, :n]).astype(np.uint8)
    check_z = np.ascontiguousarray(S[:, n:]).astype(np.uint8)
    absorbed = frozenset(layout.five_qubit_stabilizers) if exclude_pentagons else frozenset()
    B = m
    edge_of = {}
    for q in range(n):
        # an X flip anticommutes with checks carrying Z on q, and vice versa
        for letter, col in (("X", check_z[:, q]), ("Z", check_x[:, q])):
            hit = sorted({B if s in absorbed else int(s) for s in np.flatnonzero(col)})
            if len(hit) > 2:
                raise ValueError(f"{letter} flip on qubit {q} toggles {len(hit)} checks; graph decoding needs at most 2")
            if not hit or hit == [B]:
                continue
            u, v = hit[0], hit[1] if len(hit) == 2 else B
            edge_of.setdefault((u, v), (q, letter))
    edges = tuple((u, v, q, letter) for (u, v), (q, letter) in sorted(edge_of.items()))

    table = np.full((m + 1, m + 1), -1, np.int64)
    for u, v, q, letter in edges:
        code = 2 * q + (1 if letter == "Z" else 0)
        table[u, v] = table[v, u] = code

    inner = [(u, v) for u, v, _, _ in edges if v != B]
    dist, pred = _bfs_all(m, inner)
    full = [(u, v) for u, v, _, _ in edges]
    bd, bp = _bfs_all(m + 1, full, sources=[B])
    boundary_dist = bd[0, :m].copy()
    boundary_pred = bp[0].copy()

    active = np.ones(m, np.uint8)
    for s in absorbed:
        active[s] = 0
    return DecodingGraph(
        layout=layout,
        exclude_pentagons=exclude_pentagons,
        n_nodes=m,
        absorbed=absorbed,
        edges=edges,
        dist=dist,
        pred=pred,
        boundary_dist=boundary_dist,
        boundary_pred=boundary_pred,
        edge_table=table,
        check_x=check_x,
        check_z=check_z,
        logical_matrix=_logical_matrix(layout),
        active=active,
    )


def _logical_matrix(layout: CodeLayout) -> np.ndarray:
    if layout.logical_qubit_count == 0:
        return np.zeros((0, 2 * layout.n_qubits), np.uint8)
    return np.array([v for pair in _generic_pairs(layout) for v in pair], dtype=np.uint8)


def _bfs_all(n_vertices: int, pairs, sources=None):
    if pairs:
        u = np.array([p[0] for p in pairs] + [p[1] for p in pairs])
        v = np.array([p[1] for p in pairs] + [p[0] for p in pairs])
        graph = csr_matrix((np.ones(len(u)), (u, v)), shape=(n_vertices, n_vertices))
    else:
        graph = csr_matrix((n_vertices, n_vertices))
    d, p = shortest_path(graph, directed=False, unweighted=True, return_predecessors=True, indices=sources)
    d = np.atleast_2d(d)
    p = np.atleast_2d(p)
    out = np.where(np.isfinite(d), d, UNREACHABLE).astype(np.int64)
    return out, p.astype(np.int64)


@njit(cache=True)
def _flip(code, cx, cz):
    q = code >> 1
    if code & 1:
        cz[q] ^= 1
    else:
        cx[q] ^= 1


@njit(cache=True)
def _walk_pair(a, b, pred, table, cx, cz):
    cur = b
    w = 0
    while cur != a:
        p = pred[a, cur]
        _flip(table[p, cur], cx, cz)
        cur = p
        w += 1
    return w


@njit(cache=True)
def _walk_boundary(a, B, bpred, table, cx, cz):
    cur = a
    w = 0
    while cur != B:
        p = bpred[cur]
        _flip(table[p, cur], cx, cz)
        cur = p
        w += 1
    return w


@njit(cache=True)
def _apply_matching(defects, partner, B, pred, bpred, table, cx, cz):
    for i in range(len(defects)):
        j = partner[i]
        if j == -1:
            _walk_boundary(defects[i], B, bpred, table, cx, cz)
        elif i < j:
            _walk_pair(defects[i], defects[j], pred, table, cx, cz)


@njit(cache=True)
def _mwpm_partners(defects, dist, bdist):
    """Minimum-weight matching of defects, each optionally to the boundary.

    Vertices ``0..m-1`` are defects, ``m..2m-1`` their boundary partners.
    Returns ``partner`` (-1 = boundary) or ``[-2]`` when no perfect matching
    exists.
    """
    m = len(defects)
    cap = 2 * m * m + m
    ei = np.empty(cap, np.int64)
    ej = np.empty(cap, np.int64)
    ec = np.empty(cap, np.int64)
    k = 0
    for i in range(m):
        bi = bdist[defects[i]]
        for j in range(i + 1, m):
            d = dist[defects[i], defects[j]]
            if d < 0:
                continue
            bj = bdist[defects[j]]
            # a pair no cheaper than both boundary matches is never needed
            if bi >= 0 and bj >= 0 and d >= bi + bj:
                continue
            ei[k] = i
            ej[k] = j
            ec[k] = d
            k += 1
    for i in range(m):
        bi = bdist[defects[i]]
        if bi >= 0:
            ei[k] = i
            ej[k] = m + i
            ec[k] = bi
            k += 1
    any_boundary = False
    for i in range(m):
        if bdist[defects[i]] >= 0:
            any_boundary = True
    nv = m
    if any_boundary:
        nv = 2 * m
        for i in range(m):
            if bdist[defects[i]] < 0:
                continue
            for j in range(i + 1, m):
                if bdist[defects[j]] < 0:
                    continue
                ei[k] = m + i
                ej[k] = m + j
                ec[k] = 0
                k += 1
    fail = np.full(1, -2, np.int64)
    if k == 0:
        return fail
    ei = ei[:k]
    ej = ej[:k]
    ec = ec[:k]
    big = ec.max() + 1
    w = 2 * (big - ec)
    mate = _max_weight_matching(nv, ei, ej, w, True)
    partner = np.empty(m, np.int64)
    for i in range(m):
        j = mate[i]
        if j < 0:
            return fail
        partner[i] = j if j < m else -1
    if any_boundary:
        # isolated real vertices force unused virtual partners to pair up
        for i in range(m):
            if bdist[defects[i]] >= 0 and mate[m + i] < 0:
                return fail
    return partner


@njit(cache=True)
def _greedy_partners(defects, dist, bdist):
    """Repeatedly match the cheapest remaining candidate.

    A pair costs its path weight; a boundary match of weight ``w`` costs
    ``2w``.  Ties go to the lexicographically smallest (cost, i, j) with the
    boundary ordered after every defect.
    """
    m = len(defects)
    partner = np.full(m, -3, np.int64)
    left = m
    while left > 0:
        best_c = -1
        best_i = -1
        best_j = -1
        for i in range(m):
            if partner[i] != -3:
                continue
            for j in range(i + 1, m):
                if partner[j] != -3:
                    continue
                d = dist[defects[i], defects[j]]
                if d < 0:
                    continue
                if best_c < 0 or d < best_c:
                    best_c, best_i, best_j = d, i, j
            b = bdist[defects[i]]
            if b >= 0:
                c = 2 * b
                if best_c < 0 or c < best_c or (c == best_c and i < best_i):
                    best_c, best_i, best_j = c, i, m
        if best_i < 0:
            return np.full(1, -2, np.int64)
        if best_j == m:
            partner[best_i] = -1
            left -= 1
        else:
            partner[best_i] = best_j
            partner[best_j] = best_i
            left -= 2
    return partner


@dataclass(frozen=True)
class Correction:
    """Correction operator plus the matched pairs ``(a, b, weight)``; ``b`` is None for the boundary."""

    operator: PauliOperator
    pairs: tuple
    decoder: str

    @property
    def total_weight(self) -> int:
        return sum(w for _, _, w in self.pairs)

    def to_json(self) -> dict:
        return {
            "decoder": self.decoder,
            "operator": self.operator.to_json(),
            "pairs": [[a, b, w] for a, b, w in self.pairs],
            "total_weight": self.total_weight,
        }


def compute_syndrome(layout: CodeLayout | DecodingGraph, error: PauliOperator) -> Syndrome:
    """Stabilizer ids anticommuting with ``error``."""
    graph = layout if isinstance(layout, DecodingGraph) else None
    lay = graph.layout if graph else layout
    S = lay.stab_matrix
    n = lay.n_qubits
    v = error.symplectic(n).astype(np.int32)
    bits = (S[:, :n].astype(np.int32) @ v[n:] + S[:, n:].astype(np.int32) @ v[:n]) & 1
    return frozenset(int(i) for i in np.flatnonzero(bits))


def _decode(graph: DecodingGraph, s: Iterable[int], decoder: str) -> Correction:
    defects = np.array(sorted(int(i) for i in s if i not in graph.absorbed), dtype=np.int64)
    if len(defects) == 0:
        return Correction(PauliOperator(), (), decoder)
    partner = graph.match(defects, decoder)
    cx, cz = _correction_bits(graph, defects, partner)
    pairs = []
    for i, j in enumerate(partner):
        if j == -1:
            pairs.append((int(defects[i]), None, int(graph.boundary_dist[defects[i]])))
        elif i < j:
            pairs.append((int(defects[i]), int(defects[j]), int(graph.dist[defects[i], defects[j]])))
    op = bits_to_pauli(cx, cz)
    left = compute_syndrome(graph.layout, op) - graph.absorbed
    if left != frozenset(int(d) for d in defects):
        raise AssertionError("correction does not reproduce the syndrome")
    return Correction(op, tuple(pairs), decoder)


def _correction_bits(graph: DecodingGraph, defects, partner):
    cx = np.zeros(graph.n_qubits, np.uint8)
    cz = np.zeros(graph.n_qubits, np.uint8)
    _apply_matching(defects, partner, graph.n_nodes, graph.pred, graph.boundary_pred, graph.edge_table, cx, cz)
    return cx, cz


def decode_mwpm(graph: DecodingGraph, s: Iterable[int]) -> Correction:
    """Minimum-weight perfect matching decoder."""
    return _decode(graph, s, "mwpm")


def decode_greedy(graph: DecodingGraph, s: Iterable[int]) -> Correction:
    """Closest-pair-first greedy decoder (boundary matches cost twice their weight)."""
    return _decode(graph, s, "greedy")


def decode(graph: DecodingGraph, s: Iterable[int], decoder: str = "mwpm") -> Correction:
    if decoder not in DECODERS:
        raise ValueError(f"unknown decoder {decoder!r}")
    return _decode(graph, s, decoder)


def is_logical_failure(layout: CodeLayout | DecodingGraph, error: PauliOperator, correction) -> bool:
    """True iff ``error * correction`` is a nontrivial logical operator.

    ``layout`` may be a :class:`DecodingGraph`, in which case stabilizers it
    absorbs are not required to be satisfied beforehand but a residual that
    violates them counts as a failure.
    """
    graph = layout if isinstance(layout, DecodingGraph) else None
    lay = graph.layout if graph else layout
    op = correction.operator if isinstance(correction, Correction) else correction
    n = lay.n_qubits
    r = (error.symplectic(n) ^ op.symplectic(n)).astype(np.uint8)
    rx, rz = r[:n], r[n:]
    left = compute_syndrome(lay, PauliOperator.from_symplectic(r))
    if graph is not None:
        if left - graph.absorbed:
            raise ValueError("correction does not clear the syndrome")
        return graph.failed(rx, rz)
    if left:
        raise ValueError("correction does not clear the syndrome")
    if lay.logical_qubit_count == 0:
        return False
    L = _logical_matrix(lay)
    anti = (L[:, :n].astype(np.int32) @ rz + L[:, n:].astype(np.int32) @ rx) & 1
    return bool(np.any(anti))


@dataclass(frozen=True)
class SignInference:
    sign: int
    gap: float
    weight_plus: float
    weight_minus: float


def infer_logical_sign(
    boundary_values: Sequence[int],
    graph: DecodingGraph,
    ring: Sequence[int],
    bulk_syndrome: Iterable[int] = (),
) -> SignInference:
    """Infer the product of freshly switched-on ring stabilizers by matching twice.

    ``ring`` lists the stabilizer ids whose readouts are ``boundary_values``
    (entries +1/-1).  Their individual values are random, only their product
    carries the logical value, so matching any two ring defects costs 0.  The
    syndrome is matched once against the reference "all +1" and once against
    "all +1 except the first ring stabilizer"; the lower total weight wins.
    Other flagged stabilizers are given in ``bulk_syndrome``.  An unmatched
    hypothesis has infinite weight.
    """
    values = [int(v) for v in boundary_values]
    ring = [int(r) for r in ring]
    if len(values) != len(ring):
        raise ValueError("one readout per ring stabilizer is required")
    if any(v not in (1, -1) for v in values):
        raise ValueError("readouts must be +1 or -1")
    ring_set = set(ring)
    bulk = sorted(set(int(b) for b in bulk_syndrome) - ring_set - graph.absorbed)
    to_ring = _distance_to_set(graph, ring, bulk)
    weights = {}
    for hyp in (1, -1):
        flips = sum(1 for v in values if v == -1) + (1 if hyp == -1 else 0)
        weights[hyp] = _ring_matching_weight(graph, bulk, to_ring, flips % 2 == 1)
    plus, minus = weights[1], weights[-1]
    sign = 1 if plus <= minus else -1
    gap = abs(minus - plus) if np.isfinite(min(plus, minus)) else float("nan")
    if np.isinf(plus) != np.isinf(minus):
        gap = float("inf")
    return SignInference(sign, gap, plus, minus)


def _distance_to_set(graph: DecodingGraph, ring, bulk) -> dict:
    out = {}
    for b in bulk:
        ds = [graph.dist[b, r] for r in ring if graph.dist[b, r] >= 0]
        out[b] = min(ds) if ds else None
    return out


def _ring_matching_weight(graph: DecodingGraph, bulk, to_ring, odd_ring: bool) -> float:
    """Minimum matching weight with the ring contracted to one zero-cost node."""
    m = len(bulk)
    token = m if odd_ring else None
    n_real = m + (1 if odd_ring else 0)
    if n_real == 0:
        return 0.0
    edges = []
    for i in range(m):
        for j in range(i + 1, m):
            cands = []
            d = graph.dist[bulk[i], bulk[j]]
            if d >= 0:
                cands.append(int(d))
            if to_ring[bulk[i]] is not None and to_ring[bulk[j]] is not None:
                cands.append(int(to_ring[bulk[i]] + to_ring[bulk[j]]))
            if cands:
                edges.append((i, j, min(cands)))
        if token is not None and to_ring[bulk[i]] is not None:
            edges.append((i, token, int(to_ring[bulk[i]])))
    bd = [graph.boundary_dist[b] if b < graph.n_nodes else -1 for b in bulk]
    virtual = [i for i in range(m) if bd[i] >= 0]
    nv = n_real + len(virtual)
    for k, i in enumerate(virtual):
        edges.append((i, n_real + k, int(bd[i])))
        for k2 in range(k + 1, len(virtual)):
            edges.append((n_real + k, n_real + k2, 0))
    if nv % 2 == 1 and not virtual:
        return float("inf")
    try:
        pairs = min_weight_perfect_matching(nv, edges)
    except ValueError:
        return float("inf")
    lookup = {}
    for a, b, w in edges:
        lookup[(a, b)] = lookup[(b, a)] = w
    return float(sum(lookup[(a, b)] for a, b in pairs))


def decode_report(graph: DecodingGraph, error: PauliOperator, decoder: str = "mwpm") -> dict:
    """JSON-ready record of one decode: syndrome, correction and verdict."""
    s = compute_syndrome(graph.layout, error)
    corr = decode(graph, s, decoder)
    return {
        "schema": "ftbench.decode/1",
        "geometry": graph.layout.spec.kind,
        "exclude_pentagons": graph.exclude_pentagons,
        "error": error.to_json(),
        "syndrome": sorted(s),
        "correction": corr.to_json(),
        "logical_failure": is_logical_failure(graph, error, corr),
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True)


__all__ = [
    "DecodingGraph",
    "DecodingError",
    "Correction",
    "Syndrome",
    "SignInference",
    "build_decoding_graph",
    "compute_syndrome",
    "decode",
    "decode_mwpm",
    "decode_greedy",
    "is_logical_failure",
    "infer_logical_sign",
    "decode_report",
    "bits_to_pauli",
    "pauli_to_bits",
]
