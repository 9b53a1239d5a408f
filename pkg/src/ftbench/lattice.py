"""Code layouts: patches, tori, hole lattices and dislocation lattices.

Qubits sit on the vertices of a square lattice and every face carries one
stabilizer.  Layouts are assembled in the uniform gauge, where a 4-qubit
plaquette reads ``X_ne X_sw Z_nw Z_se``; the original gauge (all-``Z`` light
plaquettes, all-``X`` dark plaquettes) is reached by an explicit letter swap
on the qubits whose row+column parity is odd.

Coordinates are stored doubled, ``(2*row, 2*col)``, so that the extra row of
qubits inserted by a dislocation pair can live on odd ``y``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .pauli import (
    GF2Basis,
    to_bits,
    PauliOperator,
    StabilizerGroup,
    gf2_nullspace,
    gf2_rank_matrix,
    gf2_row_reduce,
    symplectic_form,
    symplectic_matrix,
)

UNIFORM = {"nw": "Z", "ne": "X", "sw": "X", "se": "Z"}
SWAP = {"X": "Z", "Z": "X", "Y": "Y"}
KINDS = ("patch_square", "patch_rotated", "torus", "dislocation_torus", "dislocation_patch", "hole_lattice")
SIDES = ("north", "east", "south", "west")
BOUNDARY_LETTER = {"electric": "X", "magnetic": "Z"}


class LayoutError(ValueError):
    pass


@dataclass
class GeometrySpec:
    """Parameters for :func:`build_layout`.

    ``L`` is the linear size: qubits per side for ``patch_square`` and
    ``torus``, the code distance for ``patch_rotated``, the dislocation
    separation for dislocation lattices and the hole-centre spacing for
    ``hole_lattice`` (with ``l`` the hole side).  ``boundaries`` maps a side
    to a list of ``[type, n_edges]`` runs that must tile the L-1 edges of that
    side.  ``dislocations`` holds ``[row, col_start, col_end]`` triples, one
    per pair; ``holes`` holds ``[row, col, size]`` blocks of removed faces.
    """

    kind: str
    L: int
    l: int = 0
    gauge: str = "uniform"
    boundaries: dict = field(default_factory=dict)
    dislocations: list = field(default_factory=list)
    n_pairs: int = 2
    holes: list = field(default_factory=list)
    hole_boundary: str = "magnetic"
    height: int | None = None
    width: int | None = None
    margin: int | None = None

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "GeometrySpec":
        return cls(**obj)


@dataclass
class CodeLayout:
    spec: GeometrySpec
    coords: list
    stabilizers: list
    stab_info: list
    gauge: str
    period: tuple | None = None
    gauge_swap_qubits: tuple = ()
    dislocations: list = field(default_factory=list)
    holes: list = field(default_factory=list)

    @property
    def n_qubits(self) -> int:
        return len(self.coords)

    @property
    def n_stabilizers(self) -> int:
        return len(self.stabilizers)

    @cached_property
    def group(self) -> StabilizerGroup:
        return StabilizerGroup(tuple(self.stabilizers), self.n_qubits)

    @cached_property
    def stab_matrix(self) -> np.ndarray:
        return symplectic_matrix(self.stabilizers, self.n_qubits)

    @cached_property
    def rank(self) -> int:
        return gf2_rank_matrix(self.stab_matrix)

    @property
    def logical_qubit_count(self) -> int:
        return self.n_qubits - self.rank

    @cached_property
    def logicals(self) -> list:
        return find_logicals(self)

    @property
    def five_qubit_stabilizers(self) -> list[int]:
        return [i for i, info in enumerate(self.stab_info) if info["kind"] == "pentagon"]

    def with_gauge(self, gauge: str) -> "CodeLayout":
        """Same code written in the other gauge (a per-qubit X<->Z swap)."""
        if gauge == self.gauge:
            return self
        if gauge not in ("original", "uniform"):
            raise LayoutError(f"unknown gauge {gauge!r}")
        swap = set(self.gauge_swap_qubits)
        stabs = [_swap_letters(s, swap) for s in self.stabilizers]
        out = CodeLayout(
            spec=GeometrySpec(**{**asdict(self.spec), "gauge": gauge}),
            coords=list(self.coords),
            stabilizers=stabs,
            stab_info=[dict(i) for i in self.stab_info],
            gauge=gauge,
            period=self.period,
            gauge_swap_qubits=self.gauge_swap_qubits,
            dislocations=[dict(d) for d in self.dislocations],
            holes=[dict(h) for h in self.holes],
        )
        if "logicals" in self.__dict__:
            out.__dict__["logicals"] = [
                LogicalPair(_swap_letters(p.x, swap), _swap_letters(p.z, swap), p.x_label, p.z_label)
                for p in self.logicals
            ]
        return out

    def to_json(self) -> dict:
        return {
            "schema": "ftbench.layout/1",
            "spec": self.spec.to_json(),
            "gauge": self.gauge,
            "period": list(self.period) if self.period else None,
            "coords": [list(c) for c in self.coords],
            "stabilizers": [s.to_json() for s in self.stabilizers],
            "stab_info": self.stab_info,
            "gauge_swap_qubits": list(self.gauge_swap_qubits),
            "dislocations": self.dislocations,
            "holes": self.holes,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj: dict) -> "CodeLayout":
        return cls(
            spec=GeometrySpec.from_json(obj["spec"]),
            coords=[tuple(c) for c in obj["coords"]],
            stabilizers=[PauliOperator.from_json(s) for s in obj["stabilizers"]],
            stab_info=obj["stab_info"],
            gauge=obj["gauge"],
            period=tuple(obj["period"]) if obj.get("period") else None,
            gauge_swap_qubits=tuple(obj.get("gauge_swap_qubits", ())),
            dislocations=obj.get("dislocations", []),
            holes=obj.get("holes", []),
        )


def _swap_letters(op: PauliOperator, qubits: set) -> PauliOperator:
    return PauliOperator({q: (SWAP[c] if q in qubits else c) for q, c in op.support.items()}, op.sign)


# --------------------------------------------------------------------------
# construction


def pentagon_letters(corners: dict) -> dict:
    """Letters of the 5-qubit stabilizer at a dislocation core.

    The four corners keep their uniform-gauge letters and the qubit at the end
    of the inserted row (``mid``) carries ``Y``.  This is the only assignment
    that commutes with every neighbouring plaquette.
    """
    letters = {role: UNIFORM[role] for role in ("nw", "ne", "sw", "se")}
    letters["mid"] = "Y"
    return {corners[role]: letter for role, letter in letters.items()}


class _Builder:
    """Vertex-lattice face model in the uniform gauge."""

    def __init__(self, H: int, W: int, periodic: bool):
        self.H, self.W, self.periodic = H, W, periodic
        self.faces = {}  # (r, c) -> True for active faces
        self.extra = {}  # (y0, c) -> coord of inserted-row qubit
        self.stabs = []  # list of (dict qubit_coord -> letter, info)

    def vertex(self, r, c):
        if self.periodic:
            r, c = r % self.H, c % self.W
        return (2 * r, 2 * c)

    def parity(self, coord):
        return ((coord[0] // 2) + (coord[1] // 2)) % 2

    def uniform_letter(self, coord, original):
        return original if self.parity(coord) == 0 else SWAP[original]

    def face_corners(self, r, c):
        return {
            "nw": self.vertex(r, c),
            "ne": self.vertex(r, c + 1),
            "sw": self.vertex(r + 1, c),
            "se": self.vertex(r + 1, c + 1),
        }


def _face_color(r, c):
    # original gauge: light (Z) on even, dark (X) on odd
    return "Z" if (r + c) % 2 == 0 else "X"


def _assemble(b: _Builder, spec: GeometrySpec, dislocation_pairs=(), hole_meta=()) -> CodeLayout:
    split = {}
    pent = {}
    labels = []
    for k, (y0, a, e) in enumerate(dislocation_pairs):
        if e - a < 1:
            raise LayoutError("dislocation pair needs positive separation")
        for c in range(a, e):
            key = (y0 % b.H, c % b.W) if b.periodic else (y0, c)
            if key in split or key in pent:
                raise LayoutError("overlapping dislocations")
            split[key] = (y0, c)
        for side, (fc, col) in (("L", (a - 1, a)), ("R", (e, e))):
            key = (y0 % b.H, fc % b.W) if b.periodic else (y0, fc)
            if key in split or key in pent:
                raise LayoutError("overlapping dislocations")
            pent[key] = (y0, col, side, 2 * k + (0 if side == "L" else 1))
        for c in range(a, e + 1):
            b.extra[(y0, c)] = (2 * (y0 % b.H if b.periodic else y0) + 1, 2 * (c % b.W if b.periodic else c))

    for (r, c) in sorted(b.faces):
        if (r, c) in split:
            y0, cc = split[(r, c)]
            corners = b.face_corners(r, c)
            e0, e1 = b.extra[(y0, cc)], b.extra[(y0, cc + 1)]
            up = {"nw": corners["nw"], "ne": corners["ne"], "sw": e0, "se": e1}
            lo = {"nw": e0, "ne": e1, "sw": corners["sw"], "se": corners["se"]}
            for part in (up, lo):
                b.stabs.append(({part[k]: UNIFORM[k] for k in UNIFORM}, {"kind": "plaquette", "color": None, "face": [r, c], "corners": part}))
        elif (r, c) in pent:
            y0, col, side, label = pent[(r, c)]
            corners = b.face_corners(r, c)
            corners["mid"] = b.extra[(y0, col)]
            b.stabs.append((pentagon_letters(corners), {"kind": "pentagon", "color": None, "face": [r, c], "corners": corners, "majorana": label + 1}))
            labels.append((label + 1, len(b.stabs) - 1, corners["mid"]))
        else:
            corners = b.face_corners(r, c)
            b.stabs.append(({corners[k]: UNIFORM[k] for k in UNIFORM}, {"kind": "plaquette", "color": _face_color(r, c), "face": [r, c], "corners": corners}))

    _add_boundaries(b)
    _fix_dangling(b)

    coords = sorted({q for s, _ in b.stabs for q in s})
    index = {q: i for i, q in enumerate(coords)}
    stabs, infos = [], []
    for letters, info in b.stabs:
        stabs.append(PauliOperator({index[q]: l for q, l in letters.items()}))
        info = dict(info)
        if "corners" in info:
            info["corners"] = {k: index[v] for k, v in info["corners"].items()}
        infos.append(info)
    swap = tuple(i for i, q in enumerate(coords) if b.parity(q) == 1)
    disl = [
        {"label": f"gamma{lab}", "index": lab, "stabilizer": si, "position": list(pos)}
        for lab, si, pos in sorted(labels)
    ]
    layout = CodeLayout(
        spec=spec,
        coords=coords,
        stabilizers=stabs,
        stab_info=infos,
        gauge="uniform",
        period=(2 * b.H, 2 * b.W) if b.periodic else None,
        gauge_swap_qubits=swap,
        dislocations=disl,
        holes=list(hole_meta),
    )
    layout.group.check_commuting()
    return layout.with_gauge(spec.gauge)


def _add_boundaries(b: _Builder):
    """Two-qubit stabilizers on edges with an active face on one side only."""
    if b.periodic or not getattr(b, "edge_type", None):
        return
    active = b.faces
    for r in range(-1, b.H):
        for c in range(-1, b.W):
            if (r, c) in active:
                continue
            # virtual face (r, c): each of its four edges borders a real face?
            edges = {
                "n": ((r, c), (r, c + 1), (r - 1, c)),
                "s": ((r + 1, c), (r + 1, c + 1), (r + 1, c)),
                "w": ((r, c), (r + 1, c), (r, c - 1)),
                "e": ((r, c + 1), (r + 1, c + 1), (r, c + 1)),
            }
            for side, (v1, v2, nbr) in edges.items():
                if nbr not in active:
                    continue
                kind = b.edge_type((r, c), side)
                if kind is None:
                    continue
                original = BOUNDARY_LETTER[kind]
                if _face_color(r, c) != original:
                    continue
                q1, q2 = b.vertex(*v1), b.vertex(*v2)
                letters = {q1: b.uniform_letter(q1, original), q2: b.uniform_letter(q2, original)}
                b.stabs.append((letters, {"kind": "boundary", "color": original, "face": [r, c], "boundary": kind}))


def _fix_dangling(b: _Builder):
    """Corner treatment: a qubit covered by a single stabilizer gets a
    one-qubit stabilizer of the other letter, and drops out of that stabilizer."""
    cover = {}
    for i, (letters, _) in enumerate(b.stabs):
        for q in letters:
            cover.setdefault(q, []).append(i)
    for q, idxs in sorted(cover.items()):
        if len(idxs) != 1:
            continue
        letters, info = b.stabs[idxs[0]]
        own = letters[q]
        del letters[q]
        info["truncated"] = info.get("truncated", []) + [list(q)]
        other = SWAP[own] if own != "Y" else "Z"
        b.stabs.append(({q: other}, {"kind": "corner", "color": None, "face": None}))


def _side_runs(spec: GeometrySpec, L: int, defaults: dict) -> dict:
    runs = {}
    for side in SIDES:
        raw = spec.boundaries.get(side, defaults[side])
        if isinstance(raw, str):
            raw = [[raw, L - 1]]
        total = 0
        seq = []
        for kind, n in raw:
            if kind not in BOUNDARY_LETTER:
                raise LayoutError(f"unknown boundary type {kind!r}")
            seq += [kind] * int(n)
            total += int(n)
        if total != L - 1:
            raise LayoutError(f"boundary runs on {side} cover {total} edges, expected {L - 1}")
        runs[side] = seq
    return runs


def _build_square_like(spec: GeometrySpec, H: int, W: int, runs: dict, dislocation_pairs=()) -> CodeLayout:
    b = _Builder(H, W, periodic=False)
    b.faces = {(r, c): True for r in range(H - 1) for c in range(W - 1)}

    def edge_type(vface, side):
        r, c = vface
        if r == -1 and side == "s":
            return runs["north"][c]
        if r == H - 1 and side == "n":
            return runs["south"][c]
        if c == -1 and side == "e":
            return runs["west"][r]
        if c == W - 1 and side == "w":
            return runs["east"][r]
        return None

    b.edge_type = edge_type
    return _assemble(b, spec, dislocation_pairs)


def _build_patch_square(spec: GeometrySpec) -> CodeLayout:
    L = spec.L
    if L < 2:
        raise LayoutError("patch needs L >= 2")
    defaults = {"north": "electric", "south": "electric", "east": "magnetic", "west": "magnetic"}
    runs = _side_runs(spec, L, defaults)
    return _build_square_like(spec, L, L, runs)


def _build_torus(spec: GeometrySpec) -> CodeLayout:
    H = spec.height or spec.L
    W = spec.width or spec.L
    if spec.gauge == "original" and (H % 2 or W % 2):
        raise LayoutError("original-gauge torus needs even side lengths")
    b = _Builder(H, W, periodic=True)
    b.faces = {(r, c): True for r in range(H) for c in range(W)}
    return _assemble(b, spec)


def default_dislocation_pairs(L: int, n_pairs: int, row0: int = 1, col0: int = 1) -> list:
    return [[row0 + i * L, col0, col0 + L] for i in range(n_pairs)]


def _build_dislocation_torus(spec: GeometrySpec) -> CodeLayout:
    L = spec.L
    pairs = spec.dislocations or default_dislocation_pairs(L, spec.n_pairs)
    if not pairs:
        raise LayoutError("dislocation lattice needs at least one pair")
    H = spec.height or max(2, len(pairs)) * L
    W = spec.width or 2 * L
    b = _Builder(H, W, periodic=True)
    b.faces = {(r, c): True for r in range(H) for c in range(W)}
    return _assemble(b, spec, [tuple(p) for p in pairs])


def _build_dislocation_patch(spec: GeometrySpec) -> CodeLayout:
    L = spec.L
    m = spec.margin if spec.margin is not None else L
    pairs = spec.dislocations or default_dislocation_pairs(L, spec.n_pairs, row0=m, col0=m)
    H = spec.height or (m + (len(pairs) - 1) * L + m + 1)
    W = spec.width or (m + L + m + 1)
    for y0, a, e in pairs:
        if not (0 < y0 < H - 2 and 1 < a and e < W - 2):
            raise LayoutError("dislocation pair touches the patch boundary")
    kind = spec.boundaries.get("all", "magnetic") if isinstance(spec.boundaries, dict) else "magnetic"
    runs = {"north": [kind] * (W - 1), "south": [kind] * (W - 1), "east": [kind] * (H - 1), "west": [kind] * (H - 1)}
    return _build_square_like(spec, H, W, runs, [tuple(p) for p in pairs])


def _build_hole_lattice(spec: GeometrySpec) -> CodeLayout:
    l, L = spec.l, spec.L
    if l < 1 or L <= l + 1:
        raise LayoutError("hole lattice needs 1 <= l < L - 1")
    holes = spec.holes or _default_holes(l, L, BOUNDARY_LETTER[spec.hole_boundary])
    H = spec.height or L
    W = spec.width or L * len(holes)
    b = _Builder(H, W, periodic=True)
    removed = set()
    for r0, c0, size in holes:
        block = {((r0 + i) % H, (c0 + j) % W) for i in range(size) for j in range(size)}
        if block & removed:
            raise LayoutError("overlapping holes")
        removed |= block
    if H % 2 or W % 2:
        raise LayoutError("hole lattice needs even torus sides")
    b.faces = {(r, c): True for r in range(H) for c in range(W) if (r, c) not in removed}
    letter = BOUNDARY_LETTER[spec.hole_boundary]
    for r0, c0, size in holes:
        inner = {b.vertex(r0 + i, c0 + j) for i in range(1, size) for j in range(1, size)}
        for i in range(size):
            for j in range(size):
                r, c = r0 + i, c0 + j
                if _face_color(r % H, c % W) != letter:
                    continue
                kept = [q for q in b.face_corners(r, c).values() if q not in inner]
                if not kept:
                    continue
                b.stabs.append(({q: b.uniform_letter(q, letter) for q in kept}, {"kind": "boundary", "color": letter, "face": [r % H, c % W], "boundary": spec.hole_boundary}))
    meta = [{"row": r0, "col": c0, "size": size, "boundary": spec.hole_boundary} for r0, c0, size in holes]
    return _assemble(b, spec, (), meta)


def _default_holes(l: int, L: int, letter: str) -> list:
    """Two holes one spacing apart; odd blocks are shifted so their corner
    faces are dropped rather than truncated."""
    r0 = (L - l) // 2
    c0 = r0
    if l % 2 and _face_color(r0, c0) == letter:
        c0 += 1
    return [[r0, c0 + i * L, l] for i in range(2)]


def _build_patch_rotated(spec: GeometrySpec) -> CodeLayout:
    """Planar code with qubits on lattice edges, i.e. the patch rotated by 45
    degrees relative to ``patch_square``; distance ``L`` with L^2+(L-1)^2 qubits.

    Built directly in the original gauge: X on vertex stars, Z on faces.
    """
    d = spec.L
    n = 2 * d - 1
    coords = [(r, c) for r in range(n) for c in range(n) if (r + c) % 2 == 0]
    index = {q: i for i, q in enumerate(coords)}
    stabs, infos = [], []
    for r in range(n):
        for c in range(n):
            if (r + c) % 2 == 0:
                continue
            letter = "X" if r % 2 == 0 else "Z"
            qs = [(r + dr, c + dc) for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0))]
            qs = [q for q in qs if q in index]
            stabs.append(PauliOperator({index[q]: letter for q in qs}))
            infos.append({"kind": "plaquette" if len(qs) == 4 else "boundary", "color": letter, "face": [r, c]})
    # uniform-style relabel: swap letters on vertical-edge qubits
    swap = tuple(i for i, (r, c) in enumerate(coords) if r % 2 == 1)
    layout = CodeLayout(spec=spec, coords=coords, stabilizers=stabs, stab_info=infos, gauge="original", gauge_swap_qubits=swap)
    layout.group.check_commuting()
    return layout.with_gauge(spec.gauge)


_BUILDERS = {
    "patch_square": _build_patch_square,
    "patch_rotated": _build_patch_rotated,
    "torus": _build_torus,
    "dislocation_torus": _build_dislocation_torus,
    "dislocation_patch": _build_dislocation_patch,
    "hole_lattice": _build_hole_lattice,
}


def build_layout(spec: GeometrySpec) -> CodeLayout:
    if spec.kind not in _BUILDERS:
        raise LayoutError(f"unknown geometry kind {spec.kind!r}")
    if spec.gauge not in ("original", "uniform"):
        raise LayoutError(f"unknown gauge {spec.gauge!r}")
    if spec.kind.startswith("dislocation") and spec.dislocations and len(spec.dislocations) * 2 % 2:
        raise LayoutError("dislocations must come in pairs")
    return _BUILDERS[spec.kind](spec)


def figure1_spec() -> GeometrySpec:
    """6x6 square, magnetic boundary everywhere, single-X corner stabilizers."""
    return GeometrySpec("patch_square", 6, gauge="original", boundaries={s: "magnetic" for s in SIDES})


def figure2_spec() -> GeometrySpec:
    """6x6 square, electric north/south and magnetic east/west: one logical."""
    return GeometrySpec("patch_square", 6, gauge="original")


# --------------------------------------------------------------------------
# logical operators


@dataclass
class LogicalPair:
    x: PauliOperator
    z: PauliOperator
    x_label: str = ""
    z_label: str = ""


def _normalizer_basis(layout: CodeLayout) -> np.ndarray:
    """Rows spanning the operators that commute with every stabilizer."""
    S = layout.stab_matrix
    n = layout.n_qubits
    # commute condition: S @ Lambda @ v = 0 with Lambda swapping x and z halves
    swapped = np.concatenate([S[:, n:], S[:, :n]], axis=1)
    return gf2_nullspace(swapped)


def _sym(a: np.ndarray, b: np.ndarray) -> int:
    n = a.shape[0] // 2
    return int((a[:n] @ b[n:] + a[n:] @ b[:n]) % 2)


def _independent_mod(vecs, base: np.ndarray):
    """Greedily keep vectors independent of ``base`` and of each other."""
    span = GF2Basis()
    for row in base:
        span.add(to_bits(row))
    return [v for v in vecs if span.add(to_bits(v))]


def symplectic_pairs(pool: list, seed_pairs: Sequence = ()) -> list:
    """Symplectic Gram-Schmidt: returns ``(x, z)`` vector pairs."""
    pairs = [(np.array(a, dtype=np.uint8), np.array(b, dtype=np.uint8)) for a, b in seed_pairs]
    pool = [np.array(v, dtype=np.uint8) for v in pool]
    for a, b in pairs:
        pool = [(u + _sym(u, b) * a + _sym(u, a) * b) % 2 for u in pool]
    while pool:
        v = pool.pop(0)
        j = next((i for i, w in enumerate(pool) if _sym(v, w)), None)
        if j is None:
            continue
        w = pool.pop(j)
        pool = [(u + _sym(u, w) * v + _sym(u, v) * w) % 2 for u in pool]
        pairs.append((v, w))
    return pairs


def find_logicals(layout: CodeLayout, minimize: bool | None = None) -> list:
    """Anticommuting (X, Z) logical pairs, one per logical qubit.

    Pairs are mutually commuting.  On dislocation lattices the first pairs are
    Majorana loops (Z = loop around gamma1 gamma2, X = loop around gamma1
    gamma3, and so on); any remaining pairs come from the surface topology.
    With ``minimize`` each representative is replaced by a minimum-weight
    element of its class.
    """
    k = layout.logical_qubit_count
    if k == 0:
        raise LayoutError("layout has no logical qubits")
    n = layout.n_qubits
    S = layout.stab_matrix
    generic = [v for pair in _generic_pairs(layout) for v in pair]
    seeds = []
    labels = []
    if len(layout.dislocations) >= 4:
        for (xa, xb), (za, zb) in majorana_qubit_labels(len(layout.dislocations)):
            xv = majorana_loop(layout, xa, xb).symplectic(n)
            zv = majorana_loop(layout, za, zb).symplectic(n)
            seeds.append((xv, zv))
            labels.append((f"gamma{xa}gamma{xb}", f"gamma{za}gamma{zb}"))
        seeds = _orthonormalize_seeds(seeds)
    base = np.vstack([S] + [np.array(p) for p in seeds]) if seeds else S
    pool = _independent_mod(generic, base)
    pairs = symplectic_pairs(pool, seeds)
    if len(pairs) != k:
        raise LayoutError(f"found {len(pairs)} logical pairs, expected {k}")
    if minimize is None:
        minimize = n <= 200
    out = []
    for i, (xv, zv) in enumerate(pairs):
        xl, zl = labels[i] if i < len(labels) else ("", "")
        x = PauliOperator.from_symplectic(xv)
        z = PauliOperator.from_symplectic(zv)
        out.append(LogicalPair(x, z, xl, zl))
    if minimize:
        all_vecs = [v for p in pairs for v in p]
        lines = _straight_lines(layout) if layout.period is None else []
        reduced = []
        for p in out:
            nx = _prefer_line(layout, min_weight_in_class(layout, p.x, all_vecs), p.x, all_vecs, lines)
            nz = _prefer_line(layout, min_weight_in_class(layout, p.z, all_vecs), p.z, all_vecs, lines)
            reduced.append(LogicalPair(nx, nz, p.x_label, p.z_label))
        out = reduced
    return out


def _straight_lines(layout: CodeLayout) -> list:
    groups = {}
    for q, (y, x) in enumerate(layout.coords):
        groups.setdefault(("row", y), []).append(q)
        groups.setdefault(("col", x), []).append(q)
    return [groups[k] for k in sorted(groups)]


def _prefer_line(layout, best, op, all_vecs, lines):
    """Swap in a single-row or single-column representative of equal weight."""
    for region in lines:
        if len(region) < best.weight:
            continue
        cand = min_weight_in_class(layout, op, all_vecs, region=region)
        if set(cand.support) <= set(region) and cand.weight == best.weight:
            return cand
    return best


def _generic_pairs(layout: CodeLayout) -> list:
    """Any symplectic basis of the logical operators (cached on the layout)."""
    cached = layout.__dict__.get("_generic_pairs")
    if cached is None:
        pool = _independent_mod(list(_normalizer_basis(layout)), layout.stab_matrix)
        cached = symplectic_pairs(pool)
        layout.__dict__["_generic_pairs"] = cached
    return cached


def _orthonormalize_seeds(seeds):
    fixed = []
    for xv, zv in seeds:
        for a, b in fixed:
            xv = (xv + _sym(xv, b) * a + _sym(xv, a) * b) % 2
            zv = (zv + _sym(zv, b) * a + _sym(zv, a) * b) % 2
        fixed.append((xv, zv))
    return fixed


def majorana_qubit_labels(n_dislocations: int) -> list:
    """Majorana label pairs ``((X loop), (Z loop))`` for each encoded qubit.

    Qubit 1 uses Z = gamma1 gamma2, X = gamma1 gamma3; qubit i > 1 uses
    Z = gamma(2i+1) gamma(2i+2) and X = gamma1 gamma(2i+1) before the
    symplectic clean-up in :func:`find_logicals` removes cross terms.
    """
    k = n_dislocations // 2
    out = []
    for i in range(1, k):
        if i == 1:
            out.append(((1, 3), (1, 2)))
        else:
            out.append(((1, 2 * i + 1), (2 * i + 1, 2 * i + 2)))
    return out


def _torus_delta(a: float, b: float, period: float | None) -> float:
    d = abs(a - b)
    if period:
        d = min(d, period - d)
    return d


def majorana_loop(layout: CodeLayout, a: int, b: int) -> PauliOperator:
    """Minimum-weight representative of the loop enclosing dislocations a, b.

    The search is restricted to a box around the two dislocation cores that
    excludes a neighbourhood of every other dislocation, so the only
    nontrivial class available is the one enclosing exactly ``a`` and ``b``.
    The box grows until such an operator fits.
    """
    pos = {d["index"]: d["position"] for d in layout.dislocations}
    if a not in pos or b not in pos or a == b:
        raise LayoutError("unknown dislocation label")
    n = layout.n_qubits
    detectors = [v for pair in _generic_pairs(layout) for v in pair]
    for margin in range(1, 2 + max(pos[c][i] for c in pos for i in (0, 1)) // 2):
        region = _loop_region(layout, pos, a, b, margin)
        vec = _restricted_nontrivial(layout, region)
        if vec is not None:
            op = PauliOperator.from_symplectic(vec)
            return min_weight_in_class(layout, op, detectors, region=region)
    raise LayoutError(f"no loop around gamma{a} gamma{b} found")


def _unwrap(v, ref, per):
    if not per:
        return v
    while v - ref > per / 2:
        v -= per
    while ref - v > per / 2:
        v += per
    return v


def _loop_region(layout, pos, a, b, margin):
    period = layout.period or (None, None)
    ya, xa = pos[a]
    yb, xb = pos[b]
    pad = 2 * margin
    yb_u, xb_u = _unwrap(yb, ya, period[0]), _unwrap(xb, xa, period[1])
    y_lo, y_hi = min(ya, yb_u) - pad, max(ya, yb_u) + pad
    x_lo, x_hi = min(xa, xb_u) - pad, max(xa, xb_u) + pad
    others = [p for lab, p in pos.items() if lab not in (a, b)]
    region = []
    for q, (y, x) in enumerate(layout.coords):
        yy, xx = _unwrap(y, ya, period[0]), _unwrap(x, xa, period[1])
        if not (y_lo <= yy <= y_hi and x_lo <= xx <= x_hi):
            continue
        if any(_torus_delta(y, oy, period[0]) <= 2 and _torus_delta(x, ox, period[1]) <= 2 for oy, ox in others):
            continue
        region.append(q)
    return region


def _restricted_nontrivial(layout: CodeLayout, region: list):
    """A logical (non-stabilizer) vector supported on ``region``, or None."""
    n = layout.n_qubits
    cols = region + [n + q for q in region]
    S = layout.stab_matrix
    touched = np.flatnonzero(S[:, cols].any(axis=1))
    sub = S[touched][:, cols]
    m = len(region)
    swapped = np.concatenate([sub[:, m:], sub[:, :m]], axis=1)
    base_rank = layout.rank
    for v in gf2_nullspace(swapped):
        full = np.zeros(2 * n, dtype=np.uint8)
        full[cols] = v
        if gf2_rank_matrix(np.vstack([S, full])) > base_rank:
            return full
    return None


# --------------------------------------------------------------------------
# minimum-weight searches (mixed-integer programme)


def _milp_min_weight(layout: CodeLayout, constraints: np.ndarray, targets: np.ndarray, region=None, weight_cap=None):
    """Minimum-weight Pauli P with <c_i, P> = t_i (mod 2) for every row c_i.

    Returns a PauliOperator or None when infeasible (or above ``weight_cap``).
    Variables: x_q, z_q, w_q binaries plus one integer slack per constraint.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp

    n = layout.n_qubits
    qubits = list(range(n)) if region is None else sorted(region)
    m = len(qubits)
    C = np.asarray(constraints, dtype=np.int64)
    rows = C.shape[0]
    # <c, P> = c_x . z_P + c_z . x_P
    cx = C[:, qubits]
    cz = C[:, [n + q for q in qubits]]
    keep = np.flatnonzero(cx.any(axis=1) | cz.any(axis=1))
    if np.any(np.asarray(targets)[np.setdiff1d(np.arange(rows), keep)]):
        return None
    cx, cz, t = cx[keep], cz[keep], np.asarray(targets)[keep]
    r = len(keep)
    nv = 3 * m + r
    A_eq = np.zeros((r, nv))
    A_eq[:, :m] = cz  # x variables
    A_eq[:, m:2 * m] = cx  # z variables
    A_eq[np.arange(r), 3 * m + np.arange(r)] = -2
    cons = [LinearConstraint(A_eq, t, t)]
    A_w = np.zeros((2 * m, nv))
    for i in range(m):
        A_w[i, i] = 1
        A_w[i, 2 * m + i] = -1
        A_w[m + i, m + i] = 1
        A_w[m + i, 2 * m + i] = -1
    cons.append(LinearConstraint(A_w, -np.inf, 0))
    if weight_cap is not None:
        cap = np.zeros((1, nv))
        cap[0, 2 * m:3 * m] = 1
        cons.append(LinearConstraint(cap, -np.inf, weight_cap))
    cost = np.zeros(nv)
    cost[2 * m:3 * m] = 1
    upper = np.concatenate([np.ones(3 * m), np.full(r, np.abs(C[keep]).sum(axis=1) // 2 + 1)])
    res = milp(cost, constraints=cons, integrality=np.ones(nv), bounds=Bounds(np.zeros(nv), upper))
    if res.status != 0 or res.x is None:
        return None
    x = np.round(res.x[:m]).astype(np.uint8)
    z = np.round(res.x[m:2 * m]).astype(np.uint8)
    vec = np.zeros(2 * n, dtype=np.uint8)
    vec[qubits] = x
    vec[[n + q for q in qubits]] = z
    return PauliOperator.from_symplectic(vec)


def min_weight_in_class(layout: CodeLayout, op: PauliOperator, logical_vectors: list, region=None) -> PauliOperator:
    """Lightest operator equal to ``op`` up to stabilizers (sign dropped)."""
    n = layout.n_qubits
    v = op.symplectic(n)
    L = np.array(logical_vectors, dtype=np.uint8).reshape(-1, 2 * n)
    targets = np.concatenate([np.zeros(layout.n_stabilizers, dtype=np.int64), symplectic_form(L, v[None, :])[:, 0]])
    cons = np.vstack([layout.stab_matrix, L])
    best = _milp_min_weight(layout, cons, targets, region=region)
    return best if best is not None else op


class DistanceResult(int):
    """An ``int`` distance that also records whether the weight cap was hit."""

    exceeded: bool = False
    witness: PauliOperator | None = None

    def __new__(cls, value, exceeded=False, witness=None):
        obj = super().__new__(cls, value)
        obj.exceeded = exceeded
        obj.witness = witness
        return obj

    def __repr__(self):
        return f"> {int(self)}" if self.exceeded else str(int(self))


def code_distance(layout: CodeLayout, weight_cap: int = 12, method: str = "milp") -> DistanceResult:
    """Minimum weight of a logical operator that is not a stabilizer.

    ``method="milp"`` is exact: CSS layouts (in either gauge) use a
    breadth-first search over checks paired with logical parities, other
    layouts a single integer programme (commute with every stabilizer,
    anticommute with at least one logical basis element).
    ``method="search"`` is an exhaustive iterative-deepening search over
    supports, feasible for layouts up to a few dozen qubits.  A result above
    ``weight_cap`` is returned as ``DistanceResult(weight_cap, exceeded=True)``.
    """
    if layout.logical_qubit_count == 0:
        raise LayoutError("layout has no logical qubits")
    if method == "search":
        return _distance_search(layout, weight_cap)
    if method != "milp":
        raise ValueError(f"unknown method {method!r}")
    css = _css_form(layout)
    if css is not None:
        found = []
        for letter in ("X", "Z"):
            op = _graph_distance(css, letter)
            if op is _NOT_GRAPHLIKE:
                op = _milp_distance(css, weight_cap, only=letter)
            elif op is not None and op.weight > weight_cap:
                op = None
            found.append(op)
        found = [op for op in found if op is not None]
        if not found:
            return DistanceResult(weight_cap, exceeded=True)
        best = min(found, key=lambda op: op.weight)
        if css is not layout:
            best = _swap_letters(best, set(layout.gauge_swap_qubits))
        return DistanceResult(best.weight, witness=best)
    best = _milp_distance(layout, weight_cap)
    if best is None:
        return DistanceResult(weight_cap, exceeded=True)
    return DistanceResult(best.weight, witness=best)


def _is_css(layout: CodeLayout) -> bool:
    return all(len(set(s.support.values())) <= 1 and "Y" not in s.support.values() for s in layout.stabilizers)


def _css_form(layout: CodeLayout):
    """The layout (or its other gauge) if every stabilizer is all-X or all-Z."""
    if _is_css(layout):
        return layout
    if layout.gauge_swap_qubits:
        other = layout.with_gauge("original" if layout.gauge == "uniform" else "uniform")
        if _is_css(other):
            return other
    return None


_NOT_GRAPHLIKE = object()


def _graph_distance(layout: CodeLayout, letter: str):
    """Shortest nontrivial cycle of single-letter errors on a CSS layout.

    Checks of the opposite letter are nodes (plus one node for every open
    boundary), each qubit is an edge between the one or two checks it flips.
    A breadth-first search on the cover graph whose second coordinate is the
    vector of commutation parities with the logical basis finds the lightest
    closed walk with a nonzero parity vector, which is exact.  Returns
    ``_NOT_GRAPHLIKE`` when some qubit flips more than two checks.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import shortest_path

    n = layout.n_qubits
    other = "Z" if letter == "X" else "X"
    checks = [i for i, st in enumerate(layout.stabilizers) if other in st.support.values()]
    index = {c: i for i, c in enumerate(checks)}
    touch = [[] for _ in range(n)]
    for c in checks:
        for q in layout.stabilizers[c].support:
            touch[q].append(index[c])
    if any(len(t) > 2 for t in touch):
        return _NOT_GRAPHLIKE
    boundary = len(checks)
    logical = np.array([v for pair in _generic_pairs(layout) for v in pair], dtype=np.int64)
    # parity of the single-qubit error with each logical basis element
    col = logical[:, n:] if letter == "X" else logical[:, :n]
    _, piv = gf2_row_reduce(col.T)
    col = col[sorted(set(piv))] if piv else col[:0]
    dim = col.shape[0]
    if dim == 0:
        return None
    labels = [int("".join(str(int(b)) for b in col[:, q]), 2) for q in range(n)]
    size = 1 << dim
    n_nodes = boundary + 1
    src, dst, qubit_of = [], [], {}
    for q in range(n):
        ends = touch[q] + [boundary] * (2 - len(touch[q]))
        a, b = ends
        for lam in range(size):
            u, v = a * size + lam, b * size + (lam ^ labels[q])
            src += [u, v]
            dst += [v, u]
            qubit_of.setdefault((u, v), q)
            qubit_of.setdefault((v, u), q)
    g = coo_matrix((np.ones(len(src)), (src, dst)), shape=(n_nodes * size, n_nodes * size)).tocsr()
    starts = np.arange(n_nodes) * size
    dist, pred = shortest_path(g, unweighted=True, indices=starts, return_predecessors=True)
    best, arg = np.inf, None
    for i in range(n_nodes):
        row = dist[i, i * size + 1:(i + 1) * size]
        j = int(np.argmin(row))
        if row[j] < best:
            best, arg = row[j], (i, i * size + 1 + j)
    if arg is None or not np.isfinite(best):
        return None
    i, node = arg
    edges = []
    while node != starts[i]:
        prev = pred[i, node]
        edges.append(qubit_of[(prev, node)])
        node = prev
    support = {}
    for q in edges:
        if q in support:
            del support[q]
        else:
            support[q] = letter
    return PauliOperator(support)


def _milp_distance(layout: CodeLayout, weight_cap: int, only: str | None = None):
    """Lightest operator commuting with every stabilizer and anticommuting
    with at least one logical basis element, as a single integer programme.

    ``only`` restricts to pure-``X`` or pure-``Z`` operators (enough for CSS
    codes, whose minimal logicals can always be taken of one type).
    """
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import csr_matrix, hstack, identity, vstack

    n = layout.n_qubits
    logical = np.array([v for pair in _generic_pairs(layout) for v in pair], dtype=np.int64)
    S = layout.stab_matrix.astype(np.int64)
    # <c, P> = c_x . z_P + c_z . x_P; collect coefficient blocks for the used letters
    blocks = []
    if only in (None, "X"):
        blocks.append(lambda C: C[:, n:])
    if only in (None, "Z"):
        blocks.append(lambda C: C[:, :n])
    nb = len(blocks)
    S_used = np.hstack([f(S) for f in blocks])
    S_used = S_used[S_used.any(axis=1)]
    L_used = np.hstack([f(logical) for f in blocks])
    m, k2 = S_used.shape[0], L_used.shape[0]
    nw = n if nb == 2 else 0
    # variable order: letters (nb*n) | w (nw) | s (m) | u (k2) | t (k2)
    n_var = nb * n + nw + m + 2 * k2
    zeros = lambda r, c: csr_matrix((r, c))
    rows = [
        hstack([csr_matrix(S_used), zeros(m, nw), -2 * identity(m), zeros(m, 2 * k2)]),
        hstack([csr_matrix(L_used), zeros(k2, nw + m), -2 * identity(k2), -identity(k2)]),
    ]
    lo = [np.zeros(m), np.zeros(k2)]
    hi = [np.zeros(m), np.zeros(k2)]
    t_row = np.zeros((1, n_var))
    t_row[0, -k2:] = 1
    rows.append(csr_matrix(t_row))
    lo.append([1])
    hi.append([np.inf])
    weight = np.zeros(n_var)
    if nb == 2:
        link = hstack([identity(n), zeros(n, n), -identity(n), zeros(n, m + 2 * k2)])
        link2 = hstack([zeros(n, n), identity(n), -identity(n), zeros(n, m + 2 * k2)])
        rows += [link, link2]
        lo += [np.full(2 * n, -np.inf)]
        hi += [np.zeros(2 * n)]
        lo[-1] = np.full(n, -np.inf)
        lo.append(np.full(n, -np.inf))
        hi[-1] = np.zeros(n)
        hi.append(np.zeros(n))
        weight[2 * n:3 * n] = 1
    else:
        weight[:n] = 1
    rows.append(csr_matrix(weight[None, :]))
    lo.append([0])
    hi.append([weight_cap])
    A = vstack(rows).tocsr()
    cons = LinearConstraint(A, np.concatenate([np.ravel(x) for x in lo]), np.concatenate([np.ravel(x) for x in hi]))
    upper = np.concatenate([
        np.ones(nb * n + nw),
        np.abs(S_used).sum(axis=1) // 2 + 1,
        np.abs(L_used).sum(axis=1) // 2 + 1,
        np.ones(k2),
    ])
    res = milp(weight, constraints=cons, integrality=np.ones(n_var), bounds=Bounds(np.zeros(n_var), upper))
    if res.status != 0 or res.x is None:
        return None
    sol = np.round(res.x).astype(np.uint8)
    vec = np.zeros(2 * n, dtype=np.uint8)
    for i, letter in enumerate([b for b in ("X", "Z") if only in (None, b)]):
        part = sol[i * n:(i + 1) * n]
        if letter == "X":
            vec[:n] = part
        else:
            vec[n:] = part
    return PauliOperator.from_symplectic(vec)


def _distance_search(layout: CodeLayout, weight_cap: int) -> DistanceResult:
    n = layout.n_qubits
    S = layout.stab_matrix.astype(np.int64)
    # syndrome bit-masks of X, Y, Z on each qubit as python ints
    flips = []
    for q in range(n):
        per = []
        for letter in "XYZ":
            v = PauliOperator.single(q, letter).symplectic(n)
            syn = symplectic_form(S, v[None, :].astype(np.int64))[:, 0]
            per.append((letter, int("".join(map(str, syn[::-1])) or "0", 2)))
        flips.append(per)
    logicals = find_logicals(layout, minimize=False)
    lmask = []
    for q in range(n):
        per = []
        for letter in "XYZ":
            p = PauliOperator.single(q, letter)
            bits = 0
            for j, pair in enumerate(logicals):
                from .pauli import commutes
                if not commutes(p, pair.x):
                    bits |= 1 << (2 * j)
                if not commutes(p, pair.z):
                    bits |= 1 << (2 * j + 1)
            per.append(bits)
        lmask.append(per)
    max_flip = max(bin(m).count("1") for per in flips for _, m in per) or 1

    def dfs(start, depth, syn, log, chosen):
        if depth == 0:
            return chosen if syn == 0 and log != 0 else None
        if bin(syn).count("1") > depth * max_flip:
            return None
        for q in range(start, n):
            for (letter, m), lm in zip(flips[q], lmask[q]):
                got = dfs(q + 1, depth - 1, syn ^ m, log ^ lm, chosen + [(q, letter)])
                if got is not None:
                    return got
        return None

    for w in range(1, weight_cap + 1):
        hit = dfs(0, w, 0, 0, [])
        if hit is not None:
            return DistanceResult(w, witness=PauliOperator(dict(hit)))
    return DistanceResult(weight_cap, exceeded=True)


# --------------------------------------------------------------------------
# density comparison


@dataclass
class DensityRow:
    geometry: str
    size: str
    distance: int
    physical: int
    logical: int
    ratio: float
    law: str
    law_value: float

    def as_dict(self):
        return asdict(self)


def density_report(specs: Sequence[GeometrySpec], weight_cap: int = 12, logical_override: dict | None = None) -> list[DensityRow]:
    """Physical-to-logical ratios next to their asymptotic laws.

    For lattices of defects the ratio is taken per encoded qubit in the
    intended encoding (a pair of holes, or 4 / 3 dislocations per qubit) and
    the physical count per unit cell, matching how the laws are stated.
    """
    rows = []
    for spec in specs:
        layout = build_layout(spec)
        d = int(code_distance(layout, weight_cap))
        n = layout.n_qubits
        k = layout.logical_qubit_count
        if spec.kind == "torus":
            rows.append(DensityRow("torus", f"{spec.L}x{spec.L}", d, n, k, n / k, "d^2/2", d * d / 2))
        elif spec.kind == "patch_square":
            rows.append(DensityRow("patch_square", f"L={spec.L}", d, n, k, n / k, "d^2", d * d))
        elif spec.kind == "patch_rotated":
            rows.append(DensityRow("patch_rotated", f"d={spec.L}", d, n, k, n / k, "2d^2", 2 * d * d))
        elif spec.kind == "hole_lattice":
            n_holes = len(spec.holes) if spec.holes else 2
            per_cell = n / n_holes
            ratio = 2 * per_cell
            rows.append(DensityRow("hole_lattice", f"l={spec.l},L={spec.L}", d, n, k, ratio, "3d^2", 3 * d * d))
        elif spec.kind in ("dislocation_torus", "dislocation_patch"):
            n_dis = len(layout.dislocations)
            per_dis = n / n_dis
            for per_qubit in (4, 3, 2):
                law = {4: "d^2", 3: "3d^2/4", 2: "d^2/2"}[per_qubit]
                val = {4: d * d, 3: 0.75 * d * d, 2: d * d / 2}[per_qubit]
                rows.append(DensityRow(f"dislocation/{per_qubit}", f"L={spec.L}", d, n, k, per_dis * per_qubit, law, val))
        else:
            raise LayoutError(f"no density law for {spec.kind}")
    return rows
