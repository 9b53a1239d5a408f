"""Pauli-frame tracking that turns a Clifford program into joint measurements.

Single-qubit Cliffords are never executed.  Each qubit carries a frame
``f(P) = U^dagger P U`` where ``U`` is the product of the Cliffords applied so
far, and a requested logical measurement of ``P`` is carried out by measuring
``f(P)`` on the physical qubits.  CNOTs are replaced by three measurements on a
fresh ancilla plus outcome-dependent Pauli fixups, which only change frame
signs.

Signs are symbolic: a frame image or measurement request has a base sign and a
set of earlier logical outcomes whose product multiplies it.  This keeps the
compiled schedule independent of the outcomes seen at run time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .pauli import PauliOperator, _PHASE, _PRODUCT
from .tableau import Tableau, enumerate_branches, outcome_distribution

FRAME_GATES = ("H", "S", "X", "Y", "Z", "init")
PROGRAM_GATES = FRAME_GATES + ("CNOT", "MEASURE", "IF")

# loop dictionary: which pair of the three dislocations is encircled
MAJORANA_PAIRS = {"Z": "gamma1 gamma2", "X": "gamma1 gamma3", "Y": "gamma2 gamma3"}

# G^dagger P G for each frame gate, as (letter, sign)
_PULLBACK = {
    "H": {"X": ("Z", 1), "Y": ("Y", -1), "Z": ("X", 1)},
    "S": {"X": ("Y", -1), "Y": ("X", 1), "Z": ("Z", 1)},
    "X": {"X": ("X", 1), "Y": ("Y", -1), "Z": ("Z", -1)},
    "Y": {"X": ("X", -1), "Y": ("Y", 1), "Z": ("Z", -1)},
    "Z": {"X": ("X", -1), "Y": ("Y", -1), "Z": ("Z", 1)},
}


class FrameError(ValueError):
    """Unknown gate, malformed program or invalid frame."""


@dataclass(frozen=True)
class Image:
    """Signed single-qubit Pauli ``sign * prod(outcomes[deps]) * letter``."""

    letter: str
    sign: int = 1
    deps: frozenset = frozenset()

    def flip(self, sign: int = 1, deps: Iterable[int] = ()) -> "Image":
        return Image(self.letter, self.sign * sign, self.deps ^ frozenset(deps))


def _i_times_product(a: Image, b: Image) -> Image:
    """``i * a * b`` for anticommuting single-qubit images."""
    if a.letter == b.letter:
        raise FrameError("frame images must anticommute")
    k = (_PHASE[(a.letter, b.letter)] + 1) % 4
    return Image(_PRODUCT[(a.letter, b.letter)], a.sign * b.sign * (-1 if k == 2 else 1), a.deps ^ b.deps)


@dataclass(frozen=True)
class QubitFrame:
    """Images of X and Z under conjugation by the pending Clifford."""

    x: Image = Image("X")
    z: Image = Image("Z")

    def image(self, letter: str) -> Image:
        if letter == "X":
            return self.x
        if letter == "Z":
            return self.z
        if letter == "Y":
            return _i_times_product(self.x, self.z)
        raise FrameError(f"bad Pauli letter {letter!r}")

    @property
    def is_identity(self) -> bool:
        return self == QubitFrame()

    def majorana(self) -> dict:
        """Which dislocation pair currently represents logical Z and X."""
        return {"Z": MAJORANA_PAIRS[self.z.letter], "X": MAJORANA_PAIRS[self.x.letter]}


@dataclass(frozen=True)
class FrameState:
    """Per-qubit frames; qubits never touched have the identity frame."""

    frames: Mapping[int, QubitFrame] = field(default_factory=dict)

    def __getitem__(self, q: int) -> QubitFrame:
        return self.frames.get(q, QubitFrame())

    def with_frame(self, q: int, frame: QubitFrame) -> "FrameState":
        frames = dict(self.frames)
        if frame.is_identity:
            frames.pop(q, None)
        else:
            frames[q] = frame
        return FrameState(frames)

    @property
    def is_identity(self) -> bool:
        return not self.frames

    def image(self, op: PauliOperator) -> tuple[PauliOperator, frozenset]:
        """``U^dagger op U`` as an unsigned-dependence pair (signed operator, deps)."""
        support = {}
        sign = op.sign
        deps: frozenset = frozenset()
        for q, letter in op.support.items():
            img = self[q].image(letter)
            support[q] = img.letter
            sign *= img.sign
            deps ^= img.deps
        return PauliOperator(support, sign), deps


def apply_frame_gate(frame: FrameState, gate: str, qubit: int) -> FrameState:
    """Record ``gate`` on ``qubit`` in the frame; nothing physical happens.

    ``init`` declares the qubit freshly prepared in ``|0>`` and resets its frame.
    """
    if gate == "init":
        return frame.with_frame(qubit, QubitFrame())
    table = _PULLBACK.get(gate)
    if table is None:
        raise FrameError(f"unknown frame gate {gate!r}")
    old = frame[qubit]
    lx, sx = table["X"]
    lz, sz = table["Z"]
    new = QubitFrame(old.image(lx).flip(sx), old.image(lz).flip(sz))
    return frame.with_frame(qubit, new)


def apply_conditional_pauli(frame: FrameState, letter: str, qubit: int, deps: Iterable[int]) -> FrameState:
    """Fold ``letter`` on ``qubit``, applied iff the product of ``deps`` outcomes is -1."""
    deps = frozenset(deps)
    table = _PULLBACK[letter]
    old = frame[qubit]
    new = QubitFrame(
        old.x.flip(1, deps if table["X"][1] < 0 else ()),
        old.z.flip(1, deps if table["Z"][1] < 0 else ()),
    )
    return frame.with_frame(qubit, new)


@dataclass(frozen=True)
class MeasurementRequest:
    """A physical Pauli-product measurement standing in for a logical one.

    The logical outcome is ``sign * prod(logical outcomes[deps]) * m`` where
    ``m`` is the eigenvalue of the unsigned physical operator.
    """

    qubits: tuple[int, ...]
    letters: tuple[str, ...]
    sign: int = 1
    deps: frozenset = frozenset()
    label: str = ""

    def __post_init__(self):
        if len(self.qubits) != len(self.letters):
            raise FrameError("one letter per qubit")
        for letter in self.letters:
            if letter not in ("X", "Y", "Z"):
                raise FrameError(f"bad letter {letter!r}")

    @property
    def operator(self) -> PauliOperator:
        return PauliOperator(dict(zip(self.qubits, self.letters)))

    def loops(self) -> dict:
        """Dislocation pair to encircle on each qubit."""
        return {q: MAJORANA_PAIRS[c] for q, c in zip(self.qubits, self.letters)}

    def __str__(self):
        body = "".join(f"{c}{q}" for q, c in zip(self.qubits, self.letters))
        return ("-" if self.sign < 0 else "") + body

    def to_json(self) -> dict:
        return {
            "qubits": list(self.qubits),
            "letters": "".join(self.letters),
            "sign": self.sign,
            "depends_on": sorted(self.deps),
            "label": self.label,
            "loops": {str(q): v for q, v in self.loops().items()},
        }


def rewrite_measurement(frame: FrameState, request: PauliOperator, label: str = "") -> MeasurementRequest:
    """Conjugate a logical measurement through the frame."""
    image, deps = frame.image(request)
    qubits = tuple(image.support)
    return MeasurementRequest(qubits, tuple(image.support[q] for q in qubits), image.sign, deps, label)


@dataclass(frozen=True)
class Op:
    """One program instruction.

    ``gate`` is one of ``H S X Y Z init CNOT MEASURE IF``.  ``basis`` holds the
    measured letters (``MEASURE``) or the fixup letter (``IF``); ``key`` names a
    measurement outcome and ``cond`` lists the keys an ``IF`` depends on.
    """

    gate: str
    qubits: tuple[int, ...]
    basis: str = ""
    key: str = ""
    cond: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.gate not in PROGRAM_GATES:
            raise FrameError(f"unsupported gate {self.gate!r}")
        arity = {"CNOT": 2}.get(self.gate, 1)
        if self.gate == "MEASURE":
            arity = len(self.basis)
            if not 1 <= arity <= len(self.qubits) or any(c not in "XYZ" for c in self.basis):
                raise FrameError(f"bad measurement basis {self.basis!r}")
        if len(self.qubits) != arity or len(set(self.qubits)) != arity:
            raise FrameError(f"{self.gate} expects {arity} distinct qubits, got {self.qubits}")
        if self.gate == "IF" and self.basis not in ("X", "Y", "Z"):
            raise FrameError("IF needs a Pauli letter")

    def to_json(self) -> dict:
        out: dict = {"gate": self.gate, "qubits": list(self.qubits)}
        if self.basis:
            out["basis"] = self.basis
        if self.key:
            out["key"] = self.key
        if self.cond:
            out["cond"] = list(self.cond)
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "Op":
        try:
            return cls(str(obj["gate"]), tuple(obj["qubits"]), str(obj.get("basis", "")),
                       str(obj.get("key", "")), tuple(obj.get("cond", ())))
        except KeyError as exc:
            raise FrameError(f"program entry missing {exc}") from None


def parse_program(spec: Sequence) -> list[Op]:
    """Accept ``Op`` objects, JSON dicts or tuples such as ``("CNOT", 0, 1)``.

    Measurement tuples are ``("MEASURE", "ZZ", a, b)``.
    """
    ops = []
    for item in spec:
        if isinstance(item, Op):
            ops.append(item)
        elif isinstance(item, Mapping):
            ops.append(Op.from_json(item))
        else:
            name = str(item[0])
            if name == "MEASURE":
                ops.append(Op("MEASURE", tuple(item[2:]), str(item[1])))
            else:
                ops.append(Op(name, tuple(item[1:])))
    return ops


def load_program(text: str) -> tuple[list[Op], int | None]:
    """Parse a JSON program ``{"n_qubits": n, "ops": [...]}`` (or a bare list)."""
    data = json.loads(text)
    if isinstance(data, list):
        return parse_program(data), None
    if "ops" not in data:
        raise FrameError("program JSON needs an 'ops' list")
    n = data.get("n_qubits")
    return parse_program(data["ops"]), None if n is None else int(n)


def expand_cnot(control: int, target: int, ancilla: int, tag: str = "cnot") -> list[Op]:
    """CNOT from joint measurements on a fresh ancilla.

    The ancilla is rotated to ``|+>``; ``Z_c Z_a``, ``X_a X_t`` (as ``Z Z``
    between Hadamard frames) and ``Z_a`` are measured.  Fixups: ``Z`` on the
    control if the ``XX`` outcome is -1 and ``X`` on the target if the product
    of the two ``Z``-type outcomes is -1.
    """
    if len({control, target, ancilla}) != 3:
        raise FrameError("control, target and ancilla must be distinct")
    m1, m2, m3 = f"{tag}.zz", f"{tag}.xx", f"{tag}.z"
    return [
        Op("H", (ancilla,)),
        Op("MEASURE", (control, ancilla), "ZZ", m1),
        Op("H", (ancilla,)),
        Op("H", (target,)),
        Op("MEASURE", (ancilla, target), "ZZ", m2),
        Op("H", (ancilla,)),
        Op("H", (target,)),
        Op("MEASURE", (ancilla,), "Z", m3),
        Op("IF", (control,), "Z", cond=(m2,)),
        Op("IF", (target,), "X", cond=(m1, m3)),
    ]


@dataclass(frozen=True)
class CompiledProgram:
    """Measurement-only schedule plus bookkeeping for the program's own outcomes."""

    n_qubits: int
    requests: tuple[MeasurementRequest, ...]
    program_outcomes: tuple[int, ...]
    ancillas: tuple[int, ...]
    frame: FrameState

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "ancillas": list(self.ancillas),
            "program_outcomes": list(self.program_outcomes),
            "requests": [r.to_json() for r in self.requests],
        }


def compile_program(program: Sequence, n_qubits: int | None = None) -> CompiledProgram:
    """Compile Cliffords, CNOTs and measurements into rewritten measurement requests.

    Ancillas for CNOTs are allocated above the highest program qubit.  ``init``
    on a qubit becomes a Z measurement followed by a conditional X.
    """
    ops = parse_program(program)
    used = [q for op in ops for q in op.qubits]
    n_logical = max(max(used) + 1 if used else 0, n_qubits or 0)
    frame = FrameState()
    requests: list[MeasurementRequest] = []
    keys: dict[str, int] = {}
    program_outcomes: list[int] = []
    ancillas: list[int] = []

    def measure(letters: str, qubits: tuple[int, ...], key: str) -> int:
        logical = PauliOperator(dict(zip(qubits, letters)))
        req = rewrite_measurement(frame, logical, key)
        requests.append(req)
        idx = len(requests) - 1
        if key:
            keys[key] = idx
        return idx

    def run(op: Op, top: bool):
        nonlocal frame
        if op.gate in ("H", "S", "X", "Y", "Z"):
            frame = apply_frame_gate(frame, op.gate, op.qubits[0])
        elif op.gate == "init":
            tag = f"init{len(requests)}"
            measure("Z", op.qubits, tag)
            frame = apply_conditional_pauli(frame, "X", op.qubits[0], {keys[tag]})
        elif op.gate == "MEASURE":
            idx = measure(op.basis, op.qubits, op.key)
            if top:
                program_outcomes.append(idx)
        elif op.gate == "IF":
            try:
                deps = {keys[k] for k in op.cond}
            except KeyError as exc:
                raise FrameError(f"IF refers to unknown outcome {exc}") from None
            frame = apply_conditional_pauli(frame, op.basis, op.qubits[0], deps)
        elif op.gate == "CNOT":
            anc = n_logical + len(ancillas)
            ancillas.append(anc)
            frame = apply_frame_gate(frame, "init", anc)
            for sub in expand_cnot(op.qubits[0], op.qubits[1], anc, tag=f"cnot{len(ancillas) - 1}"):
                run(sub, False)

    for op in ops:
        run(op, True)
    return CompiledProgram(n_logical + len(ancillas), tuple(requests), tuple(program_outcomes),
                           tuple(ancillas), frame)


# execution ----------------------------------------------------------------------


def _logical(req: MeasurementRequest, physical: int, outcomes: Sequence[int]) -> int:
    value = req.sign * physical
    for d in req.deps:
        value *= outcomes[d]
    return value


def execute(compiled: CompiledProgram, seed: int | None = 0) -> tuple[list[int], Tableau]:
    """Run the schedule on a fresh ``|0...0>`` tableau; returns logical outcomes."""
    rng = np.random.default_rng(seed)
    t = Tableau(compiled.n_qubits)
    outcomes: list[int] = []
    for req in compiled.requests:
        outcomes.append(_logical(req, t.measure(req.operator, rng), outcomes))
    return outcomes, t


def compiled_distribution(compiled: CompiledProgram) -> dict[tuple[int, ...], Fraction]:
    """Exact distribution of the program's own measurement outcomes."""
    steps = [lambda t, f, r=req: t.measure(r.operator, force=f) for req in compiled.requests]
    branches = enumerate_branches(Tableau(compiled.n_qubits), steps)

    def key(branch):
        logical: list[int] = []
        for req, m in zip(compiled.requests, branch.outcomes):
            logical.append(_logical(req, m, logical))
        return tuple(logical[i] for i in compiled.program_outcomes)

    return outcome_distribution(branches, key)


def direct_distribution(program: Sequence, n_qubits: int | None = None) -> dict[tuple[int, ...], Fraction]:
    """Exact outcome distribution from applying the program's unitaries directly."""
    ops = parse_program(program)
    used = [q for op in ops for q in op.qubits]
    n = max(max(used) + 1 if used else 0, n_qubits or 0)
    steps = []
    recorded = []
    for op in ops:
        if op.gate == "MEASURE":
            pauli = PauliOperator(dict(zip(op.qubits, op.basis)))
            steps.append(lambda t, f, p=pauli: t.measure(p, force=f))
            recorded.append(True)
        elif op.gate == "init":
            steps.append(lambda t, f, q=op.qubits[0]: _reset(t, q, f))
            recorded.append(False)
        elif op.gate == "IF":
            raise FrameError("IF is only available inside compiled programs")
        else:
            steps.append(lambda t, f, g=op.gate, qs=op.qubits: t.apply(g, *qs))
            recorded.append(False)
    branches = enumerate_branches(Tableau(n), steps)

    def key(branch):
        # init steps produce an outcome too; keep only MEASURE outcomes
        produced = [r for r, op in zip(recorded, ops) if op.gate in ("MEASURE", "init")]
        return tuple(m for m, keep in zip(branch.outcomes, produced) if keep)

    return outcome_distribution(branches, key)


def _reset(t: Tableau, q: int, force: int | None) -> int:
    m = t.measure(PauliOperator.single(q, "Z"), force=force)
    if m < 0:
        t.apply("X", q)
    return m


def random_clifford_program(
    rng: np.random.Generator, n_qubits: int, length: int, p_measure: float = 0.15, max_cnots: int = 3
) -> list[Op]:
    """Random program over ``H S X Y Z CNOT`` with interleaved Pauli measurements.

    Each CNOT adds three random measurements to the compiled schedule, so
    ``max_cnots`` bounds the cost of exact branch enumeration.
    """
    ops: list[Op] = []
    cnots = 0
    for _ in range(length):
        u = rng.random()
        if u < p_measure:
            k = int(rng.integers(1, 3)) if n_qubits > 1 else 1
            qs = tuple(int(q) for q in rng.choice(n_qubits, size=k, replace=False))
            basis = "".join(rng.choice(list("XYZ"), size=k))
            ops.append(Op("MEASURE", qs, basis))
        elif u < p_measure + 0.3 and n_qubits > 1 and cnots < max_cnots:
            cnots += 1
            c, t = (int(q) for q in rng.choice(n_qubits, size=2, replace=False))
            ops.append(Op("CNOT", (c, t)))
        else:
            gate = str(rng.choice(["H", "S", "X", "Y", "Z"]))
            ops.append(Op(gate, (int(rng.integers(n_qubits)),)))
    return ops

