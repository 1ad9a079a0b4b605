"""Circuit compilation for the two blind-computation schemes.

Direct scheme: every repeated unit is the slot pattern

    H (per qubit) | T (per qubit) | S (per qubit) | cZ on pairs (0,1),(2,3).. | cZ on pairs (1,2),(3,4)..

and a circuit is packed greedily into as few units as respect gate order.
The T and S slots of a qubit are merged into one phase power mod 8; a power of
4 (a Z) is applied by the client on the pad alone, as are X gates.

Indirect scheme: alternating layers of nearest-neighbour controlled-S and
Hadamard, each gate switched on or off by one program bit.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .quantum_core import Gate, circuit_unitary, phase_matrix

DIRECT_KINDS = frozenset({"H", "S", "Sdg", "T", "Tdg", "X", "Z", "cZ", "cX", "cS", "cSdg"})
INDIRECT_KINDS = frozenset({"H", "cS", "cZ", "cX"})
ALL_KINDS = DIRECT_KINDS | {"Toffoli"}

# slot positions within a direct unit
POS_H, POS_PHASE, POS_CZA, POS_CZB = 0, 1, 2, 3
POSITIONS = 4

_PHASE_POWER = {"T": 1, "S": 2, "Z": 4, "Sdg": 6, "Tdg": 7}


class CompileError(ValueError):
    pass


@dataclass(frozen=True)
class TrapSpec:
    """One trap: a single wire with a known final bit, or a GHZ chain on contiguous wires."""

    kind: str
    wires: tuple[int, ...]
    expected: int = 0

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if self.kind not in ("single", "ghz"):
            raise CompileError(f"unknown trap kind {self.kind!r}")
        if self.kind == "single" and len(self.wires) != 1:
            raise CompileError("a single trap has exactly one wire")
        if self.kind == "ghz":
            if len(self.wires) < 2:
                raise CompileError("a GHZ trap needs at least two wires")
            if list(self.wires) != list(range(self.wires[0], self.wires[0] + len(self.wires))):
                raise CompileError("GHZ trap wires must be contiguous and increasing")


@dataclass
class CircuitIR:
    n: int
    gates: list[Gate] = field(default_factory=list)
    inputs: tuple[int, ...] | None = None
    traps: list[TrapSpec] = field(default_factory=list)

    def __post_init__(self):
        if self.n < 1:
            raise CompileError("a circuit needs at least one qubit")
        self.inputs = (0,) * self.n if self.inputs is None else tuple(int(b) & 1 for b in self.inputs)
        if len(self.inputs) != self.n:
            raise CompileError(f"{len(self.inputs)} input bits for {self.n} qubits")
        for g in self.gates:
            if g.kind not in ALL_KINDS:
                raise CompileError(f"unsupported gate kind {g.kind!r}")
            if max(g.qubits) >= self.n:
                raise CompileError(f"{g.kind}{g.qubits} out of range for n={self.n}")

    def unitary(self) -> np.ndarray:
        return circuit_unitary(self.gates, self.n)


# -- text format -------------------------------------------------------------------

_NAMES = {"H": "H", "S": "S", "SDG": "Sdg", "T": "T", "TDG": "Tdg", "X": "X", "Z": "Z",
          "CZ": "cZ", "CX": "cX", "CNOT": "cX", "CS": "cS", "CSDG": "cSdg", "TOFF": "Toffoli",
          "TOFFOLI": "Toffoli", "CCX": "Toffoli"}
_TEXT = {"H": "H", "S": "S", "Sdg": "SDG", "T": "T", "Tdg": "TDG", "X": "X", "Z": "Z", "cZ": "CZ",
         "cX": "CX", "cS": "CS", "cSdg": "CSDG", "Toffoli": "TOFF"}


def parse_traps(text: str) -> list[TrapSpec]:
    traps = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        if line[0].upper() != "TRAP":
            raise CompileError(f"line {lineno}: expected a TRAP line")
        traps.append(_parse_trap(line, lineno))
    return traps


def _parse_trap(tokens: list[str], lineno: int) -> TrapSpec:
    try:
        kind = tokens[1].lower()
        if kind == "single":
            return TrapSpec("single", (int(tokens[2]),), int(tokens[3]) if len(tokens) > 3 else 0)
        if kind == "ghz":
            return TrapSpec("ghz", tuple(int(t) for t in tokens[2:]))
    except (IndexError, ValueError) as exc:
        raise CompileError(f"line {lineno}: malformed TRAP line") from exc
    raise CompileError(f"line {lineno}: unknown trap kind {tokens[1]!r}")


def parse_circuit(text: str) -> CircuitIR:
    """Parse the line format: ``H 0``, ``CS 0 1``, ``TOFF 0 1 2``, ``QUBITS n``, ``INPUT 0101``, ``TRAP ...``."""
    gates, traps = [], []
    n, inputs = None, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        head = tokens[0].upper()
        if head == "QUBITS":
            n = int(tokens[1])
        elif head == "INPUT":
            if not re.fullmatch(r"[01]+", tokens[1]):
                raise CompileError(f"line {lineno}: INPUT must be a bit string")
            inputs = tuple(int(c) for c in tokens[1])
        elif head == "TRAP":
            traps.append(_parse_trap(tokens, lineno))
        elif head in _NAMES:
            try:
                qubits = tuple(int(t) for t in tokens[1:])
                gates.append(Gate(_NAMES[head], qubits))
            except ValueError as exc:
                raise CompileError(f"line {lineno}: {exc}") from exc
        else:
            raise CompileError(f"line {lineno}: unknown gate {tokens[0]!r}")
    if n is None:
        used = [q for g in gates for q in g.qubits]
        n = max(used) + 1 if used else (len(inputs) if inputs else 0)
    return CircuitIR(n, gates, inputs, traps)


def load_circuit(path) -> CircuitIR:
    with open(path) as fh:
        return parse_circuit(fh.read())


def format_circuit(circuit: CircuitIR) -> str:
    lines = [f"QUBITS {circuit.n}", "INPUT " + "".join(map(str, circuit.inputs))]
    lines += [" ".join([_TEXT[g.kind], *map(str, g.qubits)]) for g in circuit.gates]
    for t in circuit.traps:
        tail = [str(t.expected)] if t.kind == "single" else []
        lines.append(" ".join(["TRAP", t.kind.upper(), *map(str, t.wires), *tail]))
    return "\n".join(lines) + "\n"


# -- direct scheme -----------------------------------------------------------------


def pairs_a(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(0, n - 1, 2)]


def pairs_b(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(1, n - 1, 2)]


@dataclass
class LayerUnit:
    """Selection data of one repeated unit (client-private).

    ``phase[q]`` is the T-power mod 8 of the merged T/S slots; bit 0 drives the
    T slot, bit 1 the S slot, bit 2 is a Z applied on the pad. ``paulis`` holds
    (after_position, qubit) X gates that the client applies to the pad only,
    with after_position -1 meaning before the H slot.
    """

    h: list[int]
    phase: list[int]
    cz_a: list[int]
    cz_b: list[int]
    paulis: list[tuple[int, int]] = field(default_factory=list)

    @classmethod
    def empty(cls, n: int) -> "LayerUnit":
        return cls([0] * n, [0] * n, [0] * len(pairs_a(n)), [0] * len(pairs_b(n)))


@dataclass
class LayerProgram:
    n: int
    units: list[LayerUnit]
    scheme: str = "direct"

    @property
    def slots_per_unit(self) -> int:
        return 3 * self.n + len(pairs_a(self.n)) + len(pairs_b(self.n))

    def slot_count(self) -> int:
        return self.slots_per_unit * len(self.units)


def lower_direct(gates: Sequence[Gate]) -> list[tuple]:
    """Rewrite into primitive ops ("H", q), ("phase", q, power), ("cZ", a, b), ("X", q)."""
    ops: list[tuple] = []
    for g in gates:
        k, q = g.kind, g.qubits
        if k not in DIRECT_KINDS:
            raise CompileError(f"gate {k} is not supported by the direct scheme")
        if k == "H":
            ops.append(("H", q[0]))
        elif k in _PHASE_POWER:
            ops.append(("phase", q[0], _PHASE_POWER[k]))
        elif k == "X":
            ops.append(("X", q[0]))
        else:
            a, b = q
            if abs(a - b) != 1:
                raise CompileError(f"{k}{q} is not between nearest neighbours")
            if k == "cZ":
                ops.append(("cZ", min(a, b), max(a, b)))
            elif k == "cX":
                ops += [("H", b), ("cZ", min(a, b), max(a, b)), ("H", b)]
            else:
                # cS = T_a T_b cX T^dag_b cX
                t = 1 if k == "cS" else 7
                ops += [("phase", a, t), ("phase", b, t), ("H", b), ("cZ", min(a, b), max(a, b)), ("H", b),
                        ("phase", b, 8 - t), ("H", b), ("cZ", min(a, b), max(a, b)), ("H", b)]
    return ops


def _next_slot(frontier: float, pos: int) -> int:
    g0 = int(np.floor(frontier)) + 1
    return g0 + (pos - g0) % POSITIONS


def compile_direct(circuit: CircuitIR) -> LayerProgram:
    """Greedy earliest-slot packing into repeated units."""
    n = circuit.n
    ops = lower_direct(circuit.gates)
    frontier = [-1.0] * n
    last_phase = [False] * n
    placed: list[tuple[int, tuple]] = []
    for op in ops:
        kind = op[0]
        if kind == "X":
            q = op[1]
            frontier[q] = np.floor(frontier[q]) + 0.5
            last_phase[q] = False
            placed.append((frontier[q], op))
            continue
        if kind == "phase":
            q = op[1]
            if last_phase[q]:
                g = int(frontier[q])
            else:
                g = _next_slot(frontier[q], POS_PHASE)
            frontier[q], last_phase[q] = g, True
            placed.append((g, op))
            continue
        if kind == "H":
            qs, pos = (op[1],), POS_H
        else:
            qs = (op[1], op[2])
            pos = POS_CZA if op[1] % 2 == 0 else POS_CZB
        g = _next_slot(max(frontier[q] for q in qs), pos)
        # a pair can hold one cZ per unit; a repeated cZ on the same pair
        # lands at the same g only if both frontiers allow, which they do not
        for q in qs:
            frontier[q], last_phase[q] = g, False
        placed.append((g, op))
    n_units = 0 if not placed else max(0, int(np.floor(max(g for g, _ in placed)))) // POSITIONS + 1
    units = [LayerUnit.empty(n) for _ in range(n_units)]
    for g, op in placed:
        # an X before any slot of its qubit sits in unit 0 ahead of the H slot
        u, pos = (0, -1) if g < 0 else divmod(int(np.floor(g)), POSITIONS)
        unit = units[u]
        kind = op[0]
        if kind == "X":
            unit.paulis.append((pos, op[1]))
        elif kind == "H":
            unit.h[op[1]] = 1
        elif kind == "phase":
            unit.phase[op[1]] = (unit.phase[op[1]] + op[2]) % 8
        elif pos == POS_CZA:
            unit.cz_a[op[1] // 2] = 1
        else:
            unit.cz_b[(op[1] - 1) // 2] = 1
    return LayerProgram(n, units)


def unit_gates(unit: LayerUnit, n: int) -> list[Gate]:
    """Plain gate list of one unit with every selection honoured."""
    out: list[Gate] = []

    def paulis(after):
        out.extend(Gate("X", (q,)) for a, q in unit.paulis if a == after)

    paulis(-1)
    out += [Gate("H", (q,)) for q in range(n) if unit.h[q]]
    paulis(POS_H)
    out += [Gate("U", (q,), payload=phase_matrix(unit.phase[q])) for q in range(n) if unit.phase[q]]
    paulis(POS_PHASE)
    out += [Gate("cZ", p) for p, on in zip(pairs_a(n), unit.cz_a) if on]
    paulis(POS_CZA)
    out += [Gate("cZ", p) for p, on in zip(pairs_b(n), unit.cz_b) if on]
    paulis(POS_CZB)
    return out


def decompile(program: LayerProgram) -> list[Gate]:
    out: list[Gate] = []
    for unit in program.units:
        out += unit_gates(unit, program.n)
    return out


# -- indirect scheme (QCA) -----------------------------------------------------------


@dataclass
class QCAProgram:
    """Alternating cS / H layers; steps[l][j] switches gate j of layer l.

    In a cS layer bit j drives the pair (j, j+1) and bit n-1 is unused.
    """

    n: int
    steps: list[tuple[int, ...]]
    inputs: tuple[int, ...]
    scheme: str = "indirect"

    @property
    def m(self) -> int:
        return len(self.steps)

    @staticmethod
    def layer_kind(l: int) -> str:
        return "cS" if l % 2 == 0 else "H"

    def program_bits(self) -> tuple[int, ...]:
        return tuple(b for step in self.steps for b in step)


def lower_indirect(gates: Sequence[Gate]) -> list[tuple]:
    ops: list[tuple] = []
    for g in gates:
        k, q = g.kind, g.qubits
        if k not in INDIRECT_KINDS:
            raise CompileError(f"gate {k} is not supported by the indirect scheme; use H, CS, CZ or CX")
        if k == "H":
            ops.append(("H", q[0]))
            continue
        a, b = q
        if abs(a - b) != 1:
            raise CompileError(f"{k}{q} is not between nearest neighbours")
        lo = min(a, b)
        if k == "cS":
            ops.append(("cS", lo))
        elif k == "cZ":
            ops += [("cS", lo), ("cS", lo)]
        else:
            ops += [("H", b), ("cS", lo), ("cS", lo), ("H", b)]
    return ops


def compile_indirect(circuit: CircuitIR, m: int | None = None) -> QCAProgram:
    """Greedy placement into alternating cS/H layers, padded to ``m`` steps if given."""
    n = circuit.n
    ops = lower_indirect(circuit.gates)
    frontier = [-1] * n
    placed = []
    for op in ops:
        if op[0] == "H":
            qs, parity = (op[1],), 1
        else:
            qs, parity = (op[1], op[1] + 1), 0
        l = max(frontier[q] for q in qs) + 1
        if l % 2 != parity:
            l += 1
        for q in qs:
            frontier[q] = l
        placed.append((l, op))
    need = 0 if not placed else max(l for l, _ in placed) + 1
    if m is None:
        m = need
    elif m < need:
        raise CompileError(f"circuit needs {need} steps, only {m} requested")
    steps = [[0] * n for _ in range(m)]
    for l, (kind, q) in placed:
        steps[l][q] = 1
    return QCAProgram(n, [tuple(s) for s in steps], circuit.inputs)


def decompile_indirect(program: QCAProgram) -> list[Gate]:
    out = []
    for l, step in enumerate(program.steps):
        for j, bit in enumerate(step):
            if not bit:
                continue
            if program.layer_kind(l) == "H":
                out.append(Gate("H", (j,)))
            elif j < program.n - 1:
                out.append(Gate("cS", (j, j + 1)))
    return out


# -- controlled-gate constructions from Toffoli + Clifford ------------------------------


@dataclass(frozen=True)
class ControlledConstruction:
    """A c-controlled gate built from Toffoli and Clifford gates.

    ``wires`` names the local wires; ``ancillas`` start in |0>; ``control`` is the
    classical program wire c.
    """

    name: str
    wires: tuple[str, ...]
    gates: tuple[Gate, ...]
    data: tuple[int, ...]
    control: int
    ancillas: tuple[int, ...]

    def unitary(self) -> np.ndarray:
        return circuit_unitary(list(self.gates), len(self.wires))


def build_controlled_constructions() -> tuple[ControlledConstruction, ControlledConstruction]:
    """(controlled-cS, controlled-H), both controlled off the program wire c."""
    # wires: qa, qb, anc1, c, anc2
    ccs = ControlledConstruction(
        "ccS",
        ("qa", "qb", "anc1", "c", "anc2"),
        (Gate("Toffoli", (0, 1, 2)), Gate("Toffoli", (2, 3, 4)), Gate("S", (4,)),
         Gate("Toffoli", (2, 3, 4)), Gate("Toffoli", (0, 1, 2))),
        data=(0, 1), control=3, ancillas=(2, 4),
    )
    # wires: q, c, anc
    ch = ControlledConstruction(
        "cH",
        ("q", "c", "anc"),
        (Gate("cX", (2, 0)), Gate("Toffoli", (0, 1, 2)), Gate("cX", (2, 0)), Gate("H", (2,)),
         Gate("cX", (2, 0)), Gate("Toffoli", (0, 1, 2)), Gate("cX", (2, 0))),
        data=(0,), control=1, ancillas=(2,),
    )
    return ccs, ch


@dataclass(frozen=True)
class SubstitutedCircuit:
    """Server-executable version of a ControlledConstruction for a known program bit.

    ``server_gates[i]`` is None where a c-controlled gate was skipped. Every
    Toffoli index in ``correction_points`` must be followed by the three
    encrypted corrections whatever the value of c; ``substitution_points``
    are the Toffolis that were replaced by a classical decision.
    """

    source: ControlledConstruction
    c: int
    server_gates: tuple[Gate | None, ...]
    correction_points: tuple[int, ...]
    substitution_points: tuple[int, ...]


def classical_substitution(cons: ControlledConstruction, c: int) -> SubstitutedCircuit:
    server, points, subs = [], [], []
    for i, g in enumerate(cons.gates):
        if g.kind == "Toffoli":
            points.append(i)
        if cons.control in g.qubits:
            if g.kind != "Toffoli":
                raise CompileError("only Toffolis may touch the program wire")
            subs.append(i)
            others = tuple(q for q in g.qubits[:2] if q != cons.control)
            server.append(Gate("cX", (others[0], g.qubits[2])) if c else None)
        else:
            server.append(g)
    return SubstitutedCircuit(cons, int(c), tuple(server), tuple(points), tuple(subs))


# -- cost model ----------------------------------------------------------------------

# U_f applications per qubit per repeated unit, by gate. The cZ slots cover the
# n-1 neighbour pairs of a unit; they are charged one per qubit.
DIRECT_COST_TABLE = {"H": 1, "T": 1, "S": 1, "cZ": 1}

# Indirect scheme: 3 encrypted controlled-NOTs follow every Toffoli. The
# controlled-cS construction has 4 Toffolis and is charged once per qubit
# (one neighbour pair per qubit); the controlled-H construction has 2.
INDIRECT_COST_TABLE = {"ccS": 4 * 3, "cH": 2 * 3}

# Brickwork emulation on two rows over one brick: two rounds of (H, T, S) per
# row plus the single encrypted cZ joining the rows. The measurement-based
# reference needs two secure bits for each of the 8 qubits of the brick.
BRICKWORK_ROWS = 2
BRICKWORK_ROUNDS = 2
BRICKWORK_SINGLE_QUBIT_SLOTS = ("H", "T", "S")
BRICKWORK_REFERENCE = {"qubits": 8, "bits_per_qubit": 2}


@dataclass(frozen=True)
class BrickworkEmulation:
    rows: int = BRICKWORK_ROWS
    rounds: int = BRICKWORK_ROUNDS


@dataclass
class CostReport:
    scheme: str
    uf_count: int
    encrypted_bits: int
    server_qubits: int
    layer_units: int
    breakdown: dict[str, int]
    per_qubit_per_unit: int | None = None
    reference_bits: int | None = None
    assumptions: dict = field(default_factory=dict)

    def check(self) -> None:
        if sum(self.breakdown.values()) != self.uf_count:
            raise CompileError("cost breakdown does not add up to the total")


def cost_report(program, k: int = 3, m_c: int = 4) -> CostReport:
    """Resource count for a LayerProgram, QCAProgram or BrickworkEmulation."""
    gadget_width = 1 + k + m_c
    if isinstance(program, LayerProgram):
        units, n = len(program.units), program.n
        breakdown = {g: c * n * units for g, c in DIRECT_COST_TABLE.items()}
        total = sum(breakdown.values())
        rep = CostReport("direct", total, total, n + gadget_width + 1, units, breakdown,
                         per_qubit_per_unit=sum(DIRECT_COST_TABLE.values()),
                         assumptions={"table": dict(DIRECT_COST_TABLE),
                                      "executed_slots": program.slot_count()})
    elif isinstance(program, QCAProgram):
        n, units = program.n, (program.m + 1) // 2
        breakdown = {g: c * n * units for g, c in INDIRECT_COST_TABLE.items()}
        total = sum(breakdown.values())
        # data + program wire + two construction ancillas + one gadget's ancillas
        rep = CostReport("indirect", total, total, n + 3 + gadget_width, units, breakdown,
                         per_qubit_per_unit=sum(INDIRECT_COST_TABLE.values()),
                         assumptions={"table": dict(INDIRECT_COST_TABLE),
                                      "encrypted_cx_per_toffoli": 3})
    elif isinstance(program, BrickworkEmulation):
        single = program.rows * program.rounds * len(BRICKWORK_SINGLE_QUBIT_SLOTS)
        cz = program.rows - 1
        breakdown = {"single_qubit": single, "cZ": cz}
        total = single + cz
        ref = BRICKWORK_REFERENCE["qubits"] * BRICKWORK_REFERENCE["bits_per_qubit"]
        rep = CostReport("brickwork", total, total, program.rows, 1, breakdown,
                         reference_bits=ref,
                         assumptions={"rows": program.rows, "rounds": program.rounds,
                                      "slots": BRICKWORK_SINGLE_QUBIT_SLOTS,
                                      "reference": dict(BRICKWORK_REFERENCE)})
    else:
        raise CompileError(f"unknown program type {type(program).__name__}")
    rep.check()
    return rep
