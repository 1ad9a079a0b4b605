"""Public round schedules: what the server runs, derived only from public data.

A schedule is a list of rounds. Each round is some plain server actions
followed by the gadgets whose ciphertexts arrive in that round's message, so
the client can fix every hidden bit of a round before sending it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

from ..compiler import build_controlled_constructions, classical_substitution, pairs_a, pairs_b
from ..quantum_core import Gate


@dataclass(frozen=True)
class GadgetAction:
    kind: str  # "cv", "phase" or "hadamard"
    qubits: tuple[int, ...]
    V: str | None = None
    power: int | None = None


@dataclass(frozen=True)
class GateAction:
    gate: Gate


@dataclass(frozen=True)
class SubstitutedToffoli:
    """Toffoli(x, c -> t) with c a program wire: the server runs cX(x -> t) iff c_value."""

    x: int
    c: int
    t: int
    c_value: int
    order: tuple[int, int]  # original control order, for correction bookkeeping

    @property
    def controls(self) -> tuple[int, int]:
        return self.order


@dataclass(frozen=True)
class AllocAction:
    """Append wires in the given public basis bits; ``tags`` says which private pad each uses."""

    bits: tuple[int, ...]
    tags: tuple[str, ...]


@dataclass(frozen=True)
class DiscardAction:
    qubits: tuple[int, ...]


Action = Union[GadgetAction, GateAction, SubstitutedToffoli, AllocAction, DiscardAction]


@dataclass
class Round:
    actions: list[Action] = field(default_factory=list)
    label: tuple = ()

    @property
    def gadgets(self) -> list[GadgetAction]:
        return [a for a in self.actions if isinstance(a, GadgetAction)]


@dataclass
class Schedule:
    scheme: str
    n: int
    rounds: list[Round]
    final_actions: list[Action] = field(default_factory=list)

    def gadget_count(self) -> int:
        return sum(len(r.gadgets) for r in self.rounds)


DIRECT_STEPS = ("H", "T", "S", "CZA", "CZB")


def direct_schedule(n: int, units: int) -> Schedule:
    rounds = []
    for u in range(units):
        for step in DIRECT_STEPS:
            if step == "H":
                acts = [GadgetAction("hadamard", (q,)) for q in range(n)]
            elif step == "T":
                acts = [GadgetAction("phase", (q,), power=1) for q in range(n)]
            elif step == "S":
                acts = [GadgetAction("phase", (q,), power=2) for q in range(n)]
            else:
                pairs = pairs_a(n) if step == "CZA" else pairs_b(n)
                acts = [GadgetAction("cv", p, V="Z") for p in pairs]
            if acts:
                rounds.append(Round(acts, (u, step)))
    return Schedule("direct", n, rounds)


def toffoli_corrections(a: int, b: int, t: int) -> list[GadgetAction]:
    """The three encrypted corrections after Toffoli(a, b -> t), in fixed order."""
    return [GadgetAction("cv", (b, t), V="X"), GadgetAction("cv", (a, t), V="X"),
            GadgetAction("cv", (a, b), V="Z")]


def _construction_rounds(cons, wires: Sequence[int], c_value: int, tag: str, carry: list[Action],
                 label: tuple) -> tuple[list[Round], list[Action]]:
    """Rounds for one controlled construction mapped onto global ``wires``."""
    sub = classical_substitution(cons, c_value)
    rounds: list[Round] = []
    current = list(carry)
    ctrl = wires[cons.control]
    for i, g in enumerate(cons.gates):
        q = tuple(wires[j] for j in g.qubits)
        if g.kind == "Toffoli":
            if i in sub.substitution_points:
                x = q[0] if q[1] == ctrl else q[1]
                current.append(SubstitutedToffoli(x, ctrl, q[2], c_value, (q[0], q[1])))
            else:
                current.append(GateAction(Gate("Toffoli", q)))
            current += toffoli_corrections(q[0], q[1], q[2])
            rounds.append(Round(current, label + (i,)))
            current = []
        else:
            current.append(GateAction(Gate(g.kind, q)))
    return rounds, current


def indirect_schedule(n: int, steps: int, padded_program: Sequence[int]) -> Schedule:
    """Alternating cS / H layers; program bit (l, j) sits at index l * n + j."""
    if len(padded_program) != n * steps:
        raise ValueError(f"expected {n * steps} program bits, got {len(padded_program)}")
    ccs, ch = build_controlled_constructions()
    rounds: list[Round] = []
    carry: list[Action] = []
    for l in range(steps):
        for j in range(n):
            c = int(padded_program[l * n + j])
            tag = f"prog:{l}:{j}"
            if l % 2 == 0:
                if j == n - 1:
                    continue
                # local wires qa, qb, anc1, c, anc2
                wires = (j, j + 1, n, n + 1, n + 2)
                carry.append(AllocAction((0, c, 0), ("anc", tag, "anc")))
                new, carry = _construction_rounds(ccs, wires, c, tag, carry, (l, j))
                carry.append(DiscardAction((n, n + 1, n + 2)))
            else:
                # local wires q, c, anc
                wires = (j, n, n + 1)
                carry.append(AllocAction((c, 0), (tag, "anc")))
                new, carry = _construction_rounds(ch, wires, c, tag, carry, (l, j))
                carry.append(DiscardAction((n, n + 1)))
            rounds += new
    return Schedule("indirect", n, rounds, carry)
