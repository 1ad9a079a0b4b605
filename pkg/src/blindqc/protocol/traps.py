"""Trap wires: extra qubits whose honest final values the client knows.

Trap wires sit after the data wires. A single trap is prepared in its expected
bit and never switched on. A GHZ trap is built with H on its first wire and a
controlled-NOT chain along the rest, so honest final bits are all equal.
Placement is greedy, interleaved with the data gates by the compiler.
"""
from __future__ import annotations

from typing import Sequence

from ..compiler import CircuitIR, CompileError, TrapSpec
from ..quantum_core import Gate


class TrapError(CompileError):
    pass


def check_traps(n_data: int, traps: Sequence[TrapSpec]) -> None:
    seen: set[int] = set()
    for trap in traps:
        for w in trap.wires:
            if w < n_data:
                raise TrapError(f"trap wire {w} overlaps the data wires 0..{n_data - 1}")
            if w in seen:
                raise TrapError(f"trap wire {w} used twice")
            seen.add(w)


def insert_traps(circuit: CircuitIR, traps: Sequence[TrapSpec]) -> CircuitIR:
    traps = list(traps)
    check_traps(circuit.n, traps)
    if not traps:
        return CircuitIR(circuit.n, list(circuit.gates), circuit.inputs, [])
    n = max(circuit.n, max(w for t in traps for w in t.wires) + 1)
    inputs = list(circuit.inputs) + [0] * (n - circuit.n)
    gates = list(circuit.gates)
    for trap in traps:
        if trap.kind == "single":
            inputs[trap.wires[0]] = trap.expected
        else:
            w = trap.wires
            gates.append(Gate("H", (w[0],)))
            gates += [Gate("cX", (a, b)) for a, b in zip(w, w[1:])]
    return CircuitIR(n, gates, tuple(inputs), traps)


def trap_verdict(traps: Sequence[TrapSpec], bits: Sequence[int]) -> bool:
    """True when every trap shows its honest value in the de-padded bits."""
    for trap in traps:
        vals = [int(bits[w]) for w in trap.wires]
        if trap.kind == "single" and vals[0] != trap.expected:
            return False
        if trap.kind == "ghz" and len(set(vals)) != 1:
            return False
    return True
