"""Client-side tracking of the one-time pad Z^z X^x.

A frame (x, z) stands for the operator prod_i Z_i^{z_i} X_i^{x_i}. Conjugation
rules are not hand-written: they are computed once per (gate, local pad) by
brute-force matrix conjugation and cached. Global phases are dropped throughout.

A CorrectionPlan describes what a gate U does to a padded state P|psi>::

    U P |psi>  ~  V P' U |psi>

where P' = P xor frame_update and V is the ordered product of scheduled_gates
(leftmost first). V is a residue the client still has to cancel.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .quantum_core import Gate, circuit_unitary, equal_up_to_phase, single_qubit_matrix


class FrameError(ValueError):
    pass


@dataclass(frozen=True)
class PauliFrame:
    x: tuple[int, ...]
    z: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(int(b) & 1 for b in self.x))
        object.__setattr__(self, "z", tuple(int(b) & 1 for b in self.z))
        if len(self.x) != len(self.z):
            raise FrameError("x and z pads must have equal length")

    @classmethod
    def _raw(cls, x: tuple, z: tuple) -> "PauliFrame":
        # trusted constructor for already-normalised bit tuples
        obj = object.__new__(cls)
        object.__setattr__(obj, "x", x)
        object.__setattr__(obj, "z", z)
        return obj

    @classmethod
    def zeros(cls, n: int) -> "PauliFrame":
        return cls._raw((0,) * n, (0,) * n)

    @classmethod
    def single(cls, n: int, qubit: int, x: int = 0, z: int = 0) -> "PauliFrame":
        return cls.zeros(n).flip(qubit, x=x, z=z)

    @property
    def n(self) -> int:
        return len(self.x)

    def __xor__(self, other: "PauliFrame") -> "PauliFrame":
        if other.n != self.n:
            raise FrameError(f"frame sizes differ: {self.n} vs {other.n}")
        return PauliFrame._raw(tuple(a ^ b for a, b in zip(self.x, other.x)),
                               tuple(a ^ b for a, b in zip(self.z, other.z)))

    def flip(self, qubit: int, x: int = 0, z: int = 0) -> "PauliFrame":
        xs, zs = list(self.x), list(self.z)
        xs[qubit] ^= int(x) & 1
        zs[qubit] ^= int(z) & 1
        return PauliFrame._raw(tuple(xs), tuple(zs))

    def set(self, qubit: int, x: int, z: int) -> "PauliFrame":
        xs, zs = list(self.x), list(self.z)
        xs[qubit], zs[qubit] = int(x) & 1, int(z) & 1
        return PauliFrame(xs, zs)

    def local(self, qubits: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return tuple(self.x[q] for q in qubits), tuple(self.z[q] for q in qubits)

    def extend(self, n_extra: int, x: Sequence[int] | None = None) -> "PauliFrame":
        xs = tuple(x) if x is not None else (0,) * n_extra
        return PauliFrame(self.x + xs, self.z + (0,) * n_extra)

    def drop(self, qubits: Sequence[int]) -> "PauliFrame":
        gone = set(qubits)
        keep = [q for q in range(self.n) if q not in gone]
        return PauliFrame([self.x[q] for q in keep], [self.z[q] for q in keep])

    def is_identity(self) -> bool:
        return not any(self.x) and not any(self.z)

    def matrix(self, qubits: Sequence[int] | None = None) -> np.ndarray:
        qubits = range(self.n) if qubits is None else qubits
        xs, zs = self.local(list(qubits))
        return pauli_matrix(xs, zs)


@dataclass(frozen=True)
class ScheduledGate:
    kind: str
    qubits: tuple[int, ...]
    when: str | None = None

    def gate(self) -> Gate:
        return Gate(self.kind, self.qubits)

    def inverse(self) -> "ScheduledGate":
        return ScheduledGate(_INVERSE.get(self.kind, self.kind), self.qubits, self.when)


_INVERSE = {"S": "Sdg", "Sdg": "S", "T": "Tdg", "Tdg": "T", "cS": "cSdg", "cSdg": "cS"}


@dataclass(frozen=True)
class CorrectionPlan:
    frame_update: PauliFrame
    scheduled_gates: tuple[ScheduledGate, ...] = field(default_factory=tuple)

    def is_identity(self) -> bool:
        return self.frame_update.is_identity() and not self.scheduled_gates

    def cancelling_gates(self) -> list[ScheduledGate]:
        """Gates that undo the residue V, in application order."""
        return [g.inverse() for g in self.scheduled_gates]


def pauli_matrix(xs: Sequence[int], zs: Sequence[int]) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    X, Z = single_qubit_matrix("X"), single_qubit_matrix("Z")
    for x, z in zip(xs, zs):
        local = np.linalg.matrix_power(Z, z) @ np.linalg.matrix_power(X, x)
        m = np.kron(m, local)
    return m


def decompose_pauli(m: np.ndarray, tol: float = 1e-10) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
    """(x, z) with m ~ Z^z X^x up to phase, or None if m is not a Pauli string."""
    k = int(np.log2(m.shape[0]))
    for bits in itertools.product((0, 1), repeat=2 * k):
        xs, zs = bits[:k], bits[k:]
        if equal_up_to_phase(m, pauli_matrix(xs, zs), tol):
            return xs, zs
    return None


def _local_matrix(kind: str) -> np.ndarray:
    return Gate(kind, tuple(range(_ARITY[kind]))).matrix()


_ARITY = {"H": 1, "S": 1, "Sdg": 1, "T": 1, "Tdg": 1, "X": 1, "Y": 1, "Z": 1,
          "cX": 2, "cZ": 2, "cS": 2, "cSdg": 2, "Toffoli": 3}

CLIFFORD_KINDS = frozenset({"H", "S", "Sdg", "X", "Y", "Z", "cX", "cZ", "cS", "cSdg"})


def _residue_candidates(kind: str) -> list[tuple[tuple[str, tuple[int, ...]], ...]]:
    """Ordered candidate residues (as local gate lists) for non-Pauli-preserving gates."""
    if kind in ("T", "Tdg"):
        return [(), (("Sdg", (0,)),), (("S", (0,)),)]
    if kind in ("cS", "cSdg"):
        cands = []
        for i, j, c in itertools.product((0, 1), (0, 1), (0, 1)):
            gates = []
            if i:
                gates.append(("S", (0,)))
            if j:
                gates.append(("S", (1,)))
            if c:
                gates.append(("cZ", (0, 1)))
            cands.append(tuple(gates))
        return sorted(cands, key=len)
    return [()]


def _embed_local(gates, k: int) -> np.ndarray:
    return circuit_unitary([Gate(kind, q) for kind, q in gates], k)


@lru_cache(maxsize=None)
def local_conjugation(kind: str, xs: tuple[int, ...], zs: tuple[int, ...]):
    """Brute-force U P U^dag = V P' for a gate kind acting on its own qubits 0..k-1.

    Returns (x', z', residue) with residue a tuple of (kind, local qubits).
    """
    k = _ARITY[kind]
    u = _local_matrix(kind)
    conj = u @ pauli_matrix(xs, zs) @ u.conj().T
    if kind == "Toffoli":
        residue = _toffoli_residue(xs, zs)
        cands = [residue]
    else:
        cands = _residue_candidates(kind)
    for cand in cands:
        v = _embed_local(cand, k) if cand else np.eye(2 ** k)
        found = decompose_pauli(v.conj().T @ conj)
        if found is not None:
            return found[0], found[1], tuple(cand)
    raise FrameError(f"no residue found for {kind} with pad x={xs} z={zs}")


def _toffoli_residue(xs, zs) -> tuple:
    # generator table for Toffoli(a, b -> c):
    #   X_a -> X_a cX(b->c), X_b -> X_b cX(a->c), Z_c -> Z_c cZ(a, b)
    xa, xb, _ = xs
    _, _, zc = zs
    res = []
    if xa:
        res.append(("cX", (1, 2)))
    if xb:
        res.append(("cX", (0, 2)))
    if zc:
        res.append(("cZ", (0, 1)))
    return tuple(res)


def _check_gate(frame: PauliFrame, qubits: Sequence[int]) -> None:
    for q in qubits:
        if not 0 <= q < frame.n:
            raise FrameError(f"qubit {q} out of range for a {frame.n}-qubit frame")
    if len(set(qubits)) != len(qubits):
        raise FrameError(f"index clash in {list(qubits)}")


def _plan(frame: PauliFrame, kind: str, qubits: Sequence[int], when=None) -> CorrectionPlan:
    qubits = list(qubits)
    _check_gate(frame, qubits)
    xs, zs = frame.local(qubits)
    nx, nz, residue = local_conjugation(kind, xs, zs)
    delta = PauliFrame.zeros(frame.n)
    for q, a, b, c, d in zip(qubits, xs, zs, nx, nz):
        delta = delta.flip(q, x=a ^ c, z=b ^ d)
    sched = tuple(ScheduledGate(g, tuple(qubits[i] for i in loc), when) for g, loc in residue)
    return CorrectionPlan(delta, sched)


def conjugate_clifford(frame: PauliFrame, gate: Gate) -> PauliFrame:
    """Frame after a Clifford: U Z^z X^x U^dag = Z^z' X^x' up to phase.

    Controlled-S only conjugates Paulis to Paulis when neither qubit carries an
    X pad; otherwise use clifford_correction to get the residue.
    """
    if gate.kind not in CLIFFORD_KINDS:
        raise FrameError(f"unsupported gate kind {gate.kind!r} for frame conjugation")
    plan = _plan(frame, gate.kind, gate.qubits)
    if plan.scheduled_gates:
        raise FrameError(f"{gate.kind} maps this pad outside the Pauli group; use clifford_correction")
    return frame ^ plan.frame_update


def clifford_correction(frame: PauliFrame, gate: Gate, when: str | None = None) -> CorrectionPlan:
    if gate.kind not in CLIFFORD_KINDS:
        raise FrameError(f"unsupported gate kind {gate.kind!r}")
    return _plan(frame, gate.kind, gate.qubits, when)


def toffoli_correction(frame: PauliFrame, controls: tuple[int, int], target: int,
                       when: str | None = None) -> CorrectionPlan:
    a, b = controls
    return _plan(frame, "Toffoli", (a, b, target), when)


def t_frame_update(frame: PauliFrame, qubit: int, when: str | None = None) -> CorrectionPlan:
    """T on a padded qubit: T X T^dag = S^dag Z X, T Z T^dag = Z."""
    return _plan(frame, "T", (qubit,), when)


def track(frame: PauliFrame, gate: Gate) -> CorrectionPlan:
    """Dispatch to the right rule for any supported gate."""
    if gate.kind == "Toffoli":
        return toffoli_correction(frame, gate.qubits[:2], gate.qubits[2])
    if gate.kind in ("T", "Tdg"):
        return _plan(frame, gate.kind, gate.qubits)
    return clifford_correction(frame, gate)


def depad_results(frame: PauliFrame, bits: Sequence[int]) -> tuple[int, ...]:
    if len(bits) != frame.n:
        raise FrameError(f"{len(bits)} result bits for a {frame.n}-qubit frame")
    return tuple((int(b) ^ x) & 1 for b, x in zip(bits, frame.x))
