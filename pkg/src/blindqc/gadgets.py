"""Encrypted gate gadgets (server side) and their client-side corrections.

Every gadget appends fresh ancilla registers to the state, runs a fixed list of
operations whose shape does not depend on the hidden bit, and measures the
ancillas out again. The only input that changes with the hidden bit is the
ciphertext y_hat fed to U_f.

Corrected actions (all factors commute, phases dropped):

* controlled-V:  Z_c^{R.(dh||r0^r1)} (cV)^{-2 d0 dh} V_t^{d0} (cV)^{dh}
* phase P:       Z^{R.(dh||r0^r1)} P^{-2 d0 dh} P^{dh}
* Hadamard:      Z^{~dh} Y^{(dh||r0^r1).R ^ A ^ (d0^A) dh} H^{~dh}
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .crypto import (
    Ciphertext,
    ClawFreeFamily,
    CryptoError,
    DecodedClaw,
    PublicKey,
    all_bitstrings,
    encrypt,
)
from .pauli_frame import CorrectionPlan, PauliFrame, ScheduledGate
from .quantum_core import (
    Gate,
    QuantumState,
    append_controlled_preparation,
    append_register,
    apply_gate,
    apply_permutation,
    measure_branches,
    phase_matrix,
    single_qubit_matrix,
)

# The Hadamard gadget enacts H when the hidden bit is 0 (the ~dh exponents).
HADAMARD_ENACTED_ON = 0

PAULI_V = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
CLIFFORD_V = ("S", "Sdg")


class GadgetError(ValueError):
    pass


@dataclass(frozen=True)
class GadgetOutcome:
    Y: tuple[int, ...]
    R: tuple[int, ...]
    A: int | None = None


@dataclass(frozen=True)
class GeneralizedOutcome:
    c: tuple[int, ...]
    y: tuple[int, ...]


@dataclass
class GadgetBranch:
    probability: float
    state: QuantumState
    outcome: GadgetOutcome | GeneralizedOutcome


# -- U_f ---------------------------------------------------------------------


@dataclass(frozen=True)
class UfOp:
    """|a>|d>|r>|y> -> |a>|d>|r>|y + f_a(d, r)>, with f0 = Enc and f1 = Enc + y_hat."""

    a: int
    d: int
    r: tuple[int, ...]
    y: tuple[int, ...]
    pk: PublicKey
    y_hat: Ciphertext

    @property
    def qubits(self) -> list[int]:
        return [self.a, self.d, *self.r, *self.y]

    def key(self) -> tuple:
        # deliberately excludes y_hat: it is the only hidden-bit-dependent input
        return ("Uf", self.a, self.d, self.r, self.y)

    def permutation(self) -> np.ndarray:
        return _uf_permutation(self.pk, self.y_hat)

    def apply(self, state: QuantumState) -> QuantumState:
        return apply_permutation(state, self.qubits, self.permutation())


@lru_cache(maxsize=256)
def _uf_permutation(pk: PublicKey, y_hat: Ciphertext) -> np.ndarray:
    k, m_c = pk.k, pk.m_c
    yh = int("".join(map(str, y_hat.bits)), 2)
    perm = np.empty(2 ** (2 + k + m_c), dtype=np.int64)
    ys = np.arange(2 ** m_c)
    for a in (0, 1):
        for d in (0, 1):
            for ri, r in enumerate(all_bitstrings(k)):
                f = int("".join(map(str, encrypt(pk, d, r).bits)), 2) ^ (yh if a else 0)
                base = ((a << (1 + k)) | (d << k) | ri) << m_c
                perm[base + ys] = base + (ys ^ f)
    return perm


def build_uf(pk: PublicKey, y_hat: Ciphertext, a: int = 0, d: int = 1,
             r: Sequence[int] | None = None, y: Sequence[int] | None = None) -> UfOp:
    """U_f on qubits (a, d, r, y); default indices are the local layout 0..1+k+m_c."""
    if len(y_hat) != pk.m_c:
        raise GadgetError(f"y_hat has {len(y_hat)} bits, key expects {pk.m_c}")
    r = tuple(range(2, 2 + pk.k)) if r is None else tuple(r)
    y = tuple(range(2 + pk.k, 2 + pk.k + pk.m_c)) if y is None else tuple(y)
    if len(r) != pk.k or len(y) != pk.m_c:
        raise GadgetError("register widths do not match the scheme parameters")
    return UfOp(a, d, r, y, pk, y_hat)


Op = Union[Gate, UfOp]


def execute(state: QuantumState, ops: Sequence[Op]) -> QuantumState:
    for op in ops:
        state = op.apply(state) if isinstance(op, UfOp) else apply_gate(state, op)
    return state


def op_keys(ops: Sequence[Op]) -> list[tuple]:
    return [op.key() for op in ops]


# -- circuits ------------------------------------------------------------------


@dataclass
class GadgetCircuit:
    """Ancilla-extended state plus the ops to run and the registers to measure."""

    state: QuantumState
    ops: list[Op]
    groups: dict[str, list[int]]


def _fresh(state: QuantumState, pk: PublicKey, names: Sequence[str]) -> tuple[QuantumState, dict]:
    widths = {"a": 1, "d": 1, "r": pk.k, "y": pk.m_c}
    for name in names:
        if name in state.layout:
            raise GadgetError(f"ancilla register {name!r} already allocated")
        state = append_register(state, name, width=widths[name])
    return state, {name: state.layout.qubits(name) for name in names}


def _v_matrix(V) -> np.ndarray:
    if isinstance(V, str):
        return single_qubit_matrix(V)
    return np.asarray(V, dtype=complex)


def cv_circuit(state: QuantumState, control: int, target: int, V, pk: PublicKey,
               y_hat: Ciphertext) -> GadgetCircuit:
    if control == target:
        raise GadgetError("control and target must differ")
    state, reg = _fresh(state, pk, ["d", "r", "y"])
    d, r, y = reg["d"][0], reg["r"], reg["y"]
    ops: list[Op] = [Gate("H", (q,)) for q in [d, *r]]
    ops.append(Gate("cV", (d, target), payload=_v_matrix(V)))
    ops.append(build_uf(pk, y_hat, control, d, r, y))
    ops += [Gate("H", (q,)) for q in [d, *r]]
    return GadgetCircuit(state, ops, {"R": [d, *r], "Y": y})


def phase_circuit(state: QuantumState, target: int, power: int, pk: PublicKey,
                  y_hat: Ciphertext) -> GadgetCircuit:
    """The controlled-V gadget with V a global phase: d starts in the magic state T^power|+>."""
    state, reg = _fresh(state, pk, ["d", "r", "y"])
    d, r, y = reg["d"][0], reg["r"], reg["y"]
    ops: list[Op] = [Gate("H", (d,)), Gate("U", (d,), payload=phase_matrix(power))]
    ops += [Gate("H", (q,)) for q in r]
    ops.append(build_uf(pk, y_hat, target, d, r, y))
    ops += [Gate("H", (q,)) for q in [d, *r]]
    return GadgetCircuit(state, ops, {"R": [d, *r], "Y": y})


def hadamard_circuit(state: QuantumState, target: int, pk: PublicKey,
                     y_hat: Ciphertext) -> GadgetCircuit:
    state, reg = _fresh(state, pk, ["a", "d", "r", "y"])
    a, d, r, y = reg["a"][0], reg["d"][0], reg["r"], reg["y"]
    ops: list[Op] = [Gate("H", (q,)) for q in [a, d, *r]]
    ops.append(build_uf(pk, y_hat, a, d, r, y))
    ops.append(Gate("cX", (d, a)))
    ops.append(Gate("ciY", (a, target)))
    ops += [Gate("H", (q,)) for q in [a, d, *r]]
    return GadgetCircuit(state, ops, {"A": [a], "R": [d, *r], "Y": y})


def _measure(circ: GadgetCircuit, rng, branches: bool):
    state = execute(circ.state, circ.ops)
    order = [q for name in circ.groups for q in circ.groups[name]]
    results = measure_branches(state, order, None if branches else rng)
    out = []
    for br in results:
        bits = tuple(int(c) for c in br.outcome)
        pos, fields = 0, {}
        for name, qs in circ.groups.items():
            fields[name] = bits[pos:pos + len(qs)]
            pos += len(qs)
        outcome = GadgetOutcome(fields["Y"], fields["R"], fields["A"][0] if "A" in fields else None)
        out.append(GadgetBranch(br.probability, br.post_state, outcome))
    return out


def run_gadget_circuit(circ: GadgetCircuit, rng=None, branches: bool = False):
    """Run a prepared gadget circuit: one sampled (state, outcome) or every branch."""
    if branches:
        return _measure(circ, None, True)
    if rng is None:
        rng = np.random.default_rng()
    (br,) = _measure(circ, rng, False)
    return br.state, br.outcome


def run_encrypted_cv(state: QuantumState, control: int, target: int, V, pk: PublicKey,
                     y_hat: Ciphertext, rng: np.random.Generator | None = None,
                     branches: bool = False):
    """Encrypted controlled-V from ``control`` onto ``target``.

    Returns (state, outcome) for one sampled run, or every GadgetBranch when
    ``branches`` is set.
    """
    return run_gadget_circuit(cv_circuit(state, control, target, V, pk, y_hat), rng, branches)


def run_encrypted_phase(state: QuantumState, target: int, power: int, pk: PublicKey,
                        y_hat: Ciphertext, rng: np.random.Generator | None = None,
                        branches: bool = False):
    """Encrypted phase gate P = T**power on ``target``."""
    return run_gadget_circuit(phase_circuit(state, target, power, pk, y_hat), rng, branches)


def run_encrypted_hadamard(state: QuantumState, target: int, pk: PublicKey, y_hat: Ciphertext,
                           rng: np.random.Generator | None = None, branches: bool = False):
    return run_gadget_circuit(hadamard_circuit(state, target, pk, y_hat), rng, branches)


# -- client corrections ----------------------------------------------------------


def _dot(a: Sequence[int], b: Sequence[int]) -> int:
    return sum(x & y for x, y in zip(a, b)) & 1


def _mask(claw: DecodedClaw, d_hat: int) -> tuple[int, ...]:
    return (d_hat,) + tuple(a ^ b for a, b in zip(claw.r0, claw.r1))


def _check_claw(claw: DecodedClaw, d_hat: int) -> None:
    if claw.d0 ^ claw.d1 != d_hat:
        raise GadgetError("decoded claw is inconsistent with the hidden bit")


def _v_kind(V) -> str:
    if not isinstance(V, str):
        raise GadgetError("corrections need V given by name")
    if V not in PAULI_V and V not in CLIFFORD_V:
        raise GadgetError(f"no correction rule for V={V!r}")
    return V


def client_corrections_cv(outcome: GadgetOutcome, claw: DecodedClaw, d_hat: int, V,
                          control: int = 1, target: int = 0, n: int = 2) -> CorrectionPlan:
    """Residual factors of the controlled-V gadget around the intended (cV)^dh."""
    _check_claw(claw, d_hat)
    kind = _v_kind(V)
    frame = PauliFrame.zeros(n).flip(control, z=_dot(outcome.R, _mask(claw, d_hat)))
    sched = []
    if kind in PAULI_V:
        x, z = PAULI_V[kind]
        frame = frame.flip(target, x=x * claw.d0, z=z * claw.d0)
    else:
        if claw.d0:
            sched.append(ScheduledGate(kind, (target,)))
        if claw.d0 and d_hat:
            # (cS)^-2 and (cSdg)^-2 are both controlled-Z
            sched.append(ScheduledGate("cZ", (control, target)))
    return CorrectionPlan(frame, tuple(sched))


def phase_residue(power: int, d0: int, d_hat: int) -> int:
    """T-power of the residue P^{-2 d0 dh} for P = T**power."""
    return (-2 * power * d0 * d_hat) % 8


def client_corrections_phase(outcome: GadgetOutcome, claw: DecodedClaw, d_hat: int, power: int,
                             target: int = 0, n: int = 1) -> CorrectionPlan:
    _check_claw(claw, d_hat)
    frame = PauliFrame.zeros(n).flip(target, z=_dot(outcome.R, _mask(claw, d_hat)))
    rho = phase_residue(power, claw.d0, d_hat)
    sched = []
    if rho == 4:
        frame = frame.flip(target, z=1)
    elif rho:
        sched.append(ScheduledGate("S" if rho == 2 else "Sdg", (target,)))
    return CorrectionPlan(frame, tuple(sched))


def hadamard_enacted(d_hat: int) -> bool:
    return int(d_hat) == HADAMARD_ENACTED_ON


def hadamard_y_exponent(outcome: GadgetOutcome, claw: DecodedClaw, d_hat: int) -> int:
    A = outcome.A
    return _dot(_mask(claw, d_hat), outcome.R) ^ A ^ ((claw.d0 ^ A) & d_hat)


def client_corrections_hadamard(outcome: GadgetOutcome, claw: DecodedClaw, d_hat: int,
                                target: int = 0, n: int = 1) -> CorrectionPlan:
    _check_claw(claw, d_hat)
    if outcome.A is None:
        raise GadgetError("Hadamard outcome is missing the A bit")
    e = hadamard_y_exponent(outcome, claw, d_hat)
    z_extra = 1 - int(d_hat)
    return CorrectionPlan(PauliFrame.zeros(n).flip(target, x=e, z=e ^ z_extra))


# -- generalised family gadget ---------------------------------------------------------


_CHECKED: set = set()


def generalized_circuit(state: QuantumState, family: ClawFreeFamily, control: int, target: int,
                        V) -> GadgetCircuit:
    if control == target:
        raise GadgetError("control and target must differ")
    for name in ("x", "fy"):
        if name in state.layout:
            raise GadgetError(f"ancilla register {name!r} already allocated")
    phis = [family.prepare_phi(i) for i in (0, 1)]
    for phi in phis:
        if abs(np.linalg.norm(phi) - 1) > 1e-12:
            raise GadgetError("family state |phi_i> is not normalised")
    state = append_controlled_preparation(state, control, "x", phis)
    state = append_register(state, "fy", width=family.range_bits)
    xq, yq = state.layout.qubits("x"), state.layout.qubits("fy")
    table = family.function_table()
    m = family.range_bits
    xs = np.arange(2 ** family.domain_bits)[:, None]
    ys = np.arange(2 ** m)[None, :]
    perm = ((xs << m) | (ys ^ table[:, None])).ravel()
    ops: list[Op] = [_PermOp(tuple(xq + yq), perm)]
    ops.append(Gate("cV", (xq[family.b_position], target), payload=_v_matrix(V)))
    ops += [Gate("U", (q,), payload=family.w_matrix()) for q in xq]
    return GadgetCircuit(state, ops, {"c": xq, "y": yq})


@dataclass(frozen=True)
class _PermOp:
    qubits: tuple[int, ...]
    perm: np.ndarray

    def key(self) -> tuple:
        return ("Uf", self.qubits)


def run_generalized_gadget(state: QuantumState, family: ClawFreeFamily, control: int, target: int,
                           V, rng: np.random.Generator | None = None, branches: bool = False,
                           check_d_hat: int | None = None):
    """Encrypted controlled-V through an arbitrary claw-free family.

    When ``check_d_hat`` is given (trapdoor side), the family's structural
    properties are verified exhaustively first.
    """
    if check_d_hat is not None:
        key = (id(family), check_d_hat)
        if key not in _CHECKED:
            family.check_properties(check_d_hat)
            _CHECKED.add(key)
    circ = generalized_circuit(state, family, control, target, V)
    st = circ.state
    for op in circ.ops:
        st = apply_permutation(st, op.qubits, op.perm) if isinstance(op, _PermOp) else apply_gate(st, op)
    order = circ.groups["c"] + circ.groups["y"]
    nc = len(circ.groups["c"])
    out = []
    for br in measure_branches(st, order, None if branches else (rng or np.random.default_rng())):
        bits = tuple(int(b) for b in br.outcome)
        out.append(GadgetBranch(br.probability, br.post_state, GeneralizedOutcome(bits[:nc], bits[nc:])))
    if branches:
        return out
    return out[0].state, out[0].outcome


def client_corrections_generalized(outcome: GeneralizedOutcome, family: ClawFreeFamily, d_hat: int,
                                   V, control: int = 1, target: int = 0, n: int = 2) -> CorrectionPlan:
    kind = _v_kind(V)
    try:
        b_y = family.extract_b(outcome.y)
        z0, z1 = family.extract_z(outcome.y, 0), family.extract_z(outcome.y, 1)
    except CryptoError as exc:
        raise GadgetError(f"family inversion failed: {exc}") from exc
    zdiff = tuple(a ^ b for a, b in zip(z0, z1))
    frame = PauliFrame.zeros(n).flip(control, z=_dot(outcome.c, zdiff))
    sched = []
    if kind in PAULI_V:
        x, z = PAULI_V[kind]
        frame = frame.flip(target, x=x * b_y, z=z * b_y)
    else:
        if b_y:
            sched.append(ScheduledGate(kind, (target,)))
        if b_y and d_hat:
            sched.append(ScheduledGate("cZ", (control, target)))
    return CorrectionPlan(frame, tuple(sched))
