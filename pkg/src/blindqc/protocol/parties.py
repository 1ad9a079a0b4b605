"""Client and server state machines.

The server only ever sees the SetupMessage and the per-round ciphertexts; it
runs the public schedule and reports measurement outcomes. The client holds
the secret key, the pads and the program, decodes every outcome and chooses
the next round's hidden bits from the updated pad.
"""
from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..compiler import (
    CircuitIR,
    LayerProgram,
    QCAProgram,
    TrapSpec,
    compile_direct,
    compile_indirect,
    pairs_a,
    pairs_b,
)
from ..crypto import (
    Ciphertext,
    PublicKey,
    SchemeParams,
    SecretKey,
    encrypt,
    invert_claw,
    keygen,
)
from ..gadgets import (
    GadgetOutcome,
    client_corrections_cv,
    client_corrections_hadamard,
    client_corrections_phase,
    cv_circuit,
    hadamard_circuit,
    hadamard_enacted,
    op_keys,
    phase_circuit,
    run_gadget_circuit,
)
from ..pauli_frame import PauliFrame, conjugate_clifford, depad_results, toffoli_correction
from ..quantum_core import Gate, QuantumState, RegisterLayout, append_register, apply_gate, init_state, measure_branches
from .messages import EncryptedStep, FinalRequest, FinalResult, OutcomeReport, SetupMessage
from .schedule import (
    AllocAction,
    DiscardAction,
    GadgetAction,
    GateAction,
    Round,
    Schedule,
    SubstitutedToffoli,
    direct_schedule,
    indirect_schedule,
)
from .traps import check_traps, insert_traps, trap_verdict


class ProtocolError(RuntimeError):
    pass


# -- adversary / fault hooks (test instruments) ---------------------------------------


@dataclass
class Tamper:
    """Scripted deviation: an extra X on ``qubit`` after round ``round``, or the
    cV of gadget ``gadget`` in round ``round`` left out."""

    round: int
    kind: str
    qubit: int = 0
    gadget: int = 0


@dataclass
class Fault:
    """Replace the Y of one reported gadget by a value outside the image of f0."""

    round: int = 0
    gadget: int = 0
    remaining: int = 1


def _non_image_y(pk: PublicKey) -> tuple[int, ...]:
    from ..crypto import all_bitstrings
    from .. import gf2

    full = np.hstack([pk.A, pk.s.reshape(-1, 1)])
    for y in all_bitstrings(pk.m_c):
        if gf2.solve(full, np.array(y)) is None:
            return tuple(y)
    raise ProtocolError("every Y has a preimage; fault injection needs m_c > k + 1")


# -- server ---------------------------------------------------------------------------


@dataclass
class ServerState:
    session: str
    pk: PublicKey
    scheme: str
    n: int
    schedule: Schedule
    state: QuantumState
    rng: np.random.Generator
    round: int = 0
    log: list = field(default_factory=list)
    transcript: list = field(default_factory=list)
    tamper: Tamper | None = None
    fault: Fault | None = None
    finished: bool = False


def public_schedule(setup: SetupMessage) -> Schedule:
    if setup.scheme == "direct":
        return direct_schedule(setup.n, setup.units)
    if setup.scheme == "indirect":
        return indirect_schedule(setup.n, setup.steps, setup.program)
    raise ProtocolError(f"unknown scheme {setup.scheme!r}")


def server_setup(setup: SetupMessage, seed: int | None = None, tamper: Tamper | None = None,
                 fault: Fault | None = None) -> ServerState:
    if len(setup.basis) != setup.n:
        raise ProtocolError("basis string length does not match n")
    state = init_state(RegisterLayout.of(("q", setup.n)), setup.basis)
    return ServerState(setup.session, setup.pk, setup.scheme, setup.n, public_schedule(setup), state,
                       np.random.default_rng(seed), tamper=tamper, fault=fault)


def plain_branches(state: QuantumState, act, rng=None, branches: bool = False) -> list[tuple[float, QuantumState]]:
    """Apply a non-gadget action; discards measure wires out (sampled or all branches)."""
    if isinstance(act, GateAction):
        return [(1.0, apply_gate(state, act.gate))]
    if isinstance(act, SubstitutedToffoli):
        if act.c_value:
            state = apply_gate(state, Gate("cX", (act.x, act.t)))
        return [(1.0, state)]
    if isinstance(act, AllocAction):
        for b in act.bits:
            state = append_register(state, f"w{state.n_qubits}", bits=[b])
        return [(1.0, state)]
    if isinstance(act, DiscardAction):
        res = measure_branches(state, list(act.qubits), None if branches else rng)
        return [(br.probability if branches else 1.0, br.post_state) for br in res]
    raise ProtocolError(f"not a plain action: {act!r}")


def gadget_circuit(state: QuantumState, act: GadgetAction, pk: PublicKey, y_hat: Ciphertext):
    if act.kind == "hadamard":
        return hadamard_circuit(state, act.qubits[0], pk, y_hat)
    if act.kind == "phase":
        return phase_circuit(state, act.qubits[0], act.power, pk, y_hat)
    if act.kind == "cv":
        return cv_circuit(state, act.qubits[0], act.qubits[1], act.V, pk, y_hat)
    raise ProtocolError(f"unknown gadget kind {act.kind!r}")


def _log_key(act, circ=None) -> tuple:
    if isinstance(act, GadgetAction):
        return ("gadget", act.kind, act.qubits, act.V, act.power, tuple(op_keys(circ.ops)))
    if isinstance(act, GateAction):
        return ("gate", act.gate.key())
    if isinstance(act, SubstitutedToffoli):
        return ("cX", act.x, act.t) if act.c_value else ("skip", act.x, act.t)
    if isinstance(act, AllocAction):
        return ("alloc", act.bits)
    return ("discard", act.qubits)


def prepared_gadget(server: ServerState, act: GadgetAction, y_hat: Ciphertext, gi: int, state=None):
    """Gadget circuit as the (possibly tampering) server runs it."""
    state = server.state if state is None else state
    circ = gadget_circuit(state, act, server.pk, y_hat)
    t = server.tamper
    if t and t.kind == "skip_cv" and t.round == server.round and t.gadget == gi:
        circ.ops = [op for op in circ.ops if not (isinstance(op, Gate) and op.kind == "cV")]
    return circ


def after_round_tamper(server: ServerState, state: QuantumState) -> QuantumState:
    t = server.tamper
    if t and t.kind == "extra_x" and t.round == server.round:
        state = apply_gate(state, Gate("X", (t.qubit,)))
    return state


def server_step(server: ServerState, msg) -> OutcomeReport:
    """Run the current round with the ciphertexts from a SetupMessage or EncryptedStep."""
    if server.finished:
        raise ProtocolError("session already finalized")
    if server.round >= len(server.schedule.rounds):
        raise ProtocolError(f"round {server.round} out of range")
    if isinstance(msg, EncryptedStep) and msg.round != server.round:
        raise ProtocolError(f"expected round {server.round}, got {msg.round}")
    rnd = server.schedule.rounds[server.round]
    y_hats = list(msg.y_hats)
    if len(y_hats) != len(rnd.gadgets):
        raise ProtocolError(f"round {server.round} needs {len(rnd.gadgets)} ciphertexts, got {len(y_hats)}")
    for c in y_hats:
        if len(c) != server.pk.m_c:
            raise ProtocolError(f"ciphertext of {len(c)} bits, expected {server.pk.m_c}")
    outcomes = []
    gi = 0
    for act in rnd.actions:
        if isinstance(act, GadgetAction):
            circ = prepared_gadget(server, act, y_hats[gi], gi)
            server.log.append(_log_key(act, circ) + (len(y_hats[gi]),))
            server.state, outcome = run_gadget_circuit(circ, server.rng)
            f = server.fault
            if f and f.remaining > 0 and f.round == server.round and f.gadget == gi:
                outcome = GadgetOutcome(_non_image_y(server.pk), outcome.R, outcome.A)
                f.remaining -= 1
            outcomes.append(outcome)
            gi += 1
        else:
            server.log.append(_log_key(act))
            ((_, server.state),) = plain_branches(server.state, act, server.rng)
    server.state = after_round_tamper(server, server.state)
    report = OutcomeReport(server.session, server.round, tuple(outcomes))
    server.round += 1
    return report


def finalize(server: ServerState, request: FinalRequest | None = None) -> FinalResult:
    if server.round != len(server.schedule.rounds):
        raise ProtocolError(f"final request after {server.round} of {len(server.schedule.rounds)} rounds")
    for act in server.schedule.final_actions:
        server.log.append(_log_key(act))
        ((_, server.state),) = plain_branches(server.state, act, server.rng)
    (br,) = measure_branches(server.state, list(range(server.state.n_qubits)), server.rng)
    server.finished = True
    return FinalResult(server.session, tuple(int(c) for c in br.outcome))


# -- client ---------------------------------------------------------------------------


class ClientBase:
    """Shared client machinery: key material, encryption, claw decoding."""

    scheme = ""

    def __init__(self, sk: SecretKey, pk: PublicKey, schedule: Schedule, rng: np.random.Generator,
                 session: str, n_data: int, traps: Sequence[TrapSpec], frame: PauliFrame,
                 randomize_corrections: bool = False):
        self.sk, self.pk, self.schedule, self.rng = sk, pk, schedule, rng
        self.session, self.n_data, self.traps = session, n_data, list(traps)
        self.frame = frame
        self.round = 0
        self.dhat: list[int] = []
        self.y_hats: list[Ciphertext] = []
        self.randomize_corrections = randomize_corrections
        self._claws: dict = {}

    def copy(self):
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new.dhat = list(self.dhat)
        new.y_hats = list(self.y_hats)
        return new

    def _encrypt(self, bits: list[int], correction_mask: Sequence[bool] | None = None) -> list[Ciphertext]:
        """Encrypt ``bits``; in substitution mode masked slots get a fresh random bit, written back."""
        out = []
        for i, b in enumerate(bits):
            if self.randomize_corrections and correction_mask is not None and correction_mask[i]:
                b = bits[i] = int(self.rng.integers(0, 2))
            out.append(encrypt(self.pk, b, self.rng.integers(0, 2, size=self.pk.k)))
        return out

    def claw(self, gi: int, outcome: GadgetOutcome):
        key = (outcome.Y, self.y_hats[gi].bits)
        if key not in self._claws:
            self._claws[key] = invert_claw(self.sk, self.pk, Ciphertext(outcome.Y), self.y_hats[gi])
        return self._claws[key]

    @property
    def current(self) -> Round:
        return self.schedule.rounds[self.round]

    def finish(self) -> None:
        for act in self.schedule.final_actions:
            self._plain(act)

    def _plain(self, act) -> None:  # pragma: no cover - overridden where plain actions exist
        raise ProtocolError(f"unexpected action {act!r}")

    def decode(self, bits: Sequence[int]) -> tuple[tuple[int, ...], bool]:
        full = depad_results(self.frame, bits)
        return full[: self.n_data], trap_verdict(self.traps, full)


class DirectClient(ClientBase):
    scheme = "direct"

    def __init__(self, *args, program: LayerProgram, **kw):
        super().__init__(*args, **kw)
        self.program = program
        self.p = [0] * program.n
        self._done_paulis: set = set()

    def copy(self):
        new = super().copy()
        new.p = list(self.p)
        return new

    def key(self) -> tuple:
        return (self.frame.x, self.frame.z, tuple(self.p), tuple(self.dhat))

    def _label(self):
        return self.current.label

    def _apply_paulis(self, unit: int, upto: int) -> None:
        for pos in range(-1, upto + 1):
            if (unit, pos) in self._done_paulis:
                continue
            self._done_paulis = self._done_paulis | {(unit, pos)}
            for after, q in self.program.units[unit].paulis:
                if after == pos:
                    self.frame = self.frame.flip(q, x=1)

    def begin_round(self) -> list[Ciphertext]:
        u, step = self._label()
        unit = self.program.units[u]
        n = self.program.n
        mask = None
        if step == "H":
            self._apply_paulis(u, -1)
            if any(self.p):
                raise ProtocolError("pending phase before a Hadamard slot")
            self.dhat = [1 - unit.h[q] for q in range(n)]
        elif step == "T":
            self.dhat = [unit.phase[q] & 1 for q in range(n)]
        elif step == "S":
            if any(v % 2 for v in self.p):
                raise ProtocolError("odd pending phase before an S slot")
            self.dhat = [(((unit.phase[q] >> 1) & 1) - self.p[q] // 2) % 2 for q in range(n)]
            mask = [True] * n
        else:
            self.dhat = list(unit.cz_a if step == "CZA" else unit.cz_b)
        self.y_hats = self._encrypt(self.dhat, mask)
        return list(self.y_hats)

    def absorb(self, gi: int, outcome: GadgetOutcome) -> None:
        u, step = self._label()
        unit = self.program.units[u]
        claw = self.claw(gi, outcome)
        d = self.dhat[gi]
        n = self.frame.n
        if step == "H":
            q = gi
            plan = client_corrections_hadamard(outcome, claw, d, q, n)
            if hadamard_enacted(d):
                self.frame = conjugate_clifford(self.frame, Gate("H", (q,)))
            self.frame = self.frame ^ plan.frame_update
        elif step in ("T", "S"):
            q = gi
            w = 1 if step == "T" else 2
            e = (unit.phase[q] & 1) if step == "T" else 2 * ((unit.phase[q] >> 1) & 1)
            plan = client_corrections_phase(outcome, claw, d, w, q, n)
            self.frame = self.frame ^ plan.frame_update
            residue = sum(2 if g.kind == "S" else 6 for g in plan.scheduled_gates)
            self.p[q] = (self.p[q] + w * d + residue - e + 2 * e * self.frame.x[q]) % 8
        else:
            a, b = (pairs_a(self.program.n) if step == "CZA" else pairs_b(self.program.n))[gi]
            if d:
                self.frame = conjugate_clifford(self.frame, Gate("cZ", (a, b)))
            plan = client_corrections_cv(outcome, claw, d, "Z", a, b, n)
            self.frame = self.frame ^ plan.frame_update

    def end_round(self) -> None:
        u, step = self._label()
        unit = self.program.units[u]
        if step == "S":
            for q in range(self.program.n):
                if self.p[q] == 4:
                    self.frame = self.frame.flip(q, z=1)
                    self.p[q] = 0
                elif self.p[q] and not self.randomize_corrections:
                    raise ProtocolError(f"phase residue {self.p[q]} left on qubit {q}")
                self.p[q] = 0
                if unit.phase[q] & 4:
                    self.frame = self.frame.flip(q, z=1)
        upto = {"H": 0, "T": 0, "S": 1, "CZA": 2, "CZB": 3}[step]
        rounds = self.schedule.rounds
        if self.round + 1 == len(rounds) or rounds[self.round + 1].label[0] != u:
            upto = 3
        self._apply_paulis(u, upto)


class IndirectClient(ClientBase):
    scheme = "indirect"

    def __init__(self, *args, program: QCAProgram, prog_pads: dict, **kw):
        super().__init__(*args, **kw)
        self.program = program
        self.prog_pads = prog_pads
        self.pending: tuple = ()

    def key(self) -> tuple:
        return (self.frame.x, self.frame.z, self.pending, tuple(self.dhat))

    def _plain(self, act) -> None:
        if isinstance(act, GateAction) and act.gate.kind == "Toffoli":
            self._toffoli(act.gate.qubits[:2], act.gate.qubits[2])
        elif isinstance(act, SubstitutedToffoli):
            self._toffoli(act.order, act.t)
        elif isinstance(act, GateAction):
            self.frame = conjugate_clifford(self.frame, act.gate)
        elif isinstance(act, AllocAction):
            xs = [0 if tag == "anc" else self.prog_pads[tag] for tag in act.tags]
            self.frame = self.frame.extend(len(xs), xs)
        elif isinstance(act, DiscardAction):
            self.frame = self.frame.drop(act.qubits)
        else:
            raise ProtocolError(f"unexpected action {act!r}")

    def _toffoli(self, controls, target) -> None:
        if self.pending:
            raise ProtocolError("Toffoli corrections still pending")
        plan = toffoli_correction(self.frame, tuple(controls), target)
        self.frame = self.frame ^ plan.frame_update
        self.pending = tuple((g.kind, g.qubits) for g in plan.scheduled_gates)

    def begin_round(self) -> list[Ciphertext]:
        gadgets = []
        for act in self.current.actions:
            if isinstance(act, GadgetAction):
                gadgets.append(act)
            else:
                if gadgets:
                    raise ProtocolError("plain action after a gadget within a round")
                self._plain(act)
        self.dhat = [int(self._gen(g) in self.pending) for g in gadgets]
        self.y_hats = self._encrypt(self.dhat, [True] * len(gadgets))
        return list(self.y_hats)

    @staticmethod
    def _gen(act: GadgetAction) -> tuple:
        return ("cX" if act.V == "X" else "cZ", act.qubits)

    def absorb(self, gi: int, outcome: GadgetOutcome) -> None:
        act = self.current.gadgets[gi]
        d = self.dhat[gi]
        claw = self.claw(gi, outcome)
        ctrl, tgt = act.qubits
        plan = client_corrections_cv(outcome, claw, d, act.V, ctrl, tgt, self.frame.n)
        if d:
            gen = self._gen(act)
            self.pending = tuple(g for g in self.pending if g != gen)
        delta = plan.frame_update
        for kind, qs in self.pending:
            delta = conjugate_clifford(delta, Gate(kind, qs))
        self.frame = self.frame ^ delta

    def end_round(self) -> None:
        if self.pending and not self.randomize_corrections:
            raise ProtocolError(f"uncorrected Toffoli residue {self.pending}")
        self.pending = ()


# -- setup / steps ---------------------------------------------------------------------


def _bits(rng, n) -> list[int]:
    return [int(b) for b in rng.integers(0, 2, size=n)]


def client_setup(circuit: CircuitIR, params: SchemeParams, traps: Sequence[TrapSpec] = (),
                 seed: int = 0, scheme: str = "direct", steps: int | None = None,
                 randomize_corrections: bool = False, session: str | None = None):
    """Sample keys and pads, compile, and encrypt the first round.

    Returns (client, SetupMessage).
    """
    rng = np.random.default_rng(seed)
    key_seed = int(rng.integers(0, 2 ** 63))
    pk, sk = keygen(SchemeParams(params.k, params.m_c, key_seed))
    session = session or uuid.UUID(int=int(rng.integers(0, 2 ** 63)) << 64 | key_seed).hex[:16]
    traps = list(circuit.traps) + list(traps)
    if scheme == "direct":
        full = insert_traps(circuit, traps)
        program = compile_direct(full)
        N = full.n
        x = _bits(rng, N)
        schedule = direct_schedule(N, len(program.units))
        client = DirectClient(sk, pk, schedule, rng, session, circuit.n, traps,
                              PauliFrame(x, [0] * N), randomize_corrections, program=program)
        basis = tuple(b ^ p for b, p in zip(full.inputs, x))
        units, prog_bits, n_steps = len(program.units), (), 0
    elif scheme == "indirect":
        if traps:
            check_traps(circuit.n, traps)
            raise ProtocolError("trap wires are only supported on the direct scheme")
        program = compile_indirect(circuit, steps)
        N = circuit.n
        x = _bits(rng, N)
        plain = program.program_bits()
        pads = _bits(rng, len(plain))
        padded = tuple(a ^ b for a, b in zip(plain, pads))
        prog_pads = {f"prog:{i // N}:{i % N}": pads[i] for i in range(len(plain))}
        schedule = indirect_schedule(N, program.m, padded)
        client = IndirectClient(sk, pk, schedule, rng, session, N, [], PauliFrame(x, [0] * N),
                                randomize_corrections, program=program, prog_pads=prog_pads)
        basis = tuple(b ^ p for b, p in zip(circuit.inputs, x))
        units, prog_bits, n_steps = (program.m + 1) // 2, padded, program.m
    else:
        raise ProtocolError(f"unknown scheme {scheme!r}")
    y_hats = tuple(client.begin_round()) if schedule.rounds else ()
    setup = SetupMessage(session, pk, basis, N, units, scheme, y_hats, prog_bits, n_steps)
    return client, setup


def client_step(client: ClientBase, report: OutcomeReport):
    """Absorb a round's outcomes; return the next EncryptedStep or a FinalRequest."""
    if report.round != client.round:
        raise ProtocolError(f"report for round {report.round}, expected {client.round}")
    if len(report.outcomes) != len(client.dhat):
        raise ProtocolError(f"{len(report.outcomes)} outcomes for {len(client.dhat)} gadgets")
    for gi, outcome in enumerate(report.outcomes):
        client.absorb(gi, outcome)
    client.end_round()
    client.round += 1
    if client.round < len(client.schedule.rounds):
        return EncryptedStep(client.session, client.round, tuple(client.begin_round()))
    return FinalRequest(client.session, client.round)


def client_decode(client: ClientBase, result: FinalResult) -> tuple[tuple[int, ...], bool]:
    client.finish()
    if len(result.bits) != client.frame.n:
        raise ProtocolError(f"{len(result.bits)} result bits for {client.frame.n} wires")
    return client.decode(result.bits)
