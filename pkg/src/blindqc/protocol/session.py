"""End-to-end drivers: message-passing sessions, exhaustive branch exploration,
and transcript verification."""
from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..compiler import CircuitIR, CostReport, TrapSpec, cost_report
from ..crypto import ClawInversionError, SchemeParams
from ..gadgets import run_gadget_circuit
from ..quantum_core import RegisterLayout, apply_gates, fidelity_up_to_phase, init_state, measure_branches
from .messages import (
    Codec,
    EncryptedStep,
    FinalRequest,
    FinalResult,
    MessageError,
    SetupMessage,
    Verdict,
    encode,
)
from .parties import (
    Fault,
    ProtocolError,
    Tamper,
    after_round_tamper,
    client_decode,
    client_setup,
    client_step,
    finalize,
    plain_branches,
    prepared_gadget,
    public_schedule,
    server_setup,
    server_step,
)
from .schedule import GadgetAction
from .transport import QueueTransport, TransportError

MAX_ATTEMPTS = 3
ABORT = "ABORT"
ERROR_PREFIX = "ERROR "


class RestartBudgetExhausted(ProtocolError):
    pass


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, dtype=np.uint64)[0])


@dataclass
class SessionRecord:
    session: str
    scheme: str
    answer: tuple[int, ...]
    passed: bool
    transcript: list[str]
    cost: CostReport
    restarts: int
    result_bits: tuple[int, ...]
    server_log: list = field(default_factory=list)
    attempts: int = 1

    def message_shape(self) -> list[tuple[str, int]]:
        """(record type, encoded length) of every message: all a passive observer sees."""
        return [(json.loads(line)["type"], len(line)) for line in self.transcript]


def _serve(channel, seed, tamper, fault, holder) -> None:
    codec = Codec()
    server = None
    try:
        while True:
            line = channel.recv()
            if line == ABORT:
                return
            msg = codec.decode(line)
            if isinstance(msg, SetupMessage):
                server = server_setup(msg, seed, tamper, fault)
                holder["server"] = server
                if server.schedule.rounds:
                    channel.send(encode(server_step(server, msg)))
            elif isinstance(msg, EncryptedStep):
                channel.send(encode(server_step(server, msg)))
            elif isinstance(msg, FinalRequest):
                channel.send(encode(finalize(server, msg)))
                return
            else:
                raise ProtocolError(f"server cannot handle {type(msg).__name__}")
    except Exception as exc:  # reported to the client side
        holder["error"] = exc
        try:
            channel.send(ERROR_PREFIX + f"{type(exc).__name__}: {exc}")
        except TransportError:
            pass


def _attempt(circuit, params, traps, transport, seed, scheme, steps, tamper, fault, randomize, attempt):
    client_end, server_end = transport.open()
    holder: dict = {}
    th = threading.Thread(target=_serve, args=(server_end, derive_seed(seed, attempt, 1), tamper, fault, holder),
                          daemon=True)
    th.start()
    transcript: list[str] = []
    codec = Codec()

    def send(msg):
        line = encode(msg)
        transcript.append(line)
        client_end.send(line)

    def recv():
        line = client_end.recv()
        if line.startswith(ERROR_PREFIX):
            raise ProtocolError("server failed: " + line[len(ERROR_PREFIX):])
        transcript.append(line)
        return codec.decode(line)

    finished = False
    try:
        client, setup = client_setup(circuit, params, traps, derive_seed(seed, attempt, 0), scheme, steps,
                                     randomize)
        codec.k, codec.m_c = setup.pk.k, setup.pk.m_c
        send(setup)
        msg = client_step(client, recv()) if client.schedule.rounds else FinalRequest(setup.session, 0)
        while isinstance(msg, EncryptedStep):
            send(msg)
            msg = client_step(client, recv())
        send(msg)
        result = recv()
        if not isinstance(result, FinalResult):
            raise ProtocolError(f"expected FinalResult, got {type(result).__name__}")
        finished = True
        answer, passed = client_decode(client, result)
    finally:
        if not finished:
            try:
                client_end.send(ABORT)
            except TransportError:
                pass
        th.join(timeout=10)
        client_end.close()
        server_end.close()
    server = holder.get("server")
    return client, setup, answer, passed, result, transcript, (server.log if server else [])


def run_session(circuit: CircuitIR, params: SchemeParams = SchemeParams(), traps: Sequence[TrapSpec] = (),
                transport=None, seed: int = 0, scheme: str = "direct", steps: int | None = None,
                tamper: Tamper | None = None, fault: Fault | None = None,
                randomize_corrections: bool = False, transcript_path=None) -> SessionRecord:
    """Run a full client/server session over ``transport``, restarting on claw-inversion failure."""
    transport = transport or QueueTransport()
    restarts = 0
    for attempt in range(MAX_ATTEMPTS):
        try:
            client, setup, answer, passed, result, transcript, log = _attempt(
                circuit, params, traps, transport, seed, scheme, steps, tamper, fault,
                randomize_corrections, attempt)
        except ClawInversionError:
            restarts += 1
            continue
        verdict = Verdict(setup.session, answer, passed, restarts)
        transcript.append(encode(verdict))
        if transcript_path is not None:
            with open(transcript_path, "a") as fh:
                fh.write("\n".join(transcript) + "\n")
        rec = SessionRecord(setup.session, scheme, answer, passed, transcript,
                            cost_report(client.program, params.k, params.m_c), restarts,
                            result.bits, log, attempt + 1)
        return rec
    raise RestartBudgetExhausted(f"claw inversion failed on all {MAX_ATTEMPTS} attempts")


# -- exhaustive branch mode ----------------------------------------------------------------


@dataclass
class _Entry:
    prob: float
    client: object
    state: object


def _merge(entries: list[_Entry], tol: float = 1e-9) -> list[_Entry]:
    groups: dict = {}
    out: list[_Entry] = []
    for e in entries:
        bucket = groups.setdefault(e.client.key(), [])
        for other in bucket:
            if fidelity_up_to_phase(other.state, e.state) >= 1 - tol:
                other.prob += e.prob
                break
        else:
            bucket.append(e)
            out.append(e)
    return out


@dataclass
class BranchResult:
    distribution: dict
    joint: dict
    trap_fail_probability: float
    total_probability: float
    peak_entries: int

    def probability(self, answer) -> float:
        return self.distribution.get(tuple(answer), 0.0)


def explore(circuit: CircuitIR, params: SchemeParams = SchemeParams(k=1, m_c=2), traps: Sequence[TrapSpec] = (),
            seed: int = 0, scheme: str = "direct", steps: int | None = None,
            tamper: Tamper | None = None) -> BranchResult:
    """Exact outcome distribution of an honest (or scripted) run over every measurement branch.

    Gadgets are expanded branch by branch; the client absorbs each outcome and
    branches with identical client state and equal server state are merged.
    """
    client, setup = client_setup(circuit, params, traps, seed, scheme, steps)
    server = server_setup(setup, derive_seed(seed, 1), tamper)
    entries = [_Entry(1.0, client, server.state)]
    peak = 1
    for r, rnd in enumerate(server.schedule.rounds):
        server.round = r
        if r > 0:
            for e in entries:
                e.client.begin_round()
        gi = 0
        for act in rnd.actions:
            new = []
            if isinstance(act, GadgetAction):
                for e in entries:
                    circ = prepared_gadget(server, act, e.client.y_hats[gi], gi, e.state)
                    for br in run_gadget_circuit(circ, branches=True):
                        c = e.client.copy()
                        c.absorb(gi, br.outcome)
                        new.append(_Entry(e.prob * br.probability, c, br.state))
                gi += 1
            else:
                for e in entries:
                    outs = plain_branches(e.state, act, branches=True)
                    for p, s in outs:
                        new.append(_Entry(e.prob * p, e.client.copy() if len(outs) > 1 else e.client, s))
            entries = _merge(new)
            peak = max(peak, len(entries))
        for e in entries:
            e.state = after_round_tamper(server, e.state)
            e.client.end_round()
            e.client.round += 1
    joint: dict = {}
    for e in entries:
        c = e.client.copy()
        c.finish()
        states = [(1.0, e.state)]
        for act in server.schedule.final_actions:
            states = [(p * q, s2) for p, s in states for q, s2 in plain_branches(s, act, branches=True)]
        for p, s in states:
            for br in measure_branches(s, list(range(s.n_qubits))):
                answer, passed = c.decode([int(b) for b in br.outcome])
                key = (answer, passed)
                joint[key] = joint.get(key, 0.0) + e.prob * p * br.probability
    dist: dict = {}
    for (answer, _), p in joint.items():
        dist[answer] = dist.get(answer, 0.0) + p
    fail = sum(p for (_, ok), p in joint.items() if not ok)
    return BranchResult(dist, joint, fail, sum(joint.values()), peak)


def plain_distribution(circuit: CircuitIR) -> dict:
    """Standard-basis output distribution of the circuit by direct simulation."""
    state = init_state(RegisterLayout.of(("q", circuit.n)), circuit.inputs)
    state = apply_gates(state, circuit.gates)
    probs = np.abs(state.amplitudes) ** 2
    out = {}
    for i, p in enumerate(probs):
        if p > 1e-15:
            out[tuple(int(c) for c in format(i, f"0{circuit.n}b"))] = float(p)
    return out


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


# -- transcript verification --------------------------------------------------------------


@dataclass
class VerifyReport:
    ok: bool
    errors: list[str]
    rounds: int = 0
    passed: bool | None = None
    sessions: int = 0


def verify_lines(lines: Sequence[str]) -> VerifyReport:
    """Structural check of recorded sessions: order, round indices, outcome counts, widths."""
    errors: list[str] = []
    sessions, rounds_seen, passed = 0, 0, None
    lines = [ln for ln in lines if ln.strip()]
    i = 0
    while i < len(lines):
        codec = Codec()
        try:
            setup = codec.decode(lines[i])
        except MessageError as exc:
            errors.append(f"line {i + 1}: {exc}")
            break
        if not isinstance(setup, SetupMessage):
            errors.append(f"line {i + 1}: session does not start with a SetupMessage")
            break
        sessions += 1
        i += 1
        try:
            schedule = public_schedule(setup)
        except (ProtocolError, ValueError) as exc:
            errors.append(f"line {i}: {exc}")
            break
        expected = []
        for r, rnd in enumerate(schedule.rounds):
            if r > 0:
                expected.append(("EncryptedStep", r, len(rnd.gadgets)))
            expected.append(("OutcomeReport", r, len(rnd.gadgets)))
        if len(setup.y_hats) != (len(schedule.rounds[0].gadgets) if schedule.rounds else 0):
            errors.append(f"session {setup.session}: setup carries {len(setup.y_hats)} ciphertexts")
        expected += [("FinalRequest", len(schedule.rounds), 0), ("FinalResult", -1, setup.n), ("Verdict", -1, 0)]
        for kind, r, count in expected:
            if i >= len(lines):
                errors.append(f"session {setup.session}: transcript ends before {kind}")
                break
            try:
                msg = codec.decode(lines[i])
            except MessageError as exc:
                errors.append(f"line {i + 1}: {exc}")
                i += 1
                continue
            i += 1
            if type(msg).__name__ != kind:
                errors.append(f"line {i}: expected {kind}, found {type(msg).__name__}")
                continue
            if msg.session != setup.session:
                errors.append(f"line {i}: session id changed")
            if kind == "EncryptedStep" and (msg.round != r or len(msg.y_hats) != count):
                errors.append(f"line {i}: bad EncryptedStep for round {r}")
            if kind == "OutcomeReport":
                rounds_seen += 1
                if msg.round != r or len(msg.outcomes) != count:
                    errors.append(f"line {i}: round {r} needs {count} outcomes, got {len(msg.outcomes)}")
                for o, act in zip(msg.outcomes, schedule.rounds[r].gadgets):
                    if (o.A is not None) != (act.kind == "hadamard"):
                        errors.append(f"line {i}: A bit presence does not match the gadget kind")
            if kind == "FinalResult" and len(msg.bits) != count:
                errors.append(f"line {i}: {len(msg.bits)} result bits, expected {count}")
            if kind == "Verdict":
                passed = msg.passed
    return VerifyReport(not errors and sessions > 0, errors, rounds_seen, passed, sessions)


def verify(path) -> VerifyReport:
    with open(path) as fh:
        return verify_lines(fh.read().splitlines())
