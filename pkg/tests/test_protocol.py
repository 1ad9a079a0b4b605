import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from blindqc.compiler import CircuitIR, TrapSpec
from blindqc.crypto import SchemeParams, keygen
from blindqc.protocol import (
    Codec,
    FinalRequest,
    Fault,
    RestartBudgetExhausted,
    TcpTransport,
    TrapError,
    Verdict,
    client_decode,
    client_setup,
    client_step,
    encode,
    explore,
    finalize,
    insert_traps,
    reduction_check,
    reduction_embed,
    run_session,
    server_setup,
    server_step,
    trap_verdict,
    verify,
    verify_lines,
)
from blindqc.protocol.messages import FORBIDDEN_FIELDS, MESSAGE_TYPES, payload_keys, schema_fields
from blindqc.protocol.transport import parse_address
from blindqc.quantum_core import Gate

SMALL = SchemeParams(1, 2, 0)


def circ(n, *gates, inputs=None):
    return CircuitIR(n, [Gate(k, q) for k, q in gates], inputs)


def drive(circuit, params=SMALL, traps=(), seed=0, scheme="direct", steps=None):
    """Run client and server state machines directly, without a transport."""
    client, setup = client_setup(circuit, params, traps, seed, scheme, steps)
    server = server_setup(setup, seed + 1)
    lines = [encode(setup)]
    msg = setup
    reports = []
    while True:
        report = server_step(server, msg)
        reports.append(report)
        lines.append(encode(report))
        msg = client_step(client, report)
        lines.append(encode(msg))
        if isinstance(msg, FinalRequest):
            break
    result = finalize(server, msg)
    lines.append(encode(result))
    answer, passed = client_decode(client, result)
    lines.append(encode(Verdict(setup.session, answer, passed, 0)))
    return client, setup, server, reports, answer, passed, lines


def test_setup_basis_is_padded_input():
    c = circ(2, ("H", (0,)), inputs=(1, 0))
    client, setup = client_setup(c, SMALL, seed=3)
    _, setup2 = client_setup(c, SMALL, seed=3)
    assert setup == setup2
    # basis = input xor pad; the pad is the client's initial frame x
    assert setup.basis == tuple(b ^ x for b, x in zip(c.inputs, client.frame.x))


def test_fresh_randomness_per_seed():
    c = circ(2, ("H", (0,)))
    _, a = client_setup(c, SMALL, seed=1)
    _, b = client_setup(c, SMALL, seed=2)
    assert a.y_hats != b.y_hats or a.pk != b.pk


def test_trap_overlap_rejected():
    with pytest.raises(TrapError):
        client_setup(circ(2), SMALL, [TrapSpec("single", (1,), 0)])
    with pytest.raises(TrapError):
        insert_traps(circ(1), [TrapSpec("single", (2,)), TrapSpec("ghz", (2, 3))])


def test_report_shape_and_determinism():
    c = circ(2, ("H", (0,)))
    _, setup, _, reports, *_ = drive(c, seed=5)
    # one unit: every encrypted slot of the unit gets exactly one outcome
    assert sum(len(r.outcomes) for r in reports) == 7
    _, _, _, reports2, *_ = drive(c, seed=5)
    assert reports == reports2


def test_x_gate_answer():
    *_, answer, passed, _ = drive(circ(1, ("X", (0,)), ("H", (0,)), ("H", (0,))))
    assert answer == (1,) and passed


def test_final_request_after_last_round():
    client, setup, server, reports, *_ = drive(circ(2, ("cZ", (0, 1))))
    assert len(reports) == len(client.schedule.rounds)


def test_ghz_trap_verdict():
    traps = [TrapSpec("ghz", (1, 2, 3))]
    assert trap_verdict(traps, (0, 1, 1, 1))
    assert not trap_verdict(traps, (0, 0, 1, 1))
    assert not trap_verdict([TrapSpec("single", (1,), 1)], (0, 0))


def test_identity_program_returns_input():
    c = circ(1, ("H", (0,)), ("H", (0,)), inputs=(1,))
    res = explore(c, SMALL)
    assert res.probability((1,)) == pytest.approx(1, abs=1e-12)


def test_frame_secrecy_schema():
    for cls in MESSAGE_TYPES:
        assert not (schema_fields(cls) & FORBIDDEN_FIELDS), cls
    *_, lines = drive(circ(2, ("H", (0,)), ("cS", (0, 1))), traps=())
    for line in lines:
        assert not (payload_keys(line) & FORBIDDEN_FIELDS)


def test_codec_round_trip():
    client, setup, server, reports, answer, passed, lines = drive(circ(2, ("H", (1,))))
    codec = Codec()
    decoded = [codec.decode(line) for line in lines]
    assert decoded[0] == setup
    assert decoded[1] == reports[0]
    rec = json.loads(lines[0])
    assert set(rec) >= {"type", "session", "unit", "payload"}


def test_blindness_of_shape_direct():
    # same size (n = 2, one unit), different selection bits
    c0 = circ(2, ("H", (0,)), ("T", (1,)), ("cZ", (0, 1)))
    c1 = circ(2, ("H", (1,)), ("S", (0,)))
    r0 = run_session(c0, SMALL, seed=11)
    r1 = run_session(c1, SMALL, seed=11)
    assert r0.message_shape() == r1.message_shape()
    gates = lambda rec: [entry[:5] + (entry[5:],) for entry in rec.server_log]
    assert gates(r0) == gates(r1)


def test_blindness_of_shape_indirect():
    c0 = circ(2, ("cS", (0, 1)), ("H", (0,)))
    c1 = circ(2, ("H", (1,)))
    r0 = run_session(c0, SMALL, seed=2, scheme="indirect", steps=2)
    r1 = run_session(c1, SMALL, seed=2, scheme="indirect", steps=2)
    assert r0.message_shape() == r1.message_shape()


def test_fault_injection_restarts_once():
    params = SchemeParams(1, 3, 0)
    rec = run_session(circ(1, ("H", (0,))), params, fault=Fault(0, 0, 1))
    assert rec.restarts == 1 and rec.attempts == 2


def test_restart_budget():
    params = SchemeParams(1, 3, 0)
    with pytest.raises(RestartBudgetExhausted):
        run_session(circ(1, ("H", (0,))), params, fault=Fault(0, 0, 99))


def test_tcp_and_transcript(tmp_path):
    path = tmp_path / "t.jsonl"
    rec = run_session(circ(2, ("H", (0,)), ("cX", (0, 1))), SMALL, transport=TcpTransport(), seed=1,
                      transcript_path=path)
    assert rec.answer in {(0, 0), (1, 1)} and rec.passed
    rep = verify(path)
    assert rep.ok and rep.sessions == 1 and rep.passed


def test_verify_flags_corruption():
    *_, lines = drive(circ(2, ("H", (0,))))
    assert verify_lines(lines).ok
    assert not verify_lines(lines[:3]).ok
    swapped = lines[:1] + lines[2:3] + lines[1:2] + lines[3:]
    assert not verify_lines(swapped).ok


def test_parse_address():
    assert parse_address("127.0.0.1:9000") == ("127.0.0.1", 9000)
    with pytest.raises(Exception):
        parse_address("nope")


def test_reduction_examples():
    pk, sk = keygen(SchemeParams(3, 4, 0))
    rng = np.random.default_rng(0)
    from blindqc.crypto import decrypt, random_encrypt
    c0 = [1, 0, 1, 1]
    for d_hat in (0, 1):
        y_hat = random_encrypt(pk, d_hat, rng)
        ys = reduction_embed(pk, y_hat, c0, c0, rng)
        assert [decrypt(sk, y) for y in ys] == c0
    y_hat = random_encrypt(pk, 1, rng)
    ys = reduction_embed(pk, y_hat, [0], [1], rng)
    assert decrypt(sk, ys[0]) == 1
    with pytest.raises(ValueError):
        reduction_embed(pk, y_hat, [0, 1], [1], rng)


@given(st.integers(1, 3), st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=12),
       st.integers(0, 1), st.integers(0, 10 ** 6))
def test_reduction_soundness(k, pairs, d_hat, seed):
    pk, sk = keygen(SchemeParams(k, k + 1, seed))
    rng = np.random.default_rng(seed)
    from blindqc.crypto import random_encrypt
    c0, c1 = [a for a, _ in pairs], [b for _, b in pairs]
    ys = reduction_embed(pk, random_encrypt(pk, d_hat, rng), c0, c1, rng)
    assert reduction_check(sk, ys, c0, c1, d_hat)


def test_randomized_corrections_run_completes():
    c = circ(2, ("T", (0,)), ("H", (0,)), ("cS", (0, 1)))
    honest = run_session(c, SMALL, seed=4)
    rand = run_session(c, SMALL, seed=4, randomize_corrections=True)
    assert [t for t, _ in honest.message_shape()] == [t for t, _ in rand.message_shape()]
    assert honest.message_shape() == rand.message_shape()
