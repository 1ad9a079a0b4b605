import itertools

import pytest
from hypothesis import given, strategies as st

from blindqc.pauli_frame import (
    FrameError,
    PauliFrame,
    clifford_correction,
    conjugate_clifford,
    depad_results,
    t_frame_update,
    toffoli_correction,
    track,
)
from blindqc.quantum_core import Gate
from oracles import circuit_matrix, conjugation_oracle, equal_up_to_phase, gate_matrix, pauli

ARITY = {"H": 1, "S": 1, "Sdg": 1, "T": 1, "Tdg": 1, "cX": 2, "cZ": 2, "cS": 2, "Toffoli": 3}
# residues must sit strictly lower in the Clifford hierarchy than the gate that made them
ALLOWED_RESIDUE = {"T": {"S", "Sdg"}, "Tdg": {"S", "Sdg"}, "cS": {"S", "Sdg", "cZ"},
                   "Toffoli": {"cX", "cZ"}}


def frame_of(xs, zs):
    return PauliFrame(tuple(xs), tuple(zs))


def check_plan(kind, qubits, n, xs, zs):
    """U P U^dag == R P' as matrices up to phase, with an independent kron oracle."""
    frame = frame_of(xs, zs)
    plan = track(frame, Gate(kind, tuple(qubits)))
    new = frame ^ plan.frame_update
    u = gate_matrix(kind, tuple(qubits), n)
    r = circuit_matrix([(g.kind, g.qubits) for g in plan.scheduled_gates], n)
    lhs = u @ pauli(xs, zs) @ u.conj().T
    rhs = r @ pauli(new.x, new.z)
    assert equal_up_to_phase(lhs, rhs), (kind, xs, zs, plan)
    for g in plan.scheduled_gates:
        assert g.kind in ALLOWED_RESIDUE.get(kind, set()), (kind, g)


@pytest.mark.parametrize("kind", sorted(ARITY))
def test_all_pads_match_matrix_oracle(kind):
    n = ARITY[kind]
    for bits in itertools.product((0, 1), repeat=2 * n):
        check_plan(kind, range(n), n, bits[:n], bits[n:])


@given(st.sampled_from(sorted(ARITY)), st.data())
def test_embedded_gates_match_oracle(kind, data):
    n = 3
    qubits = data.draw(st.permutations(range(n)))[:ARITY[kind]]
    xs = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    zs = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    check_plan(kind, qubits, n, xs, zs)


def test_conjugate_examples(frozen):
    assert conjugate_clifford(frame_of([1], [0]), Gate("H", (0,))) == frame_of([0], [1])
    res, x, z = frozen["conj_S_x"]
    assert conjugation_oracle("S", 1, (1,), (0,)) == frozen["conj_S_x"]
    assert conjugate_clifford(frame_of([1], [0]), Gate("S", (0,))) == frame_of(x, z) and res == []
    res, x, z = frozen["conj_cX_xa"]
    assert conjugate_clifford(frame_of([1, 0], [0, 0]), Gate("cX", (0, 1))) == frame_of(x, z)
    with pytest.raises(FrameError):
        conjugate_clifford(frame_of([0], [0]), Gate("T", (0,)))


@pytest.mark.parametrize("key,xs,zs", [("conj_toffoli_xa", (1, 0, 0), (0, 0, 0)),
                                       ("conj_toffoli_zc", (0, 0, 0), (0, 0, 1))])
def test_toffoli_examples(frozen, key, xs, zs):
    assert conjugation_oracle("Toffoli", 3, xs, zs) == frozen[key]
    res, x, z = frozen[key]
    plan = toffoli_correction(frame_of(xs, zs), (0, 1), 2)
    assert frame_of(xs, zs) ^ plan.frame_update == frame_of(x, z)
    assert [(g.kind, list(g.qubits)) for g in plan.scheduled_gates] == [(k, list(q)) for k, q in res]


def test_toffoli_zero_frame_and_clash():
    assert toffoli_correction(PauliFrame.zeros(3), (0, 1), 2).is_identity()
    with pytest.raises(FrameError):
        toffoli_correction(PauliFrame.zeros(3), (0, 0), 2)


def test_t_frame_update(frozen):
    assert t_frame_update(frame_of([0], [1]), 0).is_identity()
    plan = t_frame_update(frame_of([1], [0]), 0)
    assert plan.frame_update == frame_of([0], [1])
    assert [g.kind for g in plan.scheduled_gates] == ["Sdg"]
    # two T slots seeing x-pads 1 then 0
    count = sum(len(t_frame_update(frame_of([x], [0]), 0).scheduled_gates) for x in (1, 0))
    assert count == frozen["tt_sdg_count"] == 1


def test_depad_examples():
    f = frame_of([1, 0], [1, 1])
    assert depad_results(PauliFrame.zeros(2), (1, 0)) == (1, 0)
    assert depad_results(f, f.x) == (0, 0)
    assert depad_results(f, (0, 1)) == (1, 1)
    with pytest.raises(FrameError):
        depad_results(f, (0,))


bitvec = st.lists(st.integers(0, 1), min_size=3, max_size=3)


@given(bitvec, bitvec, bitvec)
def test_depad_involution(xs, zs, bits):
    f = frame_of(xs, zs)
    assert depad_results(f, depad_results(f, bits)) == tuple(bits)


CLIFF = st.sampled_from([("H", 1), ("S", 1), ("Sdg", 1), ("cX", 2), ("cZ", 2)])


@given(bitvec, bitvec, st.lists(st.tuples(CLIFF, st.permutations(range(3))), max_size=6))
def test_tracking_composes(xs, zs, seq):
    gates = [Gate(k, tuple(p[:a])) for (k, a), p in seq]
    frame = frame_of(xs, zs)
    for g in gates:
        frame = conjugate_clifford(frame, g)
    u = circuit_matrix([(g.kind, g.qubits) for g in gates], 3)
    assert equal_up_to_phase(u @ pauli(xs, zs) @ u.conj().T, pauli(frame.x, frame.z))


def test_clifford_correction_cs_residue():
    plan = clifford_correction(frame_of([1, 0], [0, 0]), Gate("cS", (0, 1)))
    assert {g.kind for g in plan.scheduled_gates} <= {"S", "Sdg", "cZ"}
    assert plan.scheduled_gates
