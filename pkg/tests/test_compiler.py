import numpy as np
import pytest
from hypothesis import given, strategies as st

from blindqc.compiler import (
    BrickworkEmulation,
    CircuitIR,
    CompileError,
    LayerProgram,
    build_controlled_constructions,
    classical_substitution,
    compile_direct,
    compile_indirect,
    cost_report,
    decompile,
    decompile_indirect,
    format_circuit,
    parse_circuit,
    parse_traps,
)
from blindqc.quantum_core import Gate, circuit_unitary
from oracles import (CCS_GATES, CH_GATES, P0, P1, H, S, circuit_matrix, controlled_op, equal_up_to_phase,
                     op_on)


def circ(n, *gates, inputs=None):
    return CircuitIR(n, [Gate(k, q) for k, q in gates], inputs)


def test_parse_and_format_round_trip():
    text = """# demo
QUBITS 3
INPUT 101
H 0
CX 0 1
cs 1 2
TOFF 0 1 2
TRAP SINGLE 3 1
"""
    c = parse_circuit(text)
    assert c.n == 3 and c.inputs == (1, 0, 1)
    assert [g.kind for g in c.gates] == ["H", "cX", "cS", "Toffoli"]
    again = parse_circuit(format_circuit(c))
    assert [(g.kind, g.qubits) for g in again.gates] == [(g.kind, g.qubits) for g in c.gates]


@pytest.mark.parametrize("text", ["QUBITS 2\nFOO 0", "QUBITS 2\nH 5", "QUBITS 2\nCX 0", "QUBITS 0"])
def test_parse_errors(text):
    with pytest.raises(CompileError):
        parse_circuit(text)


def test_parse_traps():
    traps = parse_traps("TRAP SINGLE 4 1\nTRAP GHZ 5 6 7\n")
    assert traps[0].kind == "single" and traps[0].expected == 1
    assert traps[1].wires == (5, 6, 7)
    with pytest.raises(CompileError):
        parse_traps("TRAP GHZ 5 7")


def test_direct_examples(frozen):
    p = compile_direct(circ(2, ("H", (0,))))
    assert len(p.units) == 1
    u = p.units[0]
    assert u.h == [1, 0] and u.phase == [0, 0] and u.cz_a == [0] and not u.paulis
    assert len(compile_direct(circ(1, ("T", (0,)), ("H", (0,)))).units) == frozen["units_T_then_H"] == 2
    assert len(compile_direct(circ(1, ("H", (0,)), ("T", (0,)))).units) == frozen["units_H_then_T"] == 1
    assert compile_direct(circ(2)).units == []


def test_slot_count(frozen):
    p = compile_direct(circ(2, ("H", (0,))))
    assert p.slots_per_unit == frozen["slots_n2"]


def test_direct_rejects():
    with pytest.raises(CompileError):
        compile_direct(circ(3, ("Toffoli", (0, 1, 2))))
    with pytest.raises(CompileError):
        compile_direct(circ(3, ("cZ", (0, 2))))


def direct_gate(draw, n):
    kinds = ["H", "S", "Sdg", "T", "Tdg", "X", "Z"] + (["cX", "cZ", "cS", "cSdg"] if n > 1 else [])
    kind = draw(st.sampled_from(kinds))
    if kind.startswith("c"):
        a = draw(st.integers(0, n - 2))
        return Gate(kind, (a, a + 1) if draw(st.booleans()) else (a + 1, a))
    return Gate(kind, (draw(st.integers(0, n - 1)),))


@st.composite
def direct_circuits(draw, max_gates=8):
    n = draw(st.integers(1, 3))
    return CircuitIR(n, [direct_gate(draw, n) for _ in range(draw(st.integers(0, max_gates)))])


@given(direct_circuits())
def test_direct_round_trip(c):
    p = compile_direct(c)
    got = circuit_unitary(decompile(p), c.n)
    ref = circuit_matrix([(g.kind, g.qubits) for g in c.gates], c.n)
    assert equal_up_to_phase(got, ref, 1e-10)


def test_indirect_examples():
    p = compile_indirect(circ(2, ("H", (1,))))
    assert p.steps == [(0, 0), (0, 1)]
    p = compile_indirect(circ(2, ("cS", (0, 1))))
    assert p.steps == [(1, 0)]
    p = compile_indirect(circ(2), m=4)
    assert all(not any(s) for s in p.steps) and decompile_indirect(p) == []
    with pytest.raises(CompileError):
        compile_indirect(circ(1, ("T", (0,))))
    with pytest.raises(CompileError):
        compile_indirect(circ(2, ("H", (0,)), ("cS", (0, 1))), m=1)


@st.composite
def indirect_circuits(draw):
    n = draw(st.integers(1, 3))
    gates = []
    for _ in range(draw(st.integers(0, 6))):
        kind = draw(st.sampled_from(["H"] + (["cS", "cZ", "cX"] if n > 1 else [])))
        if kind == "H":
            gates.append(Gate("H", (draw(st.integers(0, n - 1)),)))
        else:
            a = draw(st.integers(0, n - 2))
            gates.append(Gate(kind, (a, a + 1) if draw(st.booleans()) else (a + 1, a)))
    return CircuitIR(n, gates)


@given(indirect_circuits())
def test_indirect_round_trip(c):
    p = compile_indirect(c)
    for l, step in enumerate(p.steps):
        if p.layer_kind(l) == "cS":
            assert step[-1] == 0
    got = circuit_unitary(decompile_indirect(p), c.n)
    ref = circuit_matrix([(g.kind, g.qubits) for g in c.gates], c.n)
    assert equal_up_to_phase(got, ref, 1e-10)


def test_constructions_match_independent_gate_lists():
    ccs, ch = build_controlled_constructions()
    assert np.allclose(ccs.unitary(), circuit_matrix(CCS_GATES, 5), atol=1e-12)
    assert np.allclose(ch.unitary(), circuit_matrix(CH_GATES, 3), atol=1e-12)


def test_ccs_branches():
    ccs, _ = build_controlled_constructions()
    u = ccs.unitary()
    anc0 = op_on(5, {2: P0, 4: P0})
    for c, proj in ((0, P0), (1, P1)):
        sel = anc0 @ op_on(5, {3: proj})
        target = controlled_op(5, (0,), 1, S) if c else np.eye(32)
        assert np.allclose(u @ sel, target @ sel, atol=1e-12)


def branch_action(u, n_wires, c_wire, anc_wires, data_wire, c):
    """Map data input -> full output for fixed c and ancillas in |0>, as a (2^n, 2) matrix."""
    cols = []
    for q in (0, 1):
        bits = [0] * n_wires
        bits[c_wire], bits[data_wire] = c, q
        cols.append(u[:, int("".join(map(str, bits)), 2)])
    return np.stack(cols, axis=1)


def test_ch_branches_act_as_h_power():
    _, ch = build_controlled_constructions()
    u = ch.unitary()
    for c in (0, 1):
        act = branch_action(u, 3, 1, (2,), 0, c)
        # the ancilla must factor out: out = (H^c |q>) (x) |c> (x) |phi_c>
        t = act.reshape(2, 2, 2, 2)  # data-out, c, anc, data-in
        assert np.allclose(t[:, 1 - c], 0, atol=1e-12)
        target = H if c else np.eye(2)
        r = np.einsum("ij,jaq->iaq", target.conj().T, t[:, c])
        phi = r[0, :, 0]
        assert np.isclose(np.linalg.norm(phi), 1, atol=1e-12)
        assert np.allclose(r[1, :, 1], phi, atol=1e-12)
        assert np.allclose(r[0, :, 1], 0, atol=1e-12) and np.allclose(r[1, :, 0], 0, atol=1e-12)


def test_classical_substitution(frozen):
    ccs, ch = build_controlled_constructions()
    for cons, tof, subs in ((ccs, frozen["ccs_toffolis"], frozen["ccs_toffolis_on_c"]),
                            (ch, frozen["ch_toffolis"], frozen["ch_toffolis"])):
        s0, s1 = classical_substitution(cons, 0), classical_substitution(cons, 1)
        assert len(s0.correction_points) == len(s1.correction_points) == tof
        assert len(s0.substitution_points) == subs
        for i in s0.substitution_points:
            assert s0.server_gates[i] is None
            assert s1.server_gates[i].kind == "cX" and cons.control not in s1.server_gates[i].qubits
        assert len(s0.server_gates) == len(cons.gates)


def test_substituted_ccs_matches_controlled_gate():
    ccs, _ = build_controlled_constructions()
    for c in (0, 1):
        sub = classical_substitution(ccs, c)
        gates = [g for g in sub.server_gates if g is not None]
        u = circuit_unitary(gates, 5)
        anc0 = op_on(5, {2: P0, 4: P0})
        target = controlled_op(5, (0,), 1, S) if c else np.eye(32)
        assert np.allclose(u @ anc0, target @ anc0, atol=1e-12)


def test_cost_examples():
    one = compile_direct(circ(1, ("H", (0,))))
    assert cost_report(one).uf_count == 4
    ind = compile_indirect(circ(1, ("H", (0,))), m=2)
    rep = cost_report(ind)
    assert rep.uf_count == 18 and rep.layer_units == 1
    bw = cost_report(BrickworkEmulation())
    assert bw.encrypted_bits == 13 and bw.reference_bits == 16
    with pytest.raises(CompileError):
        cost_report("nope")


@given(direct_circuits())
def test_cost_additive(c):
    p = compile_direct(c)
    total = cost_report(p).uf_count
    per_unit = [cost_report(LayerProgram(p.n, [u])).uf_count for u in p.units]
    assert total == sum(per_unit) == 4 * p.n * len(p.units)
