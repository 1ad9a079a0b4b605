"""Brute-force reference computations that do not import blindqc.

Run ``python tests/oracles.py`` to regenerate tests/frozen_oracles.json. The
tests compare both the library and these oracles against the frozen values.
"""
from __future__ import annotations

import itertools
import json
from functools import reduce
from pathlib import Path

import numpy as np

FROZEN_PATH = Path(__file__).with_name("frozen_oracles.json")

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j])
T = np.diag([1, np.exp(1j * np.pi / 4)])
P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)

# canonical toy key: A = [[1,0],[0,1],[0,0]], s = (0,0,1), t = (0,0,1)
CANON_A = np.array([[1, 0], [0, 1], [0, 0]])
CANON_S = np.array([0, 0, 1])
CANON_T = np.array([0, 0, 1])


def kron(*ms):
    return reduce(np.kron, ms)


def op_on(n, single: dict):
    """Tensor product with the given 2x2 matrices on listed qubits (qubit 0 leftmost)."""
    return kron(*[single.get(q, I2) for q in range(n)])


def controlled_op(n, controls, target, u):
    """Sum over control patterns: projector product, u on target when all controls are 1."""
    out = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for bits in itertools.product((0, 1), repeat=len(controls)):
        proj = {c: (P1 if b else P0) for c, b in zip(controls, bits)}
        if all(bits):
            proj[target] = u
        out += op_on(n, proj)
    return out


def gate_matrix(kind, qubits, n):
    if kind in ("H", "S", "T", "X", "Z"):
        return op_on(n, {qubits[0]: {"H": H, "S": S, "T": T, "X": X, "Z": Z}[kind]})
    if kind == "Sdg":
        return op_on(n, {qubits[0]: S.conj().T})
    if kind == "Tdg":
        return op_on(n, {qubits[0]: T.conj().T})
    if kind == "cX":
        return controlled_op(n, qubits[:1], qubits[1], X)
    if kind == "cZ":
        return controlled_op(n, qubits[:1], qubits[1], Z)
    if kind == "cS":
        return controlled_op(n, qubits[:1], qubits[1], S)
    if kind == "cSdg":
        return controlled_op(n, qubits[:1], qubits[1], S.conj().T)
    if kind == "Toffoli":
        return controlled_op(n, qubits[:2], qubits[2], X)
    raise KeyError(kind)


def pauli(xs, zs):
    return kron(*[np.linalg.matrix_power(Z, z) @ np.linalg.matrix_power(X, x) for x, z in zip(xs, zs)])


def equal_up_to_phase(a, b, tol=1e-12):
    i = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[i]) < tol:
        return np.allclose(a, b, atol=tol)
    ph = a[i] / b[i]
    return abs(abs(ph) - 1) < tol and np.allclose(a, ph * b, atol=tol)


RESIDUE_KINDS = ("S", "Sdg", "cX", "cZ")


def residue_candidates(n):
    """All products of at most 3 distinct low-level gates on n qubits."""
    singles = [(k, (q,)) for k in ("S", "Sdg") for q in range(n)]
    pairs = [(k, (a, b)) for k in ("cX",) for a in range(n) for b in range(n) if a != b]
    pairs += [("cZ", (a, b)) for a in range(n) for b in range(a + 1, n)]
    pool = singles + pairs
    yield ()
    for r in (1, 2, 3):
        yield from itertools.combinations(pool, r)


def conjugation_oracle(kind, n, xs, zs):
    """Search (residue, x', z') with U P U^dag = R P' up to phase; smallest residue first."""
    u = gate_matrix(kind, tuple(range(n)), n)
    target = u @ pauli(xs, zs) @ u.conj().T
    for cand in residue_candidates(n):
        r = np.eye(2 ** n, dtype=complex)
        for k, q in cand:
            r = gate_matrix(k, q, n) @ r
        rest = r.conj().T @ target
        for bits in itertools.product((0, 1), repeat=2 * n):
            if equal_up_to_phase(rest, pauli(bits[:n], bits[n:])):
                return [[[k, list(q)] for k, q in cand], list(bits[:n]), list(bits[n:])]
    return None


def enc(A, s, d, r):
    return [int(v) for v in (A @ np.array(r) + d * s) % 2]


def claw_oracle(A, s, y_hat, Y):
    """All preimages of Y under f0 = Enc and f1 = Enc xor y_hat."""
    k = A.shape[1]
    out = {"f0": [], "f1": []}
    for d in (0, 1):
        for r in itertools.product((0, 1), repeat=k):
            c = enc(A, s, d, r)
            if c == list(Y):
                out["f0"].append([d, list(r)])
            if [a ^ b for a, b in zip(c, y_hat)] == list(Y):
                out["f1"].append([d, list(r)])
    return out


def slot_order_units(ops):
    """Minimum units for a single-qubit op sequence, each unit ordered H, T, S.

    Tries every assignment of ops to (unit, position) for up to 4 units.
    """
    order = {"H": 0, "T": 1, "S": 2}
    for units in range(1, 5):
        slots = [(u, p) for u in range(units) for p in range(3)]
        for pick in itertools.combinations(slots, len(ops)):
            if all(order[op] == p for op, (_, p) in zip(ops, pick)):
                return units
    return None


def direct_slot_count(n):
    """Encrypted slots of one direct unit: H, T, S per qubit plus one cZ per neighbour pair."""
    return 3 * n + (n - 1)


def toffoli_count(gates):
    return sum(1 for g in gates if g[0] == "Toffoli")


# Controlled constructions written out independently as (kind, qubits) lists.
CCS_WIRES = 5  # qa, qb, anc1, c, anc2
CCS_GATES = [("Toffoli", (0, 1, 2)), ("Toffoli", (2, 3, 4)), ("S", (4,)),
             ("Toffoli", (2, 3, 4)), ("Toffoli", (0, 1, 2))]
CH_WIRES = 3  # q, c, anc
CH_GATES = [("cX", (2, 0)), ("Toffoli", (0, 1, 2)), ("cX", (2, 0)), ("H", (2,)),
            ("cX", (2, 0)), ("Toffoli", (0, 1, 2)), ("cX", (2, 0))]


def circuit_matrix(gates, n):
    u = np.eye(2 ** n, dtype=complex)
    for k, q in gates:
        u = gate_matrix(k, q, n) @ u
    return u


def compute_all() -> dict:
    A, s = CANON_A, CANON_S
    frozen = {}
    frozen["encrypt_1_11"] = enc(A, s, 1, (1, 1))
    frozen["roundtrip_k2"] = [[d, list(r), int(CANON_T @ np.array(enc(A, s, d, r)) % 2)]
                              for d in (0, 1) for r in itertools.product((0, 1), repeat=2)]
    frozen["hom_add_11"] = sorted({int(CANON_T @ ((np.array(enc(A, s, 1, r)) + np.array(enc(A, s, 1, r2))) % 2) % 2)
                                   for r in itertools.product((0, 1), repeat=2)
                                   for r2 in itertools.product((0, 1), repeat=2)})
    frozen["claw_111_111"] = claw_oracle(A, s, [1, 1, 1], [1, 1, 1])
    frozen["uf_f1_00"] = [a ^ b for a, b in zip(enc(A, s, 0, (0, 0)), [1, 1, 1])]
    frozen["conj_S_x"] = conjugation_oracle("S", 1, (1,), (0,))
    frozen["conj_cX_xa"] = conjugation_oracle("cX", 2, (1, 0), (0, 0))
    frozen["conj_toffoli_xa"] = conjugation_oracle("Toffoli", 3, (1, 0, 0), (0, 0, 0))
    frozen["conj_toffoli_zc"] = conjugation_oracle("Toffoli", 3, (0, 0, 0), (0, 0, 1))
    # two T slots seeing x-pads 1 then 0: count the slots whose conjugated pad needs an S^dag
    def needs_sdg(pad):
        conj = T @ pad @ T.conj().T
        is_pauli = any(equal_up_to_phase(conj, pauli((x,), (z,))) for x in (0, 1) for z in (0, 1))
        return (not is_pauli) and any(equal_up_to_phase(conj, S.conj().T @ pauli((x,), (z,)))
                                      for x in (0, 1) for z in (0, 1))
    frozen["tt_sdg_count"] = sum(needs_sdg(pauli((x,), (0,))) for x in (1, 0))
    frozen["units_T_then_H"] = slot_order_units(["T", "H"])
    frozen["units_H_then_T"] = slot_order_units(["H", "T"])
    frozen["slots_n2"] = direct_slot_count(2)
    frozen["ccs_toffolis"] = toffoli_count(CCS_GATES)
    frozen["ccs_toffolis_on_c"] = sum(1 for k, q in CCS_GATES if k == "Toffoli" and 3 in q)
    frozen["ch_toffolis"] = toffoli_count(CH_GATES)
    return frozen


if __name__ == "__main__":
    FROZEN_PATH.write_text(json.dumps(compute_all(), indent=1, sort_keys=True) + "\n")
    print(f"wrote {FROZEN_PATH}")
