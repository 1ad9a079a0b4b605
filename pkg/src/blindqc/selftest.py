"""Exhaustive gadget checks: every branch, both hidden bits, against plain simulation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crypto import Ciphertext, GF2ClawFamily, SchemeParams, invert_claw, keygen, random_encrypt
from .gadgets import (
    client_corrections_cv,
    client_corrections_generalized,
    client_corrections_hadamard,
    client_corrections_phase,
    hadamard_enacted,
    run_encrypted_cv,
    run_encrypted_hadamard,
    run_encrypted_phase,
    run_generalized_gadget,
)
from .pauli_frame import CorrectionPlan
from .quantum_core import Gate, QuantumState, RegisterLayout, apply_gate, apply_matrix, fidelity_up_to_phase, phase_matrix, single_qubit_matrix


def undo_plan(state: QuantumState, plan: CorrectionPlan) -> QuantumState:
    """Apply the client's corrections: cancel the residue, then remove the pad."""
    for g in plan.cancelling_gates():
        state = apply_gate(state, g.gate())
    f = plan.frame_update
    for q in range(f.n):
        if f.x[q]:
            state = apply_gate(state, Gate("X", (q,)))
        if f.z[q]:
            state = apply_gate(state, Gate("Z", (q,)))
    return state


def random_state(n: int, rng: np.random.Generator) -> QuantumState:
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return QuantumState(v / np.linalg.norm(v), RegisterLayout.of(("q", n)))


@dataclass
class SuiteResult:
    name: str
    branches: int
    worst_fidelity: float

    @property
    def passed(self) -> bool:
        return self.worst_fidelity >= 1 - 1e-10


def _suite(name, n, ideal_fn, branches_fn, plan_fn, params, rng, trials=2):
    pk, sk = keygen(params)
    worst, count = 1.0, 0
    for d_hat in (0, 1):
        for _ in range(trials):
            y_hat = random_encrypt(pk, d_hat, rng)
            psi = random_state(n, rng)
            ideal = ideal_fn(psi, d_hat)
            for br in branches_fn(psi, pk, y_hat, sk, d_hat):
                plan = plan_fn(br, pk, sk, y_hat, d_hat)
                worst = min(worst, fidelity_up_to_phase(undo_plan(br.state, plan), ideal) ** 2)
                count += 1
    return SuiteResult(name, count, worst)


def _claw(br, pk, sk, y_hat):
    return invert_claw(sk, pk, Ciphertext(br.outcome.Y), y_hat)


def cv_suite(V: str, params=SchemeParams(2, 3, 0), rng=None) -> SuiteResult:
    rng = rng or np.random.default_rng(0)
    cv = Gate("cV", (1, 0), payload=single_qubit_matrix(V))
    return _suite(
        f"controlled-{V}", 2,
        lambda psi, d: apply_gate(psi, cv) if d else psi,
        lambda psi, pk, yh, sk, d: run_encrypted_cv(psi, 1, 0, V, pk, yh, branches=True),
        lambda br, pk, sk, yh, d: client_corrections_cv(br.outcome, _claw(br, pk, sk, yh), d, V, 1, 0, 2),
        params, rng)


def phase_suite(power: int, params=SchemeParams(2, 3, 0), rng=None) -> SuiteResult:
    rng = rng or np.random.default_rng(0)
    return _suite(
        f"phase T^{power}", 1,
        lambda psi, d: apply_matrix(psi, phase_matrix(power), [0]) if d else psi,
        lambda psi, pk, yh, sk, d: run_encrypted_phase(psi, 0, power, pk, yh, branches=True),
        lambda br, pk, sk, yh, d: client_corrections_phase(br.outcome, _claw(br, pk, sk, yh), d, power, 0, 1),
        params, rng)


def hadamard_suite(params=SchemeParams(2, 3, 0), rng=None) -> SuiteResult:
    rng = rng or np.random.default_rng(0)
    return _suite(
        "hadamard", 1,
        lambda psi, d: apply_gate(psi, Gate("H", (0,))) if hadamard_enacted(d) else psi,
        lambda psi, pk, yh, sk, d: run_encrypted_hadamard(psi, 0, pk, yh, branches=True),
        lambda br, pk, sk, yh, d: client_corrections_hadamard(br.outcome, _claw(br, pk, sk, yh), d, 0, 1),
        params, rng)


def generalized_suite(V: str, params=SchemeParams(2, 3, 0), rng=None) -> SuiteResult:
    rng = rng or np.random.default_rng(0)
    cv = Gate("cV", (1, 0), payload=single_qubit_matrix(V))
    return _suite(
        f"generalized controlled-{V}", 2,
        lambda psi, d: apply_gate(psi, cv) if d else psi,
        lambda psi, pk, yh, sk, d: run_generalized_gadget(psi, GF2ClawFamily(pk, yh, sk), 1, 0, V,
                                                          branches=True, check_d_hat=d),
        lambda br, pk, sk, yh, d: client_corrections_generalized(br.outcome, GF2ClawFamily(pk, yh, sk), d, V,
                                                                 1, 0, 2),
        params, rng)


def run_all(params=SchemeParams(2, 3, 0)) -> list[SuiteResult]:
    return [cv_suite("Z", params), cv_suite("S", params), phase_suite(1, params), phase_suite(2, params),
            hadamard_suite(params), generalized_suite("Z", params), generalized_suite("S", params)]
