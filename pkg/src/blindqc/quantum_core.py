"""Dense state-vector simulation with exhaustive measurement branching.

Qubit order is big-endian in layout order: qubit 0 is the most significant
bit of the amplitude index, and every rendered bit string follows layout order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import pi, sqrt
from typing import Sequence

import numpy as np

MAX_QUBITS = 24
PRUNE_PROBABILITY = 1e-14
UNITARY_TOL = 1e-12


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        names = [name for name, _ in self.registers]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate register names in {names}")
        for name, width in self.registers:
            if width < 1:
                raise LayoutError(f"register {name!r} has width {width}")
        if self.total > MAX_QUBITS:
            raise LayoutError(f"{self.total} qubits exceeds the {MAX_QUBITS}-qubit cap")

    @classmethod
    def of(cls, *registers: tuple[str, int]) -> "RegisterLayout":
        return cls(tuple((str(n), int(w)) for n, w in registers))

    @property
    def total(self) -> int:
        return sum(w for _, w in self.registers)

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.registers]

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def qubits(self, name: str) -> list[int]:
        offset = 0
        for n, w in self.registers:
            if n == name:
                return list(range(offset, offset + w))
            offset += w
        raise LayoutError(f"no register named {name!r}")

    def index(self, name: str, i: int = 0) -> int:
        qs = self.qubits(name)
        if not 0 <= i < len(qs):
            raise LayoutError(f"register {name!r} has no qubit {i}")
        return qs[i]

    def append(self, name: str, width: int) -> "RegisterLayout":
        return RegisterLayout(self.registers + ((name, width),))

    def without(self, qubits: Sequence[int]) -> "RegisterLayout":
        """Layout with the given qubit positions removed; emptied registers vanish."""
        drop = set(qubits)
        regs = []
        offset = 0
        for name, width in self.registers:
            kept = sum(1 for q in range(offset, offset + width) if q not in drop)
            if kept:
                regs.append((name, kept))
            offset += width
        return RegisterLayout(tuple(regs))


@dataclass
class QuantumState:
    amplitudes: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2 ** self.layout.total,):
            raise LayoutError(
                f"amplitude vector of shape {self.amplitudes.shape} does not match "
                f"{self.layout.total} qubits"
            )

    @property
    def n_qubits(self) -> int:
        return self.layout.total

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "QuantumState":
        return QuantumState(self.amplitudes.copy(), self.layout)


_SQ2 = 1 / sqrt(2)
_W = np.exp(1j * pi / 4)

_FIXED = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    "S": np.diag([1, 1j]).astype(complex),
    "Sdg": np.diag([1, -1j]).astype(complex),
    "T": np.diag([1, _W]).astype(complex),
    "Tdg": np.diag([1, np.conj(_W)]).astype(complex),
    "iY": np.array([[0, 1], [-1, 0]], dtype=complex),
}

# controlled kinds: name -> (number of controls, single-qubit target matrix name)
_CONTROLLED = {
    "cX": (1, "X"),
    "cY": (1, "Y"),
    "cZ": (1, "Z"),
    "cS": (1, "S"),
    "cSdg": (1, "Sdg"),
    "ciY": (1, "iY"),
    "Toffoli": (2, "X"),
}

SINGLE_KINDS = frozenset(_FIXED) | {"P", "U"}
GATE_KINDS = SINGLE_KINDS | set(_CONTROLLED) | {"cV"}


def single_qubit_matrix(name: str) -> np.ndarray:
    return _FIXED[name].copy()


def phase_matrix(power: int) -> np.ndarray:
    """T**power, i.e. diag(1, exp(i*pi*power/4))."""
    return np.diag([1, _W ** (power % 8)]).astype(complex)


def controlled(u: np.ndarray, n_controls: int = 1) -> np.ndarray:
    """Matrix of U controlled on all of ``n_controls`` leading qubits."""
    dim = u.shape[0]
    full = np.eye(dim * 2 ** n_controls, dtype=complex)
    full[-dim:, -dim:] = u
    return full


@dataclass(frozen=True)
class Gate:
    """A gate on explicit qubit indices; controls come first in ``qubits``.

    ``P`` takes ``param=k`` for the phase gate diag(1, exp(i*pi/2**k)).
    ``U`` and ``cV`` take a 2x2 unitary ``payload``.
    """

    kind: str
    qubits: tuple[int, ...]
    param: int | None = None
    payload: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.qubits) != self.arity:
            raise ValueError(f"{self.kind} takes {self.arity} qubits, got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"duplicate qubit indices in {self.kind}{self.qubits}")
        if self.kind in ("U", "cV"):
            if self.payload is None:
                raise ValueError(f"{self.kind} needs a 2x2 payload")
            u = np.asarray(self.payload, dtype=complex)
            if u.shape != (2, 2) or not np.allclose(u.conj().T @ u, np.eye(2), atol=UNITARY_TOL):
                raise ValueError(f"{self.kind} payload is not a 2x2 unitary")
            object.__setattr__(self, "payload", u)
        if self.kind == "P" and self.param is None:
            raise ValueError("P gate needs param k")

    @property
    def arity(self) -> int:
        if self.kind in _CONTROLLED:
            return _CONTROLLED[self.kind][0] + 1
        if self.kind == "cV":
            return 2
        return 1

    def matrix(self) -> np.ndarray:
        k = self.kind
        if k in _FIXED:
            return _FIXED[k].copy()
        if k == "P":
            return np.diag([1, np.exp(1j * pi / 2 ** self.param)]).astype(complex)
        if k == "U":
            return self.payload.copy()
        if k == "cV":
            return controlled(self.payload)
        n_ctrl, base = _CONTROLLED[k]
        return controlled(_FIXED[base], n_ctrl)

    def key(self) -> tuple:
        """Hashable description used when comparing gate lists."""
        extra = None if self.payload is None else tuple(np.round(self.payload, 12).ravel())
        return (self.kind, self.qubits, self.param, extra)


def _check_indices(state: QuantumState, qubits: Sequence[int]) -> None:
    n = state.n_qubits
    for q in qubits:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n} qubits")
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"duplicate qubit indices {list(qubits)}")


def init_state(layout: RegisterLayout, basis: str | Sequence[int] | None = None,
               plus_set: Sequence[int] = ()) -> QuantumState:
    n = layout.total
    bits = [0] * n if basis is None else [int(b) for b in basis]
    if len(bits) != n:
        raise LayoutError(f"basis has {len(bits)} bits, layout has {n} qubits")
    plus = set(plus_set)
    for q in plus:
        if not 0 <= q < n:
            raise IndexError(f"plus_set index {q} out of range")
    vec = np.ones(1, dtype=complex)
    for q, b in enumerate(bits):
        local = np.array([_SQ2, _SQ2]) if q in plus else np.eye(2)[b]
        vec = np.kron(vec, local)
    return QuantumState(vec, layout)


def apply_matrix(state: QuantumState, matrix: np.ndarray, qubits: Sequence[int]) -> QuantumState:
    """Apply a 2^k x 2^k matrix to the listed qubits (first listed = most significant)."""
    qubits = list(qubits)
    _check_indices(state, qubits)
    n, k = state.n_qubits, len(qubits)
    psi = state.amplitudes.reshape([2] * n)
    psi = np.moveaxis(psi, qubits, range(k)).reshape(2 ** k, -1)
    psi = (matrix @ psi).reshape([2] * n)
    psi = np.moveaxis(psi, range(k), qubits)
    return QuantumState(psi.reshape(-1), state.layout)


def apply_gate(state: QuantumState, gate: Gate) -> QuantumState:
    return apply_matrix(state, gate.matrix(), gate.qubits)


def apply_gates(state: QuantumState, gates: Sequence[Gate]) -> QuantumState:
    for g in gates:
        state = apply_gate(state, g)
    return state


def apply_permutation(state: QuantumState, qubits: Sequence[int], perm: np.ndarray) -> QuantumState:
    """Send basis index i of the listed qubits to perm[i] (a reversible classical map)."""
    qubits = list(qubits)
    _check_indices(state, qubits)
    perm = np.asarray(perm)
    k, n = len(qubits), state.n_qubits
    if sorted(perm.tolist()) != list(range(2 ** k)):
        raise ValueError("map is not a permutation")
    psi = state.amplitudes.reshape([2] * n)
    psi = np.moveaxis(psi, qubits, range(k)).reshape(2 ** k, -1)
    out = np.empty_like(psi)
    out[perm] = psi
    out = np.moveaxis(out.reshape([2] * n), range(k), qubits)
    return QuantumState(out.reshape(-1), state.layout)


def append_register(state: QuantumState, name: str, bits: Sequence[int] | None = None,
                    width: int | None = None, plus: bool = False) -> QuantumState:
    """Tensor a fresh register onto the end of the state."""
    if bits is None:
        bits = [0] * int(width)
    bits = [int(b) for b in bits]
    layout = state.layout.append(name, len(bits))
    if plus:
        local = np.full(2 ** len(bits), 2 ** (-len(bits) / 2), dtype=complex)
    else:
        local = np.zeros(2 ** len(bits), dtype=complex)
        local[int("".join(map(str, bits)) or "0", 2)] = 1
    return QuantumState(np.outer(state.amplitudes, local).ravel(), layout)


def append_controlled_preparation(state: QuantumState, control: int, name: str,
                                  vectors: Sequence[np.ndarray]) -> QuantumState:
    """Append a register prepared in vectors[c] when qubit ``control`` reads c.

    Equivalent to applying a controlled U_c to a fresh |0...0> register.
    """
    _check_indices(state, [control])
    v0, v1 = (np.asarray(v, dtype=complex) for v in vectors)
    width = int(np.log2(len(v0)))
    n = state.n_qubits
    psi = np.moveaxis(state.amplitudes.reshape([2] * n), control, 0)
    out = np.stack([np.multiply.outer(psi[0], v0), np.multiply.outer(psi[1], v1)])
    out = np.moveaxis(out, 0, control)
    return QuantumState(out.reshape(-1), state.layout.append(name, width))


@dataclass
class MeasurementBranch:
    outcome: str
    probability: float
    post_state: QuantumState


def measure_branches(state: QuantumState, qubits: Sequence[int],
                     rng: np.random.Generator | None = None) -> list[MeasurementBranch]:
    """Standard-basis measurement of ``qubits``, which are removed from the layout.

    Returns every branch with probability above the pruning threshold, or a single
    branch drawn from the same distribution when ``rng`` is given.
    """
    qubits = list(qubits)
    _check_indices(state, qubits)
    n, k = state.n_qubits, len(qubits)
    psi = state.amplitudes.reshape([2] * n)
    psi = np.moveaxis(psi, qubits, range(k)).reshape(2 ** k, -1)
    probs = np.einsum("ij,ij->i", psi.real, psi.real) + np.einsum("ij,ij->i", psi.imag, psi.imag)
    layout = state.layout.without(qubits)
    if rng is not None:
        p = probs / probs.sum()
        picks = [int(rng.choice(len(p), p=p))]
    else:
        picks = [int(i) for i in np.nonzero(probs > PRUNE_PROBABILITY)[0]]
    out = []
    for i in picks:
        p = float(probs[i])
        post = QuantumState(psi[i] / sqrt(p), layout)
        out.append(MeasurementBranch(format(i, f"0{k}b") if k else "", p, post))
    return out


def fidelity_up_to_phase(a: QuantumState | np.ndarray, b: QuantumState | np.ndarray) -> float:
    va = a.amplitudes if isinstance(a, QuantumState) else np.asarray(a, dtype=complex)
    vb = b.amplitudes if isinstance(b, QuantumState) else np.asarray(b, dtype=complex)
    if va.shape != vb.shape:
        raise LayoutError(f"width mismatch: {va.shape} vs {vb.shape}")
    return float(abs(np.vdot(va, vb)))


def embed_matrix(matrix: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Full 2^n x 2^n operator of ``matrix`` acting on ``qubits``."""
    dim = 2 ** n
    cols = [apply_matrix(QuantumState(np.eye(dim)[:, j], RegisterLayout.of(("q", n))), matrix, qubits)
            .amplitudes for j in range(dim)]
    return np.stack(cols, axis=1)


def circuit_unitary(gates: Sequence[Gate], n: int) -> np.ndarray:
    u = np.eye(2 ** n, dtype=complex)
    for g in gates:
        u = embed_matrix(g.matrix(), g.qubits, n) @ u
    return u


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-12) -> bool:
    """Matrix equality up to a global phase."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        return False
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[idx]) < tol:
        return bool(np.allclose(a, 0, atol=tol))
    phase = a[idx] / b[idx]
    if abs(abs(phase) - 1) > 1e-9:
        return False
    return bool(np.max(np.abs(a - phase * b)) <= tol)
