"""XOR-homomorphic trapdoor bit encryption over GF(2).

Enc(d, r) = A r + d s with A an m_c x k matrix of full column rank and s outside
its column space. The secret key is a vector t with t.A = 0 and t.s = 1, so
decryption is a single parity. Homomorphic addition is bitwise XOR and needs
nothing but the ciphertexts.

This scheme is noise-free and therefore linearly breakable: it has the
interface and algebra of a lattice-based scheme (exact homomorphism, injective
claw pair f0 / f1, efficient trapdoor inversion) but no security at all. It is
meant for exact simulation only.
"""
from __future__ import annotations

import abc
import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import gf2

MAX_KEYGEN_ATTEMPTS = 1000
DEFAULT_K = 3
DEFAULT_MC = 4

Bits = tuple[int, ...]


class CryptoError(ValueError):
    pass


class ClawInversionError(CryptoError):
    """Raised when a measured Y has no preimage; the transcript is corrupt."""


def to_bits(v) -> Bits:
    return tuple(int(b) & 1 for b in np.asarray(v).ravel())


def bits_to_hex(bits: Sequence[int]) -> str:
    """Hex string of a bit vector, first bit most significant."""
    if len(bits) == 0:
        return ""
    value = int("".join(str(int(b)) for b in bits), 2)
    return format(value, f"0{(len(bits) + 3) // 4}x")


def hex_to_bits(text: str, length: int) -> Bits:
    value = int(text, 16) if text else 0
    if value >> length:
        raise CryptoError(f"hex {text!r} does not fit in {length} bits")
    return tuple(int(c) for c in format(value, f"0{length}b")) if length else ()


@dataclass(frozen=True)
class SchemeParams:
    k: int = DEFAULT_K
    m_c: int = DEFAULT_MC
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise CryptoError(f"k must be >= 1, got {self.k}")
        if self.m_c < self.k + 1:
            raise CryptoError(f"m_c must be >= k + 1 (k={self.k}, m_c={self.m_c})")
        if not 0 <= self.seed < 2 ** 64:
            raise CryptoError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=False)
class PublicKey:
    A: np.ndarray
    s: np.ndarray
    _left_inverse: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = gf2.as_bits(self.A)
        s = gf2.as_bits(self.s).ravel()
        if A.ndim != 2 or A.shape[0] != len(s):
            raise CryptoError("A must be m_c x k and s of length m_c")
        full = np.hstack([A, s.reshape(-1, 1)])
        if gf2.rank(full) != A.shape[1] + 1:
            raise CryptoError("A must have full column rank with s outside its span")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "_left_inverse", gf2.left_inverse(full))

    @property
    def k(self) -> int:
        return self.A.shape[1]

    @property
    def m_c(self) -> int:
        return self.A.shape[0]

    def __eq__(self, other):
        return (isinstance(other, PublicKey) and np.array_equal(self.A, other.A)
                and np.array_equal(self.s, other.s))

    def __hash__(self):
        return hash((self.A.tobytes(), self.A.shape, self.s.tobytes()))

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "m_c": self.m_c,
            "A": [bits_to_hex(col) for col in self.A.T],
            "s": bits_to_hex(self.s),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PublicKey":
        k, m_c = int(data["k"]), int(data["m_c"])
        cols = [hex_to_bits(h, m_c) for h in data["A"]]
        if len(cols) != k:
            raise CryptoError(f"expected {k} columns in A, got {len(cols)}")
        return cls(np.array(cols, dtype=np.uint8).T.reshape(m_c, k), np.array(hex_to_bits(data["s"], m_c)))


@dataclass(frozen=True, eq=False)
class SecretKey:
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", gf2.as_bits(self.t).ravel())

    def to_dict(self) -> dict:
        return {"m_c": len(self.t), "t": bits_to_hex(self.t)}

    @classmethod
    def from_dict(cls, data: dict) -> "SecretKey":
        return cls(np.array(hex_to_bits(data["t"], int(data["m_c"]))))


@dataclass(frozen=True)
class Ciphertext:
    bits: Bits

    def __post_init__(self):
        object.__setattr__(self, "bits", to_bits(self.bits))

    def __len__(self):
        return len(self.bits)

    def hex(self) -> str:
        return bits_to_hex(self.bits)

    @classmethod
    def from_hex(cls, text: str, m_c: int) -> "Ciphertext":
        return cls(hex_to_bits(text, m_c))


@dataclass(frozen=True)
class DecodedClaw:
    d0: int
    r0: Bits
    d1: int
    r1: Bits


def _check_keypair(pk: PublicKey, sk: SecretKey) -> None:
    if gf2.matvec(pk.A.T, sk.t).any() or gf2.dot(sk.t, pk.s) != 1:
        raise CryptoError("secret key does not satisfy t.A = 0 and t.s = 1")


def keygen(params: SchemeParams) -> tuple[PublicKey, SecretKey]:
    """Sample a key pair, rejection-resampling until the rank conditions hold."""
    rng = np.random.default_rng(params.seed)
    k, m_c = params.k, params.m_c
    target = np.zeros(k + 1, dtype=np.uint8)
    target[k] = 1
    for _ in range(MAX_KEYGEN_ATTEMPTS):
        A = rng.integers(0, 2, size=(m_c, k), dtype=np.uint8)
        s = rng.integers(0, 2, size=m_c, dtype=np.uint8)
        full = np.hstack([A, s.reshape(-1, 1)])
        if gf2.rank(full) != k + 1:
            continue
        t = gf2.solve(full.T, target)
        pk, sk = PublicKey(A, s), SecretKey(t)
        _check_keypair(pk, sk)
        return pk, sk
    raise CryptoError(f"no valid key after {MAX_KEYGEN_ATTEMPTS} attempts for k={k}, m_c={m_c}")


def canonical_keys(k: int = 2, m_c: int = 3) -> tuple[PublicKey, SecretKey]:
    """Deterministic key pair A = [I; 0], s = t = e_k, for tests and examples."""
    SchemeParams(k, m_c)
    A = np.vstack([np.eye(k, dtype=np.uint8), np.zeros((m_c - k, k), dtype=np.uint8)])
    e = np.zeros(m_c, dtype=np.uint8)
    e[k] = 1
    return PublicKey(A, e), SecretKey(e.copy())


def encrypt(pk: PublicKey, d: int, r: Sequence[int]) -> Ciphertext:
    r = gf2.as_bits(r).ravel()
    if len(r) != pk.k:
        raise CryptoError(f"randomness has {len(r)} bits, expected {pk.k}")
    c = gf2.matvec(pk.A, r)
    if int(d) & 1:
        c ^= pk.s
    return Ciphertext(c)


def random_encrypt(pk: PublicKey, d: int, rng: np.random.Generator) -> Ciphertext:
    return encrypt(pk, d, rng.integers(0, 2, size=pk.k))


def _check_len(c: Ciphertext, m_c: int) -> None:
    if len(c) != m_c:
        raise CryptoError(f"ciphertext has {len(c)} bits, expected {m_c}")


def decrypt(sk: SecretKey, c: Ciphertext) -> int:
    _check_len(c, len(sk.t))
    return gf2.dot(sk.t, c.bits)


def hom_add(pk: PublicKey, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    _check_len(c1, pk.m_c)
    _check_len(c2, pk.m_c)
    return Ciphertext(tuple(a ^ b for a, b in zip(c1.bits, c2.bits)))


def f0(pk: PublicKey, d: int, r: Sequence[int]) -> Ciphertext:
    return encrypt(pk, d, r)


def f1(pk: PublicKey, y_hat: Ciphertext, d: int, r: Sequence[int]) -> Ciphertext:
    return hom_add(pk, encrypt(pk, d, r), y_hat)


def _preimage(pk: PublicKey, y: Sequence[int]) -> tuple[int, Bits]:
    y = gf2.as_bits(y)
    sol = gf2.matvec(pk._left_inverse, y)
    full = np.hstack([pk.A, pk.s.reshape(-1, 1)])
    if not np.array_equal(gf2.matvec(full, sol), y):
        raise ClawInversionError(f"Y={to_bits(y)} is not in the image of f0")
    return int(sol[pk.k]), to_bits(sol[: pk.k])


def invert_claw(sk: SecretKey, pk: PublicKey, Y: Ciphertext, y_hat: Ciphertext) -> DecodedClaw:
    """Recover the two preimages (d0, r0) of f0 and (d1, r1) of f1 colliding at Y."""
    _check_len(Y, pk.m_c)
    _check_len(y_hat, pk.m_c)
    d0, r0 = _preimage(pk, Y.bits)
    d1, r1 = _preimage(pk, hom_add(pk, Y, y_hat).bits)
    if d0 != decrypt(sk, Y) or d1 != d0 ^ decrypt(sk, y_hat):
        raise ClawInversionError("secret key disagrees with the public key")
    return DecodedClaw(d0, r0, d1, r1)


def all_bitstrings(n: int) -> Iterator[Bits]:
    return itertools.product((0, 1), repeat=n)


# -- claw-free family interface ------------------------------------------------


class FamilyPropertyError(CryptoError):
    pass


class ClawFreeFamily(abc.ABC):
    """A function family f: X -> Y with the structure needed by the generic gadget.

    Subclasses provide the two preparable states |phi_0>, |phi_1> over X, the
    function itself, the position of the bit B inside X, the basis change W,
    and the trapdoor extractors for b_y and z_i.
    """

    domain_bits: int
    range_bits: int
    b_position: int

    @abc.abstractmethod
    def prepare_phi(self, i: int) -> np.ndarray:
        """Amplitudes of |phi_i> over the 2**domain_bits basis states of X."""

    @abc.abstractmethod
    def evaluate(self, x: Sequence[int]) -> Bits:
        """f(x) as a bit tuple of length range_bits."""

    @abc.abstractmethod
    def w_matrix(self) -> np.ndarray:
        """Single-qubit matrix W applied to every qubit of X."""

    @abc.abstractmethod
    def extract_b(self, y: Sequence[int]) -> int:
        """b_y, computed with the trapdoor."""

    @abc.abstractmethod
    def extract_z(self, y: Sequence[int], i: int) -> Bits:
        """z_i for outcome y, computed with the trapdoor."""

    def function_table(self) -> np.ndarray:
        """f as an integer array indexed by the integer value of x."""
        table = np.empty(2 ** self.domain_bits, dtype=np.int64)
        for idx, x in enumerate(all_bitstrings(self.domain_bits)):
            table[idx] = int("".join(map(str, self.evaluate(x))) or "0", 2)
        return table

    def projected(self, i: int, y: Sequence[int]) -> np.ndarray:
        """The unnormalised |phi_{i,y}>: |phi_i> restricted to f(x) = y."""
        y_int = int("".join(str(b) for b in y) or "0", 2)
        phi = np.asarray(self.prepare_phi(i), dtype=complex)
        return np.where(self.function_table() == y_int, phi, 0)

    def check_properties(self, d_hat: int, tol: float = 1e-12) -> None:
        """Exhaustively verify both structural properties for every y.

        Raises FamilyPropertyError on the first violation.
        """
        nx = self.domain_bits
        w_full = np.ones((1, 1), dtype=complex)
        for _ in range(nx):
            w_full = np.kron(w_full, self.w_matrix())
        xs = np.array(list(all_bitstrings(nx)), dtype=np.uint8).reshape(-1, nx)
        for y in all_bitstrings(self.range_bits):
            phis = [self.projected(i, y) for i in (0, 1)]
            norms = [np.linalg.norm(p) for p in phis]
            if abs(norms[0] - norms[1]) > tol:
                raise FamilyPropertyError(f"unequal norms for y={y}: {norms}")
            if norms[0] <= tol:
                continue
            b_y = self.extract_b(y)
            for i, phi in enumerate(phis):
                support = xs[np.abs(phi) > tol]
                expected = b_y ^ (i * d_hat)
                if not np.all(support[:, self.b_position] == expected):
                    raise FamilyPropertyError(f"bit B is not |{expected}> in phi_({i},{y})")
                z = np.array(self.extract_z(y, i), dtype=np.uint8)
                signs = (-1.0) ** ((xs @ z) % 2)
                rebuilt = w_full.conj().T @ (signs * (w_full @ phis[0]))
                if np.max(np.abs(rebuilt - phi)) > tol:
                    raise FamilyPropertyError(f"phi_({i},{y}) != W^dag Z^z W phi_(0,{y})")


class GF2ClawFamily(ClawFreeFamily):
    """The GF(2) scheme viewed as a claw-free family.

    X holds (a, d, r): the selector bit a plus the encryption inputs. |phi_i> is
    |i> on a and uniform on (d, r); f(a, d, r) = f_a(d, r). B is the d position
    and W is a Hadamard on every qubit of X.
    """

    def __init__(self, pk: PublicKey, y_hat: Ciphertext, sk: SecretKey | None = None):
        _check_len(y_hat, pk.m_c)
        self.pk, self.y_hat, self.sk = pk, y_hat, sk
        self.domain_bits = pk.k + 2
        self.range_bits = pk.m_c
        self.b_position = 1

    def prepare_phi(self, i: int) -> np.ndarray:
        sel = np.eye(2)[int(i)]
        uniform = np.full(2 ** (self.pk.k + 1), 2 ** (-(self.pk.k + 1) / 2))
        return np.kron(sel, uniform).astype(complex)

    def evaluate(self, x: Sequence[int]) -> Bits:
        a, d, r = int(x[0]), int(x[1]), x[2:]
        return (f1(self.pk, self.y_hat, d, r) if a else f0(self.pk, d, r)).bits

    def w_matrix(self) -> np.ndarray:
        return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

    def _claw(self, y: Sequence[int]) -> DecodedClaw:
        if self.sk is None:
            raise CryptoError("trapdoor not available")
        return invert_claw(self.sk, self.pk, Ciphertext(y), self.y_hat)

    def extract_b(self, y: Sequence[int]) -> int:
        return self._claw(y).d0

    def extract_z(self, y: Sequence[int], i: int) -> Bits:
        if not i:
            return (0,) * self.domain_bits
        c = self._claw(y)
        return (1, c.d0 ^ c.d1) + tuple(a ^ b for a, b in zip(c.r0, c.r1))
