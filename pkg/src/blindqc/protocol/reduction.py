"""Harness for the hybrid step of the blindness argument.

Given an encryption y_hat of an unknown bit d_hat and two equal-size programs
C0, C1, every slot ciphertext can be built as Enc(C0_i) + (C0_i xor C1_i) y_hat,
which is an encryption of C_{d_hat, i} without knowing d_hat.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..crypto import Ciphertext, PublicKey, SecretKey, decrypt, hom_add, random_encrypt


class ReductionError(ValueError):
    pass


def reduction_embed(pk: PublicKey, y_hat: Ciphertext, c0_bits: Sequence[int], c1_bits: Sequence[int],
                    rng: np.random.Generator | None = None) -> list[Ciphertext]:
    if len(c0_bits) != len(c1_bits):
        raise ReductionError(f"circuits differ in size: {len(c0_bits)} vs {len(c1_bits)}")
    rng = rng or np.random.default_rng()
    zero = Ciphertext((0,) * pk.m_c)
    out = []
    for a, b in zip(c0_bits, c1_bits):
        y_i = random_encrypt(pk, int(a), rng)
        out.append(hom_add(pk, y_i, y_hat if (int(a) ^ int(b)) else zero))
    return out


def reduction_check(sk: SecretKey, y_hats: Sequence[Ciphertext], c0_bits: Sequence[int],
                    c1_bits: Sequence[int], d_hat: int) -> bool:
    if not len(y_hats) == len(c0_bits) == len(c1_bits):
        raise ReductionError("length mismatch between ciphertexts and circuits")
    target = c1_bits if d_hat else c0_bits
    return all(decrypt(sk, c) == int(b) for c, b in zip(y_hats, target))
