"""Bit-matrix linear algebra over GF(2) on uint8 numpy arrays."""
from __future__ import annotations

import numpy as np


def as_bits(v) -> np.ndarray:
    return np.asarray(v, dtype=np.uint8) & 1


def row_reduce(m: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form and the pivot columns."""
    m = as_bits(m).copy()
    rows, cols = m.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        hits = np.nonzero(m[r:, c])[0]
        if len(hits) == 0:
            continue
        p = r + hits[0]
        if p != r:
            m[[r, p]] = m[[p, r]]
        others = np.nonzero(m[:, c])[0]
        others = others[others != r]
        m[others] ^= m[r]
        pivots.append(c)
        r += 1
    return m, pivots


def rank(m: np.ndarray) -> int:
    return len(row_reduce(m)[1])


def solve(m: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """One solution x of m @ x = b, or None when the system is inconsistent."""
    m = as_bits(m)
    b = as_bits(b).reshape(-1, 1)
    aug, pivots = row_reduce(np.hstack([m, b]))
    cols = m.shape[1]
    if cols in pivots:
        return None
    x = np.zeros(cols, dtype=np.uint8)
    for row, c in enumerate(pivots):
        x[c] = aug[row, -1]
    return x


def left_inverse(m: np.ndarray) -> np.ndarray:
    """L with L @ m = I for a full-column-rank m."""
    m = as_bits(m)
    rows, cols = m.shape
    aug, pivots = row_reduce(np.hstack([m, np.eye(rows, dtype=np.uint8)]))
    if pivots[:cols] != list(range(cols)):
        raise ValueError("matrix does not have full column rank")
    return aug[:cols, cols:].copy()


def nullspace(m: np.ndarray) -> np.ndarray:
    """Basis of {x : m @ x = 0} as rows."""
    m = as_bits(m)
    red, pivots = row_reduce(m)
    cols = m.shape[1]
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        x = np.zeros(cols, dtype=np.uint8)
        x[f] = 1
        for row, c in enumerate(pivots):
            x[c] = red[row, f]
        basis.append(x)
    return np.array(basis, dtype=np.uint8).reshape(len(basis), cols)


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (as_bits(m).astype(np.int64) @ as_bits(v).astype(np.int64) % 2).astype(np.uint8)


def dot(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.sum(as_bits(a) & as_bits(b)) % 2)
