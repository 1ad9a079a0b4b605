import itertools

import numpy as np
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from blindqc import gf2

matrices = st.tuples(st.integers(1, 5), st.integers(1, 5)).flatmap(
    lambda shape: arrays(np.uint8, shape, elements=st.integers(0, 1)))


def brute_rank(m):
    rows = [int("".join(map(str, r)), 2) for r in m]
    span = {0}
    for r in rows:
        span |= {v ^ r for v in span}
    return int(np.log2(len(span)))


@given(matrices)
def test_rank_matches_span_size(m):
    assert gf2.rank(m) == brute_rank(m.tolist())


@given(matrices, st.data())
def test_solve_agrees_with_enumeration(m, data):
    b = np.array(data.draw(st.lists(st.integers(0, 1), min_size=m.shape[0], max_size=m.shape[0])))
    sols = [x for x in itertools.product((0, 1), repeat=m.shape[1]) if np.array_equal(m @ np.array(x) % 2, b)]
    x = gf2.solve(m, b)
    if sols:
        assert x is not None and np.array_equal(gf2.matvec(m, x), b)
    else:
        assert x is None


@given(matrices)
def test_nullspace(m):
    ns = gf2.nullspace(m)
    assert len(ns) == m.shape[1] - gf2.rank(m)
    for v in ns:
        assert not gf2.matvec(m, v).any()


def test_left_inverse_full_column_rank():
    a = np.array([[1, 0], [1, 1], [0, 1]])
    li = gf2.left_inverse(a)
    assert np.array_equal(li @ a % 2, np.eye(2, dtype=int))
