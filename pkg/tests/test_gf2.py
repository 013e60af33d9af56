import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qsl import gf2
from qsl.errors import ValidationError

matrices = st.integers(1, 6).flatmap(
    lambda k: st.integers(1, 8).flatmap(
        lambda n: arrays(np.uint8, (k, n), elements=st.integers(0, 1))))


def test_vector_round_trip():
    assert gf2.vec_to_int(gf2.int_to_vec(0b1011, 4)) == 0b1011
    assert gf2.int_to_vec(1, 3).tolist() == [0, 0, 1]
    assert gf2.all_vectors(2).tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


@settings(max_examples=80, deadline=None)
@given(matrices)
def test_kernel_basis_spans_kernel(a):
    basis = gf2.kernel_basis(a)
    n = a.shape[1]
    assert basis.shape == (n, n - gf2.rank(a))
    assert not gf2.matmul(a, basis).any()
    assert gf2.rank(basis.T) == basis.shape[1]


@settings(max_examples=80, deadline=None)
@given(matrices, st.data())
def test_solve_agrees_with_brute_force(a, data):
    b = np.array(data.draw(st.lists(st.integers(0, 1), min_size=a.shape[0], max_size=a.shape[0])),
                 dtype=np.uint8)
    sols = [v for v in gf2.all_vectors(a.shape[1]) if (gf2.matmul(a, v) == b).all()]
    got = gf2.solve(a, b)
    if sols:
        assert got is not None and (gf2.matmul(a, got) == b).all()
    else:
        assert got is None


def test_inverse(rng):
    for _ in range(50):
        m = rng.integers(0, 2, size=(5, 5)).astype(np.uint8)
        if gf2.rank(m) < 5:
            with pytest.raises(ValidationError):
                gf2.inverse(m)
        else:
            assert (gf2.matmul(m, gf2.inverse(m)) == np.eye(5, dtype=np.uint8)).all()


def test_independent_rows_are_lexicographically_first():
    m = np.array([[0, 0], [1, 0], [1, 0], [1, 1]], dtype=np.uint8)
    assert gf2.independent_rows(m) == [1, 3]
