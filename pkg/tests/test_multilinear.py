import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lpforms.errors import DegreeError, ShapeError
from lpforms.multilinear import (
    AlternatingTensor,
    apply_to_vectors,
    comass_norm,
    comass_norms,
    compound,
    hodge_star,
    lex_multi_indices,
    permutation_sign,
    singular_values,
    wedge,
    wedge_vectors,
)
from oracles import compound_by_minors, comass_two_form, dense_alternating

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def tensors(draw, n=None, k=None):
    n = draw(st.integers(1, 5)) if n is None else n
    k = draw(st.integers(0, n)) if k is None else k
    c = draw(arrays(float, math.comb(n, k), elements=finite))
    return AlternatingTensor(n, k, c)


@st.composite
def square(draw, n):
    return draw(arrays(float, (n, n), elements=st.floats(-3, 3, allow_nan=False)))


# ---------------------------------------------------------------- indices

def test_lex_indices_small_cases():
    assert lex_multi_indices(3, 2).indices == ((1, 2), (1, 3), (2, 3))
    assert lex_multi_indices(5, 0).indices == ((),)
    t = lex_multi_indices(4, 2)
    assert t.rank == 6 and t.indices[-1] == (3, 4)


@pytest.mark.parametrize("n", range(1, 7))
def test_lex_indices_match_itertools(n):
    for k in range(n + 1):
        expected = tuple(tuple(i + 1 for i in c) for c in combinations(range(n), k))
        assert lex_multi_indices(n, k).indices == expected


def test_lex_indices_degree_out_of_range():
    with pytest.raises(DegreeError):
        lex_multi_indices(3, 4)
    with pytest.raises(DegreeError):
        lex_multi_indices(3, -1)


def test_permutation_sign():
    assert permutation_sign((1, 2, 3)) == 1
    assert permutation_sign((2, 1, 3)) == -1
    assert permutation_sign((3, 1, 2)) == 1
    assert permutation_sign((4, 3, 2, 1)) == 1


# ---------------------------------------------------------------- evaluation

def test_apply_to_cobasis():
    e12 = AlternatingTensor.basis(2, (1, 2))
    assert apply_to_vectors(e12, [[1, 0], [0, 1]]) == pytest.approx(1.0)
    assert apply_to_vectors(e12, [[0, 1], [1, 0]]) == pytest.approx(-1.0)


def test_apply_wrong_vector_count():
    with pytest.raises(ShapeError):
        apply_to_vectors(AlternatingTensor.basis(3, (1, 2)), [[1, 0, 0]])


@given(tensors(n=3, k=2), arrays(float, 3, elements=finite))
def test_apply_repeated_vector_vanishes(A, x):
    assert abs(apply_to_vectors(A, [x, x])) <= 1e-9 * (1 + np.sum(np.abs(A.coeffs))) * (1 + x @ x)


@given(st.integers(1, 4).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))), st.integers(0, 2**31))
def test_full_tensor_matches_brute_force(nk, seed):
    n, k = nk
    c = np.random.default_rng(seed).standard_normal(math.comb(n, k))
    np.testing.assert_allclose(AlternatingTensor(n, k, c).full(), dense_alternating(n, k, c), atol=1e-12)


# ---------------------------------------------------------------- wedge

def test_wedge_basis_examples():
    e1 = AlternatingTensor.basis(2, (1,))
    e2 = AlternatingTensor.basis(2, (2,))
    e12 = AlternatingTensor.basis(2, (1, 2))
    assert wedge(e1, e2).allclose(e12)
    assert wedge(e1, e1).allclose(AlternatingTensor(2, 2, [0.0]))
    assert wedge(e1 + e2, e2).allclose(e12)


def test_wedge_degree_overflow():
    with pytest.raises(DegreeError):
        wedge(AlternatingTensor.basis(2, (1, 2)), AlternatingTensor.basis(2, (1,)))


@given(st.integers(2, 5).flatmap(lambda n: st.tuples(tensors(n=n), tensors(n=n), tensors(n=n))))
def test_wedge_associative(abc):
    a, b, c = abc
    if a.k + b.k + c.k > a.n:
        return
    left, right = wedge(wedge(a, b), c), wedge(a, wedge(b, c))
    scale = 1 + np.max(np.abs(left.coeffs), initial=0)
    assert left.allclose(right, atol=1e-9 * scale)


@given(st.integers(2, 5).flatmap(lambda n: st.tuples(tensors(n=n), tensors(n=n))))
def test_wedge_graded_commutative(ab):
    a, b = ab
    if a.k + b.k > a.n:
        return
    lhs = wedge(a, b)
    rhs = wedge(b, a) * (-1) ** (a.k * b.k)
    assert lhs.allclose(rhs, atol=1e-9 * (1 + np.max(np.abs(lhs.coeffs), initial=0)))


def test_wedge_of_vectors_is_determinant():
    rng = np.random.default_rng(3)
    V = rng.standard_normal((4, 4))
    assert wedge_vectors(V)[0] == pytest.approx(np.linalg.det(V.T))


# ---------------------------------------------------------------- compound

def test_compound_examples():
    np.testing.assert_allclose(compound(np.diag([3.0, 2.0, 1.0]), 2), np.diag([6.0, 3.0, 2.0]))
    for n in range(1, 6):
        for k in range(n + 1):
            np.testing.assert_allclose(compound(np.eye(n), k), np.eye(math.comb(n, k)))


def test_compound_multiplicative_random():
    rng = np.random.default_rng(11)
    P, Q = rng.standard_normal((2, 4, 4))
    np.testing.assert_allclose(compound(P @ Q, 2), compound(P, 2) @ compound(Q, 2), atol=1e-10)


@given(st.integers(1, 5).flatmap(lambda n: st.tuples(square(n), st.integers(0, n))))
def test_compound_matches_explicit_minors(Mk):
    M, k = Mk
    np.testing.assert_allclose(compound(M, k), compound_by_minors(M, k), atol=1e-9 * (1 + np.abs(M).max()) ** k)


def test_compound_batched_and_extremes():
    rng = np.random.default_rng(5)
    M = rng.standard_normal((7, 4, 4))
    C = compound(M, 2)
    assert C.shape == (7, 6, 6)
    for i in range(7):
        np.testing.assert_allclose(C[i], compound(M[i], 2), atol=1e-12)
    np.testing.assert_allclose(compound(M, 4)[:, 0, 0], np.linalg.det(M), rtol=1e-10)
    np.testing.assert_allclose(compound(M, 1), M)


def test_cauchy_binet_transport():
    rng = np.random.default_rng(8)
    P = rng.standard_normal((4, 4))
    X = rng.standard_normal((4, 2))
    np.testing.assert_allclose(compound(P, 2) @ wedge_vectors(X.T), wedge_vectors((P @ X).T), atol=1e-10)


# ---------------------------------------------------------------- singular values

def test_singular_values_examples():
    np.testing.assert_allclose(singular_values(np.diag([3.0, -2.0])), [3.0, 2.0])
    th = 0.7
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    np.testing.assert_allclose(singular_values(R), [1.0, 1.0])


def test_singular_values_against_cubic_oracle():
    # frozen output of oracles.singular_values_cubic for this matrix
    M = np.random.default_rng(20261016).standard_normal((3, 3))
    expected = [2.7180738090765746, 1.7019771924614113, 0.6234944787823546]
    np.testing.assert_allclose(singular_values(M), expected, rtol=1e-8)


def test_singular_values_reject_nan():
    from lpforms.errors import NumericError

    with pytest.raises(NumericError):
        singular_values(np.array([[np.nan, 0.0], [0.0, 1.0]]))


# ---------------------------------------------------------------- comass

def test_comass_examples():
    assert comass_norm(AlternatingTensor.scalar(3, -2.5)) == pytest.approx(2.5)
    A = AlternatingTensor.basis(4, (1, 2)) + AlternatingTensor.basis(4, (3, 4))
    assert comass_norm(A) == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.norm(A.coeffs) == pytest.approx(math.sqrt(2))
    assert comass_norm(AlternatingTensor.basis(3, (1, 2, 3), 5.0)) == pytest.approx(5.0)


@given(tensors())
def test_comass_bounds(A):
    c = comass_norm(A)
    scale = float(np.max(np.abs(A.coeffs), initial=0.0)) or 1.0
    euclid = scale * float(np.linalg.norm(A.coeffs / scale))
    assert c <= euclid * (1 + 1e-12) + 1e-300
    assert c >= float(np.max(np.abs(A.coeffs), initial=0.0)) * (1 - 1e-9)
    if A.k in (0, 1, A.n - 1, A.n):
        assert c == pytest.approx(euclid, rel=1e-12, abs=1e-300)


@given(tensors(), finite)
def test_comass_homogeneous(A, t):
    assert comass_norm(A * t) == pytest.approx(abs(t) * comass_norm(A), rel=1e-8, abs=1e-9)


@given(st.integers(2, 5).flatmap(lambda n: st.integers(0, n).flatmap(
    lambda k: st.tuples(tensors(n=n, k=k), tensors(n=n, k=k)))))
def test_comass_triangle(AB):
    A, B = AB
    assert comass_norm(A + B) <= comass_norm(A) + comass_norm(B) + 1e-8 * (1 + comass_norm(A) + comass_norm(B))


@given(st.integers(0, 2**31))
def test_comass_two_forms_match_skew_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 7))
    c = rng.standard_normal(math.comb(n, 2))
    assert comass_norm(AlternatingTensor(n, 2, c)) == pytest.approx(comass_two_form(n, c), rel=1e-8)


def test_comass_batch_matches_single():
    rng = np.random.default_rng(2)
    C = rng.standard_normal((6, 10))
    batch = comass_norms(5, 2, C)
    np.testing.assert_allclose(batch, [comass_norm(AlternatingTensor(5, 2, c)) for c in C], rtol=1e-10)


def test_comass_invariant_under_rotation():
    rng = np.random.default_rng(4)
    A = AlternatingTensor(5, 2, rng.standard_normal(10))
    Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    assert comass_norm(A.pullback(Q)) == pytest.approx(comass_norm(A), rel=1e-8)


# ---------------------------------------------------------------- hodge star

def test_hodge_examples():
    top = AlternatingTensor.basis(3, (1, 2, 3))
    assert hodge_star(top).allclose(AlternatingTensor.scalar(3, 1.0))
    assert hodge_star(AlternatingTensor.basis(3, (1,))).allclose(AlternatingTensor.basis(3, (2, 3)))


@given(tensors())
def test_hodge_isometry_and_involution(A):
    S = hodge_star(A)
    assert np.linalg.norm(S.coeffs) == pytest.approx(np.linalg.norm(A.coeffs), rel=1e-12, abs=1e-300)
    assert hodge_star(S).allclose(A * (-1) ** (A.k * (A.n - A.k)), atol=1e-12)


@given(tensors())
def test_pullback_by_identity_is_noop(A):
    assert A.pullback(np.eye(A.n)).allclose(A)
