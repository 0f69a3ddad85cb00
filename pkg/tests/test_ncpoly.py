import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freeconvex.ncpoly import (
    Letter,
    MatrixTuple,
    NcPoly,
    random_tuple,
    word_adjoint,
    word_key,
    zero_tuple,
)


letters = st.builds(
    Letter, st.integers(min_value=1, max_value=3), st.booleans()
)
words = st.lists(letters, max_size=4).map(tuple)


def small_poly(rng, delta=1, g=2, terms=4, degree=3):
    out = {}
    for _ in range(terms):
        length = rng.integers(0, degree + 1)
        w = tuple(
            Letter(int(rng.integers(1, g + 1)), bool(rng.integers(2)))
            for _ in range(length)
        )
        out[w] = rng.uniform(-1, 1, (delta, delta)) + 1j * rng.uniform(
            -1, 1, (delta, delta)
        )
    return NcPoly(delta, g, out)


# -- words -------------------------------------------------------------------

@given(words)
def test_word_adjoint_is_an_involution(w):
    assert word_adjoint(word_adjoint(w)) == w


@given(words, words)
def test_word_adjoint_reverses_products(w1, w2):
    assert word_adjoint(w1 + w2) == word_adjoint(w2) + word_adjoint(w1)


def test_word_key_orders_by_length_first():
    x = (Letter(1, False),)
    xy = (Letter(1, False), Letter(2, False))
    assert word_key(x) < word_key(xy)
    assert word_key(()) < word_key(x)


# -- ring structure ----------------------------------------------------------

def test_constructor_merges_and_drops_zero_terms():
    x = (Letter(1, False),)
    p = NcPoly(1, 1, {x: 2.0}) + NcPoly(1, 1, {x: -2.0})
    assert p.is_zero()


def test_variable_count_validation():
    with pytest.raises(ValueError):
        NcPoly(1, 1, {(Letter(2, False),): 1.0})
    with pytest.raises(ValueError):
        NcPoly(0, 1, {})


def test_addition_is_commutative(rng):
    p = small_poly(rng)
    q = small_poly(rng)
    assert (p + q).close_to(q + p, 1e-14)


def test_multiplication_is_associative(rng):
    p, q, r = (small_poly(rng, terms=3, degree=2) for _ in range(3))
    assert ((p * q) * r).close_to(p * (q * r), 1e-12)


def test_adjoint_is_an_antihomomorphism(rng):
    p = small_poly(rng)
    q = small_poly(rng)
    assert (p * q).adjoint().close_to(q.adjoint() * p.adjoint(), 1e-12)
    assert p.adjoint().adjoint().close_to(p, 1e-14)


# -- evaluation --------------------------------------------------------------

def test_evaluation_is_a_ring_homomorphism(rng):
    p = small_poly(rng)
    q = small_poly(rng)
    for n in (1, 2, 3):
        X = random_tuple(rng, 2, n)
        assert np.allclose((p + q).evaluate(X), p.evaluate(X) + q.evaluate(X))
        assert np.allclose((p * q).evaluate(X), p.evaluate(X) @ q.evaluate(X))


def test_adjoint_evaluation_is_conjugate_transpose(rng):
    p = small_poly(rng, delta=2)
    X = random_tuple(rng, 2, 3)
    assert np.allclose(p.adjoint().evaluate(X), p.evaluate(X).conj().T)


def test_matrix_coefficients_evaluate_via_kron(rng):
    # [TRIVIAL] delta=2 coefficient on the word x1 x2* at a level-2 point
    w = (Letter(1, False), Letter(2, True))
    C = np.array([[1.0, 2.0], [0.0, 1j]])
    p = NcPoly(2, 2, {w: C})
    X = random_tuple(rng, 2, 2)
    expected = np.kron(C, X.X[0] @ X.X[1].conj().T)
    assert np.allclose(p.evaluate(X), expected)


def test_evaluation_at_zero_gives_constant_term(rng):
    p = small_poly(rng)
    X = zero_tuple(2, 3)
    expected = np.kron(p.constant_term(), np.eye(3))
    assert np.allclose(p.evaluate(X), expected)


def test_direct_sum_evaluation_block_diagonal(rng):
    p = small_poly(rng, delta=1)
    X = random_tuple(rng, 2, 2)
    Y = random_tuple(rng, 2, 3)
    top = p.evaluate(X)
    bottom = p.evaluate(Y)
    full = p.evaluate(X.direct_sum(Y))
    assert np.allclose(full[:2, :2], top)
    assert np.allclose(full[2:, 2:], bottom)
    assert np.abs(full[:2, 2:]).max() < 1e-14


# -- inspection --------------------------------------------------------------

def test_hermitian_and_hereditary_flags():
    x = NcPoly.variable(1, 1)
    xs = NcPoly.variable(1, 1, starred=True)
    one = NcPoly.constant(1.0, g=1)
    assert not (one - x * x).is_hermitian()
    assert (one - x * xs).is_hermitian()
    assert (one - x * xs - xs * x).is_hermitian()
    assert (xs * x).is_hereditary()
    assert not (x * xs).is_hereditary()
    assert (one - x * xs).degree() == 2


def test_degree_of_zero_polynomial_is_zero():
    assert NcPoly.zero(1, 2).degree() == 0


# -- serialization -----------------------------------------------------------

def test_json_roundtrip_polynomial(rng):
    p = small_poly(rng, delta=2)
    q = NcPoly.from_json_dict(p.to_json_dict())
    assert p.close_to(q, 1e-15) and q.close_to(p, 1e-15)


def test_json_roundtrip_matrix_tuple(rng):
    X = random_tuple(rng, 3, 2)
    Y = MatrixTuple.from_json_dict(X.to_json_dict())
    assert Y.n == X.n and Y.g == X.g
    for a, b in zip(X.X, Y.X):
        assert np.allclose(a, b)
