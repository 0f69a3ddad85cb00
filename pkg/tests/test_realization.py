import numpy as np
import pytest

from freeconvex.ncpoly import Letter, NcPoly, random_tuple
from freeconvex.parser import parse
from freeconvex.realization import (
    Realization,
    SingularAtOrigin,
    equivalent,
    is_minimal,
    minimize,
    realize_expression,
    realize_inverse,
    realize_polynomial,
    realize_with_inverse,
    series,
    series_poly,
)
from conftest import poly


def realization_of_poly(f):
    return minimize(realize_polynomial(f).normalized())


# -- polynomial realizations -------------------------------------------------

def test_series_recovers_polynomial_coefficients(rng):
    f = poly("1 + 2*x1 - x1*x2' + 3*x2*x1*x1'")
    r = realization_of_poly(f)
    tab = series(r, f.degree())
    for w, m in f.terms.items():
        if w == ():
            continue
        assert np.allclose(tab.coefficient(w), m, atol=1e-10)
    # no spurious terms beyond those of f
    assert series_poly(r, f.degree() + 2).close_to(f, 1e-10)


def test_polynomial_realization_evaluates_correctly(rng):
    f = poly("1 - x1*x1' - (x1 + x1')*x2*x2'")
    r = realization_of_poly(f)
    for n in (1, 2, 3):
        X = random_tuple(rng, 2, n)
        assert np.allclose(r.evaluate(X), f.evaluate(X), atol=1e-10)


def test_matrix_polynomial_realization(rng):
    f = poly("[[1, x1],[x1', 1]]", g=1)
    r = realization_of_poly(f)
    X = random_tuple(rng, 1, 2)
    assert np.allclose(r.evaluate(X), f.evaluate(X), atol=1e-10)


def test_word_coefficient_matches_series(rng):
    f = poly("1 + x1*x1*x2'")
    r = realization_of_poly(f)
    w = (Letter(1, False), Letter(1, False), Letter(2, True))
    assert np.allclose(r.word_coefficient(w), [[1.0]], atol=1e-10)


# -- minimality --------------------------------------------------------------

def test_minimal_size_of_geometric_series():
    # [DERIVED] inv(1 - x1*x2) has McMillan degree 2
    r = realize_expression(parse("inv(1 - x1*x2)"))
    assert r.d == 2
    assert is_minimal(r)


def test_minimize_is_idempotent_and_strips_padding(rng):
    f = poly("1 + x1 + x1*x1'")
    r = realization_of_poly(f)
    # pad the state space with an unreachable direction
    pad = Realization(
        r.delta,
        r.g,
        [np.pad(a, ((0, 1), (0, 1))) for a in r.A],
        [np.pad(bk, ((0, 1), (0, 0))) for bk in r.b],
        np.pad(r.c, ((0, 1), (0, 0))),
    )
    assert not is_minimal(pad)
    back = minimize(pad)
    assert back.d == r.d
    assert equivalent(back, r)
    assert minimize(back).d == back.d


def test_equivalent_under_state_isomorphism(rng):
    f = poly("1 + x1 - 2*x1'*x1")
    r = realization_of_poly(f)
    S = rng.uniform(-1, 1, (r.d, r.d)) + 1j * rng.uniform(-1, 1, (r.d, r.d))
    Si = np.linalg.inv(S)
    s = Realization(
        r.delta,
        r.g,
        [Si @ a @ S for a in r.A],
        [Si @ bk for bk in r.b],
        S.conj().T @ r.c,
    )
    assert equivalent(r, s)


def test_inequivalent_realizations_detected():
    r = realization_of_poly(poly("1 + x1"))
    s = realization_of_poly(poly("1 + 2*x1"))
    assert not equivalent(r, s)


# -- rational operations -----------------------------------------------------

def test_inverse_realization_evaluates_to_matrix_inverse(rng):
    f = poly("1 - x1 - x1*x1'")
    r = realization_of_poly(f)
    rinv = minimize(realize_inverse(r))
    for n in (1, 2):
        X = random_tuple(rng, 1, n).scale(0.2)
        assert np.allclose(
            rinv.evaluate(X), np.linalg.inv(f.evaluate(X)), atol=1e-9
        )


def test_inverse_of_inverse_is_equivalent(rng):
    f = poly("1 + x1*x2 - x2'*x1")
    r = realization_of_poly(f)
    back = minimize(realize_inverse(minimize(realize_inverse(r))))
    assert equivalent(r, back)


def test_geometric_series_coefficients():
    # [TRIVIAL] inv(1 - x1) = sum of x1^k
    r = realize_expression(parse("inv(1 - x1)"))
    tab = series(r, 5)
    for k in range(1, 6):
        w = (Letter(1, False),) * k
        assert np.allclose(tab.coefficient(w), [[1.0]], atol=1e-10)


def test_singular_at_origin_rejected():
    with pytest.raises(SingularAtOrigin):
        realize_expression(parse("inv(x1)"))


def test_realize_with_inverse_is_block_diagonal(rng):
    e = parse("1 - x1*x1'")
    f = poly("1 - x1*x1'")
    r = realize_with_inverse(e)
    assert r.delta == 2
    for n in (1, 2):
        X = random_tuple(rng, 1, n).scale(0.3)
        val = r.evaluate(X)
        fx = f.evaluate(X)
        assert np.allclose(val[:n, :n], fx, atol=1e-9)
        assert np.allclose(val[n:, n:], np.linalg.inv(fx), atol=1e-9)
        assert np.abs(val[:n, n:]).max() < 1e-9


def test_nested_rational_expression(rng):
    # f = inv(1 - x1*inv(1 - x2)) agrees with the explicit inverse
    e = parse("inv(1 - x1*inv(1 - x2))")
    r = realize_expression(e)
    for n in (1, 2):
        X = random_tuple(rng, 2, n).scale(0.2)
        inner = np.linalg.inv(np.eye(n) - X.X[1])
        expected = np.linalg.inv(np.eye(n) - X.X[0] @ inner)
        assert np.allclose(r.evaluate(X), expected, atol=1e-9)


def test_json_roundtrip_realization():
    r = realize_expression(parse("inv(1 - x1*x2)"))
    s = Realization.from_json_dict(r.to_json_dict())
    assert s.d == r.d and s.g == r.g and s.delta == r.delta
    assert equivalent(r, minimize(s))


# -- randomized fidelity -----------------------------------------------------

def test_random_polynomial_series_fidelity(rng):
    for _ in range(15):
        g = int(rng.integers(1, 3))
        terms = {(): np.eye(1)}
        for _ in range(4):
            length = int(rng.integers(1, 4))
            w = tuple(
                Letter(int(rng.integers(1, g + 1)), bool(rng.integers(2)))
                for _ in range(length)
            )
            terms[w] = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        f = NcPoly(1, g, terms)
        r = realization_of_poly(f)
        assert is_minimal(r)
        assert series_poly(r, 2 * f.degree() + 1).close_to(f, 1e-8)
