import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freeconvex.ncpoly import Letter, NcPoly, random_tuple
from freeconvex.parser import (
    Adjoint,
    Inverse,
    MatrixExpr,
    Mul,
    ParseError,
    RationalNotPolynomial,
    Variable,
    format_poly,
    parse,
    to_polynomial,
)


def lowered(text, g=None):
    return to_polynomial(parse(text), g=g)


# -- grammar -----------------------------------------------------------------

def test_parses_variables_and_adjoints():
    e = parse("x1 * x2'")
    assert isinstance(e, Mul)
    assert isinstance(e.parts[0], Variable) and e.parts[0].index == 1
    assert isinstance(e.parts[1], Adjoint)


def test_precedence_of_product_over_sum():
    p = lowered("1 + 2*x1*x2")
    w = (Letter(1, False), Letter(2, False))
    assert np.allclose(p.coefficient(w), [[2.0]])
    assert np.allclose(p.constant_term(), [[1.0]])


def test_unary_minus_and_parentheses():
    p = lowered("-(x1 + x1') * x1")
    q = (NcPoly.variable(1, 1) + NcPoly.variable(1, 1, starred=True)).scale(
        -1
    ) * NcPoly.variable(1, 1)
    assert p.close_to(q, 1e-14)


def test_decimal_constants():
    p = lowered("0.5 + 0.01*x1")
    assert np.allclose(p.constant_term(), [[0.5]])
    assert np.allclose(p.coefficient((Letter(1, False),)), [[0.01]])


def test_adjoint_of_parenthesized_expression():
    p = lowered("(x1*x2)'")
    w = (Letter(2, True), Letter(1, True))
    assert np.allclose(p.coefficient(w), [[1.0]])


def test_inverse_node_and_polynomial_rejection():
    e = parse("inv(1 - x1)")
    assert isinstance(e, Inverse)
    assert e.has_inverse()
    with pytest.raises(RationalNotPolynomial):
        to_polynomial(e)


def test_matrix_expression_lowering():
    e = parse("[[1, x1],[x1', 1]]")
    assert isinstance(e, MatrixExpr)
    p = to_polynomial(e, g=1)
    assert p.delta == 2
    C = p.coefficient((Letter(1, False),))
    assert np.allclose(C, [[0.0, 1.0], [0.0, 0.0]])


def test_matrix_rows_must_have_equal_length():
    with pytest.raises(ParseError):
        parse("[[1, x1],[x1']]")


def test_parse_errors_carry_a_source_span():
    with pytest.raises(ParseError) as exc:
        parse("1 + * x1")
    assert exc.value.span is not None
    assert exc.value.span.start <= 4 <= exc.value.span.end


def test_unknown_token_rejected():
    with pytest.raises(ParseError):
        parse("1 + y3")


def test_variable_count_inference_and_override():
    p = lowered("x2")
    assert p.g == 2
    q = lowered("x2", g=5)
    assert q.g == 5


# -- pretty printing ---------------------------------------------------------

def test_format_of_simple_polynomial():
    p = lowered("1 - x1*x1'")
    assert format_poly(p) == "1 - x1*x1'"


def test_format_parse_roundtrip_hand_cases():
    for text in (
        "1 + 0.5*x1 + 0.5*x1'",
        "1 - 2*x1*x2' + x2*x2*x2",
        "-3 + x1'*x1",
    ):
        p = lowered(text)
        assert lowered(format_poly(p), g=p.g).close_to(p, 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_format_parse_roundtrip_random(data):
    rng = np.random.default_rng(data.draw(st.integers(0, 10**6)))
    terms = {}
    for _ in range(4):
        length = int(rng.integers(0, 4))
        w = tuple(
            Letter(int(rng.integers(1, 3)), bool(rng.integers(2)))
            for _ in range(length)
        )
        terms[w] = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
    p = NcPoly(1, 2, terms)
    assert lowered(format_poly(p), g=2).close_to(p, 1e-9)


def test_roundtrip_preserves_evaluation(rng):
    p = lowered("1 + (x1 + x1')*(x1 + x1') - x2*x1'")
    q = lowered(format_poly(p), g=2)
    X = random_tuple(rng, 2, 3)
    assert np.allclose(p.evaluate(X), q.evaluate(X))
