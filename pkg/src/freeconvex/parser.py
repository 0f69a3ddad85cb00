"""Expression language for noncommutative polynomial and rational expressions.

Grammar (whitespace insignificant)::

    expr    := term (('+' | '-') term)*
    term    := factor ('*' factor)*
    factor  := '-' factor | primary postfix*
    postfix := "'"                       (adjoint)
    primary := NUMBER | 'i' | VAR | '(' expr ')' | 'inv' '(' expr ')' | matrix
    matrix  := '[' row (',' row)* ']' with row := '[' expr (',' expr)* ']'
    VAR     := 'x' DIGITS        NUMBER := decimal literal (no exponent)

Multiplication must be explicit; juxtaposition is a syntax error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ncpoly import NcPoly

__all__ = [
    "RationalExpr",
    "Constant",
    "Variable",
    "Adjoint",
    "Negate",
    "Add",
    "Mul",
    "Inverse",
    "MatrixExpr",
    "SourceSpan",
    "ParseError",
    "RationalNotPolynomial",
    "parse",
    "to_polynomial",
    "format_poly",
]


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError("start must not exceed end")


class ParseError(ValueError):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{message} (at {span.start}..{span.end})")
        self.span = span


class RationalNotPolynomial(ValueError):
    pass


class RationalExpr:
    """Base class of expression tree nodes."""

    span: Optional[SourceSpan] = None

    def has_inverse(self) -> bool:
        raise NotImplementedError

    def max_var_index(self) -> int:
        raise NotImplementedError

    def children(self) -> tuple:
        return ()


@dataclass(frozen=True)
class Constant(RationalExpr):
    value: complex

    def has_inverse(self) -> bool:
        return False

    def max_var_index(self) -> int:
        return 0


@dataclass(frozen=True)
class Variable(RationalExpr):
    index: int
    starred: bool = False

    def has_inverse(self) -> bool:
        return False

    def max_var_index(self) -> int:
        return self.index


@dataclass(frozen=True)
class Adjoint(RationalExpr):
    child: RationalExpr

    def has_inverse(self) -> bool:
        return self.child.has_inverse()

    def max_var_index(self) -> int:
        return self.child.max_var_index()

    def children(self) -> tuple:
        return (self.child,)


@dataclass(frozen=True)
class Negate(RationalExpr):
    child: RationalExpr

    def has_inverse(self) -> bool:
        return self.child.has_inverse()

    def max_var_index(self) -> int:
        return self.child.max_var_index()

    def children(self) -> tuple:
        return (self.child,)


@dataclass(frozen=True)
class Add(RationalExpr):
    parts: tuple

    def has_inverse(self) -> bool:
        return any(p.has_inverse() for p in self.parts)

    def max_var_index(self) -> int:
        return max((p.max_var_index() for p in self.parts), default=0)

    def children(self) -> tuple:
        return self.parts


@dataclass(frozen=True)
class Mul(RationalExpr):
    parts: tuple

    def has_inverse(self) -> bool:
        return any(p.has_inverse() for p in self.parts)

    def max_var_index(self) -> int:
        return max((p.max_var_index() for p in self.parts), default=0)

    def children(self) -> tuple:
        return self.parts


@dataclass(frozen=True)
class Inverse(RationalExpr):
    child: RationalExpr

    def has_inverse(self) -> bool:
        return True

    def max_var_index(self) -> int:
        return self.child.max_var_index()

    def children(self) -> tuple:
        return (self.child,)


@dataclass(frozen=True)
class MatrixExpr(RationalExpr):
    grid: tuple  # tuple of tuples of RationalExpr, square

    def __post_init__(self):
        rows = len(self.grid)
        if any(len(row) != rows for row in self.grid):
            raise ValueError("matrix literal must be square")

    def has_inverse(self) -> bool:
        return any(e.has_inverse() for row in self.grid for e in row)

    def max_var_index(self) -> int:
        return max(
            (e.max_var_index() for row in self.grid for e in row), default=0
        )

    def children(self) -> tuple:
        return tuple(e for row in self.grid for e in row)


# -- tokenizer ---------------------------------------------------------------

_PUNCT = set("+-*'()[],")


def _tokenize(text: str) -> list:
    tokens = []  # (kind, value, span)
    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        start = pos
        if ch in _PUNCT:
            tokens.append((ch, ch, SourceSpan(start, start + 1)))
            pos += 1
        elif ch.isdigit() or ch == ".":
            pos += 1
            seen_dot = ch == "."
            while pos < n and (text[pos].isdigit() or (text[pos] == "." and not seen_dot)):
                seen_dot = seen_dot or text[pos] == "."
                pos += 1
            lit = text[start:pos]
            if lit == ".":
                raise ParseError("malformed number", SourceSpan(start, pos))
            tokens.append(("number", float(lit), SourceSpan(start, pos)))
        elif ch.isalpha():
            pos += 1
            while pos < n and (text[pos].isalnum() or text[pos] == "_"):
                pos += 1
            name = text[start:pos]
            span = SourceSpan(start, pos)
            if name == "i":
                tokens.append(("imag", 1j, span))
            elif name == "inv":
                tokens.append(("inv", name, span))
            elif name.startswith("x") and name[1:].isdigit():
                idx = int(name[1:])
                if idx < 1:
                    raise ParseError(f"bad variable index in {name!r}", span)
                tokens.append(("var", idx, span))
            else:
                raise ParseError(f"unknown identifier {name!r}", span)
        else:
            raise ParseError(f"unexpected character {ch!r}", SourceSpan(start, start + 1))
    tokens.append(("eof", None, SourceSpan(n, n)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str):
        tok = self.next()
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[0]!r}", tok[2])
        return tok

    def parse(self) -> RationalExpr:
        expr = self.expr()
        tok = self.peek()
        if tok[0] != "eof":
            raise ParseError(f"unexpected trailing {tok[0]!r}", tok[2])
        return expr

    def expr(self) -> RationalExpr:
        parts = [self.term()]
        while self.peek()[0] in ("+", "-"):
            op = self.next()[0]
            rhs = self.term()
            parts.append(Negate(rhs) if op == "-" else rhs)
        return parts[0] if len(parts) == 1 else Add(tuple(parts))

    def term(self) -> RationalExpr:
        parts = [self.factor()]
        while self.peek()[0] == "*":
            self.next()
            parts.append(self.factor())
        return parts[0] if len(parts) == 1 else Mul(tuple(parts))

    def factor(self) -> RationalExpr:
        if self.peek()[0] == "-":
            self.next()
            return Negate(self.factor())
        node = self.primary()
        while self.peek()[0] == "'":
            self.next()
            node = Adjoint(node)
        return node

    def primary(self) -> RationalExpr:
        tok = self.next()
        kind, value, span = tok
        if kind == "number":
            return Constant(complex(value))
        if kind == "imag":
            return Constant(1j)
        if kind == "var":
            return Variable(value)
        if kind == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if kind == "inv":
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            return Inverse(inner)
        if kind == "[":
            return self.matrix(span)
        raise ParseError(f"unexpected token {kind!r}", span)

    def matrix(self, open_span: SourceSpan) -> RationalExpr:
        rows = []
        while True:
            self.expect("[")
            row = [self.expr()]
            while self.peek()[0] == ",":
                self.next()
                row.append(self.expr())
            self.expect("]")
            rows.append(tuple(row))
            if self.peek()[0] == ",":
                self.next()
                continue
            break
        close = self.expect("]")
        width = len(rows[0])
        if any(len(r) != width for r in rows) or len(rows) != width:
            raise ParseError(
                "matrix literal must be square", SourceSpan(open_span.start, close[2].end)
            )
        return MatrixExpr(tuple(rows))


def parse(text: str) -> RationalExpr:
    return _Parser(text).parse()


# -- lowering to NcPoly ------------------------------------------------------

def _expr_delta(e: RationalExpr) -> int:
    if isinstance(e, MatrixExpr):
        return len(e.grid)
    return 1


def to_polynomial(e: RationalExpr, g: int | None = None) -> NcPoly:
    """Expand an inverse-free tree to a canonical NcPoly."""
    if e.has_inverse():
        raise RationalNotPolynomial("expression contains inv(...)")
    if g is None:
        g = e.max_var_index()
    return _lower(e, g)


def _lower(e: RationalExpr, g: int) -> NcPoly:
    if isinstance(e, Constant):
        return NcPoly.constant(e.value, 1, g)
    if isinstance(e, Variable):
        return NcPoly.variable(e.index, g, e.starred)
    if isinstance(e, Adjoint):
        return _lower(e.child, g).adjoint()
    if isinstance(e, Negate):
        return -_lower(e.child, g)
    if isinstance(e, Add):
        parts = [_lower(p, g) for p in e.parts]
        delta = max(p.delta for p in parts)
        parts = [_broadcast(p, delta) for p in parts]
        out = parts[0]
        for p in parts[1:]:
            out = out + p
        return out
    if isinstance(e, Mul):
        parts = [_lower(p, g) for p in e.parts]
        delta = max(p.delta for p in parts)
        parts = [_broadcast(p, delta) for p in parts]
        out = parts[0]
        for p in parts[1:]:
            out = out * p
        return out
    if isinstance(e, MatrixExpr):
        delta = len(e.grid)
        entries = [[_lower(cell, g) for cell in row] for row in e.grid]
        for row in entries:
            for cell in row:
                if cell.delta != 1:
                    raise ValueError("matrix entries must be scalar expressions")
        terms: dict = {}
        for i, row in enumerate(entries):
            for j, cell in enumerate(row):
                for w, m in cell.terms.items():
                    block = terms.setdefault(w, np.zeros((delta, delta), dtype=complex))
                    block[i, j] += m[0, 0]
        return NcPoly(delta, g, terms)
    raise TypeError(f"unknown node {type(e).__name__}")


def _broadcast(p: NcPoly, delta: int) -> NcPoly:
    """Embed a scalar polynomial as p * I_delta."""
    if p.delta == delta:
        return p
    if p.delta != 1:
        raise ValueError(f"cannot mix matrix sizes {p.delta} and {delta}")
    return NcPoly(delta, p.g, {w: m[0, 0] * np.eye(delta) for w, m in p.terms.items()})


# -- formatting --------------------------------------------------------------

def _format_real(x: float) -> str:
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    # Positional (never scientific) shortest representation that round-trips.
    return np.format_float_positional(x, unique=True, trim="0")


def _format_complex(z: complex) -> str:
    if z.imag == 0:
        return _format_real(z.real)
    if z.real == 0:
        if z.imag == 1:
            return "i"
        return f"{_format_real(z.imag)}*i"
    return f"({_format_real(z.real)} + {_format_real(z.imag)}*i)"


def _format_word(w) -> str:
    return "*".join(repr(lt) for lt in w)


def _format_scalar_terms(p: NcPoly, entry=None) -> str:
    """Render one scalar component (entry (i,j) when delta > 1)."""
    parts = []
    for w in p.sorted_words():
        coeff = p.terms[w][entry] if entry is not None else p.terms[w][0, 0]
        if coeff == 0:
            continue
        negative = (coeff.imag == 0 and coeff.real < 0) or (
            coeff.real == 0 and coeff.imag < 0
        )
        if negative:
            coeff = -coeff
        word_txt = _format_word(w)
        if not word_txt:
            body = _format_complex(coeff)
        elif coeff == 1:
            body = word_txt
        else:
            body = f"{_format_complex(coeff)}*{word_txt}"
        if not parts:
            parts.append(f"-{body}" if negative else body)
        else:
            parts.append(f"- {body}" if negative else f"+ {body}")
    return " ".join(parts) if parts else "0"


def format_poly(p: NcPoly) -> str:
    """Canonical text; to_polynomial(parse(format_poly(p))) == p exactly."""
    if p.delta == 1:
        return _format_scalar_terms(p)
    rows = []
    for i in range(p.delta):
        cells = [_format_scalar_terms(p, (i, j)) for j in range(p.delta)]
        rows.append("[" + ", ".join(cells) + "]")
    return "[" + ", ".join(rows) + "]"
