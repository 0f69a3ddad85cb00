"""Noncommutative matrix polynomials in x_1..x_g and their adjoints.

A polynomial is a finite sum  f = sum_w f_w (x) w  where the words w range
over the free monoid on the 2g letters x_1..x_g, x_1*..x_g* and each
coefficient f_w is a complex delta x delta matrix.  Evaluation at a tuple of
n x n matrices follows the Kronecker convention

    f(X, X*) = sum_w f_w (tensor) w(X, X*),

so the result is an (n*delta) x (n*delta) matrix with delta x delta block
structure refined by n x n blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Letter",
    "Word",
    "NcPoly",
    "MatrixTuple",
    "add",
    "mul",
    "scale",
    "adjoint",
    "evaluate",
    "is_hermitian",
    "is_hereditary",
    "degree",
    "word_key",
    "random_tuple",
]

# Coefficient matrices whose largest entry falls below this threshold are
# dropped during canonicalization.
ZERO_THRESHOLD = 1e-12


@dataclass(frozen=True)
class Letter:
    """One letter of a word: variable index (1-based) and star flag."""

    index: int
    starred: bool = False

    def adjoint(self) -> "Letter":
        return Letter(self.index, not self.starred)

    def __repr__(self) -> str:
        return f"x{self.index}" + ("'" if self.starred else "")


# A word is a tuple of letters; the empty tuple is the identity word.
Word = tuple


def word_key(w: Word) -> tuple:
    """Canonical ordering key: by length, then lexicographic on (index, starred)."""
    return (len(w), tuple((lt.index, int(lt.starred)) for lt in w))


def word_adjoint(w: Word) -> Word:
    return tuple(lt.adjoint() for lt in reversed(w))


def _as_coeff(value, delta: int) -> np.ndarray:
    mat = np.asarray(value, dtype=complex)
    if mat.ndim == 0:
        mat = mat * np.eye(delta)
    if mat.shape != (delta, delta):
        raise ValueError(f"coefficient shape {mat.shape} != ({delta}, {delta})")
    return mat


class NcPoly:
    """A delta x delta matrix noncommutative polynomial, canonical form."""

    __slots__ = ("delta", "g", "terms")

    def __init__(self, delta: int, g: int, terms: Mapping[Word, object] | None = None):
        if delta < 1:
            raise ValueError("delta must be positive")
        if g < 0:
            raise ValueError("g must be nonnegative")
        canon: dict[Word, np.ndarray] = {}
        for word, coeff in (terms or {}).items():
            word = tuple(word)
            for lt in word:
                if not (1 <= lt.index <= g):
                    raise ValueError(f"letter {lt} out of range for g={g}")
            mat = _as_coeff(coeff, delta)
            if word in canon:
                canon[word] = canon[word] + mat
            else:
                canon[word] = mat
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "g", g)
        clean = {
            w: m for w, m in canon.items() if np.abs(m).max() >= ZERO_THRESHOLD
        }
        object.__setattr__(self, "terms", clean)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def constant(value, delta: int = 1, g: int = 0) -> "NcPoly":
        return NcPoly(delta, g, {(): _as_coeff(value, delta)})

    @staticmethod
    def variable(j: int, g: int, starred: bool = False, delta: int = 1) -> "NcPoly":
        return NcPoly(delta, g, {(Letter(j, starred),): np.eye(delta)})

    @staticmethod
    def zero(delta: int = 1, g: int = 0) -> "NcPoly":
        return NcPoly(delta, g, {})

    def with_g(self, g: int) -> "NcPoly":
        """Reinterpret with a (larger) variable count."""
        if g < self.g and any(lt.index > g for w in self.terms for lt in w):
            raise ValueError("cannot shrink g below used indices")
        return NcPoly(self.delta, g, self.terms)

    # -- ring structure -----------------------------------------------------

    def _check_compatible(self, other: "NcPoly") -> None:
        if self.delta != other.delta or self.g != other.g:
            raise ValueError(
                f"dimension mismatch: ({self.delta},{self.g}) vs "
                f"({other.delta},{other.g})"
            )

    def __add__(self, other: "NcPoly") -> "NcPoly":
        self._check_compatible(other)
        out = dict(self.terms)
        for w, m in other.terms.items():
            out[w] = out[w] + m if w in out else m
        return NcPoly(self.delta, self.g, out)

    def __sub__(self, other: "NcPoly") -> "NcPoly":
        return self + other.scale(-1)

    def __mul__(self, other: "NcPoly") -> "NcPoly":
        self._check_compatible(other)
        out: dict[Word, np.ndarray] = {}
        for w1, m1 in self.terms.items():
            for w2, m2 in other.terms.items():
                w = w1 + w2
                prod = m1 @ m2
                out[w] = out[w] + prod if w in out else prod
        return NcPoly(self.delta, self.g, out)

    def scale(self, alpha: complex) -> "NcPoly":
        return NcPoly(
            self.delta, self.g, {w: alpha * m for w, m in self.terms.items()}
        )

    def __neg__(self) -> "NcPoly":
        return self.scale(-1)

    def adjoint(self) -> "NcPoly":
        return NcPoly(
            self.delta,
            self.g,
            {word_adjoint(w): m.conj().T for w, m in self.terms.items()},
        )

    # -- inspection ---------------------------------------------------------

    def degree(self) -> int:
        return max((len(w) for w in self.terms), default=0)

    def coefficient(self, w: Word) -> np.ndarray:
        return self.terms.get(tuple(w), np.zeros((self.delta, self.delta)))

    def constant_term(self) -> np.ndarray:
        return self.coefficient(())

    def is_hermitian(self, tol: float = ZERO_THRESHOLD) -> bool:
        diff = self - self.adjoint()
        return all(np.abs(m).max() < tol for m in diff.terms.values())

    def is_hereditary(self) -> bool:
        for w in self.terms:
            seen_plain = False
            for lt in w:
                if not lt.starred:
                    seen_plain = True
                elif seen_plain:
                    return False
        return True

    def is_zero(self) -> bool:
        return not self.terms

    def sorted_words(self) -> list[Word]:
        return sorted(self.terms, key=word_key)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NcPoly):
            return NotImplemented
        if self.delta != other.delta or self.g != other.g:
            return False
        if set(self.terms) != set(other.terms):
            return False
        return all(np.array_equal(self.terms[w], other.terms[w]) for w in self.terms)

    def close_to(self, other: "NcPoly", tol: float = 1e-10) -> bool:
        diff = self - other
        return all(np.abs(m).max() <= tol for m in diff.terms.values())

    def __repr__(self) -> str:
        words = ", ".join(str(list(w)) or "1" for w in self.sorted_words())
        return f"NcPoly(delta={self.delta}, g={self.g}, words=[{words}])"

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, X: "MatrixTuple") -> np.ndarray:
        if X.g != self.g:
            raise ValueError(f"variable count mismatch: poly g={self.g}, tuple g={X.g}")
        n = X.n
        out = np.zeros((self.delta * n, self.delta * n), dtype=complex)
        for w, m in self.terms.items():
            out += np.kron(m, X.word_value(w))
        return out

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        terms = []
        for w in self.sorted_words():
            coeff = self.terms[w]
            terms.append(
                {
                    "word": [[lt.index, bool(lt.starred)] for lt in w],
                    "coeff": _matrix_to_json(coeff),
                }
            )
        return {"delta": self.delta, "g": self.g, "terms": terms}

    @staticmethod
    def from_json_dict(data: Mapping) -> "NcPoly":
        terms = {}
        for entry in data["terms"]:
            word = tuple(Letter(int(j), bool(s)) for j, s in entry["word"])
            terms[word] = _matrix_from_json(entry["coeff"])
        return NcPoly(int(data["delta"]), int(data["g"]), terms)


def _matrix_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _matrix_from_json(data) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data], dtype=complex)


@dataclass(frozen=True, init=False)
class MatrixTuple:
    """A level-n evaluation point: one n x n matrix per variable."""

    n: int
    X: tuple

    def __init__(self, mats: Iterable[np.ndarray]):
        mats = tuple(np.asarray(m, dtype=complex) for m in mats)
        if not mats:
            raise ValueError("need at least one matrix")
        n = mats[0].shape[0]
        for m in mats:
            if m.shape != (n, n):
                raise ValueError("all matrices must be square of equal size")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "X", mats)

    @property
    def g(self) -> int:
        return len(self.X)

    def letter_value(self, lt: Letter) -> np.ndarray:
        m = self.X[lt.index - 1]
        return m.conj().T if lt.starred else m

    def word_value(self, w: Word) -> np.ndarray:
        out = np.eye(self.n, dtype=complex)
        for lt in w:
            out = out @ self.letter_value(lt)
        return out

    def direct_sum(self, other: "MatrixTuple") -> "MatrixTuple":
        if self.g != other.g:
            raise ValueError("variable count mismatch")
        mats = []
        for a, b in zip(self.X, other.X):
            m = np.zeros((self.n + other.n, self.n + other.n), dtype=complex)
            m[: self.n, : self.n] = a
            m[self.n :, self.n :] = b
            mats.append(m)
        return MatrixTuple(mats)

    def scale(self, alpha: complex) -> "MatrixTuple":
        return MatrixTuple([alpha * m for m in self.X])

    def to_json_dict(self) -> dict:
        return {"n": self.n, "X": [_matrix_to_json(m) for m in self.X]}

    @staticmethod
    def from_json_dict(data: Mapping) -> "MatrixTuple":
        return MatrixTuple([_matrix_from_json(m) for m in data["X"]])


def random_tuple(rng: np.random.Generator, g: int, n: int) -> MatrixTuple:
    """Generic evaluation point: entries uniform on [-1,1] x [-1,1]i."""
    mats = [
        rng.uniform(-1, 1, (n, n)) + 1j * rng.uniform(-1, 1, (n, n)) for _ in range(g)
    ]
    return MatrixTuple(mats)


def zero_tuple(g: int, n: int = 1) -> MatrixTuple:
    return MatrixTuple([np.zeros((n, n)) for _ in range(g)])


# Functional aliases matching the operation names of the public surface.

def add(p: NcPoly, q: NcPoly) -> NcPoly:
    return p + q


def mul(p: NcPoly, q: NcPoly) -> NcPoly:
    return p * q


def scale(p: NcPoly, alpha: complex) -> NcPoly:
    return p.scale(alpha)


def adjoint(p: NcPoly) -> NcPoly:
    return p.adjoint()


def evaluate(p: NcPoly, X: MatrixTuple) -> np.ndarray:
    return p.evaluate(X)


def is_hermitian(p: NcPoly) -> bool:
    return p.is_hermitian()


def is_hereditary(p: NcPoly) -> bool:
    return p.is_hereditary()


def degree(p: NcPoly) -> int:
    return p.degree()
