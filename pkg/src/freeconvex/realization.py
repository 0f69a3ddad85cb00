"""Fornasini-Marchesini state-space calculus for nc rational expressions.

A realization holds data (c, A_1..A_2g, b_1..b_2g) of sizes d x delta,
d x d, d x delta and represents the function

    I_delta + c* L(z)^{-1} b(z),   L(z) = I_d - sum_k A_k z_k,
    b(z) = sum_k b_k z_k,

where z = (z_1..z_2g) stands for (x_1..x_g, x_1*..x_g*).  The Taylor
coefficient at the word z_{k_1}...z_{k_m} is c* A_{k_1}...A_{k_{m-1}} b_{k_m}.

Internally a slightly more general affine form  E + c* L^{-1} b  (constant
term E an arbitrary delta x delta matrix) is used while folding expression
trees; the public Realization type is always normalized to E = I.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import parser as _parser
from .ncpoly import Letter, MatrixTuple, NcPoly, Word, _matrix_from_json, _matrix_to_json

__all__ = [
    "Realization",
    "SeriesTable",
    "SingularAtOrigin",
    "NotMinimal",
    "realize_sum",
    "realize_prod",
    "realize_inverse",
    "minimize",
    "realize_expression",
    "realize_polynomial",
    "realize_with_inverse",
    "series",
    "equivalent",
]

RANK_TOL = 1e-8


class SingularAtOrigin(ValueError):
    pass


class NotMinimal(ValueError):
    pass


@dataclass(frozen=True, init=False)
class Realization:
    delta: int
    g: int
    d: int
    A: tuple  # 2g matrices d x d
    b: tuple  # 2g matrices d x delta
    c: np.ndarray  # d x delta

    def __init__(self, delta, g, A, b, c):
        A = tuple(np.asarray(m, dtype=complex) for m in A)
        b = tuple(np.asarray(m, dtype=complex) for m in b)
        c = np.asarray(c, dtype=complex)
        if len(A) != 2 * g or len(b) != 2 * g:
            raise ValueError("need 2g state and input matrices")
        d = c.shape[0] if c.size else 0
        if c.shape != (d, delta):
            raise ValueError("c must be d x delta")
        for m in A:
            if m.shape != (d, d):
                raise ValueError("state matrices must be d x d")
        for m in b:
            if m.shape != (d, delta):
                raise ValueError("input matrices must be d x delta")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @staticmethod
    def identity(delta: int, g: int) -> "Realization":
        zero_state = [np.zeros((0, 0))] * (2 * g)
        zero_in = [np.zeros((0, delta))] * (2 * g)
        return Realization(delta, g, zero_state, zero_in, np.zeros((0, delta)))

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, X: MatrixTuple) -> np.ndarray:
        """Value of the realized function at (X, X*)."""
        if X.g != self.g:
            raise ValueError("variable count mismatch")
        n = X.n
        if self.d == 0:
            return np.eye(self.delta * n, dtype=complex)
        Z = _slot_values(X)
        L = np.eye(self.d * n, dtype=complex)
        bval = np.zeros((self.d * n, self.delta * n), dtype=complex)
        for k in range(2 * self.g):
            L -= np.kron(self.A[k], Z[k])
            bval += np.kron(self.b[k], Z[k])
        core = np.linalg.solve(L, bval)
        return np.eye(self.delta * n, dtype=complex) + np.kron(self.c.conj().T, np.eye(n)) @ core

    def word_coefficient(self, w: Word) -> np.ndarray:
        """Taylor coefficient at a nonempty word (empty word gives I)."""
        if not w:
            return np.eye(self.delta, dtype=complex)
        if self.d == 0:
            return np.zeros((self.delta, self.delta), dtype=complex)
        slots = [_letter_slot(lt, self.g) for lt in w]
        acc = self.c.conj().T  # delta x d
        for k in slots[:-1]:
            acc = acc @ self.A[k]
        return acc @ self.b[slots[-1]]

    def to_json_dict(self) -> dict:
        return {
            "delta": self.delta,
            "g": self.g,
            "d": self.d,
            "A": [_matrix_to_json(m) for m in self.A],
            "b": [_matrix_to_json(m) for m in self.b],
            "c": _matrix_to_json(self.c),
        }

    @staticmethod
    def from_json_dict(data: Mapping) -> "Realization":
        return Realization(
            int(data["delta"]),
            int(data["g"]),
            [_matrix_from_json(m) for m in data["A"]],
            [_matrix_from_json(m) for m in data["b"]],
            _matrix_from_json(data["c"]),
        )


def _letter_slot(lt: Letter, g: int) -> int:
    return (lt.index - 1) + (g if lt.starred else 0)


def _slot_letter(k: int, g: int) -> Letter:
    return Letter(k % g + 1, k >= g)


def _slot_values(X: MatrixTuple) -> list:
    return [np.asarray(m) for m in X.X] + [m.conj().T for m in X.X]


# -- series ------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesTable:
    order: int
    table: Mapping  # Word -> delta x delta matrix

    def coefficient(self, w: Word) -> np.ndarray:
        return self.table.get(tuple(w), None)


def series(r: Realization, order: int, prune: float = 1e-14) -> SeriesTable:
    """Exact truncated Taylor table of the realized function.

    Prefix branches whose propagated row block vanishes are pruned, which
    keeps the enumeration finite-cost for nilpotent (polynomial) state
    matrices at any order.
    """
    table: dict = {(): np.eye(r.delta, dtype=complex)}
    if r.d == 0 or order < 1:
        return SeriesTable(order, table)
    scale = max(
        1.0, max((np.abs(m).max() for m in (*r.A, *r.b, r.c)), default=1.0)
    )
    threshold = prune * scale

    def walk(prefix: tuple, acc: np.ndarray, depth: int):
        # acc = c* A_{k_1}...A_{k_depth}, a delta x d matrix
        for k in range(2 * r.g):
            coeff = acc @ r.b[k]
            word = prefix + (_slot_letter(k, r.g),)
            if np.abs(coeff).max() >= threshold:
                table[word] = coeff
            if depth + 1 < order:
                nxt = acc @ r.A[k]
                if np.abs(nxt).max() >= threshold:
                    walk(word, nxt, depth + 1)

    walk((), r.c.conj().T, 0)
    return SeriesTable(order, table)


def series_poly(r: Realization, order: int) -> NcPoly:
    tab = series(r, order)
    return NcPoly(r.delta, r.g, dict(tab.table))


# -- affine internal form ----------------------------------------------------

@dataclass(frozen=True)
class _Affine:
    """Function E + c* L^{-1} b with arbitrary constant term E."""

    E: np.ndarray  # delta x delta
    delta: int
    g: int
    A: tuple
    b: tuple
    c: np.ndarray

    @staticmethod
    def constant(E, g: int) -> "_Affine":
        E = np.atleast_2d(np.asarray(E, dtype=complex))
        delta = E.shape[0]
        return _Affine(
            E,
            delta,
            g,
            tuple(np.zeros((0, 0)) for _ in range(2 * g)),
            tuple(np.zeros((0, delta)) for _ in range(2 * g)),
            np.zeros((0, delta)),
        )

    @staticmethod
    def variable(j: int, g: int, starred: bool) -> "_Affine":
        slot = _letter_slot(Letter(j, starred), g)
        b = [np.zeros((1, 1)) for _ in range(2 * g)]
        b[slot] = np.ones((1, 1))
        return _Affine(
            np.zeros((1, 1)),
            1,
            g,
            tuple(np.zeros((1, 1)) for _ in range(2 * g)),
            tuple(b),
            np.ones((1, 1)),
        )

    @property
    def d(self) -> int:
        return self.c.shape[0]

    def scale(self, alpha: complex) -> "_Affine":
        return _Affine(
            alpha * self.E, self.delta, self.g, self.A, self.b, np.conj(alpha) * self.c
        )

    def add(self, other: "_Affine") -> "_Affine":
        _check(self, other)
        A = tuple(_blkdiag(a1, a2) for a1, a2 in zip(self.A, other.A))
        b = tuple(np.vstack([b1, b2]) for b1, b2 in zip(self.b, other.b))
        c = np.vstack([self.c, other.c])
        return _Affine(self.E + other.E, self.delta, self.g, A, b, c)

    def mul(self, other: "_Affine") -> "_Affine":
        _check(self, other)
        d1, d2 = self.d, other.d
        cs2 = other.c.conj().T  # delta x d2
        A = []
        for a1, a2, b1 in zip(self.A, other.A, self.b):
            top = np.hstack([a1, b1 @ cs2])
            bot = np.hstack([np.zeros((d2, d1)), a2])
            A.append(np.vstack([top, bot]))
        b = tuple(
            np.vstack([b1 @ other.E, b2]) for b1, b2 in zip(self.b, other.b)
        )
        c = np.vstack([self.c, other.c @ self.E.conj().T])
        return _Affine(self.E @ other.E, self.delta, self.g, tuple(A), tuple(b), c)

    def inverse(self, tol: float = RANK_TOL) -> "_Affine":
        E = self.E
        if E.size == 0 or np.linalg.cond(E) > 1 / tol:
            raise SingularAtOrigin("value at the origin is singular")
        Einv = np.linalg.inv(E)
        chat_star = Einv @ self.c.conj().T  # delta x d
        A = tuple(a - bk @ chat_star for a, bk in zip(self.A, self.b))
        b = tuple(bk @ Einv for bk in self.b)
        c = -chat_star.conj().T
        return _Affine(Einv, self.delta, self.g, A, b, c)

    def normalized(self, tol: float = RANK_TOL) -> Realization:
        """Left-normalize to value I:  E^{-1} * function."""
        if self.d == 0 and self.delta and np.allclose(self.E, np.eye(self.delta)):
            return Realization.identity(self.delta, self.g)
        if self.E.size == 0 or np.linalg.cond(self.E) > 1 / tol:
            raise SingularAtOrigin("value at the origin is singular")
        Einv = np.linalg.inv(self.E)
        c_star = Einv @ self.c.conj().T
        return Realization(self.delta, self.g, self.A, self.b, c_star.conj().T)

    @staticmethod
    def of(r: Realization) -> "_Affine":
        return _Affine(np.eye(r.delta, dtype=complex), r.delta, r.g, r.A, r.b, r.c)

    def value_at_zero(self) -> np.ndarray:
        return self.E


def _check(a: _Affine, b: _Affine) -> None:
    if a.delta != b.delta or a.g != b.g:
        raise ValueError("dimension mismatch")


def _blkdiag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]), dtype=complex)
    out[: a.shape[0], : a.shape[1]] = a
    out[a.shape[0] :, a.shape[1] :] = b
    return out


# -- Kalman-style minimization ----------------------------------------------

def _orth(cols: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of the column span, rank cut at tol * sigma_max."""
    if cols.size == 0:
        return np.zeros((cols.shape[0], 0))
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((cols.shape[0], 0))
    rank = int(np.sum(s > tol * s[0]))
    return u[:, :rank]


def _reachable_basis(A: tuple, seed: np.ndarray, tol: float) -> np.ndarray:
    """Smallest A-invariant subspace containing the columns of seed."""
    V = _orth(seed, tol)
    while True:
        cols = [V] + [a @ V for a in A]
        Vn = _orth(np.hstack(cols), tol)
        if Vn.shape[1] == V.shape[1]:
            return Vn
        V = Vn


def minimize(r: Realization, tol: float = RANK_TOL) -> Realization:
    """Compress to a controllable and observable (minimal) realization."""
    A, b, c = list(r.A), list(r.b), r.c
    d = r.d
    while True:
        if d == 0:
            break
        ctrl = _reachable_basis(tuple(A), np.hstack(b) if b else np.zeros((d, 0)), tol)
        if ctrl.shape[1] < d:
            A = [ctrl.conj().T @ a @ ctrl for a in A]
            b = [ctrl.conj().T @ bk for bk in b]
            c = ctrl.conj().T @ c
            d = ctrl.shape[1]
            continue
        obs = _reachable_basis(tuple(a.conj().T for a in A), c, tol)
        if obs.shape[1] < d:
            A = [obs.conj().T @ a @ obs for a in A]
            b = [obs.conj().T @ bk for bk in b]
            c = obs.conj().T @ c
            d = obs.shape[1]
            continue
        break
    if d == 0:
        return Realization.identity(r.delta, r.g)
    return Realization(r.delta, r.g, A, b, c)


def is_minimal(r: Realization, tol: float = RANK_TOL) -> bool:
    if r.d == 0:
        return True
    ctrl = _reachable_basis(r.A, np.hstack(r.b), tol)
    if ctrl.shape[1] < r.d:
        return False
    obs = _reachable_basis(tuple(a.conj().T for a in r.A), r.c, tol)
    return obs.shape[1] == r.d


# -- public combinators ------------------------------------------------------

def realize_sum(r: Realization, s: Realization) -> Realization:
    """Combine normalized realizations; realizes r + s - I (value I at 0)."""
    out = _Affine.of(r).add(_Affine.of(s))
    return Realization(
        r.delta, r.g, out.A, out.b, out.c
    )


def realize_prod(r: Realization, s: Realization) -> Realization:
    out = _Affine.of(r).mul(_Affine.of(s))
    return out.normalized()


def realize_inverse(r: Realization) -> Realization:
    out = _Affine.of(r).inverse()
    return out.normalized()


# -- polynomials and expression trees ---------------------------------------

def realize_polynomial(f: NcPoly) -> _Affine:
    """Exact (suffix-indexed) realization of a polynomial; not yet minimal."""
    suffixes: set = set()
    for w in f.terms:
        for start in range(len(w)):
            suffixes.add(w[start:])
    suffixes.discard(())
    order = sorted(suffixes, key=lambda w: (len(w), tuple((lt.index, lt.starred) for lt in w)))
    index = {w: i for i, w in enumerate(order)}
    m = len(order)
    delta, g = f.delta, f.g
    d = m * delta
    A = [np.zeros((d, d), dtype=complex) for _ in range(2 * g)]
    b = [np.zeros((d, delta), dtype=complex) for _ in range(2 * g)]
    c = np.zeros((d, delta), dtype=complex)
    eye = np.eye(delta)
    for w, i in index.items():
        lead = w[0]
        k = _letter_slot(lead, g)
        if len(w) == 1:
            b[k][i * delta : (i + 1) * delta, :] = eye
        else:
            tail = w[1:]
            j = index[tail]
            A[k][i * delta : (i + 1) * delta, j * delta : (j + 1) * delta] = eye
        if w in f.terms:
            c[i * delta : (i + 1) * delta, :] = f.terms[w].conj().T
    return _Affine(f.constant_term(), delta, g, tuple(A), tuple(b), c)


def _push_adjoints(e: _parser.RationalExpr, under: bool = False) -> _parser.RationalExpr:
    """Rewrite the tree so no Adjoint node remains (pushed to variables)."""
    P = _parser
    if isinstance(e, P.Adjoint):
        return _push_adjoints(e.child, not under)
    if isinstance(e, P.Constant):
        return P.Constant(np.conj(e.value)) if under else e
    if isinstance(e, P.Variable):
        return P.Variable(e.index, e.starred ^ under)
    if isinstance(e, P.Negate):
        return P.Negate(_push_adjoints(e.child, under))
    if isinstance(e, P.Add):
        return P.Add(tuple(_push_adjoints(p, under) for p in e.parts))
    if isinstance(e, P.Mul):
        parts = [_push_adjoints(p, under) for p in e.parts]
        if under:
            parts = parts[::-1]
        return P.Mul(tuple(parts))
    if isinstance(e, P.Inverse):
        return P.Inverse(_push_adjoints(e.child, under))
    if isinstance(e, P.MatrixExpr):
        grid = [[_push_adjoints(cell, under) for cell in row] for row in e.grid]
        if under:
            grid = [list(col) for col in zip(*grid)]
        return P.MatrixExpr(tuple(tuple(row) for row in grid))
    raise TypeError(f"unknown node {type(e).__name__}")


def _fold(e: _parser.RationalExpr, g: int, tol: float) -> _Affine:
    P = _parser

    def reduce(aff: _Affine) -> _Affine:
        core = Realization(aff.delta, aff.g, aff.A, aff.b, aff.c)
        small = minimize(core, tol)
        return _Affine(aff.E, aff.delta, aff.g, small.A, small.b, small.c)

    if isinstance(e, P.Constant):
        return _Affine.constant(e.value, g)
    if isinstance(e, P.Variable):
        return _Affine.variable(e.index, g, e.starred)
    if isinstance(e, P.Negate):
        return _fold(e.child, g, tol).scale(-1)
    if isinstance(e, P.Add):
        parts = [_fold(p, g, tol) for p in e.parts]
        delta = max(p.delta for p in parts)
        parts = [_embed(p, delta) for p in parts]
        out = parts[0]
        for p in parts[1:]:
            out = reduce(out.add(p))
        return out
    if isinstance(e, P.Mul):
        parts = [_fold(p, g, tol) for p in e.parts]
        delta = max(p.delta for p in parts)
        parts = [_embed(p, delta) for p in parts]
        out = parts[0]
        for p in parts[1:]:
            out = reduce(out.mul(p))
        return out
    if isinstance(e, P.Inverse):
        return reduce(_fold(e.child, g, tol).inverse(tol))
    if isinstance(e, P.MatrixExpr):
        delta = len(e.grid)
        cells = [[_fold(cell, g, tol) for cell in row] for row in e.grid]
        return reduce(_assemble_matrix(cells, g))
    raise TypeError(f"unknown node {type(e).__name__}")


def _embed(aff: _Affine, delta: int) -> _Affine:
    """Scalar function broadcast to delta x delta as f * I."""
    if aff.delta == delta:
        return aff
    if aff.delta != 1:
        raise ValueError(f"cannot mix matrix sizes {aff.delta} and {delta}")
    eye = np.eye(delta)
    d = aff.d
    A = tuple(np.kron(a, eye) for a in aff.A)
    b = tuple(np.kron(bk, eye) for bk in aff.b)
    c = np.kron(aff.c, eye)
    return _Affine(aff.E[0, 0] * eye, delta, aff.g, A, b, c)


def _assemble_matrix(cells, g: int) -> _Affine:
    delta = len(cells)
    for row in cells:
        for cell in row:
            if cell.delta != 1:
                raise ValueError("matrix entries must be scalar expressions")
    E = np.array([[cell.E[0, 0] for cell in row] for row in cells], dtype=complex)
    dims = [[cell.d for cell in row] for row in cells]
    total = sum(sum(r) for r in dims)
    A = [np.zeros((total, total), dtype=complex) for _ in range(2 * g)]
    b = [np.zeros((total, delta), dtype=complex) for _ in range(2 * g)]
    c = np.zeros((total, delta), dtype=complex)
    off = 0
    for i, row in enumerate(cells):
        for j, cell in enumerate(row):
            d = cell.d
            sl = slice(off, off + d)
            for k in range(2 * g):
                A[k][sl, sl] = cell.A[k]
                b[k][sl, j] = cell.b[k][:, 0]
            c[sl, i] = cell.c[:, 0]
            off += d
    return _Affine(E, delta, g, tuple(A), tuple(b), c)


def realize_expression(
    e: _parser.RationalExpr, g: int | None = None, tol: float = RANK_TOL
) -> Realization:
    """Minimal realization of e, normalized to value I at the origin."""
    if g is None:
        g = max(e.max_var_index(), 1)
    aff = _fold(_push_adjoints(e), g, tol)
    return minimize(aff.normalized(tol), tol)


def realize_with_inverse(
    e: _parser.RationalExpr, g: int | None = None, tol: float = RANK_TOL
) -> Realization:
    """Minimal realization of r (+) r^{-1} (direct sum), r normalized at 0."""
    if g is None:
        g = max(e.max_var_index(), 1)
    aff = _fold(_push_adjoints(e), g, tol)
    r = aff.normalized(tol)
    rinv = realize_inverse(r)
    delta = r.delta
    A = tuple(_blkdiag(a1, a2) for a1, a2 in zip(r.A, rinv.A))
    b = []
    for b1, b2 in zip(r.b, rinv.b):
        blk = np.zeros((b1.shape[0] + b2.shape[0], 2 * delta), dtype=complex)
        blk[: b1.shape[0], :delta] = b1
        blk[b1.shape[0] :, delta:] = b2
        b.append(blk)
    c = np.zeros((r.d + rinv.d, 2 * delta), dtype=complex)
    c[: r.d, :delta] = r.c
    c[r.d :, delta:] = rinv.c
    return minimize(Realization(2 * delta, r.g, A, tuple(b), c), tol)


# -- equivalence -------------------------------------------------------------

def equivalent(
    r: Realization,
    s: Realization,
    tol: float = 1e-7,
    rng: Optional[np.random.Generator] = None,
) -> bool:
    """Decide whether two minimal realizations differ by a state isomorphism.

    Solves the joint affine system S A_k = A'_k S, S b_k = b'_k, c'* S = c*
    by least squares over the real parameterization and tests an invertible
    solution.
    """
    if not is_minimal(r) or not is_minimal(s):
        raise NotMinimal("equivalent() requires minimal inputs")
    if r.delta != s.delta or r.g != s.g:
        return False
    if r.d != s.d:
        return False
    d = r.d
    if d == 0:
        return True
    # Build the linear system M vec(S) = rhs over C (homogeneous Sylvester
    # parts plus the inhomogeneous input/output matching).
    rows = []
    rhs = []
    eye = np.eye(d)
    for a1, a2 in zip(r.A, s.A):
        # S a1 - a2 S = 0  ->  (a1^T (x) I - I (x) a2) vec(S) = 0
        rows.append(np.kron(a1.T, eye) - np.kron(eye, a2))
        rhs.append(np.zeros(d * d))
    for b1, b2 in zip(r.b, s.b):
        # S b1 = b2  ->  (b1^T (x) I) vec(S) = vec(b2)
        rows.append(np.kron(b1.T, eye))
        rhs.append(b2.reshape(-1, order="F").reshape(-1))
    # c'* S = c*  ->  (I (x) c'^H... ) use S^H c2?  c2^H S = c1^H
    rows.append(np.kron(eye, s.c.conj().T))
    rhs.append(r.c.conj().T.reshape(-1, order="F").reshape(-1))
    M = np.vstack(rows)
    v = np.concatenate([np.asarray(x).reshape(-1) for x in rhs]).astype(complex)
    sol, *_ = np.linalg.lstsq(M, v, rcond=None)
    if np.linalg.norm(M @ sol - v) > tol * max(1.0, np.linalg.norm(v)):
        return False
    # The affine solution space may contain singular elements; sample it.
    _, sv, vh = np.linalg.svd(M)
    top = sv[0] if sv.size else 1.0
    null_dim = M.shape[1] - int(np.sum(sv > RANK_TOL * max(top, 1e-30)))
    null = vh[M.shape[1] - null_dim :].conj().T if null_dim else None
    rng = rng or np.random.default_rng(0)
    for _ in range(6):
        cand = sol
        if null is not None:
            mix = rng.standard_normal(null_dim) + 1j * rng.standard_normal(null_dim)
            cand = sol + null @ mix
        S = cand.reshape(d, d, order="F")
        if np.linalg.cond(S) < 1 / RANK_TOL:
            return True
        if null is None:
            break
    return False
