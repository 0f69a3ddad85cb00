"""Linear pencils and the structure theory of their coefficient algebras.

A pencil is stored as the affine matrix polynomial

    L(x, x*) = constant + sum_j coeff_x[j] x_j + sum_j coeff_xstar[j] x_j*,

so a monic pencil I - A.x - B.x* has coeff_x[j] = -A_j.  The module
provides the unital algebra generated by the coefficients, irreducibility,
Burnside block upper-triangularization, and similarity of monic pencils.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .ncpoly import Letter, MatrixTuple, NcPoly, _matrix_from_json, _matrix_to_json
from .realization import Realization, _letter_slot

__all__ = [
    "LinearPencil",
    "BlockDecomposition",
    "AlgebraBasis",
    "NumericalRankAmbiguity",
    "generated_algebra",
    "is_irreducible",
    "burnside_decompose",
    "similar",
    "similarity_classes",
    "pencil_of_realization",
]

DEFAULT_TOL = 1e-8


class NumericalRankAmbiguity(RuntimeError):
    """A rank decision fell inside the ambiguous band around the tolerance."""


@dataclass(frozen=True, init=False)
class LinearPencil:
    rows: int
    cols: int
    g: int
    constant: np.ndarray
    coeff_x: tuple
    coeff_xstar: tuple

    def __init__(self, constant, coeff_x, coeff_xstar):
        constant = np.atleast_2d(np.asarray(constant, dtype=complex))
        coeff_x = tuple(np.atleast_2d(np.asarray(m, dtype=complex)) for m in coeff_x)
        coeff_xstar = tuple(
            np.atleast_2d(np.asarray(m, dtype=complex)) for m in coeff_xstar
        )
        if len(coeff_x) != len(coeff_xstar):
            raise ValueError("need matching x and x* coefficient lists")
        rows, cols = constant.shape
        for m in (*coeff_x, *coeff_xstar):
            if m.shape != (rows, cols):
                raise ValueError("all coefficients must share the constant's shape")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "g", len(coeff_x))
        object.__setattr__(self, "constant", constant)
        object.__setattr__(self, "coeff_x", coeff_x)
        object.__setattr__(self, "coeff_xstar", coeff_xstar)

    # -- flags --------------------------------------------------------------

    def is_monic(self, tol: float = DEFAULT_TOL) -> bool:
        if self.rows != self.cols:
            return False
        if self.rows == 0:
            return True
        return np.abs(self.constant - np.eye(self.rows)).max() <= tol

    def is_hermitian_monic(self, tol: float = DEFAULT_TOL) -> bool:
        if not self.is_monic(tol):
            return False
        return all(
            bs.size == 0 or np.abs(bs - a.conj().T).max() <= tol
            for a, bs in zip(self.coeff_x, self.coeff_xstar)
        )

    @property
    def size(self) -> int:
        if self.rows != self.cols:
            raise ValueError("size is defined for square pencils only")
        return self.rows

    # -- constructors -------------------------------------------------------

    @staticmethod
    def monic(A: list, B: list | None = None) -> "LinearPencil":
        """I - sum A_j x_j - sum B_j x_j*;  B defaults to the adjoints of A."""
        A = [np.atleast_2d(np.asarray(m, dtype=complex)) for m in A]
        if B is None:
            B = [m.conj().T for m in A]
        else:
            B = [np.atleast_2d(np.asarray(m, dtype=complex)) for m in B]
        d = A[0].shape[0] if A else 0
        return LinearPencil(np.eye(d), [-m for m in A], [-m for m in B])

    @staticmethod
    def empty(g: int) -> "LinearPencil":
        z = np.zeros((0, 0))
        return LinearPencil(z, [z] * g, [z] * g)

    @staticmethod
    def identity(size: int, g: int) -> "LinearPencil":
        z = np.zeros((size, size))
        return LinearPencil(np.eye(size), [z] * g, [z] * g)

    def neg_coeffs(self) -> list:
        """The matrices (A_1..A_g, B_1..B_g) of a monic pencil I - A.x - B.x*."""
        return [-m for m in self.coeff_x] + [-m for m in self.coeff_xstar]

    # -- algebra ------------------------------------------------------------

    def evaluate(self, X: MatrixTuple) -> np.ndarray:
        if X.g != self.g:
            raise ValueError("variable count mismatch")
        n = X.n
        out = np.kron(self.constant, np.eye(n))
        for j in range(self.g):
            out = out + np.kron(self.coeff_x[j], X.X[j])
            out = out + np.kron(self.coeff_xstar[j], X.X[j].conj().T)
        return out

    def adjoint(self) -> "LinearPencil":
        return LinearPencil(
            self.constant.conj().T,
            [m.conj().T for m in self.coeff_xstar],
            [m.conj().T for m in self.coeff_x],
        )

    def direct_sum(self, other: "LinearPencil") -> "LinearPencil":
        if self.g != other.g:
            raise ValueError("variable count mismatch")

        def stack(a, b):
            out = np.zeros(
                (a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]), dtype=complex
            )
            out[: a.shape[0], : a.shape[1]] = a
            out[a.shape[0] :, a.shape[1] :] = b
            return out

        return LinearPencil(
            stack(self.constant, other.constant),
            [stack(a, b) for a, b in zip(self.coeff_x, other.coeff_x)],
            [stack(a, b) for a, b in zip(self.coeff_xstar, other.coeff_xstar)],
        )

    def conjugate(self, S: np.ndarray) -> "LinearPencil":
        """S L S^{-1} for square pencils."""
        Sinv = np.linalg.inv(S)
        return LinearPencil(
            S @ self.constant @ Sinv,
            [S @ m @ Sinv for m in self.coeff_x],
            [S @ m @ Sinv for m in self.coeff_xstar],
        )

    def transform(self, left: np.ndarray, right: np.ndarray) -> "LinearPencil":
        return LinearPencil(
            left @ self.constant @ right,
            [left @ m @ right for m in self.coeff_x],
            [left @ m @ right for m in self.coeff_xstar],
        )

    def submatrix(self, rows, cols) -> "LinearPencil":
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        return LinearPencil(
            self.constant[np.ix_(rows, cols)],
            [m[np.ix_(rows, cols)] for m in self.coeff_x],
            [m[np.ix_(rows, cols)] for m in self.coeff_xstar],
        )

    def to_ncpoly(self) -> NcPoly:
        if self.rows != self.cols:
            raise ValueError("only square pencils convert to NcPoly")
        terms: dict = {(): self.constant}
        for j in range(self.g):
            terms[(Letter(j + 1, False),)] = self.coeff_x[j]
            terms[(Letter(j + 1, True),)] = self.coeff_xstar[j]
        return NcPoly(self.rows, self.g, terms)

    def coefficient_scale(self) -> float:
        mags = [np.abs(self.constant).max()] + [
            np.abs(m).max() for m in (*self.coeff_x, *self.coeff_xstar)
        ]
        return max([m for m in mags if np.isfinite(m)] + [1.0])

    def to_json_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "g": self.g,
            "constant": _matrix_to_json(self.constant),
            "coeff_x": [_matrix_to_json(m) for m in self.coeff_x],
            "coeff_xstar": [_matrix_to_json(m) for m in self.coeff_xstar],
            "monic": bool(self.is_monic()),
            "hermitian": bool(self.is_hermitian_monic()),
        }

    @staticmethod
    def from_json_dict(data: Mapping) -> "LinearPencil":
        return LinearPencil(
            _matrix_from_json(data["constant"]),
            [_matrix_from_json(m) for m in data["coeff_x"]],
            [_matrix_from_json(m) for m in data["coeff_xstar"]],
        )


def pencil_of_realization(r: Realization) -> LinearPencil:
    """The monic pencil I - sum A_k z_k of a realization's state matrices."""
    if r.d == 0:
        z = np.zeros((0, 0))
        return LinearPencil(z, [z] * r.g, [z] * r.g)
    A = [r.A[_letter_slot(Letter(j, False), r.g)] for j in range(1, r.g + 1)]
    B = [r.A[_letter_slot(Letter(j, True), r.g)] for j in range(1, r.g + 1)]
    return LinearPencil.monic(A, B)


# -- generated algebra -------------------------------------------------------

@dataclass(frozen=True)
class AlgebraBasis:
    size: int
    basis: tuple  # orthonormal d x d matrices under the trace inner product

    @property
    def dimension(self) -> int:
        return len(self.basis)


def _orth_rows(rows: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis (as rows) of the row span."""
    if rows.size == 0:
        return rows.reshape(0, rows.shape[1] if rows.ndim == 2 else 0)
    u, s, vh = np.linalg.svd(rows, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((0, rows.shape[1]))
    rank = int(np.sum(s > tol * s[0]))
    return vh[:rank]


def generated_algebra(mats, tol: float = DEFAULT_TOL) -> AlgebraBasis:
    """Orthonormal basis of the unital algebra generated by the matrices."""
    mats = [np.atleast_2d(np.asarray(m, dtype=complex)) for m in mats]
    if not mats:
        raise ValueError("need at least one generator")
    d = mats[0].shape[0]
    for m in mats:
        if m.shape != (d, d):
            raise ValueError("generators must be square of common size")
    if d == 0:
        return AlgebraBasis(0, ())
    gens = [np.eye(d)] + [m / max(np.abs(m).max(), 1e-300) for m in mats]
    rows = _orth_rows(np.array([m.reshape(-1) for m in gens]), tol)
    while True:
        basis = [row.reshape(d, d) for row in rows]
        prods = [bm @ gm for bm in basis for gm in gens]
        new_rows = _orth_rows(
            np.vstack([rows, np.array([p.reshape(-1) for p in prods])]), tol
        )
        if new_rows.shape[0] == rows.shape[0]:
            return AlgebraBasis(d, tuple(row.reshape(d, d) for row in rows))
        rows = new_rows


def is_irreducible(L: LinearPencil, tol: float = DEFAULT_TOL) -> bool:
    """Monic pencil whose coefficients generate the full matrix algebra."""
    if not L.is_monic(max(tol, 1e-6)):
        raise ValueError("is_irreducible expects a monic pencil")
    d = L.size
    if d == 0:
        return False
    coeffs = L.neg_coeffs()
    if all(np.abs(m).max() < tol for m in coeffs):
        return False
    return generated_algebra(coeffs, tol).dimension == d * d


# -- Burnside decomposition --------------------------------------------------

@dataclass(frozen=True)
class BlockDecomposition:
    S: np.ndarray  # invertible, S L S^{-1} block upper triangular
    blocks: tuple  # (offset, size, kind) with kind in {"irreducible", "identity"}
    transformed: LinearPencil

    def diagonal_block(self, i: int) -> LinearPencil:
        off, size, _ = self.blocks[i]
        idx = np.arange(off, off + size)
        return self.transformed.submatrix(idx, idx)


def _radical_image(basis: AlgebraBasis, tol: float) -> Optional[np.ndarray]:
    """Column space of the radical's action, or None if (numerically) zero.

    Dickson's criterion over the complex numbers: a = sum_i z_i b_i lies in
    the radical iff tr(a b_j) = 0 for every basis element b_j.
    """
    n = basis.size
    mats = basis.basis
    k = len(mats)
    gram = np.array([[np.trace(bi @ bj) for bi in mats] for bj in mats])
    u, s, vh = np.linalg.svd(gram)
    if s.size == 0:
        return None
    cut = tol * max(s[0], 1.0)
    null = vh[np.sum(s > cut) :].conj().T  # columns = radical coordinates
    if null.shape[1] == 0:
        return None
    cols = []
    for i in range(null.shape[1]):
        rad = sum(null[j, i] * mats[j] for j in range(k))
        cols.append(rad)
    stacked = np.hstack(cols)
    span = _orth_cols(stacked, tol)
    if span.shape[1] == 0:
        return None
    return span


def _orth_cols(cols: np.ndarray, tol: float) -> np.ndarray:
    if cols.size == 0:
        return cols.reshape(cols.shape[0] if cols.ndim == 2 else 0, 0)
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((cols.shape[0], 0))
    rank = int(np.sum(s > tol * s[0]))
    return u[:, :rank]


def _spin_up(mats, vecs: np.ndarray, tol: float) -> np.ndarray:
    """Smallest invariant subspace containing the given column vectors."""
    V = _orth_cols(vecs, tol)
    while True:
        cols = [V] + [m @ V for m in mats]
        Vn = _orth_cols(np.hstack(cols), tol)
        if Vn.shape[1] == V.shape[1]:
            return Vn
        V = Vn


def _find_invariant_subspace(mats, tol: float, rng: np.random.Generator, retries: int = 20):
    """A proper nonzero invariant subspace of reducible coefficient action.

    Returns an orthonormal basis, or None when the action is irreducible.
    Radical vectors give a deterministic subspace; the semisimple case uses
    randomized eigenvector spin-up (MeatAxe style).
    """
    n = mats[0].shape[0]
    if n <= 1:
        return None
    basis = generated_algebra(mats, tol)
    if basis.dimension == n * n:
        return None
    rad = _radical_image(basis, tol)
    if rad is not None and 0 < rad.shape[1] < n:
        W = _spin_up(mats, rad, tol)
        if W.shape[1] < n:
            return W
    for _ in range(retries):
        coeffs = rng.standard_normal(basis.dimension) + 1j * rng.standard_normal(
            basis.dimension
        )
        a = sum(z * b for z, b in zip(coeffs, basis.basis))
        vals, vecs = np.linalg.eig(a)
        order = np.argsort(vals.real + 1e-3 * vals.imag)
        for idx in order:
            W = _spin_up(mats, vecs[:, [idx]], tol)
            if 0 < W.shape[1] < n:
                return W
        # Dual action: an invariant subspace for the transposes yields an
        # invariant orthocomplement for the original action.
        for idx in order:
            vals_t, vecs_t = np.linalg.eig(a.T)
            Wt = _spin_up([m.T for m in mats], vecs_t[:, [idx]], tol)
            if 0 < Wt.shape[1] < n:
                comp = _null_of_rows(Wt.conj().T, tol)
                if 0 < comp.shape[1] < n:
                    return comp
            break
    raise NumericalRankAmbiguity(
        "could not split a reducible coefficient module after retries"
    )


def _null_of_rows(rows: np.ndarray, tol: float) -> np.ndarray:
    u, s, vh = np.linalg.svd(rows, full_matrices=True)
    rank = int(np.sum(s > tol * max(s[0] if s.size else 1.0, 1e-300)))
    return vh[rank:].conj().T


def _composition_basis(mats, tol, rng):
    """Orthonormal U with U^H m U block upper triangular, diagonal blocks
    irreducible or zero; returns (U, [(size, kind), ...])."""
    n = mats[0].shape[0]
    if n == 0:
        return np.zeros((0, 0)), []
    if all(np.abs(m).max() <= tol for m in mats):
        return np.eye(n), [(n, "identity")]
    W = _find_invariant_subspace(mats, tol, rng)
    if W is None:
        return np.eye(n), [(n, "irreducible")]
    comp = _null_of_rows(W.conj().T, tol)
    U1 = np.hstack([W, comp])
    sub1 = [W.conj().T @ m @ W for m in mats]
    sub2 = [comp.conj().T @ m @ comp for m in mats]
    Ua, blocks_a = _composition_basis(sub1, tol, rng)
    Ub, blocks_b = _composition_basis(sub2, tol, rng)
    k = W.shape[1]
    mix = np.zeros((n, n), dtype=complex)
    mix[:k, :k] = Ua
    mix[k:, k:] = Ub
    return U1 @ mix, blocks_a + blocks_b


def burnside_decompose(
    L: LinearPencil,
    tol: float = DEFAULT_TOL,
    rng: Optional[np.random.Generator] = None,
) -> BlockDecomposition:
    """Block upper-triangularization with irreducible or identity diagonal blocks."""
    if not L.is_monic(max(tol, 1e-6)):
        raise ValueError("burnside_decompose expects a monic pencil")
    rng = rng or np.random.default_rng(0)
    d = L.size
    if d == 0:
        return BlockDecomposition(np.zeros((0, 0)), (), L)
    coeffs = L.neg_coeffs()
    scale = max(max(np.abs(m).max() for m in coeffs), 1e-300)
    U, raw_blocks = _composition_basis([m / scale for m in coeffs], tol, rng)
    S = U.conj().T
    transformed = L.transform(S, U)  # = S L S^{-1} since U is unitary
    blocks = []
    off = 0
    for size, kind in raw_blocks:
        blocks.append((off, size, kind))
        off += size
    return BlockDecomposition(S, tuple(blocks), transformed)


# -- similarity --------------------------------------------------------------

def similar(
    L1: LinearPencil,
    L2: LinearPencil,
    tol: float = DEFAULT_TOL,
    rng: Optional[np.random.Generator] = None,
    retries: int = 5,
) -> Optional[np.ndarray]:
    """Invertible P with P L1 = L2 P (coefficient-wise), or None."""
    if L1.rows != L2.rows or L1.cols != L2.cols or L1.g != L2.g:
        return None
    if not (L1.is_monic(max(tol, 1e-6)) and L2.is_monic(max(tol, 1e-6))):
        raise ValueError("similar expects monic pencils")
    d = L1.size
    if d == 0:
        return np.zeros((0, 0))
    rng = rng or np.random.default_rng(0)
    eye = np.eye(d)
    rows = []
    for a1, a2 in zip(L1.neg_coeffs(), L2.neg_coeffs()):
        # P a1 - a2 P = 0 in vec (column-major) form
        rows.append(np.kron(a1.T, eye) - np.kron(eye, a2))
    M = np.vstack(rows)
    scale = max(np.abs(m).max() for m in L1.neg_coeffs() + L2.neg_coeffs() + [eye])
    u, s, vh = np.linalg.svd(M)
    # floor the rank cutoff at the data scale so a numerically zero Sylvester
    # matrix (identical pencils) yields the full nullspace
    cut = tol * max(s[0] if s.size else 0.0, scale)
    null = vh[np.sum(s > cut) :].conj().T
    if null.shape[1] == 0:
        return None
    for _ in range(retries):
        mix = rng.standard_normal(null.shape[1]) + 1j * rng.standard_normal(
            null.shape[1]
        )
        P = (null @ mix).reshape(d, d, order="F")
        if np.linalg.cond(P) < 1 / DEFAULT_TOL:
            P = P / np.linalg.norm(P) * np.sqrt(d)
            resid = max(
                np.abs(P @ a1 - a2 @ P).max()
                for a1, a2 in zip(L1.neg_coeffs(), L2.neg_coeffs())
            )
            if resid <= 1e-6 * max(scale, 1.0):
                return P
    return None


def similarity_classes(blocks, tol: float = DEFAULT_TOL, rng=None):
    """Partition monic pencils into similarity classes.

    Returns a list of dicts {representative, multiplicity, members} where
    representative is the first occurrence.
    """
    rng = rng or np.random.default_rng(0)
    classes = []
    for i, blk in enumerate(blocks):
        placed = False
        for cls in classes:
            if similar(cls["representative"], blk, tol, rng) is not None:
                cls["members"].append(i)
                placed = True
                break
        if not placed:
            classes.append({"representative": blk, "members": [i]})
    for cls in classes:
        cls["multiplicity"] = len(cls["members"])
    return classes
