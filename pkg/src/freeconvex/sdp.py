"""Small dense complex-hermitian SDP feasibility engine and problem builders.

Problems are affine equality systems over hermitian PSD blocks and free
complex blocks.  Every constraint is a finite sum of terms

    left @ op(X_block) @ right,   op in {identity, transpose, conj, adjoint},

equated to a constant matrix.  Feasibility is decided three ways: a residual
minimization stage (feasible), a Farkas separating-functional stage
(infeasible, with an externally re-verified dual certificate), and marginal
when neither side clears its tolerance band.

On top of the engine sit the three builders the convexity pipeline needs:
hermitian similarity of a monic pencil, spectrahedral inclusion via a Choi
matrix, and the moment-form rank certificate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .algebra import LinearPencil
from .ncpoly import _matrix_from_json, _matrix_to_json

__all__ = [
    "SdpProblem",
    "SdpResult",
    "MomentBlock",
    "BlockSpec",
    "Term",
    "Constraint",
    "RankCertificate",
    "SizeLimitExceeded",
    "IterationLimit",
    "NumericalBreakdown",
    "MarginalSdp",
    "solve",
    "hermitian_similarity",
    "inclusion",
    "rank_certificate",
]

DEFAULT_TOL = 1e-8
PARAM_CAP = 5000


class SizeLimitExceeded(ValueError):
    pass


class IterationLimit(RuntimeError):
    pass


class NumericalBreakdown(RuntimeError):
    pass


class MarginalSdp(RuntimeError):
    """The SDP landed inside the numerically undecidable band."""


# -- problem data ------------------------------------------------------------

@dataclass(frozen=True)
class BlockSpec:
    name: str
    kind: str  # "psd" (hermitian, PSD-constrained, square) or "free" (complex)
    rows: int
    cols: int

    def real_params(self) -> int:
        if self.kind == "psd":
            return self.rows * self.rows
        return 2 * self.rows * self.cols


@dataclass(frozen=True)
class Term:
    """left @ op(X_block) @ right with op selected by mode."""

    block: str
    left: np.ndarray
    right: np.ndarray
    mode: str = "id"  # id | T | conj | conjT


@dataclass(frozen=True)
class Constraint:
    name: str
    terms: tuple
    rhs: np.ndarray

    @property
    def shape(self):
        return self.rhs.shape


@dataclass(frozen=True)
class SdpProblem:
    blocks: tuple
    constraints: tuple
    objective: Optional[Mapping] = None  # block -> matrix C, minimize Re tr(C^H X)

    def block(self, name: str) -> BlockSpec:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def real_param_count(self) -> int:
        return sum(b.real_params() for b in self.blocks)

    def to_json_dict(self) -> dict:
        return {
            "blocks": [
                {"name": b.name, "kind": b.kind, "rows": b.rows, "cols": b.cols}
                for b in self.blocks
            ],
            "constraints": [
                {
                    "name": c.name,
                    "rhs": _matrix_to_json(c.rhs),
                    "terms": [
                        {
                            "block": t.block,
                            "mode": t.mode,
                            "left": _matrix_to_json(t.left),
                            "right": _matrix_to_json(t.right),
                        }
                        for t in c.terms
                    ],
                }
                for c in self.constraints
            ],
        }

    @staticmethod
    def from_json_dict(data: Mapping) -> "SdpProblem":
        blocks = tuple(
            BlockSpec(b["name"], b["kind"], int(b["rows"]), int(b["cols"]))
            for b in data["blocks"]
        )
        cons = tuple(
            Constraint(
                c["name"],
                tuple(
                    Term(
                        t["block"],
                        _matrix_from_json(t["left"]),
                        _matrix_from_json(t["right"]),
                        t["mode"],
                    )
                    for t in c["terms"]
                ),
                _matrix_from_json(c["rhs"]),
            )
            for c in data["constraints"]
        )
        return SdpProblem(blocks, cons)


@dataclass(frozen=True)
class SdpResult:
    status: str  # feasible | infeasible | marginal
    primal: Mapping  # block name -> value (feasible/marginal best effort)
    dual: Mapping  # constraint name -> matrix functional (infeasible certificate)
    residuals: Mapping  # constraint name -> max abs residual; "_margin" on duals
    slack: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "status": self.status,
            "primal": {k: _matrix_to_json(np.atleast_2d(v)) for k, v in self.primal.items()},
            "dual": {k: _matrix_to_json(np.atleast_2d(v)) for k, v in self.dual.items()},
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "slack": float(self.slack),
        }


@dataclass(frozen=True)
class MomentBlock:
    """PSD matrix M of size d*eps encoding sum_k vec(C_k) vec(C_k)*.

    vec is row-major on d x eps matrices C_k, so the contraction with a d x d
    matrix G reproduces sum_k C_k* G C_k.
    """

    M: np.ndarray
    eps: int

    @property
    def d(self) -> int:
        return self.M.shape[0] // self.eps

    def contract(self, G: np.ndarray) -> np.ndarray:
        eps = self.eps
        Mc = self.M.conj()
        out = np.zeros((eps, eps), dtype=complex)
        for a in range(self.d):
            for ap in range(self.d):
                if G[a, ap] != 0:
                    out += G[a, ap] * Mc[a * eps : (a + 1) * eps, ap * eps : (ap + 1) * eps]
        return out

    @staticmethod
    def of_factors(Cs, eps: int) -> "MomentBlock":
        vecs = [np.asarray(C, dtype=complex).reshape(-1, 1) for C in Cs]
        size = vecs[0].shape[0]
        M = np.zeros((size, size), dtype=complex)
        for v in vecs:
            M += v @ v.conj().T
        return MomentBlock(M, eps)

    def to_json_dict(self) -> dict:
        return {"eps": self.eps, "M": _matrix_to_json(self.M)}


# -- term evaluation ---------------------------------------------------------

def _apply_mode_np(X: np.ndarray, mode: str) -> np.ndarray:
    if mode == "T":
        return X.T
    if mode == "conj":
        return np.conj(X)
    if mode == "conjT":
        return X.conj().T
    return X


def term_value(t: Term, X: np.ndarray) -> np.ndarray:
    return t.left @ _apply_mode_np(X, t.mode) @ t.right


def constraint_residual(c: Constraint, values: Mapping) -> np.ndarray:
    acc = -c.rhs.astype(complex)
    for t in c.terms:
        acc = acc + term_value(t, values[t.block])
    return acc


def _data_scale(p: SdpProblem) -> float:
    mags = [1.0]
    for c in p.constraints:
        if c.rhs.size:
            mags.append(np.abs(c.rhs).max())
        for t in c.terms:
            if t.left.size and t.right.size:
                mags.append(np.abs(t.left).max() * np.abs(t.right).max())
    return max(mags)


# -- real parameterization (shared by the Farkas stage and realified path) ---

def _block_basis(spec: BlockSpec):
    """Orthonormal real basis of the block under Re tr(A^H B)."""
    out = []
    if spec.kind == "psd":
        n = spec.rows
        s = 1.0 / np.sqrt(2.0)
        for i in range(n):
            E = np.zeros((n, n), dtype=complex)
            E[i, i] = 1.0
            out.append(E)
        for i in range(n):
            for j in range(i + 1, n):
                E = np.zeros((n, n), dtype=complex)
                E[i, j] = s
                E[j, i] = s
                out.append(E)
                F = np.zeros((n, n), dtype=complex)
                F[i, j] = 1j * s
                F[j, i] = -1j * s
                out.append(F)
    else:
        r, ccols = spec.rows, spec.cols
        for i in range(r):
            for j in range(ccols):
                E = np.zeros((r, ccols), dtype=complex)
                E[i, j] = 1.0
                out.append(E)
                F = np.zeros((r, ccols), dtype=complex)
                F[i, j] = 1j
                out.append(F)
    return out


def _real_system(p: SdpProblem):
    """Explicit real matrix A and vector b with A x = b <=> all constraints.

    x collects orthonormal real coordinates of all blocks in declaration
    order; the constraint axis stacks [Re, Im] of each residual row-major.
    """
    bases = {b.name: _block_basis(b) for b in p.blocks}
    offsets = {}
    off = 0
    for b in p.blocks:
        offsets[b.name] = off
        off += len(bases[b.name])
    ncols = off
    rows_per = [2 * c.rhs.size for c in p.constraints]
    nrows = sum(rows_per)
    A = np.zeros((nrows, ncols))
    bvec = np.zeros(nrows)
    roff = 0
    for c, nr in zip(p.constraints, rows_per):
        bvec[roff : roff + c.rhs.size] = c.rhs.real.reshape(-1)
        bvec[roff + c.rhs.size : roff + nr] = c.rhs.imag.reshape(-1)
        for t in c.terms:
            boff = offsets[t.block]
            for i, E in enumerate(bases[t.block]):
                val = term_value(t, E)
                A[roff : roff + c.rhs.size, boff + i] += val.real.reshape(-1)
                A[roff + c.rhs.size : roff + nr, boff + i] += val.imag.reshape(-1)
        roff += nr
    return A, bvec, bases, offsets


def _values_from_coords(p: SdpProblem, bases, offsets, x: np.ndarray) -> dict:
    vals = {}
    for b in p.blocks:
        base = bases[b.name]
        coords = x[offsets[b.name] : offsets[b.name] + len(base)]
        vals[b.name] = sum(z * E for z, E in zip(coords, base))
    return vals


# -- solver ------------------------------------------------------------------

def _import_cvxpy():
    import cvxpy as cp

    return cp


def _run(problem, cp):
    solvers = [cp.CLARABEL, cp.SCS]
    last = None
    for sv in solvers:
        try:
            with warnings.catch_warnings():
                # cvxpy's complex-to-real reduction builds constants from
                # nested lists internally; the warning is not actionable here
                warnings.filterwarnings(
                    "ignore", message="Initializing a Constant with a nested list"
                )
                # inaccurate solves are acceptable here: every result is
                # re-verified (residual check or Farkas margin) downstream
                warnings.filterwarnings(
                    "ignore", message="Solution may be inaccurate"
                )
                problem.solve(solver=sv)
        except cp.error.SolverError as exc:
            last = exc
            continue
        if problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            return
        last = RuntimeError(f"solver status {problem.status}")
    raise NumericalBreakdown(str(last))


def _cvx_blocks(p: SdpProblem, cp):
    var = {}
    side = []
    for b in p.blocks:
        if b.kind == "psd":
            X = cp.Variable((b.rows, b.rows), hermitian=True)
            side.append(X >> 0)
        else:
            X = cp.Variable((b.rows, b.cols), complex=True)
        var[b.name] = X
    return var, side


def _cvx_residual(c: Constraint, var, cp):
    acc = cp.Constant(-c.rhs)
    for t in c.terms:
        X = var[t.block]
        if t.mode == "T":
            X = X.T
        elif t.mode == "conj":
            X = cp.conj(X)
        elif t.mode == "conjT":
            X = cp.conj(X).T
        acc = acc + t.left @ X @ t.right
    return acc


def _realified_blocks(p: SdpProblem, cp):
    """Secondary route: explicit [[Re, -Im], [Im, Re]] doubling of each block."""
    var = {}
    side = []
    for b in p.blocks:
        if b.kind == "psd":
            n = b.rows
            P = cp.Variable((n, n), symmetric=True)
            Q = cp.Variable((n, n))
            side.append(Q == -Q.T)
            Z = cp.bmat([[P, -Q], [Q, P]])
            side.append(Z >> 0)
            var[b.name] = (P, Q)
        else:
            P = cp.Variable((b.rows, b.cols))
            Q = cp.Variable((b.rows, b.cols))
            var[b.name] = (P, Q)
    return var, side


def _realified_residuals(c: Constraint, var, cp):
    rr = cp.Constant(-c.rhs.real)
    ri = cp.Constant(-c.rhs.imag)
    for t in c.terms:
        P, Q = var[t.block]
        if t.mode == "T":
            P, Q = P.T, Q.T
        elif t.mode == "conj":
            P, Q = P, -Q
        elif t.mode == "conjT":
            P, Q = P.T, -Q.T
        lr, li = t.left.real, t.left.imag
        rrg, rig = t.right.real, t.right.imag
        # (lr + i li)(P + i Q)(rr + i ri), expanded over the reals
        mr = lr @ P - li @ Q
        mi = lr @ Q + li @ P
        rr = rr + mr @ rrg - mi @ rig
        ri = ri + mr @ rig + mi @ rrg
    return rr, ri


def _primal_values(p: SdpProblem, var, realified: bool) -> dict:
    vals = {}
    for b in p.blocks:
        if realified:
            P, Q = var[b.name]
            v = np.asarray(P.value) + 1j * np.asarray(Q.value)
        else:
            v = np.asarray(var[b.name].value)
        if v is None or (hasattr(v, "dtype") and v.dtype == object):
            raise NumericalBreakdown("solver returned no value")
        v = np.atleast_2d(np.asarray(v, dtype=complex))
        if b.kind == "psd":
            v = (v + v.conj().T) / 2
            w, U = np.linalg.eigh(v)
            v = (U * np.clip(w, 0.0, None)) @ U.conj().T
        vals[b.name] = v
    return vals


def _coords_of_values(p: SdpProblem, bases, values: Mapping) -> np.ndarray:
    coords = []
    for b in p.blocks:
        X = values[b.name]
        for E in bases[b.name]:
            coords.append(float(np.real(np.trace(E.conj().T @ X))))
    return np.array(coords)


def _polish(p: SdpProblem, values: Mapping, tol: float, iters: int = 300) -> Mapping:
    """Alternating projections onto the affine set (exact, via the real
    parameterization) and the PSD cone, starting from the solver output.

    Tightens the solver's residual toward machine precision when the problem
    is feasible; harmless (non-convergent) when it is not.
    """
    A, bvec, bases, offsets = _real_system(p)
    if A.size == 0:
        return values
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    cut = 1e-12 * max(s[0] if s.size else 1.0, 1e-300)
    rank = int(np.sum(s > cut))
    U, s, Vt = U[:, :rank], s[:rank], Vt[:rank]
    x = _coords_of_values(p, bases, values)
    scale = _data_scale(p)
    for _ in range(iters):
        # exact projection onto {A x = b} (minimum-norm correction)
        resid = A @ x - bvec
        x = x - Vt.T @ ((U.T @ resid) / s)
        vals = _values_from_coords(p, bases, offsets, x)
        # projection onto the PSD cone, block by block
        moved = 0.0
        for b in p.blocks:
            if b.kind != "psd":
                continue
            X = (vals[b.name] + vals[b.name].conj().T) / 2
            w, Q = np.linalg.eigh(X)
            if w.size and w.min() < 0:
                Xp = (Q * np.clip(w, 0.0, None)) @ Q.conj().T
                moved = max(moved, -w.min())
                vals[b.name] = Xp
        x = _coords_of_values(p, bases, vals)
        if moved <= 1e-14 * scale:
            break
    final = _values_from_coords(p, bases, offsets, x)
    worst_new = max(
        (np.abs(constraint_residual(c, final)).max() for c in p.constraints if c.rhs.size),
        default=0.0,
    )
    worst_old = max(
        (np.abs(constraint_residual(c, values)).max() for c in p.constraints if c.rhs.size),
        default=0.0,
    )
    mineig_new = min(
        (np.linalg.eigvalsh((final[b.name] + final[b.name].conj().T) / 2).min()
         for b in p.blocks if b.kind == "psd" and b.rows),
        default=0.0,
    )
    if worst_new <= max(worst_old, tol * scale) and mineig_new >= -10 * tol * scale:
        for b in p.blocks:
            if b.kind == "psd":
                final[b.name] = (final[b.name] + final[b.name].conj().T) / 2
        return final
    return values


def verify_feasible(p: SdpProblem, values: Mapping, tol: float) -> float:
    """External re-verification; returns the max equality residual."""
    scale = _data_scale(p)
    worst = 0.0
    for c in p.constraints:
        res = constraint_residual(c, values)
        worst = max(worst, np.abs(res).max() if res.size else 0.0)
    for b in p.blocks:
        if b.kind == "psd":
            w = np.linalg.eigvalsh((values[b.name] + values[b.name].conj().T) / 2)
            if w.size and w.min() < -10 * tol * scale:
                worst = max(worst, -w.min())
    return worst


def _farkas(p: SdpProblem, tol: float):
    """Separating functional y: maximize <b, y> s.t. A*(y) <= 0 on PSD
    blocks, A*(y) = 0 on free blocks, |y| <= 1."""
    cp = _import_cvxpy()
    A, b, bases, offsets = _real_system(p)
    m = A.shape[0]
    if m == 0:
        return None
    y = cp.Variable(m)
    adj = A.T @ y
    cons = [cp.norm(y) <= 1]
    for blk in p.blocks:
        base = bases[blk.name]
        sl = slice(offsets[blk.name], offsets[blk.name] + len(base))
        if blk.kind == "free":
            cons.append(adj[sl] == 0)
        else:
            n = blk.rows
            # coordinates -> realified hermitian matrix, then <= 0
            reB = np.stack([E.real.reshape(-1) for E in base], axis=1)
            imB = np.stack([E.imag.reshape(-1) for E in base], axis=1)
            Gr = cp.reshape(reB @ adj[sl], (n, n), order="C")
            Gi = cp.reshape(imB @ adj[sl], (n, n), order="C")
            Z = cp.bmat([[Gr, -Gi], [Gi, Gr]])
            cons.append((Z + Z.T) / 2 << 0)
    prob = cp.Problem(cp.Maximize(b @ y), cons)
    _run(prob, cp)
    yv = np.asarray(y.value).reshape(-1)
    margin = float(b @ yv)
    # external re-verification of the certificate
    scale = _data_scale(p)
    adjv = A.T @ yv
    ok = True
    for blk in p.blocks:
        base = bases[blk.name]
        sl = slice(offsets[blk.name], offsets[blk.name] + len(base))
        coords = adjv[sl]
        if blk.kind == "free":
            if coords.size and np.abs(coords).max() > 10 * tol * scale:
                ok = False
        else:
            G = sum(z * E for z, E in zip(coords, base))
            w = np.linalg.eigvalsh((G + G.conj().T) / 2)
            if w.size and w.max() > 10 * tol * scale:
                ok = False
    duals = {}
    roff = 0
    for c in p.constraints:
        sz = c.rhs.size
        re = yv[roff : roff + sz].reshape(c.rhs.shape)
        im = yv[roff + sz : roff + 2 * sz].reshape(c.rhs.shape)
        duals[c.name] = re + 1j * im
        roff += 2 * sz
    return margin, ok, duals


def solve(p: SdpProblem, tol: float = DEFAULT_TOL, realify: bool = False) -> SdpResult:
    """Decide feasibility of the affine-PSD system.

    Stage one minimizes the total equality residual over the cone (always
    solvable); a small residual that re-verifies externally means feasible.
    Otherwise a Farkas separating functional is sought; a verified positive
    margin means infeasible.  Anything in between is marginal.
    """
    if p.real_param_count() > PARAM_CAP:
        raise SizeLimitExceeded(
            f"{p.real_param_count()} real parameters exceed the cap {PARAM_CAP}"
        )
    cp = _import_cvxpy()
    scale = _data_scale(p)
    if realify:
        var, side = _realified_blocks(p, cp)
        sq = []
        for c in p.constraints:
            rr, ri = _realified_residuals(c, var, cp)
            sq.append(cp.norm(cp.hstack([cp.vec(rr, order="F"), cp.vec(ri, order="F")])))
    else:
        var, side = _cvx_blocks(p, cp)
        sq = [cp.norm(_cvx_residual(c, var, cp), "fro") for c in p.constraints]
    objective = cp.sum(sq) if sq else cp.Constant(0.0)
    prob = cp.Problem(cp.Minimize(objective), side)
    _run(prob, cp)
    values = _polish(p, _primal_values(p, var, realify), tol)
    residuals = {
        c.name: float(np.abs(constraint_residual(c, values)).max()) if c.rhs.size else 0.0
        for c in p.constraints
    }
    maxres = max(residuals.values(), default=0.0)
    if maxres <= tol * scale and verify_feasible(p, values, tol) <= 10 * tol * scale:
        if p.objective:
            values = _refine_objective(p, tol, values)
            residuals = {
                c.name: float(np.abs(constraint_residual(c, values)).max())
                for c in p.constraints
            }
        return SdpResult("feasible", values, {}, residuals)
    out = _farkas(p, tol)
    if out is not None:
        margin, ok, duals = out
        if margin > tol * max(1.0, scale) and ok:
            residuals["_margin"] = margin
            return SdpResult("infeasible", values, duals, residuals)
    return SdpResult("marginal", values, {}, residuals)


def _refine_objective(p: SdpProblem, tol: float, warm: Mapping) -> Mapping:
    """Minimize the linear objective over the (verified nonempty) feasible set."""
    cp = _import_cvxpy()
    scale = _data_scale(p)
    var, side = _cvx_blocks(p, cp)
    cons = list(side)
    for c in p.constraints:
        cons.append(cp.norm(_cvx_residual(c, var, cp), "fro") <= 10 * tol * scale)
    obj = cp.Constant(0.0)
    for name, C in p.objective.items():
        obj = obj + cp.real(cp.trace(np.asarray(C).conj().T @ var[name]))
    prob = cp.Problem(cp.Minimize(obj), cons)
    try:
        _run(prob, cp)
        return _primal_values(p, var, False)
    except NumericalBreakdown:
        return warm


def solve_max_slack(
    p: SdpProblem, slack_terms, slack_size: int, tol: float = DEFAULT_TOL
):
    """Maximize t such that the affine expression built from slack_terms is
    >= t*I, subject to the problem's constraints (relaxed to a 10*tol band).

    Returns (t, primal values).  Used for deciding whether a feasible set
    contains a point with a designated expression positive definite.
    """
    cp = _import_cvxpy()
    scale = _data_scale(p)
    var, side = _cvx_blocks(p, cp)
    cons = list(side)
    for c in p.constraints:
        cons.append(cp.norm(_cvx_residual(c, var, cp), "fro") <= 10 * tol * scale)
    expr = cp.Constant(np.zeros((slack_size, slack_size)))
    for t in slack_terms:
        X = var[t.block]
        if t.mode == "T":
            X = X.T
        elif t.mode == "conj":
            X = cp.conj(X)
        elif t.mode == "conjT":
            X = cp.conj(X).T
        expr = expr + t.left @ X @ t.right
    tvar = cp.Variable()
    cons.append(expr >> tvar * np.eye(slack_size))
    cons.append(tvar <= 1e6)
    prob = cp.Problem(cp.Maximize(tvar), cons)
    _run(prob, cp)
    return float(tvar.value), _primal_values(p, var, False)


# -- builder: hermitian similarity (Q >= I, Q L* = L Q) ----------------------

def hermitian_similarity(
    L: LinearPencil, tol: float = DEFAULT_TOL
) -> Optional[tuple]:
    """Hermitian Q >= I with Q L* = L Q, plus the pencil Q^{-1/2} L Q^{1/2}.

    Returns None when the similarity SDP is infeasible (the pencil is not
    similar to a hermitian monic pencil); raises MarginalSdp in the band.
    """
    if not L.is_monic(max(tol, 1e-6)):
        raise ValueError("hermitian_similarity expects a monic pencil")
    d = L.size
    if d == 0:
        return np.zeros((0, 0)), L
    A = [-m for m in L.coeff_x]
    B = [-m for m in L.coeff_xstar]
    eye = np.eye(d)
    blocks = (BlockSpec("R", "psd", d, d),)  # Q = R + I
    cons = []
    for j, (Aj, Bj) in enumerate(zip(A, B)):
        # Q B_j^* = A_j Q, i.e. R B_j^* - A_j R = A_j - B_j^*
        # (the x_j^* family Q A_j^* = B_j Q is the adjoint, hence redundant)
        cons.append(
            Constraint(
                f"sim_x{j + 1}",
                (
                    Term("R", eye, Bj.conj().T),
                    Term("R", -Aj, eye),
                ),
                Aj - Bj.conj().T,
            )
        )
    prob = SdpProblem(blocks, tuple(cons))
    res = solve(prob, tol)
    if res.status == "infeasible":
        return None
    if res.status == "marginal":
        raise MarginalSdp("hermitian similarity SDP is marginal")
    Q = res.primal["R"] + eye
    Q = (Q + Q.conj().T) / 2
    w, U = np.linalg.eigh(Q)
    w = np.clip(w, 1.0 - 10 * tol, None)
    Qh = (U * np.sqrt(w)) @ U.conj().T
    Qih = (U / np.sqrt(w)) @ U.conj().T
    At = [Qih @ Aj @ Qh for Aj in A]
    # symmetrize: the x_j* coefficients are taken as exact adjoints of the
    # transformed x_j coefficients, absorbing the solver tolerance
    return Q, LinearPencil.monic(At)


# -- builder: spectrahedral inclusion (Choi matrix) --------------------------

def _selector(i: int, size: int, count: int) -> np.ndarray:
    S = np.zeros((size, size * count))
    S[:, i * size : (i + 1) * size] = np.eye(size)
    return S


def _choi_terms(block: str, G: np.ndarray, eps: int) -> list:
    """Terms whose sum is Phi_G(M) = sum_k C_k^* G C_k for M = MomentBlock."""
    d = G.shape[0]
    out = []
    for a in range(d):
        for ap in range(d):
            if G[a, ap] != 0:
                out.append(
                    Term(
                        block,
                        G[a, ap] * _selector(a, eps, d),
                        _selector(ap, eps, d).T,
                        "conj",
                    )
                )
    return out


def inclusion(LA: LinearPencil, LB: LinearPencil, tol: float = DEFAULT_TOL) -> bool:
    """Decide D_LA (subseteq) D_LB via a unital completely positive map.

    Feasibility of: M >= 0 of size d_A*d_B with Phi_I(M) = I and
    Phi_{A_j}(M) = B_j for every x_j coefficient (the x_j* family follows by
    taking adjoints).  Exact for bounded D_LA.
    """
    if not (LA.is_hermitian_monic(max(tol, 1e-6)) and LB.is_hermitian_monic(max(tol, 1e-6))):
        raise ValueError("inclusion expects hermitian monic pencils")
    if LA.g != LB.g:
        raise ValueError("variable count mismatch")
    dA, dB = LA.size, LB.size
    if dB == 0:
        return True
    if dA == 0:
        # D_LA is everything; only the everything-spectrahedron contains it
        return all(np.abs(m).max() <= tol for m in LB.neg_coeffs())
    blocks = (BlockSpec("M", "psd", dA * dB, dA * dB),)
    cons = [
        Constraint("unital", tuple(_choi_terms("M", np.eye(dA), dB)), np.eye(dB))
    ]
    for j in range(LA.g):
        GA = -LA.coeff_x[j]
        GB = -LB.coeff_x[j]
        cons.append(Constraint(f"coeff_x{j + 1}", tuple(_choi_terms("M", GA, dB)), GB))
    res = solve(SdpProblem(blocks, tuple(cons)), tol)
    if res.status == "marginal":
        raise MarginalSdp("inclusion SDP is marginal")
    return res.status == "feasible"


# -- builder: rank certificate (moment form) ---------------------------------

@dataclass(frozen=True)
class RankCertificate:
    status: str  # "certificate" | "infeasible"
    D: Optional[np.ndarray]
    P0: Optional[np.ndarray]
    moment: Optional[MomentBlock]
    V: Optional[np.ndarray]  # eps x k orthonormal kernel basis (certificate)
    dual: Mapping  # infeasible: separating functional per constraint
    problem: SdpProblem
    slack: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "status": self.status,
            "D": _matrix_to_json(self.D) if self.D is not None else None,
            "P0": _matrix_to_json(self.P0) if self.P0 is not None else None,
            "moment": self.moment.to_json_dict() if self.moment is not None else None,
            "V": _matrix_to_json(self.V) if self.V is not None else None,
            "kernel_dim": int(self.V.shape[1]) if self.V is not None else None,
            "slack": float(self.slack),
        }


def rank_certificate(
    Ltilde: LinearPencil, L: LinearPencil, tol: float = DEFAULT_TOL
) -> RankCertificate:
    """Positivity certificate Re(D Ltilde) = P0 + sum_k C_k^* L C_k.

    Variables: free D (eps x delta), PSD P0 (eps x eps) and the moment block
    M (d*eps); the sum over C_k is the contraction of M.  Coefficients of the
    constant, x_j and x_j* parts are matched (the x_j* family is the adjoint
    of the x_j family, so only constant and x_j rows enter the SDP), plus the
    trace normalization Re tr(D Ltilde(0)) = 1.

    On feasibility the reported kernel V is taken at the point maximizing the
    smallest eigenvalue of P0 + Phi_I(M), so V = {0} exactly when some
    certificate has that matrix positive definite.
    """
    if not L.is_hermitian_monic(max(tol, 1e-6)):
        raise ValueError("rank_certificate expects a hermitian monic domain pencil")
    if Ltilde.g != L.g:
        raise ValueError("variable count mismatch")
    delta, eps = Ltilde.rows, Ltilde.cols
    if delta < eps:
        raise ValueError("rank_certificate expects rows >= cols; pass the adjoint")
    d = L.size
    C0 = Ltilde.constant
    eyeE = np.eye(eps)
    blocks = [
        BlockSpec("D", "free", eps, delta),
        BlockSpec("P0", "psd", eps, eps),
    ]
    if d > 0:
        blocks.append(BlockSpec("M", "psd", d * eps, d * eps))
    blocks = tuple(blocks)
    cons = []
    # constant: (D C0 + C0^H D^H)/2 - P0 - Phi_I(M) = 0
    const_terms = [
        Term("D", 0.5 * eyeE, C0),
        Term("D", 0.5 * C0.conj().T, eyeE, "conjT"),
        Term("P0", -eyeE, eyeE),
    ] + [_scale_term(t, -1.0) for t in _choi_terms("M", np.eye(d), eps)]
    cons.append(Constraint("const", tuple(const_terms), np.zeros((eps, eps))))
    for j in range(L.g):
        Tj = Ltilde.coeff_x[j]
        Sj = Ltilde.coeff_xstar[j]
        Aj = -L.coeff_x[j]
        terms = [
            Term("D", 0.5 * eyeE, Tj),
            Term("D", 0.5 * Sj.conj().T, eyeE, "conjT"),
        ] + _choi_terms("M", Aj, eps)
        cons.append(Constraint(f"coeff_x{j + 1}", tuple(terms), np.zeros((eps, eps))))
    cons.append(_normalization_constraint(C0, eps, delta))
    prob = SdpProblem(blocks, tuple(cons))
    res = solve(prob, tol)
    if res.status == "marginal":
        raise MarginalSdp("rank certificate SDP is marginal")
    if res.status == "infeasible":
        return RankCertificate("infeasible", None, None, None, None, res.dual, prob)
    # push the constant-term matrix N = P0 + Phi_I(M) as positive as possible
    slack_terms = [Term("P0", eyeE, eyeE)] + _choi_terms("M", np.eye(d), eps)
    try:
        tstar, values = solve_max_slack(prob, slack_terms, eps, tol)
    except NumericalBreakdown:
        tstar, values = 0.0, res.primal
    D = values["D"]
    P0 = values["P0"]
    mom = MomentBlock(
        values["M"] if d > 0 else np.zeros((0, 0), dtype=complex), eps
    )
    N = P0 + mom.contract(np.eye(d))
    N = (N + N.conj().T) / 2
    if tstar > tol:
        V = np.zeros((eps, 0))
    else:
        w, U = np.linalg.eigh(N)
        scale = max(np.abs(N).max(), 1.0)
        V = U[:, w <= 10 * tol * scale]
        if V.shape[1] == eps:
            # the trace normalization forbids a total kernel; keep the
            # least-positive directions only
            V = U[:, :-1]
    return RankCertificate("certificate", D, P0, mom, V, {}, prob, tstar)


def _scale_term(t: Term, alpha: complex) -> Term:
    return Term(t.block, alpha * t.left, t.right, t.mode)


def _normalization_constraint(C0: np.ndarray, eps: int, delta: int) -> Constraint:
    """Re tr(D C0) = 1 as a 1x1 constraint: sum_i (e_i^T D C0 e_i + conj)/2."""
    terms = []
    for i in range(eps):
        ei = np.zeros((1, eps))
        ei[0, i] = 1.0
        terms.append(Term("D", 0.5 * ei, C0 @ ei.T))
        terms.append(Term("D", 0.5 * ei @ C0.conj().T, ei.T, "conjT"))
    return Constraint("normalization", tuple(terms), np.array([[1.0]]))
