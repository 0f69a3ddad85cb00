"""Top-level convexity pipeline for free invertibility sets.

Given a matrix rational expression f (value I at the origin), the pipeline
builds a monic pencil L with K_f = K_L from a minimal realization of f^{-1}
(polynomial input) or of f (+) f^{-1} (rational input), splits L into
irreducible blocks, hermitianizes the blocks that admit it, and decides
convexity by checking that the non-hermitianizable remainder is invertible
throughout the interior of the spectrahedron of the hermitian part.  On a
convex verdict an irredundant hermitian monic pencil describing K_f is
returned.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from . import parser as _parser
from .algebra import (
    LinearPencil,
    burnside_decompose,
    is_irreducible,
    pencil_of_realization,
    similarity_classes,
)
from .ncpoly import Letter, MatrixTuple, NcPoly, random_tuple, _matrix_to_json
from .realization import (
    Realization,
    minimize,
    realize_expression,
    realize_polynomial,
    realize_with_inverse,
)
from .sdp import (
    MarginalSdp,
    hermitian_similarity,
    inclusion,
    rank_certificate,
)

__all__ = [
    "ConvexityReport",
    "RankCheckOutcome",
    "NotConvex",
    "NotAtom",
    "StructureMismatch",
    "MissingOverride",
    "full_rank_on_interior",
    "extract_witness",
    "is_convex",
    "lmi_representation",
    "schur_form",
    "is_atom_scalar",
    "make_flip_poly",
    "det_identity_check",
]

DEFAULT_TOL = 1e-8


class NotConvex(ValueError):
    pass


class NotAtom(ValueError):
    pass


class StructureMismatch(ValueError):
    pass


class MissingOverride(ValueError):
    pass


# -- rank check on the interior ----------------------------------------------

@dataclass(frozen=True)
class RankCheckOutcome:
    result: str  # "full_rank" | "rank_deficient"
    chain: tuple  # per level: {"level", "D", "p0_kernel_dim", "v_dim"} or status
    witness: Optional[MatrixTuple]

    def to_json_dict(self, include_sdp: bool = False) -> dict:
        return {
            "result": self.result,
            "chain": _chain_to_json(self.chain, include_sdp),
            "witness": self.witness.to_json_dict() if self.witness else None,
        }


def _chain_to_json(chain, include_sdp: bool) -> list:
    out = []
    for entry in chain:
        rec = dict(entry)
        if isinstance(rec.get("D"), np.ndarray):
            rec["D"] = _matrix_to_json(rec["D"])
        problem = rec.pop("problem", None)
        if include_sdp and problem is not None:
            rec["sdp"] = problem.to_json_dict()
        out.append(rec)
    return out


def full_rank_on_interior(
    Ltilde: LinearPencil,
    L: LinearPencil,
    tol: float = DEFAULT_TOL,
    rng: Optional[np.random.Generator] = None,
    use_gns: bool = True,
) -> RankCheckOutcome:
    """Decide whether Ltilde is full rank throughout the interior of D_L.

    Each level solves the moment-form rank certificate; infeasibility means
    rank deficiency somewhere in the interior (witness extraction is then
    attempted), a certificate with trivial kernel means full rank, and a
    nontrivial kernel V restricts the pencil columns to V and recurses.
    """
    if not L.is_hermitian_monic(max(tol, 1e-6)):
        raise ValueError("domain pencil must be hermitian monic")
    rng = rng or np.random.default_rng(0)
    chain = []
    cur = Ltilde
    max_depth = min(Ltilde.rows, Ltilde.cols) + 1
    for level in range(max_depth):
        if cur.cols == 0 or cur.rows == 0:
            chain.append({"level": level, "p0_kernel_dim": 0, "v_dim": 0})
            return RankCheckOutcome("full_rank", tuple(chain), None)
        work = cur if cur.rows >= cur.cols else cur.adjoint()
        try:
            rc = rank_certificate(work, L, tol)
        except MarginalSdp as exc:
            raise MarginalSdp(f"rank check level {level}: {exc}") from exc
        if rc.status == "infeasible":
            chain.append({"level": level, "status": "infeasible", "problem": rc.problem})
            witness = extract_witness(rc.dual, L, work, tol, rng=rng, use_gns=use_gns)
            return RankCheckOutcome("rank_deficient", tuple(chain), witness)
        p0_scale = max(np.abs(rc.P0).max(), 1.0)
        p0_kernel = int(np.sum(np.linalg.eigvalsh(rc.P0) <= 10 * tol * p0_scale))
        v_dim = rc.V.shape[1]
        chain.append(
            {
                "level": level,
                "D": rc.D,
                "p0_kernel_dim": p0_kernel,
                "v_dim": v_dim,
                "problem": rc.problem,
            }
        )
        if v_dim == 0:
            return RankCheckOutcome("full_rank", tuple(chain), None)
        cur = work.transform(np.eye(work.rows), rc.V)
    raise RuntimeError("rank check recursion failed to terminate")


# -- witness extraction ------------------------------------------------------

def _words_level_one(g: int) -> list:
    out = [()]
    for j in range(1, g + 1):
        out.append((Letter(j, False),))
    for j in range(1, g + 1):
        out.append((Letter(j, True),))
    return out


def _word_adjoint(w) -> tuple:
    return tuple(lt.adjoint() for lt in reversed(w))


def _separation_functional(Ltilde: LinearPencil, L: LinearPencil, tol: float):
    """Strictly positive separating functional in moment form.

    Searches matrices T_w (w of length <= 2, T_{w*} = T_w^H) such that the
    kernel-condition rows of Ltilde vanish, the level-one moment matrix and
    the localized domain matrix are (uniformly) positive definite, and
    tr T_1 = 1.  Returns (margin, {word: matrix}) or None on solver failure.
    """
    import cvxpy as cp

    g = L.g
    d = L.size
    delta, eps = Ltilde.rows, Ltilde.cols
    eta = max(d, eps, 1)
    W = _words_level_one(g)
    needed = set()
    for w2 in W:
        for w1 in W:
            needed.add(_word_adjoint(w2) + w1)
    needed.update(W)
    variables = {}
    exprs = {}
    from .ncpoly import word_key

    for w in sorted(needed, key=word_key):
        if w in exprs:
            continue
        ws = _word_adjoint(w)
        if ws == w:
            V = cp.Variable((eta, eta), hermitian=True)
            variables[w] = V
            exprs[w] = V
        elif ws in exprs:
            exprs[w] = cp.conj(exprs[ws]).T
        else:
            V = cp.Variable((eta, eta), complex=True)
            variables[w] = V
            exprs[w] = V
            exprs[ws] = cp.conj(V).T
    s = cp.Variable()
    cons = []
    # kernel condition: the top eps x eta slices carry the candidate kernel
    acc = cp.Constant(np.zeros((delta, eta)))
    acc = acc + Ltilde.constant @ exprs[()][:eps, :]
    for j in range(g):
        acc = acc + Ltilde.coeff_x[j] @ exprs[(Letter(j + 1, False),)][:eps, :]
        acc = acc + Ltilde.coeff_xstar[j] @ exprs[(Letter(j + 1, True),)][:eps, :]
    cons.append(acc == 0)
    # level-one moment positivity
    H = cp.bmat(
        [[exprs[_word_adjoint(w2) + w1].T for w1 in W] for w2 in W]
    )
    cons.append(H >> s * np.eye(eta * len(W)))
    # localized positivity on the domain pencil
    if d > 0:
        K = cp.kron(np.eye(d), exprs[()].T)
        for j in range(g):
            K = K + cp.kron(L.coeff_x[j], exprs[(Letter(j + 1, False),)].T)
            K = K + cp.kron(L.coeff_xstar[j], exprs[(Letter(j + 1, True),)].T)
        cons.append(K >> s * np.eye(d * eta))
    cons.append(cp.real(cp.trace(exprs[()])) == 1)
    cons.append(s <= 1.0)
    prob = cp.Problem(cp.Maximize(s), cons)
    try:
        from .sdp import _run

        _run(prob, cp)
    except Exception:
        return None
    if s.value is None:
        return None
    values = {}
    for w in needed:
        base = w if w in variables else _word_adjoint(w)
        if base not in variables or variables[base].value is None:
            return None
        V = np.atleast_2d(np.asarray(variables[base].value, dtype=complex))
        values[w] = V if w == base else V.conj().T
    return float(s.value), values


def _verify_witness(
    X: MatrixTuple, Ltilde: LinearPencil, L: LinearPencil, tol: float
) -> bool:
    if L.size:
        w = np.linalg.eigvalsh(
            (L.evaluate(X) + L.evaluate(X).conj().T) / 2
        )
        if w.min() <= tol:
            return False
    sv = np.linalg.svd(Ltilde.evaluate(X), compute_uv=False)
    return sv.size == 0 or sv.min() < np.sqrt(tol)


def _interior_point(
    L: LinearPencil, direction: MatrixTuple, t: float
) -> Optional[MatrixTuple]:
    X = direction.scale(t)
    if L.size == 0:
        return X
    w = np.linalg.eigvalsh((L.evaluate(X) + L.evaluate(X).conj().T) / 2)
    return X if w.min() > 0 else None


def _max_step(L: LinearPencil, direction: MatrixTuple, cap: float = 1e3) -> float:
    """sup{t >= 0 : L(t X) > 0} for a monic hermitian pencil."""
    if L.size == 0:
        return cap
    S = np.kron(np.eye(L.size), np.eye(direction.n)) - L.evaluate(direction)
    S = (S + S.conj().T) / 2
    top = np.linalg.eigvalsh(S).max()
    if top <= 1e-12:
        return cap
    return min(1.0 / top, cap)


def _random_scan(
    Ltilde: LinearPencil,
    L: LinearPencil,
    tol: float,
    rng: np.random.Generator,
    samples: int = 1000,
) -> Optional[MatrixTuple]:
    """Seeded interior sampling of D_L looking for rank deficiency of Ltilde."""
    from scipy.optimize import minimize_scalar

    g = L.g
    eta = max(L.size, Ltilde.rows, Ltilde.cols, 1)
    best = None
    best_sv = np.inf
    for _ in range(samples):
        direction = random_tuple(rng, g, eta)
        tmax = _max_step(L, direction)
        t = rng.uniform(0.0, 0.999) * tmax
        X = _interior_point(L, direction, t)
        if X is None:
            continue
        sv = np.linalg.svd(Ltilde.evaluate(X), compute_uv=False)
        smin = sv.min() if sv.size else 0.0
        if smin < best_sv:
            best_sv = smin
            best = (direction, tmax, t)
        if smin < np.sqrt(tol) and _verify_witness(X, Ltilde, L, tol):
            return X
    if best is None:
        return None
    direction, tmax, t0 = best

    def objective(t):
        sv = np.linalg.svd(Ltilde.evaluate(direction.scale(t)), compute_uv=False)
        return sv.min() if sv.size else 0.0

    res = minimize_scalar(objective, bounds=(0.0, 0.999 * tmax), method="bounded")
    t = float(res.x) if res.success else t0
    X = _interior_point(L, direction, t)
    if X is not None and _verify_witness(X, Ltilde, L, tol):
        return X
    return None


def extract_witness(
    dual: Mapping,
    L: LinearPencil,
    Ltilde: LinearPencil,
    tol: float = DEFAULT_TOL,
    rng: Optional[np.random.Generator] = None,
    use_gns: bool = True,
) -> Optional[MatrixTuple]:
    """Best-effort witness X with L(X,X*) > 0 and Ltilde(X,X*) rank deficient.

    The primary route reconstructs X from a strictly positive separating
    functional (GNS): P = T_1, X_j = (P^{-1/2} T_{x_j} P^{-1/2})^T.  When the
    functional is not strictly positive or the reconstruction fails to
    verify, a seeded random interior scan with a line-search polish runs.
    """
    if not dual:
        return None
    rng = rng or np.random.default_rng(0)
    if use_gns:
        out = _separation_functional(Ltilde, L, tol)
        if out is not None:
            margin, T = out
            if margin > tol:
                P = (T[()] + T[()].conj().T) / 2
                w, U = np.linalg.eigh(P)
                w = np.clip(w, max(margin / 10, 1e-12), None)
                Pih = (U / np.sqrt(w)) @ U.conj().T
                mats = []
                for j in range(L.g):
                    Tx = T[(Letter(j + 1, False),)]
                    mats.append((Pih @ Tx @ Pih).T)
                X = MatrixTuple(mats)
                if _verify_witness(X, Ltilde, L, tol):
                    return X
    return _random_scan(Ltilde, L, tol, rng)


# -- convexity decision ------------------------------------------------------

@dataclass(frozen=True)
class ConvexityReport:
    verdict: str  # "convex" | "not_convex"
    Lhat: LinearPencil
    Lcheck: LinearPencil
    minimal_pencil: Optional[LinearPencil]
    block_log: tuple  # per block: size, irreducible, hermitian_similar, q_cond
    rank_trace: tuple
    witness: Optional[MatrixTuple]
    tol: float
    seed: Optional[int] = None

    def to_json_dict(self, include_sdp: bool = False) -> dict:
        trace = _chain_to_json(self.rank_trace, include_sdp)
        return {
            "verdict": self.verdict,
            "minimal_pencil": self.minimal_pencil.to_json_dict()
            if self.minimal_pencil is not None
            else None,
            "blocks": [dict(b) for b in self.block_log],
            "rank_trace": trace,
            "witness": self.witness.to_json_dict() if self.witness else None,
            "tolerances": {"tol": self.tol},
            "seed": self.seed,
        }


def _pencil_for_expression(
    e, g: Optional[int], tol: float
) -> LinearPencil:
    """Monic pencil with K_f = K_L from the appropriate realization route."""
    if isinstance(e, NcPoly):
        aff = realize_polynomial(e)
        r = minimize(aff.inverse(tol).normalized(tol), tol)
        return pencil_of_realization(r)
    if e.has_inverse():
        r = realize_with_inverse(e, g, tol)
    else:
        r = realize_expression(_parser.Inverse(e), g, tol)
    return pencil_of_realization(r)


def _split_blocks(L: LinearPencil, tol: float, rng: np.random.Generator):
    """Burnside split plus hermitianization; returns (hat, check, log)."""
    bd = burnside_decompose(L, tol, rng)
    blocks = [bd.diagonal_block(i) for i in range(len(bd.blocks))]
    kinds = [b[2] for b in bd.blocks]
    classes = similarity_classes(blocks, tol, rng) if blocks else []
    class_of = {}
    for ci, cls in enumerate(classes):
        for m in cls["members"]:
            class_of[m] = ci
    hat_parts = []
    check_parts = []
    log = []
    herm_result = {}
    for ci, cls in enumerate(classes):
        rep = cls["representative"]
        herm_result[ci] = hermitian_similarity(rep, tol)
    for i, blk in enumerate(blocks):
        ci = class_of[i]
        out = herm_result[ci]
        entry = {
            "size": blk.size,
            "kind": kinds[i],
            "class": ci,
            "hermitian_similar": out is not None,
            "q_cond": float(np.linalg.cond(out[0])) if out is not None and out[0].size else 1.0,
        }
        log.append(entry)
    for ci, cls in enumerate(classes):
        out = herm_result[ci]
        rep = cls["representative"]
        if out is not None:
            if kinds[cls["members"][0]] != "identity":
                hat_parts.append(out[1])
        else:
            check_parts.append(rep)
    hat = _direct_sum_all(hat_parts, L.g)
    check = _direct_sum_all(check_parts, L.g)
    return hat, check, tuple(log)


def _direct_sum_all(parts, g: int) -> LinearPencil:
    out = LinearPencil.empty(g)
    for p in parts:
        out = out.direct_sum(p)
    return out


def is_convex(
    e,
    tol: float = DEFAULT_TOL,
    rng: Optional[np.random.Generator] = None,
    g: Optional[int] = None,
    use_gns: bool = True,
    seed: Optional[int] = None,
) -> ConvexityReport:
    """Decide convexity of the free invertibility set K_f of the expression."""
    rng = rng or np.random.default_rng(0)
    L = _pencil_for_expression(e, g, tol)
    hat, check, log = _split_blocks(L, tol, rng)
    witness = None
    trace = ()
    if check.size == 0:
        verdict = "convex"
    else:
        outcome = full_rank_on_interior(check, hat, tol, rng, use_gns)
        trace = outcome.chain
        witness = outcome.witness
        verdict = "convex" if outcome.result == "full_rank" else "not_convex"
    minimal = _prune_pencil(hat, tol) if verdict == "convex" else None
    return ConvexityReport(
        verdict, hat, check, minimal, log, trace, witness, tol, seed
    )


def _pencil_blocks(L: LinearPencil, tol: float, rng) -> list:
    bd = burnside_decompose(L, tol, rng)
    return [bd.diagonal_block(i) for i in range(len(bd.blocks))]


def _prune_pencil(hat: LinearPencil, tol: float) -> LinearPencil:
    """Drop blocks whose spectrahedron contains the intersection of the rest."""
    blocks = _pencil_blocks(hat, tol, np.random.default_rng(0)) if hat.size else []
    # largest blocks are tested for redundancy first
    order = sorted(range(len(blocks)), key=lambda i: -blocks[i].size)
    alive = set(range(len(blocks)))
    for i in order:
        if len(alive) <= 1:
            break
        rest = _direct_sum_all([blocks[j] for j in sorted(alive) if j != i], hat.g)
        try:
            if inclusion(rest, blocks[i], tol):
                alive.discard(i)
        except MarginalSdp:
            continue
    survivors = [blocks[j] for j in sorted(alive)]
    # a single surviving identity-like block with zero coefficients is empty
    survivors = [
        b for b in survivors if any(np.abs(m).max() > tol for m in b.neg_coeffs())
    ]
    return _direct_sum_all(survivors, hat.g)


def lmi_representation(
    e,
    tol: float = DEFAULT_TOL,
    rng: Optional[np.random.Generator] = None,
    g: Optional[int] = None,
    seed: Optional[int] = None,
) -> LinearPencil:
    """Minimal hermitian monic pencil L with K_f = D_L; requires convexity."""
    report = is_convex(e, tol, rng, g, seed=seed)
    if report.verdict != "convex":
        raise NotConvex("the free invertibility set is not convex")
    return report.minimal_pencil


# -- scalar atoms and the Schur-complement form ------------------------------

def _scalar_inverse_realization(f: NcPoly, tol: float) -> Realization:
    if f.delta != 1:
        raise ValueError("expected a scalar polynomial")
    if abs(f.constant_term()[0, 0] - 1.0) > 1e-10:
        raise ValueError("expected f(0) = 1")
    aff = realize_polynomial(f)
    return minimize(aff.inverse(tol).normalized(tol), tol)


def is_atom_scalar(f: NcPoly, tol: float = DEFAULT_TOL) -> bool:
    """True iff the pencil of the minimal realization of f^{-1} is irreducible."""
    r = _scalar_inverse_realization(f, tol)
    L = pencil_of_realization(r)
    if L.size == 0:
        return False
    return is_irreducible(L, tol)


def schur_form(f: NcPoly, tol: float = DEFAULT_TOL):
    """Decompose a convex scalar hermitian atom as the Schur complement form.

    Returns (alpha, u, v, pencil) with
    f = 1 - (alpha x + conj(alpha) x*) - (u.x + v.x*)* (u.x + v.x*)
    and the bordered hermitian monic pencil whose Schur complement is f.
    """
    if f.delta != 1 or not f.is_hermitian(1e-9):
        raise ValueError("schur_form expects a scalar hermitian polynomial")
    if not is_atom_scalar(f, tol):
        raise NotAtom("input is not an atom")
    if f.degree() > 2:
        raise NotConvex("convex atoms have degree at most two")
    r = _scalar_inverse_realization(f, tol)
    L = pencil_of_realization(r)
    out = hermitian_similarity(L, tol)
    if out is None:
        raise NotConvex("the atom's pencil is not similar to a hermitian pencil")
    Q, Lh = out
    w, U = np.linalg.eigh((Q + Q.conj().T) / 2)
    w = np.clip(w, 1.0 - 10 * tol, None)
    Qih = (U / np.sqrt(w)) @ U.conj().T
    Qh = (U * np.sqrt(w)) @ U.conj().T
    g = f.g
    d = r.d
    # transformed realization data: A~_k = Q^{-1/2} A_k Q^{1/2}, likewise b, c
    A = [Qih @ a @ Qh for a in r.A]
    b = [Qih @ bk for bk in r.b]
    c = Qh.conj().T @ r.c
    # the input maps are rank one through c: b_k = lambda A_k c, one lambda
    lam = None
    for k in range(2 * g):
        Ac = A[k] @ c
        if np.linalg.norm(Ac) > 1e-8:
            denom = float(np.linalg.norm(Ac) ** 2)
            lam_k = complex((Ac.conj().T @ b[k])[0, 0]) / denom
            resid = np.linalg.norm(b[k] - lam_k * Ac)
            if resid > 1e-6 * max(1.0, np.linalg.norm(b[k])):
                raise StructureMismatch("input maps are not rank one through c")
            if lam is None:
                lam = lam_k
            elif abs(lam_k - lam) > 1e-6 * max(1.0, abs(lam)):
                raise StructureMismatch("input scaling differs across variables")
        elif np.linalg.norm(b[k]) > 1e-8:
            raise StructureMismatch("input map outside the range of A_k c")
    if lam is None:
        # f = 1: no variables actually occur
        zero = np.zeros((g, 0))
        alpha0 = 0.0 if g == 1 else tuple(0.0 for _ in range(g))
        return alpha0, zero, zero, LinearPencil.empty(g)
    ct = np.sqrt(abs(lam)) * c
    nrm = np.linalg.norm(ct)
    if abs(nrm - 1.0) > 1e-6:
        raise StructureMismatch("normalized state vector has non-unit norm")
    # unitary change of basis sending the state vector to e_1
    U1 = _unitary_with_first_column(ct[:, 0] / nrm)
    Ab = [U1.conj().T @ A[_slot(j, False, g)] @ U1 for j in range(1, g + 1)]
    for M in Ab:
        if M.shape[0] > 1 and np.abs(M[1:, 1:]).max() > 1e-6:
            raise StructureMismatch("lower-right block of the atom pencil is nonzero")
    # A_j = [[alpha_j, -u_j^T], [-conj(v_j), 0]] reproduces the bordered form
    alphas = [complex(M[0, 0]) for M in Ab]
    us = [-np.array(M[0, 1:]) for M in Ab]
    vs = [-np.conj(np.array(M[1:, 0])) for M in Ab]
    mu = d - 1
    As = []
    for j in range(g):
        M = np.zeros((1 + mu, 1 + mu), dtype=complex)
        M[0, 0] = alphas[j]
        M[0, 1:] = -us[j]
        M[1:, 0] = -vs[j].conj()
        As.append(M)
    pencil = LinearPencil.monic(As)
    u = np.stack(us, axis=0) if g else np.zeros((0, mu))
    v = np.stack(vs, axis=0) if g else np.zeros((0, mu))
    alpha = alphas[0] if g == 1 else tuple(alphas)
    return alpha, u, v, pencil


def _slot(j: int, starred: bool, g: int) -> int:
    return (j - 1) + (g if starred else 0)


def _unitary_with_first_column(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    U = np.zeros((n, n), dtype=complex)
    U[:, 0] = x
    basis = np.eye(n, dtype=complex)
    col = 1
    for k in range(n):
        w = basis[:, k]
        for i in range(col):
            w = w - (U[:, i].conj() @ w) * U[:, i]
        nw = np.linalg.norm(w)
        if nw > 1e-8:
            U[:, col] = w / nw
            col += 1
            if col == n:
                break
    return U


def schur_reconstruct(alpha, u: np.ndarray, v: np.ndarray, g: int) -> NcPoly:
    """Expand the Schur quadruple back into the scalar polynomial:
    f = 1 - sum_j (alpha_j x_j + conj x_j*) - sum_i w_i w_i* with
    w_i = sum_j u[j,i] x_j + v[j,i] x_j*."""
    alphas = [alpha] if g == 1 and np.isscalar(alpha) else list(alpha)
    f = NcPoly.constant(1.0, 1, g)
    for j in range(g):
        a = alphas[j]
        f = f - NcPoly.variable(j + 1, g).scale(a)
        f = f - NcPoly.variable(j + 1, g, starred=True).scale(np.conj(a))
    mu = u.shape[1] if u.ndim == 2 else 0
    for i in range(mu):
        w = NcPoly.zero(1, g)
        for j in range(g):
            w = w + NcPoly.variable(j + 1, g).scale(u[j, i])
            w = w + NcPoly.variable(j + 1, g, starred=True).scale(v[j, i])
        f = f - w * w.adjoint()
    return f


# -- flip-poly pencils -------------------------------------------------------

def make_flip_poly(u: np.ndarray, vs, overrides=None) -> LinearPencil:
    """Hermitian monic pencil with jointly flip-structured coefficients.

    A_j = N_j + v_j u* where N_j is the strictly upper triangular part of
    u vtilde_j* - v_j u*, with vtilde_j^k = u^k conj(v_j^k) / conj(u^k) at
    the nonzero entries of u and the supplied overrides elsewhere.
    """
    u = np.asarray(u, dtype=complex).reshape(-1)
    if u.size == 0 or np.abs(u).max() == 0:
        raise ValueError("u must be a nonzero vector")
    d = u.size
    vs = [np.asarray(v, dtype=complex).reshape(-1) for v in vs]
    for v in vs:
        if v.size != d:
            raise ValueError("all v_j must have the same size as u")
    overrides = overrides or {}
    zero_pos = [k for k in range(d) if u[k] == 0]
    for j in range(len(vs)):
        for k in zero_pos:
            if (j, k) not in overrides:
                raise MissingOverride(
                    f"override for (variable {j + 1}, entry {k}) required where u vanishes"
                )
    As = []
    for j, v in enumerate(vs):
        vt = np.zeros(d, dtype=complex)
        for k in range(d):
            if u[k] != 0:
                vt[k] = u[k] * np.conj(v[k]) / np.conj(u[k])
            else:
                vt[k] = complex(overrides[(j, k)])
        B = np.outer(u, vt.conj()) - np.outer(v, u.conj())
        N = np.triu(B, 1)
        As.append(N + np.outer(v, u.conj()))
    return LinearPencil.monic(As)


# -- determinant identity ----------------------------------------------------

def det_identity_check(
    f: NcPoly,
    L: LinearPencil,
    trials: int = 20,
    levels=(1, 2, 3, 4),
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Worst relative error of det f(X) = det L(X) over seeded random tuples."""
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for n in levels:
        for _ in range(trials):
            X = random_tuple(rng, f.g, n)
            df = np.linalg.det(f.evaluate(X))
            dl = np.linalg.det(L.evaluate(X)) if L.size else 1.0 + 0j
            denom = max(abs(df), abs(dl), 1e-30)
            worst = max(worst, abs(df - dl) / denom)
    return worst
