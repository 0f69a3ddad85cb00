import numpy as np
import pytest

from freeconvex.algebra import LinearPencil
from freeconvex.sdp import (
    BlockSpec,
    Constraint,
    MarginalSdp,
    MomentBlock,
    SdpProblem,
    SizeLimitExceeded,
    Term,
    constraint_residual,
    hermitian_similarity,
    inclusion,
    rank_certificate,
    solve,
    solve_max_slack,
    term_value,
    verify_feasible,
)
from conftest import farkas_verify

TOL = 1e-8


def ball_pencil(radius=1.0):
    A = np.array([[0.0, -1.0 / radius], [0.0, 0.0]])
    return LinearPencil(np.eye(2), [A], [A.conj().T])


def trace_constraint(name, block, d, value):
    return Constraint(
        name, (Term(block, np.eye(d), np.eye(d)),), np.eye(d) * 0 + value * np.eye(d) / d
    )


# -- term algebra ------------------------------------------------------------

def test_term_modes(rng):
    X = rng.uniform(-1, 1, (2, 3)) + 1j * rng.uniform(-1, 1, (2, 3))
    left = rng.uniform(-1, 1, (2, 2))
    right = rng.uniform(-1, 1, (3, 3))
    assert np.allclose(term_value(Term("X", left, right), X), left @ X @ right)
    assert np.allclose(
        term_value(Term("X", left.T, right, "T"), X.T), left.T @ X @ right
    )
    assert np.allclose(
        term_value(Term("X", left, right, "conj"), X), left @ X.conj() @ right
    )
    assert np.allclose(
        term_value(Term("X", right, left, "conjT"), X), right @ X.conj().T @ left
    )


def test_constraint_residual(rng):
    X = np.eye(2)
    c = Constraint("c", (Term("X", np.eye(2), np.eye(2)),), 2 * np.eye(2))
    assert np.abs(constraint_residual(c, {"X": X}) + np.eye(2)).max() < 1e-14


# -- feasibility -------------------------------------------------------------

def test_feasible_trace_instance():
    p = SdpProblem(
        (BlockSpec("X", "psd", 2, 2),),
        (
            Constraint(
                "tr", (Term("X", np.eye(2), np.eye(2)),), np.array([[1.0, 0], [0, 1.0]])
            ),
        ),
    )
    res = solve(p, TOL)
    assert res.status == "feasible"
    assert verify_feasible(p, res.primal, TOL) <= 10 * TOL
    X = res.primal["X"]
    assert np.linalg.eigvalsh((X + X.conj().T) / 2).min() > -10 * TOL


def test_infeasible_diagonal_instance():
    # e1* X e1 = -1 has no psd solution
    e1 = np.zeros((1, 2))
    e1[0, 0] = 1.0
    p = SdpProblem(
        (BlockSpec("X", "psd", 2, 2),),
        (Constraint("neg", (Term("X", e1, e1.T),), np.array([[-1.0]])),),
    )
    res = solve(p, TOL)
    assert res.status == "infeasible"
    assert farkas_verify(p, res.dual, TOL)


def test_free_block_exact_solve(rng):
    # a free variable can match an arbitrary complex right-hand side
    rhs = rng.uniform(-1, 1, (2, 2)) + 1j * rng.uniform(-1, 1, (2, 2))
    p = SdpProblem(
        (BlockSpec("Y", "free", 2, 2),),
        (Constraint("match", (Term("Y", np.eye(2), np.eye(2)),), rhs),),
    )
    res = solve(p, TOL)
    assert res.status == "feasible"
    assert np.abs(res.primal["Y"] - rhs).max() < 1e-7


def test_realified_path_agrees():
    e1 = np.zeros((1, 2))
    e1[0, 0] = 1.0
    feas = SdpProblem(
        (BlockSpec("X", "psd", 2, 2),),
        (Constraint("tr", (Term("X", np.eye(2), np.eye(2)),), np.eye(2)),),
    )
    infeas = SdpProblem(
        (BlockSpec("X", "psd", 2, 2),),
        (Constraint("neg", (Term("X", e1, e1.T),), np.array([[-1.0]])),),
    )
    assert solve(feas, TOL, realify=True).status == "feasible"
    assert solve(infeas, TOL, realify=True).status == "infeasible"


def test_size_cap_enforced():
    big = SdpProblem((BlockSpec("X", "psd", 200, 200),), ())
    with pytest.raises(SizeLimitExceeded):
        solve(big, TOL)


def test_objective_refinement():
    # minimize tr X subject to e1* X e1 = 1 gives trace close to 1
    e1 = np.zeros((1, 2))
    e1[0, 0] = 1.0
    p = SdpProblem(
        (BlockSpec("X", "psd", 2, 2),),
        (Constraint("corner", (Term("X", e1, e1.T),), np.array([[1.0]])),),
        objective={"X": np.eye(2)},
    )
    res = solve(p, TOL)
    assert res.status == "feasible"
    assert abs(np.trace(res.primal["X"]).real - 1.0) < 1e-5


def test_solve_max_slack():
    p = SdpProblem(
        (BlockSpec("X", "psd", 1, 1),),
        (Constraint("fix", (Term("X", np.eye(1), np.eye(1)),), np.array([[3.0]])),),
    )
    t, primal = solve_max_slack(p, (Term("X", np.eye(1), np.eye(1)),), 1, TOL)
    assert abs(t - 3.0) < 1e-5


# -- moment blocks -----------------------------------------------------------

def test_moment_block_contraction(rng):
    d, eps = 3, 2
    Cs = [
        rng.uniform(-1, 1, (d, eps)) + 1j * rng.uniform(-1, 1, (d, eps))
        for _ in range(4)
    ]
    mb = MomentBlock.of_factors(Cs, eps)
    G = rng.uniform(-1, 1, (d, d)) + 1j * rng.uniform(-1, 1, (d, d))
    expected = sum(C.conj().T @ G @ C for C in Cs)
    assert np.allclose(mb.contract(G), expected)
    assert mb.d == d


# -- hermitian similarity ----------------------------------------------------

def test_hermitian_pencil_passes_unchanged():
    L = ball_pencil()
    out = hermitian_similarity(L, TOL)
    assert out is not None
    Q, Lh = out
    assert Lh.is_hermitian_monic(1e-7)
    for a, b in zip(L.neg_coeffs(), Lh.neg_coeffs()):
        assert np.abs(a - b).max() < 1e-5


def test_conjugated_hermitian_pencil_recovered(rng):
    L = ball_pencil()
    S = rng.uniform(-1, 1, (2, 2)) + 0.3 * np.eye(2)
    M = L.conjugate(S + 1j * rng.uniform(-0.2, 0.2, (2, 2)))
    out = hermitian_similarity(M, TOL)
    assert out is not None
    Q, Mh = out
    assert Mh.is_hermitian_monic(1e-7)
    # the output is an exact similarity of the input up to solver tolerance
    w = np.linalg.eigvalsh((Q + Q.conj().T) / 2)
    assert w.min() > 1 - 1e-6


def test_not_hermitian_similar_detected():
    # a 1x1 pencil 1 - a x - b x* is hermitian-similar only when b = conj(a)
    L = LinearPencil(
        np.eye(1), [np.array([[-1.0]])], [np.array([[-2.0]])]
    )
    assert hermitian_similarity(L, TOL) is None


# -- spectrahedral inclusion -------------------------------------------------

def test_inclusion_reflexive():
    L = ball_pencil()
    assert inclusion(L, L, TOL) is True


def test_inclusion_of_nested_balls():
    small = ball_pencil(1.0)
    big = ball_pencil(2.0)
    assert inclusion(small, big, TOL) is True
    assert inclusion(big, small, TOL) is False


def test_inclusion_direct_sum_dominates_summand():
    L = ball_pencil()
    H = LinearPencil(
        np.eye(1), [np.array([[-0.5]])], [np.array([[-0.5]])]
    )
    assert inclusion(L.direct_sum(H), L, TOL) is True


def test_inclusion_with_empty_pencils():
    L = ball_pencil()
    assert inclusion(L, LinearPencil.empty(1), TOL) is True


# -- rank certificates -------------------------------------------------------

def test_rank_certificate_full_rank_on_own_domain():
    L = ball_pencil()
    rc = rank_certificate(L, L, TOL)
    assert rc.status == "certificate"
    assert rc.V.shape[1] == 0
    assert rc.slack > TOL


def test_rank_certificate_detects_domain_singularity():
    # 1 - 2x - 2x* vanishes at x = 1/4, an interior point of the ball
    Lt = LinearPencil(np.eye(1), [np.array([[-2.0]])], [np.array([[-2.0]])])
    rc = rank_certificate(Lt, ball_pencil(), TOL)
    assert rc.status == "infeasible"
    assert rc.dual


def test_rank_certificate_skew_direction_full_rank():
    # 1 + x - x* is invertible on the ball (skew part cannot reach -1)
    Lt = LinearPencil(np.eye(1), [np.array([[1.0]])], [np.array([[-1.0]])])
    rc = rank_certificate(Lt, ball_pencil(), TOL)
    assert rc.status == "certificate"
    assert rc.V.shape[1] == 0


# -- randomized classification ----------------------------------------------

def test_planted_feasible_instances(rng):
    for k in range(10):
        d = int(rng.integers(1, 4))
        X0 = rng.uniform(-1, 1, (d, d)) + 1j * rng.uniform(-1, 1, (d, d))
        X0 = X0 @ X0.conj().T + 0.1 * np.eye(d)
        cons = []
        for i in range(int(rng.integers(1, 3))):
            left = rng.uniform(-1, 1, (2, d))
            right = rng.uniform(-1, 1, (d, 2))
            t = Term("X", left, right)
            cons.append(Constraint(f"c{i}", (t,), term_value(t, X0)))
        p = SdpProblem((BlockSpec("X", "psd", d, d),), tuple(cons))
        res = solve(p, TOL)
        assert res.status == "feasible", f"instance {k}"
        assert verify_feasible(p, res.primal, TOL) <= 10 * TOL


def test_planted_infeasible_instances(rng):
    for k in range(10):
        d = int(rng.integers(1, 4))
        # sum of w_i* X w_i is nonnegative for psd X; demand it equals -1
        terms = []
        for _ in range(int(rng.integers(1, 4))):
            w = rng.uniform(-1, 1, (d, 1)) + 1j * rng.uniform(-1, 1, (d, 1))
            terms.append(Term("X", w.conj().T, w))
        p = SdpProblem(
            (BlockSpec("X", "psd", d, d),),
            (Constraint("neg", tuple(terms), np.array([[-1.0]])),),
        )
        res = solve(p, TOL)
        assert res.status == "infeasible", f"instance {k}"
        assert farkas_verify(p, res.dual, TOL), f"instance {k}"
