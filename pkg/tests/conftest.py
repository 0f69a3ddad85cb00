import numpy as np
import pytest

from freeconvex.parser import parse, to_polynomial


def poly(text, g=None):
    """Parse an expression and lower it to a free polynomial."""
    return to_polynomial(parse(text), g=g)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def hermitian_basis(d):
    """Real-orthonormal basis of hermitian d x d matrices under Re tr(A^H B)."""
    out = []
    for i in range(d):
        E = np.zeros((d, d), dtype=complex)
        E[i, i] = 1.0
        out.append(E)
        for j in range(i + 1, d):
            E = np.zeros((d, d), dtype=complex)
            E[i, j] = E[j, i] = 1.0 / np.sqrt(2)
            out.append(E)
            E = np.zeros((d, d), dtype=complex)
            E[i, j] = 1j / np.sqrt(2)
            E[j, i] = -1j / np.sqrt(2)
            out.append(E)
    return out


def farkas_verify(problem, dual, tol):
    """Independent check of an infeasibility certificate.

    The certificate pairs each constraint c with a matrix Y_c. It refutes
    feasibility when <Y, rhs> > 0 while the adjoint of the constraint map is
    negative semidefinite on every psd block and zero on every free block:
    any feasible X would give <Y, rhs> = <Y, A(X)> = <A*(Y), X> <= 0.
    """
    from freeconvex.sdp import Term, _data_scale, term_value

    def pair(block, E):
        total = 0.0
        for c in problem.constraints:
            Y = dual.get(c.name)
            if Y is None:
                continue
            for t in c.terms:
                if t.block == block:
                    total += np.real(np.vdot(Y, term_value(t, E)))
        return total

    dual_norm = max(
        (np.linalg.norm(np.atleast_2d(v)) for v in dual.values()), default=0.0
    )
    scale = max(_data_scale(problem) * max(dual_norm, 1e-300), 1e-300)
    value = sum(
        np.real(np.vdot(dual[c.name], c.rhs))
        for c in problem.constraints
        if c.name in dual
    )
    worst = 0.0
    for b in problem.blocks:
        if b.kind == "psd":
            basis = hermitian_basis(b.rows)
            G = sum(pair(b.name, E) * E for E in basis)
            eigs = np.linalg.eigvalsh(G)
            worst = max(worst, float(eigs.max()) if eigs.size else 0.0)
        else:
            for a in range(b.rows):
                for bb in range(b.cols):
                    E = np.zeros((b.rows, b.cols), dtype=complex)
                    E[a, bb] = 1.0
                    worst = max(worst, abs(pair(b.name, E)))
                    E[a, bb] = 1j
                    worst = max(worst, abs(pair(b.name, E)))
    return value > worst and worst <= 10 * tol * scale
