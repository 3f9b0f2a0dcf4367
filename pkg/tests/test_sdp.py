import io

import numpy as np
import pytest

from choidiv.linalg import random_hermitian
from choidiv.sdp import (SdpProblem, SolverError, Status, embed_hermitian, embedded_trace, kron,
                         partial_trace, unembed)

Y = np.array([[0, -1j], [1j, 0]])


def test_embedding_examples():
    X = np.array([[2.0]], dtype=complex)
    Yb = embed_hermitian(X)
    assert Yb.shape == (2, 2) and np.isclose(embedded_trace(Yb), 2.0)
    M = np.eye(2) + 0.5 * Y
    w = np.linalg.eigvalsh(M)
    assert np.allclose(np.linalg.eigvalsh(embed_hermitian(M)), np.repeat(w, 2))
    assert np.allclose(unembed(embed_hermitian(M)), M)


def test_min_trace_above_identity():
    prob = SdpProblem("min")
    X = prob.psd(2)
    prob.add_psd(X - np.eye(2))
    prob.set_objective(X.trace())
    sol = prob.solve()
    assert sol.status is Status.OPTIMAL
    assert abs(sol.primal_objective - 2.0) <= 1e-6


def test_lambda_max_by_sdp(rng):
    for _ in range(5):
        M = random_hermitian(4, rng)
        prob = SdpProblem("min")
        t = prob.scalar("t")
        prob.add_psd(t * np.eye(4) - M)
        prob.set_objective(t)
        sol = prob.solve()
        assert abs(sol.primal_objective - np.linalg.eigvalsh(M)[-1]) <= 1e-6
        assert sol.dual_objective <= sol.primal_objective + 1e-8


def test_scaled_pair():
    B = np.array([[2.0, 0.5j], [-0.5j, 1.0]])
    prob = SdpProblem("min")
    g = prob.scalar()
    prob.add_psd(g * B - 3 * B)
    prob.set_objective(g)
    assert abs(prob.solve().primal_objective - 3.0) <= 1e-6


def test_unbounded_detected():
    prob = SdpProblem("min")
    x = prob.scalar("x")
    prob.set_objective(x)
    assert prob.solve().status is Status.UNBOUNDED


def test_box_examples():
    prob = SdpProblem("max")
    q = prob.variable(1)
    prob.add_box(q, np.eye(1))
    prob.set_objective(q)
    assert abs(prob.solve().primal_objective - 1.0) <= 1e-6

    rho = np.diag([0.3, 0.7])
    for scale, ok in ((0.5, True), (2.0, False)):
        prob = SdpProblem("min")
        Q = prob.variable(4)
        prob.add_box(Q, np.kron(rho, np.eye(2)))
        prob.add_eq(Q, scale * np.kron(rho, np.eye(2)))
        prob.set_objective(Q.trace())
        sol = prob.solve()
        assert sol.optimal is ok
        if not ok:
            assert sol.status is Status.INFEASIBLE
            with pytest.raises(SolverError):
                sol.raise_for_status()


def test_complex_and_real_routes_agree(rng):
    # a real instance solved once in real mode and once through the complex embedding
    C = random_hermitian(3, rng).real.astype(complex)
    vals = []
    for real in (True, False):
        prob = SdpProblem("min")
        X = prob.psd(3)
        prob.add_eq(X.trace(), 1.0)
        prob.set_objective(X.inner(C))
        vals.append(prob.solve(real=real).primal_objective)
    assert abs(vals[0] - vals[1]) <= 1e-8
    assert abs(vals[0] - np.linalg.eigvalsh(C)[0]) <= 1e-7


def test_complex_problem_is_not_real(rng):
    prob = SdpProblem("max")
    rho = prob.psd(2)
    prob.add_eq(rho.trace(), 1.0)
    prob.set_objective(rho.inner(Y))
    assert not prob.is_real()
    sol = prob.solve()
    assert abs(sol.primal_objective - 1.0) <= 1e-6
    assert np.allclose(sol[rho], (np.eye(2) + Y) / 2, atol=1e-4)


def test_resolve_is_stable(rng):
    M = random_hermitian(4, rng)
    objs = []
    for tol in (1e-8, 1e-9):
        prob = SdpProblem("max")
        rho = prob.psd(4)
        prob.add_eq(rho.trace(), 1.0)
        prob.set_objective(rho.inner(M))
        objs.append(prob.solve(tol_gap=tol).primal_objective)
    assert abs(objs[0] - objs[1]) <= 10 * 1e-8


def test_partial_trace_expression():
    prob = SdpProblem("min")
    X = prob.psd(4)
    prob.add_eq(partial_trace(X, 2, 2, "A"), np.eye(2))
    prob.set_objective(X.inner(np.diag([1.0, 2.0, 3.0, 0.5])))
    sol = prob.solve()
    assert abs(sol.primal_objective - 1.5) <= 1e-6
    marginal = np.einsum("ibjb->ij", sol[X].reshape(2, 2, 2, 2))
    assert np.allclose(marginal, np.eye(2), atol=1e-6)


def test_kron_expression():
    prob = SdpProblem("max")
    rho = prob.psd(2)
    prob.add_eq(rho.trace(), 1.0)
    prob.set_objective(kron(rho, np.eye(2)).inner(np.diag([1.0, 0.0, 0.0, 4.0])))
    assert abs(prob.solve().primal_objective - 4.0) <= 1e-6


def test_dimension_errors():
    prob = SdpProblem("min")
    X = prob.psd(2)
    with pytest.raises(ValueError):
        prob.add_psd(X - np.eye(3))
    with pytest.raises(ValueError):
        prob.set_objective(X)
    other = SdpProblem("min").psd(2)
    prob.set_objective(other.trace())
    with pytest.raises(SolverError):
        prob.compile()


def test_standard_form_dump():
    prob = SdpProblem("min")
    X = prob.psd(2)
    prob.add_psd(X - np.eye(2))
    prob.set_objective(X.trace())
    sf = prob.compile()
    buf = io.StringIO()
    sf.dump(buf)
    assert buf.getvalue().startswith("nvar")
    assert sf.nvar == 3
