"""Independent reference values: Umegaki entropy, quadrature and brute force.

Nothing here touches the SDP layer, so these routines can validate it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.optimize

from .channels import ChoiMatrix, conjugated_output
from .linalg import (SUPPORT_RTOL, as_hermitian, eig_hermitian, positive_part_trace,
                     support_contains)
from .spectral import dmax

BOUNDARY_PULL = 1e-8
FD_STEP = 1e-5


@dataclass
class OracleReport:
    value: float
    witness: np.ndarray | None
    method: str
    iterations: int = 0
    converged: bool = True
    meta: dict = field(default_factory=dict)


def _xlogx_trace(w: np.ndarray) -> float:
    pos = w > 0
    return float(np.sum(w[pos] * np.log(w[pos])))


def umegaki(rho, sigma) -> float:
    """``tr[rho (ln rho - ln sigma)]`` in nats; ``+inf`` unless supp(rho) lies in supp(sigma)."""
    rho = as_hermitian(rho)
    sigma = as_hermitian(sigma)
    if not support_contains(sigma, rho):
        return math.inf
    wr = eig_hermitian(rho).eigenvalues
    ws, Vs = eig_hermitian(sigma)
    keep = ws > SUPPORT_RTOL * max(float(ws[-1]), np.finfo(float).tiny)
    Vk = Vs[:, keep]
    log_sigma = (Vk * np.log(ws[keep])) @ Vk.conj().T
    cross = float(np.real(np.trace(rho @ log_sigma)))
    return _xlogx_trace(np.clip(wr, 0.0, None)) - cross


def _generalized_eigenvalues(rho, sigma) -> np.ndarray:
    ws, Vs = eig_hermitian(sigma)
    keep = ws > SUPPORT_RTOL * max(float(ws[-1]), np.finfo(float).tiny)
    W = Vs[:, keep] / np.sqrt(ws[keep])
    return eig_hermitian(W.conj().T @ rho @ W).eigenvalues


def integral_quadrature(rho, sigma, rel_tol: float = 1e-10) -> float:
    """Relative entropy from its integral representation, by adaptive quadrature.

    ``tr[rho - sigma] + int_mu^lam tr^+[sigma s - rho] ds/s + tr[rho] ln lam
    + tr[sigma] (1 - lam)``, which reduces to the familiar constant
    ``ln lam + 1 - lam`` for unit-trace arguments.
    """
    rho = as_hermitian(rho)
    sigma = as_hermitian(sigma)
    ln_lam = dmax(rho, sigma)
    if ln_lam == math.inf:
        raise ValueError("rho is not dominated by a multiple of sigma; the divergence is +inf")
    lam = math.exp(ln_lam)
    back = dmax(sigma, rho)
    mu = min(math.exp(-back), lam) if math.isfinite(back) else 0.0
    tr_rho = float(np.trace(rho).real)
    tr_sigma = float(np.trace(sigma).real)

    def integrand(s):
        return positive_part_trace(s * sigma - rho) / s

    integral = 0.0
    epsabs = 1e-12 * max(1.0, tr_rho + tr_sigma)  # integrand carries eigenvalue round-off
    if lam > mu:
        kinks = _generalized_eigenvalues(rho, sigma)
        pts = np.unique(np.concatenate([[mu], kinks[(kinks > mu) & (kinks < lam)], [lam]]))
        for a, b in zip(pts[:-1], pts[1:]):
            if b - a <= 1e-12 * b:
                continue  # round-off sliver between a kink and an interval end
            # f is smooth between consecutive kinks
            val, _ = scipy.integrate.quad(integrand, a, b, epsabs=epsabs, epsrel=rel_tol, limit=200)
            integral += val
    return tr_rho - tr_sigma + integral + tr_rho * ln_lam + tr_sigma * (1.0 - lam)


def classical_kl_channel(P, Q) -> float:
    """Relative entropy of two classical channels given as row-stochastic matrices.

    The objective is linear in the input distribution, so the maximum sits on
    a point mass: the largest row-wise KL divergence.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape or P.ndim != 2:
        raise ValueError(f"P and Q must be matrices of equal shape, got {P.shape} and {Q.shape}")
    for name, M in (("P", P), ("Q", Q)):
        if np.any(M < -1e-12) or not np.allclose(M.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError(f"{name} is not row-stochastic")
    best = 0.0
    for p, q in zip(P, Q):
        if np.any((p > 0) & (q <= 0)):
            return math.inf
        m = p > 0
        best = max(best, float(np.sum(p[m] * np.log(p[m] / q[m]))))
    return best


def _state_from_params(theta: np.ndarray, d: int) -> np.ndarray:
    T = (theta[: d * d] + 1j * theta[d * d:]).reshape(d, d)
    P = T @ T.conj().T
    return P / np.trace(P).real


def pull_inside(rho, eps: float) -> np.ndarray:
    d = rho.shape[0]
    return (1.0 - eps) * rho + eps * np.eye(d) / d


def channel_objective(gN: ChoiMatrix, gM: ChoiMatrix, rhoA, pull: float = BOUNDARY_PULL) -> float:
    rho = pull_inside(as_hermitian(rhoA), pull) if pull > 0 else as_hermitian(rhoA)
    return umegaki(conjugated_output(gN, rho), conjugated_output(gM, rho))


def brute_force_channel_re(gN: ChoiMatrix, gM: ChoiMatrix, n_restarts: int = 6,
                           step: float = FD_STEP, max_iter: int = 500,
                           seed: int = 0) -> OracleReport:
    """Maximize ``rho -> D(rho^1/2 Gamma_N rho^1/2 || rho^1/2 Gamma_M rho^1/2)`` over states.

    States are parameterized as ``T T^dagger / tr`` with a complex ``T``, so
    every parameter vector is feasible. Gradients are central differences
    with relative step ``step``. The objective is concave in ``rho``; the
    best of several seeded restarts (the first from the maximally mixed
    state) is reported.
    """
    if (gN.dimA, gN.dimB) != (gM.dimA, gM.dimB):
        raise ValueError("channels act on different systems")
    if not math.isfinite(dmax(gN.op, gM.op)):
        raise ValueError("the divergence is +inf (support condition fails)")
    d = gN.dimA
    rng = np.random.default_rng(seed)

    def f(theta):
        return -channel_objective(gN, gM, _state_from_params(theta, d))

    def grad(theta):
        g = np.empty_like(theta)
        for i in range(theta.size):
            h = step * max(1.0, abs(theta[i]))
            e = np.zeros_like(theta)
            e[i] = h
            g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
        return g

    best = None
    total_iter = 0
    all_ok = True
    for k in range(n_restarts):
        if k == 0:
            theta0 = np.concatenate([np.eye(d).ravel(), np.zeros(d * d)])
        else:
            theta0 = rng.standard_normal(2 * d * d)
        out = scipy.optimize.minimize(f, theta0, jac=grad, method="BFGS",
                                      options={"maxiter": max_iter, "gtol": 1e-9})
        total_iter += int(out.nit)
        all_ok &= bool(out.success) or out.status == 2  # precision loss at the optimum is benign
        if best is None or out.fun < best.fun:
            best = out
    rho = pull_inside(_state_from_params(best.x, d), BOUNDARY_PULL)
    return OracleReport(-float(best.fun), rho, "brute_force", total_iter, all_ok,
                        {"restarts": n_restarts, "seed": seed})
