"""Max-relative entropy and the operator interval of a channel pair.

``ln lambda = Dmax(Gamma_N || Gamma_M)`` and ``-ln mu = Dmax(Gamma_M || Gamma_N)``
are computed on the Choi matrices directly: conjugating both operators by
an invertible ``rhoA^1/2 (x) 1`` preserves the operator order, so the pair
brackets every conjugated pair ``mu sigma <= rho <= lambda sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import ChoiMatrix
from .linalg import SUPPORT_RTOL, as_hermitian, eig_hermitian, support_contains


@dataclass(frozen=True)
class IntervalBounds:
    lnLambda: float
    lam: float
    mu: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.lam)

    @property
    def degenerate(self) -> bool:
        return self.finite and math.isclose(self.lam, self.mu, rel_tol=1e-10, abs_tol=0.0)


def _check_psd(M: np.ndarray, name: str) -> None:
    w = eig_hermitian(M).eigenvalues
    if w[0] < -SUPPORT_RTOL * max(1.0, abs(w[-1])):
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")


def _support_basis(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, V = eig_hermitian(B)
    keep = w > SUPPORT_RTOL * max(float(w[-1]), np.finfo(float).tiny)
    return w[keep], V[:, keep]


def dmax(A, B, tol: float | None = None) -> float:
    """``ln min{g : A <= g B}``; ``+inf`` when supp(A) is not inside supp(B).

    Returns ``-inf`` for ``A = 0``.
    """
    A = as_hermitian(A)
    B = as_hermitian(B)
    _check_psd(A, "A")
    _check_psd(B, "B")
    if not support_contains(B, A, tol):
        return math.inf
    b, V = _support_basis(B)
    if b.size == 0:
        return -math.inf
    Bm = (V / np.sqrt(b)).conj().T  # B^{-1/2} restricted to supp(B), as a map into R^k
    top = float(eig_hermitian(Bm @ A @ Bm.conj().T).eigenvalues[-1])
    if top <= 0:
        return -math.inf
    return math.log(top)


def interval_for_pair(gN: ChoiMatrix, gM: ChoiMatrix) -> IntervalBounds:
    if (gN.dimA, gN.dimB) != (gM.dimA, gM.dimB):
        raise ValueError("channels act on different systems")
    ln_lam = dmax(gN.op, gM.op)
    if not math.isfinite(ln_lam):
        if ln_lam > 0:
            return IntervalBounds(math.inf, math.inf, 0.0)
        raise ValueError("first Choi matrix vanishes; the divergence is trivially 0")
    back = dmax(gM.op, gN.op)
    mu = math.exp(-back) if math.isfinite(back) else 0.0
    lam = math.exp(ln_lam)
    # round-off can push mu above lam for proportional pairs
    mu = min(mu, lam)
    return IntervalBounds(ln_lam, lam, mu)


def dmax_sdp(A, B, **solver_opts) -> float:
    """Same quantity as :func:`dmax`, obtained by solving ``min g s.t. g B - A >= 0``.

    The program is posed on the support of ``B`` (after the support test) so
    that it has a strictly feasible point.
    """
    from .sdp import SdpProblem

    A = as_hermitian(A)
    B = as_hermitian(B)
    _check_psd(A, "A")
    _check_psd(B, "B")
    if not support_contains(B, A):
        return math.inf
    b, V = _support_basis(B)
    if b.size == 0:
        return -math.inf
    Ar = V.conj().T @ A @ V
    Br = np.diag(b).astype(complex)
    prob = SdpProblem("min")
    g = prob.scalar("gamma")
    prob.add_psd(g * Br - Ar)
    prob.set_objective(g)
    sol = prob.solve(**solver_opts)
    sol.raise_for_status()
    val = sol.primal_objective
    if val <= 0:
        return -math.inf
    return math.log(val)
