"""Dense Hermitian linear algebra kernels.

Operators are plain ``numpy`` arrays. Functions that need exact Hermiticity
normalize their inputs through :func:`as_hermitian`, which symmetrizes
``(M + M^dagger) / 2`` after checking that the input is square.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

SUPPORT_RTOL = 1e-9


class EigenError(np.linalg.LinAlgError):
    """Raised when the Hermitian eigensolver fails to converge."""


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_hermitian(M) -> np.ndarray:
    """Return ``M`` as a complex Hermitian array, symmetrized."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {M.shape}")
    return 0.5 * (M + M.conj().T)


def is_hermitian(M, atol: float = 1e-12) -> bool:
    M = np.asarray(M)
    return M.ndim == 2 and M.shape[0] == M.shape[1] and np.allclose(M, M.conj().T, atol=atol)


def eig_hermitian(M) -> EigenDecomposition:
    """Eigendecomposition with ascending eigenvalues."""
    H = as_hermitian(M)
    if not np.all(np.isfinite(H)):
        raise EigenError("matrix has non-finite entries")
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"Hermitian eigensolver failed on a {H.shape[0]}x{H.shape[0]} "
                         f"matrix (max |entry| = {np.abs(H).max():.3e}): {exc}") from exc
    return EigenDecomposition(w, V)


def eigvalsh(M) -> np.ndarray:
    return eig_hermitian(M).eigenvalues


def positive_part_trace(M) -> float:
    """Trace of the positive part of a Hermitian operator."""
    w = eigvalsh(M)
    return float(np.sum(w[w > 0]))


def kron(A, B) -> np.ndarray:
    return np.kron(np.asarray(A), np.asarray(B))


def _check_bipartite(M, dimA: int, dimB: int) -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape != (dimA * dimB, dimA * dimB):
        raise ValueError(f"operator of shape {M.shape} does not act on a "
                         f"{dimA}x{dimB} bipartite space")
    return M


def partial_trace(M, dimA: int, dimB: int, keep: str = "A") -> np.ndarray:
    """Reduced operator on subsystem ``keep`` of an operator on A (x) B."""
    M = _check_bipartite(M, dimA, dimB).reshape(dimA, dimB, dimA, dimB)
    if keep == "A":
        return np.einsum("ibjb->ij", M)
    if keep == "B":
        return np.einsum("aiaj->ij", M)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def partial_transpose(M, dimA: int, dimB: int, subsystem: str = "B") -> np.ndarray:
    M = _check_bipartite(M, dimA, dimB).reshape(dimA, dimB, dimA, dimB)
    if subsystem == "A":
        out = M.transpose(2, 1, 0, 3)
    elif subsystem == "B":
        out = M.transpose(0, 3, 2, 1)
    else:
        raise ValueError(f"subsystem must be 'A' or 'B', got {subsystem!r}")
    return out.reshape(dimA * dimB, dimA * dimB)


def _rank_threshold(w: np.ndarray, tol: float | None) -> float:
    if tol is not None:
        return tol
    return SUPPORT_RTOL * max(float(np.max(np.abs(w))), np.finfo(float).tiny)


def support_projector(A, tol: float | None = None) -> np.ndarray:
    """Orthogonal projector onto the span of eigenvectors with eigenvalue > tol.

    The default threshold is ``1e-9`` times the spectral radius.
    """
    w, V = eig_hermitian(A)
    keep = w > _rank_threshold(w, tol)
    Vk = V[:, keep]
    return Vk @ Vk.conj().T


def _require_psd(M: np.ndarray, name: str, tol: float | None = None) -> np.ndarray:
    w = eigvalsh(M)
    thr = _rank_threshold(w, tol) if tol is None else tol
    if w[0] < -max(thr, 1e-12):
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    return w


def pinv_sqrt(M, tol: float | None = None) -> np.ndarray:
    """Pseudo-inverse square root: eigenvalues above tol map to ``l**-0.5``, others to 0."""
    w, V = eig_hermitian(M)
    thr = _rank_threshold(w, tol)
    if w[0] < -max(thr, 1e-12):
        raise ValueError(f"matrix has a significantly negative eigenvalue {w[0]:.3e}")
    inv = np.zeros_like(w)
    pos = w > thr
    inv[pos] = w[pos] ** -0.5
    return (V * inv) @ V.conj().T


def psd_sqrt(M) -> np.ndarray:
    w, V = eig_hermitian(M)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def support_contains(A, B, tol: float | None = None) -> bool:
    """True iff ker(A) is contained in ker(B), i.e. supp(B) lies inside supp(A).

    Tested as ``||(1 - P_A) B (1 - P_A)|| <= tol`` with ``P_A`` the support
    projector of ``A``. The default tolerance is ``1e-9`` times the largest
    eigenvalue of ``B``.
    """
    A = as_hermitian(A)
    B = as_hermitian(B)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    _require_psd(A, "A")
    wB = _require_psd(B, "B")
    comp = np.eye(A.shape[0]) - support_projector(A)
    resid = np.linalg.norm(comp @ B @ comp, 2)
    thr = tol if tol is not None else SUPPORT_RTOL * max(float(wB[-1]), np.finfo(float).tiny)
    return bool(resid <= thr)


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    X = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (X + X.conj().T)


def random_psd(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    X = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    return X @ X.conj().T


def random_state(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    P = random_psd(dim, rng, rank)
    return P / np.trace(P).real


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    X = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(X)
    return Q * (np.diag(R) / np.abs(np.diag(R)))
