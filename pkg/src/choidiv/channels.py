"""Channels as Kraus families and Choi matrices, plus a few standard families.

The Choi matrix follows the unnormalized convention
``Gamma = sum_ij |i><j| (x) N(|i><j|)`` on A (x) B, so a trace-preserving
map has ``tr_B Gamma = 1_A`` and ``tr Gamma = dimA``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .linalg import as_hermitian, eigvalsh, partial_trace, psd_sqrt

CP_TOL = 1e-9


class ChannelError(ValueError):
    """Invalid channel data (dimensions, positivity, normalization)."""


@dataclass(frozen=True)
class KrausChannel:
    dimA: int
    dimB: int
    kraus_ops: tuple
    trace_preserving: bool = True

    def __post_init__(self):
        ops = tuple(np.asarray(K, dtype=complex) for K in self.kraus_ops)
        if not ops:
            raise ChannelError("a Kraus channel needs at least one operator")
        for i, K in enumerate(ops):
            if K.shape != (self.dimB, self.dimA):
                raise ChannelError(f"Kraus operator {i} has shape {K.shape}, "
                                   f"expected {(self.dimB, self.dimA)}")
        object.__setattr__(self, "kraus_ops", ops)
        S = sum(K.conj().T @ K for K in ops)
        if self.trace_preserving:
            err = np.abs(S - np.eye(self.dimA)).max()
            if err > CP_TOL:
                raise ChannelError(f"Kraus operators are not trace preserving (error {err:.2e})")
        elif eigvalsh(np.eye(self.dimA) - S)[0] < -CP_TOL:
            raise ChannelError("Kraus operators are not trace non-increasing")

    def apply(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return sum(K @ rho @ K.conj().T for K in self.kraus_ops)


@dataclass(frozen=True)
class ChoiMatrix:
    dimA: int
    dimB: int
    op: np.ndarray = field(repr=False)
    trace_preserving: bool = True

    def __post_init__(self):
        op = as_hermitian(self.op)
        n = self.dimA * self.dimB
        if op.shape != (n, n):
            raise ChannelError(f"Choi matrix has shape {op.shape}, expected {(n, n)}")
        scale = max(1.0, float(np.abs(op).max()))
        # round-off imaginary parts would otherwise block real-arithmetic solves
        op = op.real + 1j * np.where(np.abs(op.imag) > 1e-15 * scale, op.imag, 0.0)
        if eigvalsh(op)[0] < -CP_TOL * scale:
            raise ChannelError("Choi matrix is not positive semidefinite (map is not CP)")
        if self.trace_preserving:
            err = np.abs(partial_trace(op, self.dimA, self.dimB, keep="A") - np.eye(self.dimA)).max()
            if err > CP_TOL * scale:
                raise ChannelError(f"Choi matrix is not trace preserving (error {err:.2e})")
        op.setflags(write=False)
        object.__setattr__(self, "op", op)

    @property
    def dim(self) -> int:
        return self.dimA * self.dimB

    def is_real(self, atol: float = 1e-14) -> bool:
        return bool(np.abs(self.op.imag).max() <= atol)


def choi_from_kraus(ch: KrausChannel) -> ChoiMatrix:
    # (1 (x) K)|Gamma> has entries K[b, a] at index (a, b)
    vecs = [K.T.reshape(-1) for K in ch.kraus_ops]
    op = sum(np.outer(v, v.conj()) for v in vecs)
    return ChoiMatrix(ch.dimA, ch.dimB, op, ch.trace_preserving)


def apply_channel(choi: ChoiMatrix, rho) -> np.ndarray:
    """Channel output ``tr_A[(rho^T (x) 1_B) Gamma]``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (choi.dimA, choi.dimA):
        raise ChannelError(f"input has shape {rho.shape}, channel expects dimA={choi.dimA}")
    X = np.kron(rho.T, np.eye(choi.dimB)) @ choi.op
    return partial_trace(X, choi.dimA, choi.dimB, keep="B")


def conjugate_by_input(op, rhoA, dimA: int, dimB: int) -> np.ndarray:
    """``(rhoA^1/2 (x) 1) op (rhoA^1/2 (x) 1)`` for an operator on A (x) B."""
    rhoA = as_hermitian(rhoA)
    if rhoA.shape != (dimA, dimA):
        raise ChannelError(f"rhoA has shape {rhoA.shape}, expected {(dimA, dimA)}")
    w = eigvalsh(rhoA)
    if w[0] < -1e-9 * max(1.0, w[-1]):
        raise ValueError(f"rhoA is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    R = np.kron(psd_sqrt(rhoA), np.eye(dimB))
    return as_hermitian(R @ np.asarray(op) @ R)


def conjugated_output(choi: ChoiMatrix, rhoA) -> np.ndarray:
    return conjugate_by_input(choi.op, rhoA, choi.dimA, choi.dimB)


# ---------------------------------------------------------------------------
# builtin families
# ---------------------------------------------------------------------------

def _check_prob(name: str, p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ChannelError(f"{name} parameter must lie in [0, 1], got {p}")
    return p


def weyl_operators(d: int) -> list[np.ndarray]:
    """Clock-and-shift unitaries ``X^a Z^b``; the (0, 0) element is the identity."""
    omega = np.exp(2j * np.pi / d)
    X = np.roll(np.eye(d), 1, axis=0)
    Z = np.diag(omega ** np.arange(d))
    return [np.linalg.matrix_power(X, a) @ np.linalg.matrix_power(Z, b)
            for a in range(d) for b in range(d)]


def identity(d: int = 2) -> KrausChannel:
    return KrausChannel(d, d, (np.eye(d),))


def depolarizing(p: float, d: int = 2) -> KrausChannel:
    """``rho -> (1 - p) rho + p tr(rho) 1/d``."""
    p = _check_prob("depolarizing", p)
    W = weyl_operators(d)
    ops = [np.sqrt(1 - p + p / d**2) * W[0]]
    if p > 0:
        ops += [np.sqrt(p) / d * U for U in W[1:]]
    return KrausChannel(d, d, tuple(ops))


def dephasing(p: float, d: int = 2) -> KrausChannel:
    """``rho -> (1 - p) rho + p diag(rho)``: off-diagonals scaled by ``1 - p``."""
    p = _check_prob("dephasing", p)
    Z = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    ops = [np.sqrt(1 - p + p / d) * np.eye(d)]
    if p > 0:
        ops += [np.sqrt(p / d) * np.linalg.matrix_power(Z, b) for b in range(1, d)]
    if d == 2:
        ops = [K.real.astype(complex) for K in ops]
    return KrausChannel(d, d, tuple(ops))


def amplitude_damping(g: float) -> KrausChannel:
    g = _check_prob("amplitude_damping", g)
    K0 = np.array([[1, 0], [0, np.sqrt(1 - g)]])
    K1 = np.array([[0, np.sqrt(g)], [0, 0]])
    return KrausChannel(2, 2, (K0, K1))


def replacer(sigma, dimA: int = 2) -> KrausChannel:
    """``omega -> tr(omega) sigma``."""
    sigma = as_hermitian(sigma)
    w, V = np.linalg.eigh(sigma)
    if w[0] < -CP_TOL or abs(w.sum() - 1) > CP_TOL:
        raise ChannelError("replacer output must be a density matrix")
    dimB = sigma.shape[0]
    ops = []
    for j in range(dimB):
        if w[j] <= 0:
            continue
        for i in range(dimA):
            K = np.zeros((dimB, dimA), dtype=complex)
            K[:, i] = np.sqrt(w[j]) * V[:, j]
            ops.append(K)
    return KrausChannel(dimA, dimB, tuple(ops))


def custom(ops: Sequence, trace_preserving: bool = True) -> KrausChannel:
    ops = [np.asarray(K, dtype=complex) for K in ops]
    if not ops:
        raise ChannelError("custom channel needs at least one Kraus operator")
    dimB, dimA = ops[0].shape
    return KrausChannel(dimA, dimB, tuple(ops), trace_preserving)


def classical_channel(P) -> ChoiMatrix:
    """Diagonal Choi matrix of the measure-and-prepare channel with transition matrix P[x, y]."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or np.any(P < -CP_TOL) or np.abs(P.sum(axis=1) - 1).max() > CP_TOL:
        raise ChannelError("transition matrix must be row-stochastic")
    dimA, dimB = P.shape
    return ChoiMatrix(dimA, dimB, np.diag(P.reshape(-1)).astype(complex))


BUILTIN = {
    "identity": identity,
    "depolarizing": depolarizing,
    "dephasing": dephasing,
    "amplitude_damping": amplitude_damping,
    "replacer": replacer,
    "custom": custom,
}


def builtin(name: str, *args, **kwargs) -> KrausChannel:
    try:
        factory = BUILTIN[name]
    except KeyError:
        raise ChannelError(f"unknown builtin channel {name!r}; "
                           f"choose from {sorted(BUILTIN)}") from None
    return factory(*args, **kwargs)


# ---------------------------------------------------------------------------
# JSON channel specs
# ---------------------------------------------------------------------------

def encode_matrix(M) -> list:
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def decode_matrix(data, where: str = "matrix") -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ChannelError(f"{where}: entries must be [re, im] number pairs") from exc
    if arr.ndim == 2:
        return arr.astype(complex)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ChannelError(f"{where}: expected a row-major matrix of [re, im] pairs, "
                           f"got array of shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def channel_to_json(ch: KrausChannel | ChoiMatrix) -> dict:
    if isinstance(ch, KrausChannel):
        out = {"dimA": ch.dimA, "dimB": ch.dimB, "kind": "kraus",
               "ops": [encode_matrix(K) for K in ch.kraus_ops]}
    else:
        out = {"dimA": ch.dimA, "dimB": ch.dimB, "kind": "choi", "matrix": encode_matrix(ch.op)}
    if not ch.trace_preserving:
        out["trace_preserving"] = False
    return out


def channel_from_json(spec: dict) -> ChoiMatrix:
    """Parse a channel spec (``kind`` = ``kraus`` or ``choi``) into a Choi matrix."""
    if not isinstance(spec, dict):
        raise ChannelError("channel spec must be a JSON object")
    kind = spec.get("kind")
    tp = bool(spec.get("trace_preserving", True))
    if kind == "kraus":
        if "ops" not in spec:
            raise ChannelError("field 'ops': missing for kind 'kraus'")
        ops = [decode_matrix(K, f"ops[{i}]") for i, K in enumerate(spec["ops"])]
        if not ops:
            raise ChannelError("field 'ops': empty Kraus list")
        dimB, dimA = ops[0].shape
        dimA = int(spec.get("dimA", dimA))
        dimB = int(spec.get("dimB", dimB))
        return choi_from_kraus(KrausChannel(dimA, dimB, tuple(ops), tp))
    if kind == "choi":
        if "matrix" not in spec:
            raise ChannelError("field 'matrix': missing for kind 'choi'")
        M = decode_matrix(spec["matrix"], "matrix")
        for key in ("dimA", "dimB"):
            if key not in spec:
                raise ChannelError(f"field '{key}': required for kind 'choi'")
        return ChoiMatrix(int(spec["dimA"]), int(spec["dimB"]), M, tp)
    raise ChannelError(f"field 'kind': expected 'kraus' or 'choi', got {kind!r}")


def load_channel(path) -> ChoiMatrix:
    text = Path(path).read_text()
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChannelError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return channel_from_json(spec)
    except ChannelError as exc:
        raise ChannelError(f"{path}: {exc}") from exc
