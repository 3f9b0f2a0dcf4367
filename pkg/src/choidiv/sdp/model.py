"""Affine Hermitian-matrix expressions and block-structured SDP models.

Every expression is a Hermitian-matrix valued affine function of the
problem variables; scalars are 1x1 expressions. A Hermitian variable of
size ``d`` is parameterized by ``d**2`` real numbers (diagonal entries,
real and imaginary parts of the upper triangle) and each term of an
expression stores the matrix image of every parameter.
"""

from __future__ import annotations

import itertools
from typing import Callable

import numpy as np

_ids = itertools.count()


def hermitian_basis(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Real basis of d x d Hermitian matrices and a mask of the real-symmetric elements."""
    mats = []
    real = []
    for i in range(d):
        E = np.zeros((d, d), dtype=complex)
        E[i, i] = 1
        mats.append(E)
        real.append(True)
    for i in range(d):
        for j in range(i + 1, d):
            E = np.zeros((d, d), dtype=complex)
            E[i, j] = E[j, i] = 1
            mats.append(E)
            real.append(True)
            F = np.zeros((d, d), dtype=complex)
            F[i, j] = 1j
            F[j, i] = -1j
            mats.append(F)
            real.append(False)
    return np.array(mats), np.array(real)


class Affine:
    """``const + sum_v sum_a x[v, a] * terms[v][a]`` with Hermitian images."""

    __array_ufunc__ = None  # make ``ndarray * Affine`` defer to __rmul__

    def __init__(self, n: int, const=None, terms: dict | None = None):
        self.n = n
        self.const = (np.zeros((n, n), dtype=complex) if const is None
                      else np.asarray(const, dtype=complex))
        self.terms = terms or {}

    @classmethod
    def constant(cls, M) -> Affine:
        M = np.atleast_2d(np.asarray(M, dtype=complex))
        return cls(M.shape[0], M)

    @property
    def is_scalar(self) -> bool:
        return self.n == 1

    def _coerce(self, other) -> Affine:
        if isinstance(other, Affine):
            out = other
        elif isinstance(other, Variable):
            out = other.expr
        else:
            arr = np.asarray(other, dtype=complex)
            if arr.ndim == 0:
                if arr == 0:
                    return Affine(self.n)
                if self.n != 1:
                    raise ValueError("cannot add a number to a matrix expression; "
                                     "multiply by an identity matrix instead")
                arr = arr.reshape(1, 1)
            out = Affine.constant(arr)
        if out.n != self.n:
            raise ValueError(f"size mismatch: {self.n} vs {out.n}")
        return out

    def __add__(self, other) -> Affine:
        other = self._coerce(other)
        terms = dict(self.terms)
        for v, img in other.terms.items():
            terms[v] = terms[v] + img if v in terms else img
        return Affine(self.n, self.const + other.const, terms)

    __radd__ = __add__

    def __neg__(self) -> Affine:
        return Affine(self.n, -self.const, {v: -img for v, img in self.terms.items()})

    def __sub__(self, other) -> Affine:
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> Affine:
        return self._coerce(other) - self

    def __mul__(self, other) -> Affine:
        arr = np.asarray(other)
        if arr.ndim == 0:
            a = float(np.real(arr))
            if np.imag(arr) != 0:
                raise ValueError("only real scaling keeps an expression Hermitian")
            return Affine(self.n, a * self.const, {v: a * img for v, img in self.terms.items()})
        if not self.is_scalar:
            raise ValueError("matrix-by-expression products need a scalar (1x1) expression")
        M = np.asarray(arr, dtype=complex)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.allclose(M, M.conj().T, atol=1e-12):
            raise ValueError("a scalar expression can only scale a Hermitian matrix")
        return Affine(M.shape[0], self.const[0, 0].real * M,
                      {v: img[:, 0, 0].real[:, None, None] * M for v, img in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, a: float) -> Affine:
        return self * (1.0 / a)

    def map(self, f: Callable[[np.ndarray], np.ndarray]) -> Affine:
        """Apply a linear Hermiticity-preserving map acting on stacks ``(..., n, n)``."""
        const = f(self.const[None])[0]
        return Affine(const.shape[0], const, {v: f(img) for v, img in self.terms.items()})

    def trace(self) -> Affine:
        return self.map(lambda X: np.trace(X, axis1=-2, axis2=-1)[..., None, None])

    def inner(self, C) -> Affine:
        """Scalar expression ``tr[C X]`` for a constant Hermitian ``C``."""
        C = np.asarray(C, dtype=complex)
        return self.map(lambda X: np.einsum("ij,...ji->...", C, X)[..., None, None])

    def value(self, values: dict) -> np.ndarray:
        out = self.const.copy()
        for v, img in self.terms.items():
            out += np.tensordot(values[v], img, axes=1)
        return out


class Variable:
    """A Hermitian matrix variable (``dim >= 1``) or a real scalar variable."""

    __array_ufunc__ = None

    def __init__(self, dim: int, name: str | None = None, scalar: bool = False):
        if dim < 1:
            raise ValueError("variable dimension must be >= 1")
        self.id = next(_ids)
        self.dim = dim
        self.scalar = scalar
        self.name = name or f"v{self.id}"
        if scalar:
            self.basis = np.ones((1, 1, 1), dtype=complex)
            self.real_mask = np.array([True])
        else:
            self.basis, self.real_mask = hermitian_basis(dim)

    def __repr__(self) -> str:
        kind = "scalar" if self.scalar else f"hermitian({self.dim})"
        return f"Variable({self.name}, {kind})"

    def __hash__(self) -> int:
        return self.id

    def __eq__(self, other) -> bool:
        return self is other

    @property
    def nparams(self) -> int:
        return self.basis.shape[0]

    @property
    def expr(self) -> Affine:
        return Affine(self.dim, None, {self: self.basis})

    def from_params(self, params: np.ndarray):
        M = np.tensordot(params, self.basis, axes=1)
        return float(M[0, 0].real) if self.scalar else M

    # expression arithmetic delegates to the identity expression
    def __add__(self, o): return self.expr + o
    def __radd__(self, o): return self.expr + o
    def __sub__(self, o): return self.expr - o
    def __rsub__(self, o): return o - self.expr
    def __neg__(self): return -self.expr
    def __mul__(self, o): return self.expr * o
    def __rmul__(self, o): return self.expr * o
    def __truediv__(self, a): return self.expr / a

    def trace(self) -> Affine:
        return self.expr.trace()

    def inner(self, C) -> Affine:
        return self.expr.inner(C)


def as_expr(x) -> Affine:
    if isinstance(x, Affine):
        return x
    if isinstance(x, Variable):
        return x.expr
    return Affine.constant(x)


def kron(left, right) -> Affine:
    """Kronecker product where exactly one factor is a constant matrix."""
    if isinstance(left, (Affine, Variable)):
        M = np.asarray(right, dtype=complex)
        m = M.shape[0]
        return as_expr(left).map(
            lambda X: np.einsum("...ij,ab->...iajb", X, M).reshape(X.shape[:-2] + (X.shape[-1] * m,) * 2))
    M = np.asarray(left, dtype=complex)
    m = M.shape[0]
    return as_expr(right).map(
        lambda X: np.einsum("ab,...ij->...aibj", M, X).reshape(X.shape[:-2] + (X.shape[-1] * m,) * 2))


def partial_trace(expr, dimA: int, dimB: int, keep: str = "A") -> Affine:
    expr = as_expr(expr)
    if expr.n != dimA * dimB:
        raise ValueError(f"expression of size {expr.n} is not on a {dimA}x{dimB} system")

    def f(X):
        Y = X.reshape(X.shape[:-2] + (dimA, dimB, dimA, dimB))
        if keep == "A":
            return np.einsum("...ibjb->...ij", Y)
        return np.einsum("...aiaj->...ij", Y)

    if keep not in ("A", "B"):
        raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")
    return expr.map(f)


def partial_transpose(expr, dimA: int, dimB: int, subsystem: str = "B") -> Affine:
    expr = as_expr(expr)
    if expr.n != dimA * dimB:
        raise ValueError(f"expression of size {expr.n} is not on a {dimA}x{dimB} system")
    axes = {"A": (2, 1, 0, 3), "B": (0, 3, 2, 1)}[subsystem]

    def f(X):
        lead = X.shape[:-2]
        Y = X.reshape(lead + (dimA, dimB, dimA, dimB))
        k = len(lead)
        Y = Y.transpose(tuple(range(k)) + tuple(k + a for a in axes))
        return Y.reshape(lead + (dimA * dimB,) * 2)

    return expr.map(f)
