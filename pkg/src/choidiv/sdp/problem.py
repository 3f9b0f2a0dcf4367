"""SDP problem container, compilation to standard conic form, and solutions.

Compiled form (all real)::

    minimize    c'x + c0
    subject to  G_j(x) + s_j = h_j,   s_j in S^{m_j}_+   (one block per LMI)
                A x = b

where ``x`` is free. Writing ``(x, s)`` as the unknown, this is the
standard form ``min <c, x>`` s.t. linear equalities, ``x`` in free space and
``s`` in a product of PSD cones; scalar inequalities are 1x1 PSD blocks,
i.e. the nonnegative orthant.

A complex Hermitian n x n block is represented in a real 2n x 2n cone via
``X -> [[Re X, -Im X], [Im X, Re X]]``. The embedding doubles every
eigenvalue's multiplicity, and ``<emb A, emb B> = 2 Re tr[A B]``, so trace
functionals read off embedded blocks are halved (see
:func:`embedded_trace`). When every coefficient of the problem is real the
imaginary parameters are dropped and blocks stay n x n.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .model import Affine, Variable, as_expr


class SolverError(RuntimeError):
    """Raised for malformed problems or when a caller requires an optimal solve."""

    def __init__(self, msg: str, solution: "SdpSolution | None" = None):
        super().__init__(msg)
        self.solution = solution


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITER = "max_iter"
    NUMERICAL_FAILURE = "numerical_failure"


def embed_hermitian(X) -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    R, I = X.real, X.imag
    return np.block([[R, -I], [I, R]])


def embed_stack(X: np.ndarray) -> np.ndarray:
    R, I = X.real, X.imag
    top = np.concatenate([R, -I], axis=-1)
    bot = np.concatenate([I, R], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def unembed(Y: np.ndarray) -> np.ndarray:
    """Inverse of :func:`embed_hermitian` after projecting onto embedded matrices."""
    n = Y.shape[0] // 2
    A, B, C, D = Y[:n, :n], Y[:n, n:], Y[n:, :n], Y[n:, n:]
    return 0.5 * (A + D) + 0.5j * (C - B)


def embedded_trace(Y: np.ndarray) -> float:
    """``tr X`` recovered from an embedded block ``Y = emb X``."""
    return 0.5 * float(np.trace(Y))


@dataclass
class ConeBlock:
    size: int
    idx: np.ndarray       # columns of x entering this block
    G: np.ndarray         # (len(idx), size, size)
    h: np.ndarray         # (size, size)
    constraint: int       # index into SdpProblem.constraints


@dataclass
class StandardForm:
    nvar: int
    c: np.ndarray
    c0: float
    sign: float                       # +1 for min, -1 for max (c holds the min-form objective)
    blocks: list[ConeBlock]
    A: np.ndarray
    b: np.ndarray
    columns: dict                     # Variable -> (column slice, kept complex-parameter indices)
    real: bool
    eq_rows: list = field(default_factory=list)   # constraint index per equality row

    @property
    def degree(self) -> int:
        return int(sum(b.size for b in self.blocks))

    def dump(self, stream=None) -> str:
        """Text dump of the compiled form for cross-checking with external solvers.

        Format, one record per line::

            nvar <n> neq <m> nblocks <k> real <0|1> sign <+1|-1> c0 <float>
            c <j> <value>                        (nonzero objective entries)
            A <row> <col> <value>                (nonzero equality entries)
            b <row> <value>
            block <k> size <m>                   (LMI h_k - sum_j x_j G_kj >= 0)
            G <k> <col> <i> <j> <value>          (upper triangle, i <= j)
            h <k> <i> <j> <value>
        """
        out = io.StringIO() if stream is None else stream
        w = out.write
        w(f"nvar {self.nvar} neq {self.A.shape[0]} nblocks {len(self.blocks)} "
          f"real {int(self.real)} sign {int(self.sign):+d} c0 {self.c0!r}\n")
        for j in np.flatnonzero(self.c):
            w(f"c {j} {self.c[j]!r}\n")
        for i, j in zip(*np.nonzero(self.A)):
            w(f"A {i} {j} {self.A[i, j]!r}\n")
        for i, v in enumerate(self.b):
            w(f"b {i} {v!r}\n")
        for k, blk in enumerate(self.blocks):
            w(f"block {k} size {blk.size}\n")
            iu = np.triu_indices(blk.size)
            for col, Gm in zip(blk.idx, blk.G):
                for i, j in zip(*iu):
                    if Gm[i, j] != 0:
                        w(f"G {k} {col} {i} {j} {Gm[i, j]!r}\n")
            for i, j in zip(*iu):
                if blk.h[i, j] != 0:
                    w(f"h {k} {i} {j} {blk.h[i, j]!r}\n")
        return out.getvalue() if stream is None else ""


@dataclass
class SdpSolution:
    status: Status
    primal_objective: float
    dual_objective: float
    values: dict
    residuals: dict
    iterations: int
    duals: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def __getitem__(self, var: Variable):
        return self.values[var]

    def value(self, expr) -> np.ndarray:
        return as_expr(expr).value({v: self._params[v] for v in self._params})

    def raise_for_status(self) -> "SdpSolution":
        if not self.optimal:
            r = self.residuals
            raise SolverError(
                f"SDP solve ended with status {self.status.value} after {self.iterations} "
                f"iterations (primal residual {r.get('primal_feas', np.nan):.2e}, dual residual "
                f"{r.get('dual_feas', np.nan):.2e}, relative gap {r.get('rel_gap', np.nan):.2e})",
                self)
        return self


@dataclass
class _Constraint:
    kind: str           # "psd" or "eq"
    expr: Affine
    name: str


class SdpProblem:
    """Block-structured SDP over Hermitian and scalar variables.

    >>> prob = SdpProblem("min")
    >>> X = prob.psd(2)
    >>> prob.add_psd(X - np.eye(2))
    >>> prob.set_objective(X.trace())
    >>> round(prob.solve().primal_objective, 6)
    2.0
    """

    def __init__(self, sense: str = "min"):
        if sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
        self.sense = sense
        self.variables: list[Variable] = []
        self.constraints: list[_Constraint] = []
        self.objective = Affine(1)

    # -- variables ---------------------------------------------------------
    def variable(self, dim: int, name: str | None = None) -> Variable:
        """Free Hermitian block."""
        v = Variable(dim, name)
        self.variables.append(v)
        return v

    def psd(self, dim: int, name: str | None = None) -> Variable:
        v = self.variable(dim, name)
        self.add_psd(v, name=f"{v.name} >= 0")
        return v

    def scalar(self, name: str | None = None, nonneg: bool = False) -> Variable:
        v = Variable(1, name, scalar=True)
        self.variables.append(v)
        if nonneg:
            self.add_psd(v, name=f"{v.name} >= 0")
        return v

    # -- constraints -------------------------------------------------------
    def add_psd(self, expr, name: str | None = None) -> int:
        """Constrain ``expr >= 0`` in the PSD order (``expr`` Hermitian)."""
        expr = as_expr(expr)
        self._check_hermitian(expr)
        self.constraints.append(_Constraint("psd", expr, name or f"lmi{len(self.constraints)}"))
        return len(self.constraints) - 1

    def add_ge(self, lhs, rhs=0.0, name: str | None = None) -> int:
        return self.add_psd(as_expr(lhs) - rhs, name)

    def add_le(self, lhs, rhs, name: str | None = None) -> int:
        return self.add_psd(as_expr(rhs) - lhs, name)

    def add_eq(self, lhs, rhs=0.0, name: str | None = None) -> int:
        expr = as_expr(lhs) - rhs
        self._check_hermitian(expr)
        self.constraints.append(_Constraint("eq", expr, name or f"eq{len(self.constraints)}"))
        return len(self.constraints) - 1

    def add_box(self, X, upper, name: str | None = None) -> tuple[int, int]:
        """``0 <= X <= upper``."""
        name = name or "box"
        return (self.add_psd(X, f"{name}:lower"),
                self.add_psd(as_expr(upper) - X, f"{name}:upper"))

    def set_objective(self, expr, sense: str | None = None) -> None:
        expr = as_expr(expr)
        if expr.n != 1:
            raise ValueError("objective must be a scalar expression")
        if sense is not None:
            if sense not in ("min", "max"):
                raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
            self.sense = sense
        self.objective = expr

    @staticmethod
    def _check_hermitian(expr: Affine) -> None:
        for v, img in expr.terms.items():
            if img.shape[1:] != (expr.n, expr.n):
                raise SolverError(f"coefficient of {v} has shape {img.shape[1:]}, "
                                  f"expected {(expr.n, expr.n)}")
        if not np.allclose(expr.const, expr.const.conj().T, atol=1e-10):
            raise SolverError("constraint constant is not Hermitian")

    # -- compile / solve ---------------------------------------------------
    def _all_exprs(self):
        yield self.objective
        for con in self.constraints:
            yield con.expr

    def is_real(self, atol: float = 1e-13) -> bool:
        """True when a real-symmetric restriction of the variables loses nothing.

        Requires real constants, real images for real parameters and purely
        imaginary images for imaginary ones in every expression.
        """
        for e in self._all_exprs():
            if np.abs(e.const.imag).max(initial=0) > atol:
                return False
            for v, img in e.terms.items():
                m = v.real_mask
                if np.abs(img[m].imag).max(initial=0) > atol:
                    return False
                if np.abs(img[~m].real).max(initial=0) > atol:
                    return False
        return True

    def compile(self, real: bool | None = None) -> StandardForm:
        if real is None:
            real = self.is_real()
        columns = {}
        start = 0
        for v in self.variables:
            keep = np.flatnonzero(v.real_mask) if real else np.arange(v.nparams)
            columns[v] = (slice(start, start + keep.size), keep)
            start += keep.size
        nvar = start
        for e in self._all_exprs():
            for v in e.terms:
                if v not in columns:
                    raise SolverError(f"{v} is used but was not created by this problem")

        sign = 1.0 if self.sense == "min" else -1.0
        c = np.zeros(nvar)
        for v, img in self.objective.terms.items():
            sl, keep = columns[v]
            coeff = img[keep, 0, 0]
            c[sl] = sign * (coeff.real if real else coeff.real + coeff.imag)
        # imaginary images of a scalar objective are zero for Hermitian data
        c0 = sign * float(self.objective.const[0, 0].real)

        blocks = []
        eq_rows_A, eq_b, eq_owner = [], [], []
        for ci, con in enumerate(self.constraints):
            e = con.expr
            idx_parts, G_parts = [], []
            for v, img in e.terms.items():
                sl, keep = columns[v]
                sub = img[keep]
                if not np.any(sub):
                    continue
                idx_parts.append(np.arange(sl.start, sl.stop))
                G_parts.append(sub)
            idx = np.concatenate(idx_parts) if idx_parts else np.zeros(0, dtype=int)
            F = np.concatenate(G_parts) if G_parts else np.zeros((0, e.n, e.n), dtype=complex)
            if con.kind == "psd":
                if real:
                    Gr, hr = -F.real, e.const.real
                else:
                    Gr, hr = -embed_stack(F), embed_hermitian(e.const)
                blocks.append(ConeBlock(hr.shape[0], idx, np.ascontiguousarray(Gr),
                                        np.ascontiguousarray(hr), ci))
            else:
                iu = np.triu_indices(e.n)
                rows = np.zeros((len(iu[0]) * (1 if real else 2), nvar))
                rhs = []
                Fr = F[:, iu[0], iu[1]]                   # (p, k)
                k = len(iu[0])
                rows[:k, idx] = Fr.real.T
                rhs.extend(-e.const[iu].real)
                if not real:
                    off = iu[0] != iu[1]
                    rows[k:, idx] = Fr.imag.T
                    rhs.extend(-e.const[iu].imag)
                    keep_rows = np.concatenate([np.ones(k, bool), off])
                    rows = rows[keep_rows]
                    rhs = np.asarray(rhs)[keep_rows]
                eq_rows_A.append(rows)
                eq_b.append(np.asarray(rhs, dtype=float))
                eq_owner.extend([ci] * rows.shape[0])
        if eq_rows_A:
            A = np.vstack(eq_rows_A)
            b = np.concatenate(eq_b)
            A, b, eq_owner = _reduce_equalities(A, b, eq_owner)
        else:
            A, b = np.zeros((0, nvar)), np.zeros(0)
        return StandardForm(nvar, c, c0, sign, blocks, A, b, columns, real, eq_owner)

    def solve(self, tol_gap: float = 1e-8, tol_feas: float = 1e-8, max_iter: int = 200,
              real: bool | None = None, verbose: bool = False) -> SdpSolution:
        from .solver import solve_standard_form

        sf = self.compile(real)
        raw = solve_standard_form(sf, tol_gap=tol_gap, tol_feas=tol_feas,
                                  max_iter=max_iter, verbose=verbose)
        params = {}
        values = {}
        for v, (sl, keep) in sf.columns.items():
            p = np.zeros(v.nparams)
            p[keep] = raw.x[sl]
            params[v] = p
            values[v] = v.from_params(p)
        duals = []
        for blk, Z in zip(sf.blocks, raw.z):
            duals.append((self.constraints[blk.constraint].name, Z if sf.real else unembed(Z)))
        sol = SdpSolution(
            status=raw.status,
            primal_objective=sf.sign * (raw.pobj + sf.c0),
            dual_objective=sf.sign * (raw.dobj + sf.c0),
            values=values,
            residuals=raw.residuals,
            iterations=raw.iterations,
            duals=duals,
        )
        sol._params = params
        return sol


def _reduce_equalities(A: np.ndarray, b: np.ndarray, owner: list):
    """Drop zero and linearly dependent equality rows; reject inconsistent systems."""
    nz = np.abs(A).max(axis=1) > 0
    if np.any(np.abs(b[~nz]) > 1e-12):
        raise SolverError("equality constraints are inconsistent (0 = nonzero)")
    A, b = A[nz], b[nz]
    owner = [o for o, keep in zip(owner, nz) if keep]
    if A.shape[0] == 0:
        return A, b, owner
    _, R, piv = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > 1e-10 * d[0]))
    rows = np.sort(piv[:rank])
    if rank < A.shape[0]:
        sol, *_ = np.linalg.lstsq(A[rows], b[rows], rcond=None)
        if np.abs(A @ sol - b).max() > 1e-9 * max(1.0, np.abs(b).max()):
            raise SolverError("equality constraints are inconsistent")
    return A[rows], b[rows], [owner[i] for i in rows]
