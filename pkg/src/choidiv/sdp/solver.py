"""Dense primal-dual interior-point method for the compiled conic form.

Primal::

    min c'x  s.t.  G x + s = h,  A x = b,  s in K

Dual::

    max -h'z - b'y  s.t.  c + G'z + A'y = 0,  z in K

with ``K`` a product of real symmetric PSD cones and ``x`` free. At every
iterate the Nesterov-Todd scaling is recomputed per block as a matrix ``R``
with ``s = R L R'`` and ``z = R^-T L R^-1`` for a common diagonal ``L``. Each
iteration solves two reduced KKT systems (Mehrotra predictor, then
corrector) with the Gram matrix ``sum_j Ghat_j' Ghat_j`` of the scaled
constraint columns ``Ghat_j = R^-1 G_j R^-T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .problem import StandardForm, Status

STEP_FRACTION = 0.99
SIGMA_EXPONENT = 3
STALL_ITERS = 12


@dataclass
class RawResult:
    status: Status
    x: np.ndarray
    y: np.ndarray
    z: list
    pobj: float
    dobj: float
    iterations: int
    residuals: dict = field(default_factory=dict)


class _Group:
    """Blocks sharing (size, ncols), stored as stacked arrays."""

    def __init__(self, members, blocks):
        self.members = members
        self.m = blocks[members[0]].size
        self.p = blocks[members[0]].idx.size
        self.idx = np.array([blocks[i].idx for i in members], dtype=int).reshape(len(members), self.p)
        self.G = np.array([blocks[i].G for i in members]).reshape(len(members), self.p, self.m, self.m)
        self.h = np.array([blocks[i].h for i in members])
        nb = len(members)
        self.R = np.tile(np.eye(self.m), (nb, 1, 1))
        self.Rinv = self.R.copy()
        self.lam = np.ones((nb, self.m))
        self.S = self.R.copy()
        self.Z = self.R.copy()

    def Gx(self, x):
        if self.p == 0:
            return np.zeros_like(self.h)
        return np.einsum("bp,bpij->bij", x[self.idx], self.G)

    def GT(self, Z, nvar):
        if self.p == 0:
            return np.zeros(nvar)
        vals = np.einsum("bpij,bij->bp", self.G, Z)
        return np.bincount(self.idx.ravel(), weights=vals.ravel(), minlength=nvar)

    def to_scaled_s(self, M):
        return self.Rinv @ M @ _T(self.Rinv)

    def from_scaled_s(self, M):
        return self.R @ M @ _T(self.R)

    def from_scaled_z(self, M):
        return _T(self.Rinv) @ M @ self.Rinv


def _T(M):
    return np.swapaxes(M, -1, -2)


def _sym(M):
    return 0.5 * (M + _T(M))


def _diag(v):
    out = np.zeros(v.shape + (v.shape[-1],))
    i = np.arange(v.shape[-1])
    out[..., i, i] = v
    return out


def _jordan(X, Y):
    return 0.5 * (X @ Y + Y @ X)


def _lyap_diag(lam, D):
    """Solve ``diag(lam) o U = D`` for symmetric U."""
    return 2.0 * D / (lam[:, :, None] + lam[:, None, :])


def _max_step(lam, D):
    """Largest a with diag(lam) + a D >= 0 (inf if unbounded)."""
    if D.size == 0:
        return math.inf
    isq = 1.0 / np.sqrt(lam)
    M = _sym(D * isq[:, :, None] * isq[:, None, :])
    wmin = float(np.linalg.eigvalsh(M)[:, 0].min())
    return math.inf if wmin >= 0 else -1.0 / wmin


def _nt_scaling(S, Z):
    """NT scaling of a PD pair: returns (Rt, Rt_inv, lam) with S = Rt L Rt', Z = Rt^-T L Rt^-1."""
    Ls = np.linalg.cholesky(S)
    Lz = np.linalg.cholesky(Z)
    U, sv, Vt = np.linalg.svd(_T(Lz) @ Ls)
    isq = 1.0 / np.sqrt(sv)
    Rt = (Ls @ _T(Vt)) * isq[:, None, :]
    Rt_inv = (U.transpose(0, 2, 1) * isq[:, :, None]) @ _T(Lz)
    return Rt, Rt_inv, sv


class _KKT:
    """Factorization of [[H, A'], [A, 0]] via H + A'A and a Schur complement."""

    def __init__(self, H, A):
        self.H = H
        self.A = A
        n = H.shape[0]
        self.n = n
        self.lu = None
        Hm = H + A.T @ A if A.shape[0] else H.copy()
        scale = max(1.0, float(np.max(np.abs(np.diag(Hm)), initial=0.0)))
        reg = 0.0
        self.L = None
        for _ in range(7):
            try:
                self.L = scipy.linalg.cho_factor(Hm + reg * np.eye(n), lower=True, check_finite=False)
                if A.shape[0]:
                    Y = scipy.linalg.cho_solve(self.L, A.T, check_finite=False)
                    S = A @ Y
                    self.S = scipy.linalg.cho_factor(S, lower=True,
                                                     check_finite=False)
                break
            except (np.linalg.LinAlgError, ValueError):
                self.L = None
                reg = 1e-15 * scale if reg == 0 else reg * 100
        if self.L is None:
            m = A.shape[0]
            K = np.block([[H, A.T], [A, np.zeros((m, m))]])
            self.lu = scipy.linalg.lu_factor(K + 1e-14 * scale * np.eye(n + m), check_finite=False)

    def _solve_once(self, r1, r2):
        if self.lu is not None:
            sol = scipy.linalg.lu_solve(self.lu, np.concatenate([r1, r2]), check_finite=False)
            return sol[:self.n], sol[self.n:]
        if self.A.shape[0] == 0:
            return scipy.linalg.cho_solve(self.L, r1, check_finite=False), np.zeros(0)
        r1m = r1 + self.A.T @ r2
        u = scipy.linalg.cho_solve(self.L, r1m, check_finite=False)
        dy = scipy.linalg.cho_solve(self.S, self.A @ u - r2, check_finite=False)
        dx = scipy.linalg.cho_solve(self.L, r1m - self.A.T @ dy, check_finite=False)
        return dx, dy

    def solve(self, r1, r2, refine: int = 2):
        dx, dy = self._solve_once(r1, r2)
        for _ in range(refine):
            e1 = r1 - self.H @ dx - self.A.T @ dy
            e2 = r2 - self.A @ dx
            if max(np.abs(e1).max(initial=0), np.abs(e2).max(initial=0)) <= 1e-15 * (
                    1 + np.abs(r1).max(initial=0) + np.abs(r2).max(initial=0)):
                break
            cx, cy = self._solve_once(e1, e2)
            dx, dy = dx + cx, dy + cy
        return dx, dy


def _svec_weights(m):
    iu = np.triu_indices(m)
    w = np.where(iu[0] == iu[1], 1.0, math.sqrt(2.0))
    return iu, w


def _svec(M):
    iu, w = _svec_weights(M.shape[-1])
    return M[..., iu[0], iu[1]] * w


def _smat(v, m):
    iu, w = _svec_weights(m)
    out = np.zeros(v.shape[:-1] + (m, m))
    out[..., iu[0], iu[1]] = v / w
    out[..., iu[1], iu[0]] = v / w
    return out


class _AugmentedKKT:
    """Sparse LU of [[-I, Ghat, 0], [Ghat', 0, A'], [0, A, 0]] in svec coordinates.

    Avoids forming the Gram matrix, whose conditioning is the square of
    Ghat's and limits the attainable dual residual near the optimum.
    """

    def __init__(self, groups, Ghat, A, n):
        rows, cols, vals = [], [], []
        self.offsets = []
        off = 0
        for g, Gh in zip(groups, Ghat):
            k = g.m * (g.m + 1) // 2
            nb = len(g.members)
            self.offsets.append((off, nb, k))
            if Gh is not None and g.p:
                S = _svec(Gh)                                  # (nb, p, k)
                r_ = off + np.arange(nb)[:, None, None] * k + np.arange(k)[None, None, :]
                rows.append(np.broadcast_to(r_, S.shape).ravel())
                cols.append(np.broadcast_to(g.idx[:, :, None], S.shape).ravel())
                vals.append(S.ravel())
            off += nb * k
        self.ns = off
        self.n = n
        self.m = A.shape[0]
        Gs = scipy.sparse.coo_matrix(
            (np.concatenate(vals) if vals else np.zeros(0),
             (np.concatenate(rows) if rows else np.zeros(0, int),
              np.concatenate(cols) if cols else np.zeros(0, int))),
            shape=(self.ns, n)).tocsr()
        As = scipy.sparse.csr_matrix(A)
        K = scipy.sparse.bmat([[-scipy.sparse.identity(self.ns), Gs, None],
                               [Gs.T, None, As.T],
                               [None, As, None]], format="csc")
        size = self.ns + n + self.m
        if K.shape != (size, size):  # bmat drops empty trailing blocks
            K = scipy.sparse.csc_matrix((K.data, K.indices, K.indptr), shape=(size, size))
        self.K = K
        try:
            self.lu = scipy.sparse.linalg.splu(K)
        except RuntimeError:
            scale = max(1.0, abs(K).max())
            reg = scipy.sparse.diags(np.concatenate([np.zeros(self.ns), np.full(n + self.m, 1e-13 * scale)]))
            self.lu = scipy.sparse.linalg.splu((K - reg).tocsc())

    def solve(self, t, r1, r2, refine: int = 3):
        rhs = np.concatenate([t, r1, r2])
        sol = self.lu.solve(rhs)
        scale = 1.0 + np.abs(rhs).max(initial=0.0)
        for _ in range(refine):
            e = rhs - self.K @ sol
            if np.abs(e).max(initial=0.0) <= 1e-15 * scale:
                break
            sol = sol + self.lu.solve(e)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError("augmented KKT solve produced non-finite values")
        return sol[:self.ns], sol[self.ns:self.ns + self.n], sol[self.ns + self.n:]

    def split(self, u, groups):
        out = []
        for (off, nb, k), g in zip(self.offsets, groups):
            out.append(_smat(u[off:off + nb * k].reshape(nb, k), g.m))
        return out


def solve_standard_form(sf: StandardForm, tol_gap: float = 1e-8, tol_feas: float = 1e-8,
                        max_iter: int = 200, verbose: bool = False) -> RawResult:
    n = sf.nvar
    c, A, b = sf.c, sf.A, sf.b
    blocks = sf.blocks

    def result(status, x, y, groups, pobj, dobj, it, res):
        z = [None] * len(blocks)
        for g in groups:
            zz = g.Z
            for k, i in enumerate(g.members):
                z[i] = zz[k]
        return RawResult(status, x, y, z, pobj, dobj, it, res)

    # columns touching no constraint
    used = np.zeros(n, bool)
    for blk in blocks:
        used[blk.idx] = True
    if A.shape[0]:
        used |= np.any(A != 0, axis=0)
    if np.any(np.abs(c[~used]) > 0):
        nan = float("nan")
        return RawResult(Status.UNBOUNDED, np.zeros(n), np.zeros(A.shape[0]),
                         [np.zeros((b_.size, b_.size)) for b_ in blocks], -math.inf, nan, 0,
                         {"primal_feas": nan, "dual_feas": nan, "rel_gap": nan})
    for blk in blocks:
        if blk.idx.size == 0 and np.linalg.eigvalsh(blk.h)[0] < -tol_feas * max(1.0, np.abs(blk.h).max()):
            nan = float("nan")
            return RawResult(Status.INFEASIBLE, np.zeros(n), np.zeros(A.shape[0]),
                             [np.zeros((b_.size, b_.size)) for b_ in blocks], nan, nan, 0,
                             {"primal_feas": nan, "dual_feas": nan, "rel_gap": nan})

    keys = {}
    for i, blk in enumerate(blocks):
        keys.setdefault((blk.size, blk.idx.size), []).append(i)
    groups = [_Group(m, blocks) for m in keys.values()]
    degree = sum(blk.size for blk in blocks)

    def Gx(x):
        return [g.Gx(x) for g in groups]

    def GT(Zs):
        out = np.zeros(n)
        for g, Z in zip(groups, Zs):
            out += g.GT(Z, n)
        return out

    def inner(Xs, Ys):
        return float(sum(np.sum(X * Y) for X, Y in zip(Xs, Ys)))

    def norm(Xs):
        return math.sqrt(sum(float(np.sum(X * X)) for X in Xs))

    def scaled_columns():
        return [None if g.p == 0 else g.Rinv[:, None] @ g.G @ _T(g.Rinv)[:, None] for g in groups]

    # -- initial point: least-squares primal and dual, shifted into the cone interior
    hs = [g.h for g in groups]
    H0 = np.zeros((n, n))
    for g in groups:
        if g.p:
            F = g.G.reshape(len(g.members), g.p, -1)
            P = F @ _T(F)
            flat = (g.idx[:, :, None] * n + g.idx[:, None, :]).ravel()
            H0 += np.bincount(flat, weights=P.ravel(), minlength=n * n).reshape(n, n)
    kkt0 = _KKT(H0, A)
    x, _ = kkt0.solve(GT(hs), b)
    s0 = [g.h - gx for g, gx in zip(groups, Gx(x))]
    u, y = kkt0.solve(-c, np.zeros(A.shape[0]))
    z0 = Gx(u)

    def shift(Ms):
        wmin = min((float(np.linalg.eigvalsh(_sym(M))[:, 0].min()) for M in Ms if M.size),
                   default=0.0)
        nrm = max(1.0, norm(Ms) / math.sqrt(max(degree, 1)))
        a = max(-wmin, 0.0) + nrm
        return [_sym(M) + a * np.eye(M.shape[-1]) for M in Ms]

    for g, S, Z in zip(groups, shift(s0), shift(z0)):
        g.S, g.Z = S, Z

    nh = 1.0 + math.sqrt(norm(hs) ** 2 + float(b @ b))
    nc = 1.0 + float(np.linalg.norm(c))

    status = Status.MAX_ITER
    res = {}
    pobj = dobj = float("nan")
    small_steps = 0
    it = 0
    best = None
    since_best = 0
    for it in range(max_iter + 1):
        S = [g.S for g in groups]
        Z = [g.Z for g in groups]
        gxs = Gx(x)
        rz = [gx + s - h for gx, s, h in zip(gxs, S, hs)]
        GTz = GT(Z)
        rx = c + GTz + (A.T @ y if A.shape[0] else 0.0)
        ry = A @ x - b
        pobj = float(c @ x)
        dobj = float(-inner(hs, Z) - b @ y)
        gap = inner(S, Z)
        pres = math.sqrt(norm(rz) ** 2 + float(ry @ ry)) / nh
        dres = float(np.linalg.norm(rx)) / nc
        rel_gap = max(gap, abs(pobj - dobj)) / (1.0 + min(abs(pobj), abs(dobj)))
        res = {"primal_feas": pres, "dual_feas": dres, "rel_gap": rel_gap, "gap": gap}
        if verbose:
            print(f"{it:3d} pobj {pobj:+.8e} dobj {dobj:+.8e} gap {gap:.2e} "
                  f"pres {pres:.2e} dres {dres:.2e}")
        score = max(pres / tol_feas, dres / tol_feas, rel_gap / tol_gap)
        if best is None or score < best[0]:
            best = (score, x.copy(), y.copy(), [(g.S.copy(), g.Z.copy()) for g in groups],
                    pobj, dobj, dict(res))
            since_best = 0
        else:
            since_best += 1
        if pres <= tol_feas and dres <= tol_feas and rel_gap <= tol_gap:
            status = Status.OPTIMAL
            break
        # infeasibility certificates
        hzby = inner(hs, Z) + float(b @ y)
        if hzby < 0:
            cert = float(np.linalg.norm(GTz + (A.T @ y if A.shape[0] else 0.0))) / (-hzby)
            if cert <= tol_feas and pres > tol_feas:
                status = Status.INFEASIBLE
                break
        if pobj < 0:
            cert = math.sqrt(norm([gx + s for gx, s in zip(gxs, S)]) ** 2
                             + float((A @ x) @ (A @ x))) / (-pobj)
            if cert <= tol_feas and dres > tol_feas:
                status = Status.UNBOUNDED
                break
        if it == max_iter:
            break
        if since_best >= STALL_ITERS:
            status = Status.NUMERICAL_FAILURE
            break

        try:
            for g in groups:
                g.R, g.Rinv, g.lam = _nt_scaling(g.S, g.Z)
            kkt = _AugmentedKKT(groups, scaled_columns(), A, n)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError):
            status = Status.NUMERICAL_FAILURE
            break
        rz_hat = [g.to_scaled_s(r) for g, r in zip(groups, rz)]
        Lam = [_diag(g.lam) for g in groups]
        mu = gap / degree

        def direction(q):
            t = np.concatenate([_svec(-(a + bq)).ravel() for a, bq in zip(rz_hat, q)])
            u, dx, dy = kkt.solve(t, -rx, -ry)
            dz = kkt.split(u, groups)
            ds = [qq - d for qq, d in zip(q, dz)]
            return dx, dy, ds, dz

        def step_len(ds, dz):
            a = math.inf
            for g, d1, d2 in zip(groups, ds, dz):
                a = min(a, _max_step(g.lam, d1), _max_step(g.lam, d2))
            return a

        # predictor
        q_aff = [-L for L in Lam]
        dx_a, dy_a, ds_a, dz_a = direction(q_aff)
        a_aff = min(1.0, step_len(ds_a, dz_a))
        gap_aff = sum(float(np.sum((L + a_aff * d1) * (L + a_aff * d2)))
                      for L, d1, d2 in zip(Lam, ds_a, dz_a))
        sigma = min(1.0, max(0.0, gap_aff / gap)) ** SIGMA_EXPONENT if gap > 0 else 0.0

        # corrector
        q = []
        for g, L, d1, d2 in zip(groups, Lam, ds_a, dz_a):
            D = -L @ L - _jordan(d1, d2) + sigma * mu * np.eye(g.m)
            q.append(_lyap_diag(g.lam, _sym(D)))
        dx, dy, ds, dz = direction(q)
        if not np.all(np.isfinite(dx)) or not all(np.all(np.isfinite(d)) for d in ds + dz):
            status = Status.NUMERICAL_FAILURE
            break
        alpha = min(1.0, STEP_FRACTION * step_len(ds, dz))
        ds = [g.from_scaled_s(d) for g, d in zip(groups, ds)]
        dz = [g.from_scaled_z(d) for g, d in zip(groups, dz)]
        for _ in range(30):
            newS = [_sym(g.S + alpha * d) for g, d in zip(groups, ds)]
            newZ = [_sym(g.Z + alpha * d) for g, d in zip(groups, dz)]
            try:
                for M in newS + newZ:
                    if M.size:
                        np.linalg.cholesky(M)
                break
            except np.linalg.LinAlgError:
                alpha *= 0.5
        else:
            status = Status.NUMERICAL_FAILURE
            break
        small_steps = small_steps + 1 if alpha < 1e-8 else 0
        if small_steps >= 5:
            status = Status.NUMERICAL_FAILURE
            break
        x = x + alpha * dx
        y = y + alpha * dy
        for g, S_, Z_ in zip(groups, newS, newZ):
            g.S, g.Z = S_, Z_

    if status is not Status.OPTIMAL and status not in (Status.INFEASIBLE, Status.UNBOUNDED):
        _, x, y, sz, pobj, dobj, res = best
        for g, (S_, Z_) in zip(groups, sz):
            g.S, g.Z = S_, Z_
    return result(status, x, y, groups, pobj, dobj, it, res)
