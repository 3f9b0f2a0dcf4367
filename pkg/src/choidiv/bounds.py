"""Lower and upper SDP bounds on the relative entropy of channels, and the sandwich driver.

Both programs work with the trace operator

    K = Gamma_N - Gamma_M + ln(lam) (Gamma_N - 1/dB) + (1 - lam) (Gamma_M - 1/dB)

for which ``tr[(rho (x) 1) K] + ln lam + 1 - lam`` equals the non-integral
part of the representation for any input state; the correction terms
vanish identically for trace-preserving pairs, so they are only added for
trace-non-increasing maps.

Energy constraints ``tr[H rho] <= E`` that every state satisfies are
dropped, and constraints met only on the ground space of ``H``
(``E = lambda_min(H)``) are replaced by restricting the input to that
space. Both steps leave the feasible set unchanged and keep the programs
strictly feasible.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .channels import ChoiMatrix, conjugated_output
from .grid import (DEFAULT_SCHEME, Grid, InfiniteDivergence, LowerCoefficients,
                   UpperCoefficients, build_grid, lower_coefficients, r_for_epsilon,
                   upper_coefficients)
from .linalg import as_hermitian, eig_hermitian
from .linalg import partial_trace as _lin_ptrace
from .oracle import pull_inside, umegaki
from .sdp import SdpProblem, SolverError, kron, partial_trace
from .spectral import IntervalBounds, interval_for_pair

WITNESS_NUDGE = 1e-9
ENERGY_TOL = 1e-12
R_CAP = 512


class EnergyInfeasible(ValueError):
    """No state satisfies the energy constraint (lambda_min(H) > E)."""


@dataclass(frozen=True)
class EnergyConstraint:
    H: np.ndarray
    E: float

    def __post_init__(self):
        H = as_hermitian(self.H)
        H.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "E", float(self.E))

    @property
    def ground(self) -> float:
        return float(eig_hermitian(self.H).eigenvalues[0])

    def check(self) -> None:
        g = self.ground
        if g > self.E + ENERGY_TOL * max(1.0, abs(self.E)):
            raise EnergyInfeasible(f"no state satisfies tr[H rho] <= {self.E}: "
                                   f"lambda_min(H) = {g:.6g}")


@dataclass
class BoundRequest:
    gN: ChoiMatrix
    gM: ChoiMatrix
    eps: float = 1e-2
    r_init: int | None = None
    scheme: str = DEFAULT_SCHEME
    energy: list = field(default_factory=list)
    solver_opts: dict = field(default_factory=dict)
    r_cap: int = R_CAP
    lam_scale: float = 1.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.lam_scale < 1.0:
            raise ValueError("lam_scale must be >= 1 (smaller values break validity)")


@dataclass
class BoundResult:
    lower: float
    upper: float
    lam: float
    mu: float
    r_used: int
    witness_rhoA: np.ndarray | None
    status: str
    diagnostics: list = field(default_factory=list)

    @property
    def gap(self) -> float:
        if math.isinf(self.lower) and math.isinf(self.upper):
            return 0.0
        return self.upper - self.lower

    @property
    def infinite(self) -> bool:
        return math.isinf(self.lam)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


@dataclass
class DegeneratePairInstance:
    J: np.ndarray
    H: np.ndarray
    E: float
    dimA: int
    dimB: int


@dataclass
class LowerResult:
    value: float
    witness: np.ndarray
    Q: list
    iterations: int


@dataclass
class UpperResult:
    value: float
    x: float
    y: float
    N: list
    iterations: int


def additive_constant(lam: float) -> float:
    return math.log(lam) + 1.0 - lam


def trace_operator(gN: ChoiMatrix, gM: ChoiMatrix, lam: float) -> np.ndarray:
    K = gN.op - gM.op
    if not (gN.trace_preserving and gM.trace_preserving):
        unit = np.eye(gN.dim) / gN.dimB
        K = K + math.log(lam) * (gN.op - unit) + (1.0 - lam) * (gM.op - unit)
    return K


# -- energy handling --------------------------------------------------------

@dataclass
class _Reduced:
    V: np.ndarray            # isometry from the reduced input space into A
    gN: ChoiMatrix
    gM: ChoiMatrix
    energy: list


def _restrict(choi: ChoiMatrix, V: np.ndarray) -> ChoiMatrix:
    W = np.kron(V, np.eye(choi.dimB))
    return ChoiMatrix(V.shape[1], choi.dimB, W.conj().T @ choi.op @ W, choi.trace_preserving)


def reduce_energy(gN: ChoiMatrix, gM: ChoiMatrix, energy) -> _Reduced:
    """Drop inactive constraints and restrict tight ones to the ground space."""
    if isinstance(energy, EnergyConstraint):
        energy = [energy]
    energy = [] if energy is None else list(energy)
    V = np.eye(gN.dimA, dtype=complex)
    for ec in energy:
        ec.check()
    pending = list(energy)
    changed = True
    while changed:
        changed = False
        kept = []
        for ec in pending:
            Hr = V.conj().T @ ec.H @ V
            w, U = eig_hermitian(Hr)
            tol = ENERGY_TOL * max(1.0, float(np.abs(w).max()))
            if w[-1] <= ec.E + tol:
                continue
            if w[0] > ec.E + tol:
                raise EnergyInfeasible("energy constraints admit no common state")
            if ec.E - w[0] <= tol:
                V = V @ U[:, w <= w[0] + tol]
                changed = True
                continue
            kept.append(ec)
        pending = kept
    red = [EnergyConstraint(V.conj().T @ ec.H @ V, ec.E) for ec in pending]
    if V.shape[1] == gN.dimA:
        return _Reduced(np.eye(gN.dimA), gN, gM, red)
    return _Reduced(V, _restrict(gN, V), _restrict(gM, V), red)


def _ptrace(K, dA, dB):
    return _lin_ptrace(K, dA, dB, keep="A")


def _lift(V: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return V @ rho @ V.conj().T


def _as_state(rho: np.ndarray) -> np.ndarray:
    w, U = eig_hermitian(rho)
    w = np.clip(w, 0.0, None)
    out = (U * w) @ U.conj().T
    return out / np.trace(out).real


def _solve(prob: SdpProblem, opts: dict):
    sol = prob.solve(**opts)
    sol.raise_for_status()
    return sol


# -- the two programs -------------------------------------------------------

def lower_bound(gN: ChoiMatrix, gM: ChoiMatrix, grid: Grid,
                coeffs: LowerCoefficients | None = None, energy=None,
                solver_opts: dict | None = None) -> LowerResult:
    """Discretized lower SDP; its value never exceeds the channel divergence."""
    coeffs = lower_coefficients(grid) if coeffs is None else coeffs
    lam = grid.lam
    red = reduce_energy(gN, gM, energy)
    n, m = red.gN, red.gM
    dA, dB = n.dimA, n.dimB
    K = trace_operator(n, m, lam)

    prob = SdpProblem("max")
    rho = prob.psd(dA, "rho")
    prob.add_eq(rho.trace(), 1.0, "unit trace")
    for i, ec in enumerate(red.energy):
        prob.add_le(rho.inner(ec.H), ec.E, f"energy{i}")
    big = kron(rho, np.eye(dB))
    obj = rho.inner(_ptrace(K, dA, dB))
    Qs = []
    for k, (a, b) in enumerate(zip(coeffs.alpha, coeffs.beta)):
        if a == 0 and b == 0:
            continue
        Q = prob.variable(dA * dB, f"Q{k + 1}")
        prob.add_box(Q, big, f"Q{k + 1}")
        obj = obj + Q.inner(a * n.op + b * m.op)
        Qs.append(Q)
    prob.set_objective(obj)
    sol = _solve(prob, solver_opts or {})
    witness = _lift(red.V, _as_state(sol[rho]))
    return LowerResult(sol.primal_objective + additive_constant(lam), witness,
                       [sol[Q] for Q in Qs], sol.iterations)


def upper_bound(gN: ChoiMatrix, gM: ChoiMatrix, grid: Grid,
                coeffs: UpperCoefficients | None = None, energy=None,
                solver_opts: dict | None = None) -> UpperResult:
    """Chord-interpolated dual SDP; its value is never below the channel divergence.

    ``energy`` is a single :class:`EnergyConstraint` (or ``None`` for
    ``H = 1, E = 1``).
    """
    coeffs = upper_coefficients(grid) if coeffs is None else coeffs
    if isinstance(energy, (list, tuple)):
        if len(energy) > 1:
            red0 = reduce_energy(gN, gM, energy)
            if len(red0.energy) > 1:
                raise ValueError("the upper bound supports a single energy constraint")
        energy = list(energy)
    red = reduce_energy(gN, gM, energy)
    n, m = red.gN, red.gM
    dA, dB = n.dimA, n.dimB
    lam = grid.lam
    K = trace_operator(n, m, lam)
    ec = red.energy[0] if red.energy else None

    prob = SdpProblem("min")
    x = prob.scalar("x")
    N0 = prob.variable(dA * dB, "N0")
    prob.add_psd(N0 - K, "N0 >= trace term")
    Ns = [N0]
    nodes = grid.nodes
    if coeffs.floor_weight > 0:
        c0 = coeffs.floor_weight
        Nf = prob.psd(dA * dB, "Nfloor")
        prob.add_psd(Nf - c0 * (nodes[0] * m.op - n.op), "Nfloor >= chord")
        Ns.append(Nf)
    for k in range(1, grid.r + 1):
        c = coeffs.weights[k - 1]
        if c == 0:
            continue
        Nk = prob.psd(dA * dB, f"N{k}")
        prob.add_psd(Nk - (coeffs.gamma[k] * n.op + coeffs.delta[k] * m.op), f"N{k} >= chord")
        Ns.append(Nk)
    total = sum((N.expr for N in Ns[1:]), Ns[0].expr)
    reduced = partial_trace(total, dA, dB, "A")
    lhs = x * np.eye(dA)
    obj = x.expr
    y = None
    if ec is not None:
        y = prob.scalar("y", nonneg=True)
        lhs = lhs + y * ec.H
        obj = obj + ec.E * y.expr
    prob.add_psd(lhs - reduced, "x + yH >= tr_B sum N")
    prob.set_objective(obj)
    sol = _solve(prob, solver_opts or {})
    return UpperResult(sol.primal_objective + additive_constant(lam), sol[x],
                       0.0 if y is None else sol[y], [sol[N] for N in Ns], sol.iterations)


def _degenerate_pair_solve(J, dA, dB, energy, opts):
    Jr = _ptrace(J, dA, dB)
    p = SdpProblem("max")
    rho = p.psd(dA, "rho")
    p.add_eq(rho.trace(), 1.0)
    for ec in energy:
        p.add_le(rho.inner(ec.H), ec.E)
    p.set_objective(rho.inner(Jr))
    ps = _solve(p, opts)

    d = SdpProblem("min")
    x = d.scalar("x")
    lhs = x * np.eye(dA)
    obj = x.expr
    for i, ec in enumerate(energy):
        y = d.scalar(f"y{i}", nonneg=True)
        lhs = lhs + y * ec.H
        obj = obj + ec.E * y.expr
    d.add_psd(lhs - Jr)
    d.set_objective(obj)
    ds = _solve(d, opts)
    return ps.primal_objective, ds.primal_objective, _as_state(ps[rho])


def degenerate_pair(inst: DegeneratePairInstance, solver_opts: dict | None = None) -> tuple[float, float]:
    """Primal ``max tr[J (rho (x) 1)]`` over states with ``tr[H rho] <= E`` and its dual
    ``min x + yE`` s.t. ``x 1 + y H >= tr_B J``, ``y >= 0``, solved separately."""
    ec = EnergyConstraint(inst.H, inst.E)
    ec.check()
    J = as_hermitian(inst.J)
    if J.shape != (inst.dimA * inst.dimB,) * 2:
        raise ValueError(f"J has shape {J.shape}, expected a {inst.dimA}x{inst.dimB} operator")
    primal, dual, _ = _degenerate_pair_solve(J, inst.dimA, inst.dimB, [ec], solver_opts or {})
    return primal, dual


def evaluate_at_state(gN: ChoiMatrix, gM: ChoiMatrix, rhoA) -> float:
    """Output relative entropy at input ``rhoA``: a lower-bound witness for the divergence."""
    rho = pull_inside(_as_state(as_hermitian(rhoA)), WITNESS_NUDGE)
    return umegaki(conjugated_output(gN, rho), conjugated_output(gM, rho))


def trace_term(gN: ChoiMatrix, gM: ChoiMatrix, rhoA) -> float:
    """``tr[(rho (x) 1)(Gamma_N - Gamma_M)]``; zero for trace-preserving pairs."""
    big = np.kron(as_hermitian(rhoA), np.eye(gN.dimB))
    return float(np.real(np.trace(big @ (gN.op - gM.op))))


# -- driver -----------------------------------------------------------------

def _degenerate(req: BoundRequest, interval: IntervalBounds) -> BoundResult:
    red = reduce_energy(req.gN, req.gM, req.energy)
    lam = interval.lam
    K = trace_operator(red.gN, red.gM, lam)
    t = time.perf_counter()
    primal, dual, rho = _degenerate_pair_solve(K, red.gN.dimA, red.gN.dimB, red.energy, req.solver_opts)
    const = additive_constant(lam)
    diag = [{"r": 0, "lower": primal + const, "upper": dual + const,
             "seconds": time.perf_counter() - t, "kind": "degenerate"}]
    return BoundResult(primal + const, dual + const, lam, interval.mu, 0,
                       _lift(red.V, rho), "converged", diag)


def sandwich(req: BoundRequest, interval: IntervalBounds | None = None) -> BoundResult:
    """Double ``r`` from ``r_for_epsilon`` until the certified gap is at most ``eps``."""
    interval = interval_for_pair(req.gN, req.gM) if interval is None else interval
    if not interval.finite:
        return BoundResult(math.inf, math.inf, math.inf, interval.mu, 0, None, "infinite")
    if interval.degenerate and req.lam_scale == 1.0:
        return _degenerate(req, interval)
    lam = interval.lam * req.lam_scale
    energy = list(req.energy)
    red = reduce_energy(req.gN, req.gM, energy)
    if len(red.energy) > 1:
        raise ValueError("the upper bound supports a single active energy constraint")
    eff = IntervalBounds(math.log(lam), lam, interval.mu)
    r = req.r_init or r_for_epsilon(eff, req.eps)
    diags = []
    while True:
        grid = build_grid(interval, r, req.scheme, lam=lam if req.lam_scale != 1.0 else None)
        t0 = time.perf_counter()
        lo = lower_bound(req.gN, req.gM, grid, None, energy, req.solver_opts)
        t1 = time.perf_counter()
        up = upper_bound(req.gN, req.gM, grid, None, energy, req.solver_opts)
        t2 = time.perf_counter()
        diags.append({"r": r, "lower": lo.value, "upper": up.value,
                      "lower_seconds": t1 - t0, "upper_seconds": t2 - t1,
                      "lower_iterations": lo.iterations, "upper_iterations": up.iterations})
        gap = up.value - lo.value
        if gap <= req.eps:
            status = "converged"
            break
        if 2 * r > req.r_cap:
            status = "r_cap"
            break
        r *= 2
    return BoundResult(lo.value, up.value, interval.lam, interval.mu, r, lo.witness, status, diags)


__all__ = [
    "EnergyConstraint", "EnergyInfeasible", "BoundRequest", "BoundResult", "DegeneratePairInstance",
    "LowerResult", "UpperResult", "InfiniteDivergence", "SolverError",
    "lower_bound", "upper_bound", "degenerate_pair", "sandwich", "evaluate_at_state",
    "trace_operator", "trace_term", "reduce_energy", "additive_constant",
]
