"""Minimizing the channel divergence over SDP-representable free sets.

The upper program stays an SDP when the Choi matrix of the second channel
becomes a variable, because every coefficient term ``gamma_k Gamma_N +
delta_k Gamma_M`` is affine in it. The one non-affine ingredient, the
interval end ``lambda``, is replaced by a caller-supplied ``lambda_bar``
together with the restriction ``Gamma_N <= lambda_bar Gamma_M``. That makes
``lambda_bar`` a valid interval end for every feasible candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bounds import EnergyConstraint, additive_constant, lower_bound, reduce_energy, upper_bound
from .channels import ChannelError, ChoiMatrix, channel_from_json, decode_matrix
from .grid import Grid, UpperCoefficients, build_grid, r_for_epsilon, upper_coefficients
from .linalg import eig_hermitian, eigvalsh
from .linalg import partial_trace as _lin_ptrace
from .sdp import (SdpProblem, SolverError, Status, kron, partial_trace, partial_transpose)
from .sdp.model import Affine, as_expr
from .spectral import IntervalBounds, interval_for_pair

FREE_KINDS = ("fixed", "replacer", "ppt", "custom")
REJECTED_KINDS = {
    "entanglement_breaking": "entanglement-breaking channels",
    "separable": "separable (LOCC-like) channels",
}
FREE_R_CAP = 256


class FreeSetError(ValueError):
    """Unsupported or inconsistent free-set description."""


class RestrictionInfeasible(SolverError):
    """No member of the free set satisfies Gamma_N <= lambda_bar Gamma_M."""


@dataclass(frozen=True)
class CustomLmi:
    """``sum_i L_i^dagger Gamma_M L_i + offset >= 0``.

    ``terms`` holds the matrices ``L_i`` (each ``dimA dimB`` rows, any number
    of columns); a callable ``fn`` mapping an expression to an expression may
    be given instead for constraints built in code.
    """

    terms: tuple = ()
    offset: np.ndarray | None = None
    fn: Callable | None = None

    def apply(self, M) -> Affine:
        if self.fn is not None:
            return as_expr(self.fn(M))
        expr = None
        for L in self.terms:
            L = np.asarray(L, dtype=complex)
            Ld = L.conj().T
            piece = as_expr(M).map(lambda X, L=L, Ld=Ld: Ld @ X @ L)
            expr = piece if expr is None else expr + piece
        if expr is None:
            raise FreeSetError("a custom LMI needs at least one term")
        if self.offset is not None:
            expr = expr + np.asarray(self.offset, dtype=complex)
        return expr


@dataclass
class FreeSetSpec:
    kind: str
    lambda_bar: float | None = None
    delta_reg: float = 0.0
    choi: ChoiMatrix | None = None
    lmis: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind in REJECTED_KINDS:
            raise FreeSetError(
                f"the set of {REJECTED_KINDS[self.kind]} has no SDP description; "
                "use 'ppt' as an SDP-representable outer approximation")
        if self.kind not in FREE_KINDS:
            raise FreeSetError(f"unknown free-set kind {self.kind!r}; choose from {FREE_KINDS}")
        if self.kind == "fixed" and self.choi is None:
            raise FreeSetError("a fixed free set needs its Choi matrix")
        if self.kind == "custom" and not self.lmis:
            raise FreeSetError("a custom free set needs at least one LMI")
        if self.lambda_bar is not None and not self.lambda_bar >= 1.0:
            raise FreeSetError(f"lambda_bar must be >= 1, got {self.lambda_bar}")
        if self.delta_reg < 0:
            raise FreeSetError("delta_reg must be non-negative")

    def check_dims(self, dimA: int, dimB: int) -> None:
        if not self.delta_reg < 1.0 / (dimA * dimB):
            raise FreeSetError(f"delta_reg must be below 1/(dimA dimB) = {1.0 / (dimA * dimB):.6g}")
        if self.choi is not None and (self.choi.dimA, self.choi.dimB) != (dimA, dimB):
            raise FreeSetError("the fixed free channel acts on different systems")

    @classmethod
    def from_json(cls, spec: dict, dims: tuple[int, int] | None = None) -> FreeSetSpec:
        if not isinstance(spec, dict) or "kind" not in spec:
            raise FreeSetError("free-set descriptor must be an object with a 'kind' field")
        kind = spec["kind"]
        choi = None
        if kind == "fixed":
            if "choi" not in spec:
                raise FreeSetError("fixed free set: missing field 'choi'")
            c = spec["choi"]
            choi = channel_from_json(c) if isinstance(c, dict) else None
            if choi is None:
                if dims is None:
                    raise FreeSetError("fixed free set with a bare matrix needs the channel dimensions")
                choi = ChoiMatrix(dims[0], dims[1], decode_matrix(c, "choi"))
        lmis = []
        for i, item in enumerate(spec.get("lmis", [])):
            if not isinstance(item, dict) or "terms" not in item:
                raise FreeSetError(f"lmis[{i}]: expected an object with a 'terms' list")
            terms = tuple(decode_matrix(L, f"lmis[{i}].terms") for L in item["terms"])
            off = item.get("offset")
            lmis.append(CustomLmi(terms, None if off is None else decode_matrix(off, f"lmis[{i}].offset")))
        lb = spec.get("lambda_bar")
        return cls(kind, None if lb is None else float(lb), float(spec.get("delta_reg", 0.0)),
                   choi, lmis)


@dataclass
class FreeOptResult:
    upper: float
    optimizer_choi: ChoiMatrix
    matching_lower: float
    gap: float
    lambda_bar: float = math.nan
    r_used: int = 0
    diagnostics: list = field(default_factory=list)


def default_lambda_bar(gN: ChoiMatrix, delta_reg: float = 0.0) -> float:
    """``dimA dimB lambda_max(Gamma_N)``, or ``lambda_max(Gamma_N) / delta_reg`` when
    a regularization is requested (that value makes the restriction automatic)."""
    top = float(eigvalsh(gN.op)[-1])
    if delta_reg > 0:
        return max(1.0, top / delta_reg)
    return max(1.0, gN.dimA * gN.dimB * top)


def free_grid(lambda_bar: float, r: int, scheme: str = "geometric") -> Grid:
    """Grid on ``[mu_floor(lambda_bar, r), lambda_bar]`` with a node pinned at ``s = 1``.

    ``mu`` of the candidates is unknown. Every channel pair has ``mu <= 1 <=
    lambda`` and the integrand of ``M = N`` kinks exactly at 1, so the pinned
    node makes the chord bound exact when the channel itself is free.
    """
    base = build_grid(IntervalBounds(math.log(lambda_bar), lambda_bar, 0.0), r, scheme)
    t0 = base.t0
    if r < 2 or not t0 < 1.0 < lambda_bar:
        return base
    k = min(r - 1, max(1, round(r * math.log(1.0 / t0) / math.log(lambda_bar / t0))))
    if scheme == "geometric":
        low = t0 ** (1.0 - np.arange(k + 1) / k)
        high = lambda_bar ** (np.arange(r - k + 1) / (r - k))
    else:
        low = np.linspace(t0, 1.0, k + 1)
        high = np.linspace(1.0, lambda_bar, r - k + 1)
    nodes = np.concatenate([low, high[1:]])
    nodes[0], nodes[k], nodes[-1] = t0, 1.0, lambda_bar
    return Grid(nodes, scheme, 0.0)


def _restriction_basis(gN: ChoiMatrix, energy):
    red = reduce_energy(gN, gN, energy)
    if len(red.energy) > 1:
        raise ValueError("the upper bound supports a single active energy constraint")
    W = np.kron(red.V, np.eye(gN.dimB))
    return red, W


def _upper_program(gN: ChoiMatrix, M, prob: SdpProblem, grid: Grid,
                   coeffs: UpperCoefficients, energy) -> None:
    """Append the chord upper program with second Choi expression ``M`` to ``prob``."""
    red, W = _restriction_basis(gN, energy)
    n = red.gN
    dA, dB = n.dimA, n.dimB
    Mexpr = as_expr(M)
    if red.V.shape[0] != red.V.shape[1]:
        Wd = W.conj().T
        Mexpr = Mexpr.map(lambda X: Wd @ X @ W)
    N = n.op
    x = prob.scalar("x")
    N0 = prob.variable(dA * dB, "N0")
    prob.add_psd(N0 - (N - Mexpr), "N0 >= trace term")
    total = N0.expr
    t = grid.nodes
    if coeffs.floor_weight > 0:
        Nf = prob.psd(dA * dB, "Nfloor")
        prob.add_psd(Nf - coeffs.floor_weight * (t[0] * Mexpr - N), "Nfloor >= chord")
        total = total + Nf
    for k in range(1, grid.r + 1):
        if coeffs.weights[k - 1] == 0:
            continue
        Nk = prob.psd(dA * dB, f"N{k}")
        prob.add_psd(Nk - (coeffs.gamma[k] * N + coeffs.delta[k] * Mexpr), f"N{k} >= chord")
        total = total + Nk
    lhs = x * np.eye(dA)
    obj = x.expr
    if red.energy:
        ec = red.energy[0]
        y = prob.scalar("y", nonneg=True)
        lhs = lhs + y * ec.H
        obj = obj + ec.E * y.expr
    prob.add_psd(lhs - partial_trace(total, dA, dB, "A"), "x + yH >= tr_B sum N")
    prob.set_objective(obj + additive_constant(grid.lam), "min")


def replacer_program(gN: ChoiMatrix, sigma_B_variable, grid: Grid,
                     coeffs: UpperCoefficients | None = None, energy=None,
                     lambda_bar: float | None = None, delta_reg: float = 0.0):
    """Upper program over replacer channels ``Gamma_M = 1_A (x) sigma_B``.

    ``sigma_B_variable`` is ``None`` to optimize over output states, or a
    fixed state to freeze it. Returns ``(problem, sigma_expression)``.
    """
    coeffs = upper_coefficients(grid) if coeffs is None else coeffs
    lam_bar = grid.lam if lambda_bar is None else lambda_bar
    dA, dB = gN.dimA, gN.dimB
    prob = SdpProblem("min")
    if sigma_B_variable is None:
        sigma = prob.psd(dB, "sigma_B").expr
        prob.add_eq(sigma.trace(), 1.0, "tr sigma = 1")
    else:
        sigma = Affine.constant(np.asarray(sigma_B_variable, dtype=complex))
    M = kron(np.eye(dA), sigma)
    prob.add_psd(lam_bar * M - gN.op, "Gamma_N <= lambda_bar Gamma_M")
    if delta_reg > 0:
        prob.add_psd(M - delta_reg * np.eye(dA * dB), "Gamma_M >= delta")
    _upper_program(gN, M, prob, grid, coeffs, energy)
    return prob, sigma


def _free_program(gN: ChoiMatrix, F: FreeSetSpec, grid: Grid, coeffs, energy, lam_bar):
    dA, dB = gN.dimA, gN.dimB
    if F.kind == "replacer":
        prob, sigma = replacer_program(gN, None, grid, coeffs, energy, lam_bar, F.delta_reg)
        return prob, kron(np.eye(dA), sigma)
    prob = SdpProblem("min")
    M = prob.psd(dA * dB, "Gamma_M").expr
    prob.add_eq(partial_trace(M, dA, dB, "A"), np.eye(dA), "tr_B Gamma_M = 1")
    if F.kind == "ppt":
        prob.add_psd(partial_transpose(M, dA, dB, "B"), "PPT")
    else:
        for i, lmi in enumerate(F.lmis):
            prob.add_psd(lmi.apply(M), f"custom{i}")
    prob.add_psd(lam_bar * M - gN.op, "Gamma_N <= lambda_bar Gamma_M")
    if F.delta_reg > 0:
        prob.add_psd(M - F.delta_reg * np.eye(dA * dB), "Gamma_M >= delta")
    _upper_program(gN, M, prob, grid, coeffs, energy)
    return prob, M


def _clean_choi(M: np.ndarray, dA: int, dB: int) -> ChoiMatrix:
    """Project a numerically feasible Choi matrix onto exact CPTP maps."""
    w, U = eig_hermitian(M)
    M = (U * np.clip(w, 0.0, None)) @ U.conj().T
    T = _lin_ptrace(M, dA, dB, keep="A")
    wt, Ut = eig_hermitian(T)
    S = np.kron((Ut / np.sqrt(wt)) @ Ut.conj().T, np.eye(dB))
    return ChoiMatrix(dA, dB, S @ M @ S)


def min_over_free_upper(gN: ChoiMatrix, F: FreeSetSpec, grid: Grid,
                        coeffs: UpperCoefficients | None = None, energy=None,
                        solver_opts: dict | None = None) -> FreeOptResult:
    """Upper bound on ``inf_{M in F} D(N || M)`` and the lower bound at the optimizer.

    ``grid`` must span ``[mu_floor, lambda_bar]`` (see :func:`free_grid`).
    """
    F.check_dims(gN.dimA, gN.dimB)
    coeffs = upper_coefficients(grid) if coeffs is None else coeffs
    lam_bar = grid.lam
    if F.kind == "fixed":
        # a single member: its exact interval replaces lambda_bar
        iv = interval_for_pair(gN, F.choi)
        if not iv.finite:
            raise RestrictionInfeasible("the fixed free channel does not dominate N: "
                                        "the divergence is +inf")
        fg = build_grid(iv, grid.r, grid.scheme)
        up = upper_bound(gN, F.choi, fg, None, energy, solver_opts).value
        low = lower_bound(gN, F.choi, fg, None, energy, solver_opts).value
        return FreeOptResult(up, F.choi, low, up - low, iv.lam, grid.r)
    prob, M = _free_program(gN, F, grid, coeffs, energy, lam_bar)
    sol = prob.solve(**(solver_opts or {}))
    if sol.status == Status.INFEASIBLE:
        raise RestrictionInfeasible(
            f"no free channel satisfies Gamma_N <= {lam_bar:.6g} Gamma_M; "
            "increase lambda_bar (or delta_reg)")
    sol.raise_for_status()
    upper = sol.primal_objective
    opt = _clean_choi(sol.value(M), gN.dimA, gN.dimB)
    iv = interval_for_pair(gN, opt)
    if not iv.finite:
        raise SolverError("the optimizer lost the support of Gamma_N; increase delta_reg")
    lg = build_grid(iv, grid.r, grid.scheme, lam=max(lam_bar, iv.lam))
    low = lower_bound(gN, opt, lg, None, energy, solver_opts).value
    return FreeOptResult(upper, opt, low, upper - low, lam_bar, grid.r)


def free_divergence(gN: ChoiMatrix, F: FreeSetSpec, eps: float = 1e-2, r_init: int | None = None,
                    scheme: str = "geometric", energy=None, solver_opts: dict | None = None,
                    r_cap: int = FREE_R_CAP) -> FreeOptResult:
    """Double ``r`` until the upper bound and the lower bound at its optimizer meet within ``eps``."""
    F.check_dims(gN.dimA, gN.dimB)
    lam_bar = F.lambda_bar or default_lambda_bar(gN, F.delta_reg)
    r = r_init or r_for_epsilon(IntervalBounds(math.log(lam_bar), lam_bar, 0.0), eps)
    diags = []
    while True:
        res = min_over_free_upper(gN, F, free_grid(lam_bar, r, scheme), None, energy, solver_opts)
        diags.append({"r": r, "upper": res.upper, "matching_lower": res.matching_lower})
        if res.gap <= eps or 2 * r > r_cap:
            break
        r *= 2
    res.diagnostics = diags
    return res


__all__ = [
    "FreeSetSpec", "FreeOptResult", "FreeSetError", "RestrictionInfeasible", "CustomLmi",
    "min_over_free_upper", "replacer_program", "free_divergence", "default_lambda_bar",
    "free_grid", "EnergyConstraint", "ChannelError",
]
