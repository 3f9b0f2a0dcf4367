"""Discretization of the operator interval and the two coefficient families.

The integrand ``f(s) = tr^+[sigma s - rho]`` is convex in ``s`` and vanishes
for ``s <= mu``. On each grid interval the lower family integrates
``ds/s`` and ``ds`` exactly (a piecewise-constant projector witness), while
the upper family replaces ``f`` by its chord and integrates the chord against
``ds/s``; the chord weights are

    w_L(a, b) = (b ln(b/a) - (b - a)) / (b - a)
    w_R(a, b) = ((b - a) - a ln(b/a)) / (b - a)

so that ``int_a^b f(s) ds/s <= w_L f(a) + w_R f(b)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import IntervalBounds

MU_FLOOR_REL = 1e-4
DEFAULT_SCHEME = "geometric"
SCHEMES = ("geometric", "uniform")
R_CONSTANT = 2.0


class InfiniteDivergence(ValueError):
    """The first channel's Choi support is not inside the second's: D(N||M) = +inf."""


@dataclass(frozen=True)
class Grid:
    nodes: np.ndarray
    scheme: str
    mu: float

    @property
    def r(self) -> int:
        return self.nodes.size - 1

    @property
    def t0(self) -> float:
        return float(self.nodes[0])

    @property
    def lam(self) -> float:
        return float(self.nodes[-1])

    @property
    def floored(self) -> bool:
        """True when t_0 sits above mu, so the piece of the integral below t_0 is not covered."""
        return self.t0 > self.mu

    @property
    def degenerate(self) -> bool:
        return self.t0 == self.lam


@dataclass(frozen=True)
class LowerCoefficients:
    alpha: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class UpperCoefficients:
    """Index 0 is the trace-difference term; 1..r are the chord nodes.

    ``floor_weight`` is the weight of an extra node at ``t_0`` used only when
    the grid was floored: chord on ``[t_0, t_1]`` plus ``1`` for the tail
    ``int_0^{t_0} f(s) ds/s <= f(t_0)`` (convexity with ``f(0) = 0``).
    """

    gamma: np.ndarray
    delta: np.ndarray
    weights: np.ndarray
    floor_weight: float = 0.0


def chord_weights(a: float, b: float) -> tuple[float, float]:
    """Left/right weights of the chord of a convex function integrated against ds/s on [a, b]."""
    if not 0 < a <= b:
        raise ValueError(f"chord interval must satisfy 0 < a <= b, got ({a}, {b})")
    if a == b:
        return 0.0, 0.0
    h = b - a
    L = math.log(b / a)
    if L < 1e-4:
        # series in u = h/a avoids cancellation on very short intervals
        u = h / a
        wR = u / 2 - u * u / 3 + u ** 3 / 4 - u ** 4 / 5
        return L - wR, wR
    return (b * L - h) / h, (h - a * L) / h


def mu_floor(lam: float, r: int) -> float:
    """``1e-4 lambda / r^2``: the uncovered tail below it is at most ``t_0 tr[sigma]``,
    which then shrinks at the same ``1/r^2`` rate as the chord error."""
    return MU_FLOOR_REL * lam / (r * r)


def build_grid(interval: IntervalBounds, r: int, scheme: str = DEFAULT_SCHEME,
               lam: float | None = None) -> Grid:
    """Nodes ``t_0 < ... < t_r = lambda``.

    ``lam`` overrides the interval's upper end (any value above the true
    lambda is valid). ``t_0 = max(mu, mu_floor(lambda, r))``.
    """
    if not interval.finite:
        raise InfiniteDivergence("lambda is infinite: D(N||M) = +inf, no grid exists")
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown grid scheme {scheme!r}; choose from {SCHEMES}")
    top = interval.lam if lam is None else float(lam)
    if top < interval.lam * (1 - 1e-12):
        raise ValueError(f"lambda override {top} is below the true lambda {interval.lam}")
    mu = interval.mu
    if interval.degenerate and lam is None:
        return Grid(np.array([top, top]), scheme, mu)
    t0 = max(mu, mu_floor(top, r))
    if scheme == "geometric":
        nodes = t0 * (top / t0) ** (np.arange(r + 1) / r)
    else:
        nodes = np.linspace(t0, top, r + 1)
    nodes[0], nodes[-1] = t0, top
    return Grid(nodes, scheme, mu)


def lower_coefficients(g: Grid) -> LowerCoefficients:
    t = g.nodes
    if t[0] <= 0:
        raise ValueError("t_0 must be positive (the ds/s weight diverges at 0)")
    return LowerCoefficients(-np.log(t[1:] / t[:-1]), np.diff(t))


def upper_coefficients(g: Grid) -> UpperCoefficients:
    t = g.nodes
    if t[0] <= 0:
        raise ValueError("t_0 must be positive (the ds/s weight diverges at 0)")
    r = g.r
    wl = np.zeros(r)
    wr = np.zeros(r)
    for k in range(r):
        wl[k], wr[k] = chord_weights(t[k], t[k + 1])
    c = wr.copy()
    c[:-1] += wl[1:]
    gamma = np.concatenate([[1.0], -c])
    delta = np.concatenate([[-1.0], c * t[1:]])
    floor_w = wl[0] + 1.0 if g.floored else 0.0
    return UpperCoefficients(gamma, delta, c, floor_w)


def r_for_epsilon(interval: IntervalBounds, eps: float, C: float = R_CONSTANT) -> int:
    """``ceil(C sqrt(lambda / eps))``, the starting grid size of the sandwich driver."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not interval.finite:
        raise InfiniteDivergence("lambda is infinite: D(N||M) = +inf")
    return max(1, math.ceil(C * math.sqrt(interval.lam / eps)))


def scalar_lower(p: float, q: float, nodes) -> float:
    """Discretized lower functional for commuting scalars (rho = p, sigma = q)."""
    t = np.asarray(nodes)
    a = -np.log(t[1:] / t[:-1])
    b = np.diff(t)
    return float(np.sum(np.maximum(a * p + b * q, 0.0)))


def scalar_upper(p: float, q: float, nodes) -> float:
    """Chord overestimate of ``int_{t_0}^{t_r} max(qs - p, 0) ds/s``."""
    t = np.asarray(nodes)
    out = 0.0
    for k in range(t.size - 1):
        wl, wr = chord_weights(t[k], t[k + 1])
        out += wl * max(q * t[k] - p, 0.0) + wr * max(q * t[k + 1] - p, 0.0)
    return out
