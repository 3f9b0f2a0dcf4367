"""Certified two-sided SDP bounds on the quantum relative entropy of channels."""

from .bounds import (BoundRequest, BoundResult, EnergyConstraint, EnergyInfeasible,
                     DegeneratePairInstance, evaluate_at_state, degenerate_pair, lower_bound, sandwich,
                     upper_bound)
from .channels import (ChannelError, ChoiMatrix, KrausChannel, amplitude_damping, builtin,
                       choi_from_kraus, classical_channel, conjugated_output, dephasing,
                       depolarizing, identity, load_channel, replacer)
from .grid import (Grid, InfiniteDivergence, build_grid, lower_coefficients, r_for_epsilon,
                   upper_coefficients)
from .oracle import brute_force_channel_re, classical_kl_channel, integral_quadrature, umegaki
from .resource import (FreeOptResult, FreeSetSpec, free_divergence, min_over_free_upper,
                       replacer_program)
from .spectral import IntervalBounds, dmax, dmax_sdp, interval_for_pair

__all__ = [
    "BoundRequest", "BoundResult", "EnergyConstraint", "EnergyInfeasible", "DegeneratePairInstance",
    "evaluate_at_state", "degenerate_pair", "lower_bound", "sandwich", "upper_bound",
    "ChannelError", "ChoiMatrix", "KrausChannel", "amplitude_damping", "builtin",
    "choi_from_kraus", "classical_channel", "conjugated_output", "dephasing", "depolarizing",
    "identity", "load_channel", "replacer",
    "Grid", "InfiniteDivergence", "build_grid", "lower_coefficients", "r_for_epsilon",
    "upper_coefficients",
    "brute_force_channel_re", "classical_kl_channel", "integral_quadrature", "umegaki",
    "FreeOptResult", "FreeSetSpec", "free_divergence", "min_over_free_upper", "replacer_program",
    "IntervalBounds", "dmax", "dmax_sdp", "interval_for_pair",
]
