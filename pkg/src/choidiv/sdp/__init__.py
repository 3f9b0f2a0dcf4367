"""Block-structured SDP modelling layer and embedded interior-point solver."""

from .model import Affine, Variable, kron, partial_trace, partial_transpose
from .problem import (SdpProblem, SdpSolution, SolverError, StandardForm, Status,
                      embed_hermitian, embedded_trace, unembed)

__all__ = [
    "Affine", "Variable", "kron", "partial_trace", "partial_transpose",
    "SdpProblem", "SdpSolution", "SolverError", "StandardForm", "Status",
    "embed_hermitian", "embedded_trace", "unembed",
]
