"""QAOA and QAOA+ for independent sets on sparse random graphs.

Exact dense simulation for small graphs, light-cone evaluation of local
expectations on large sparse graphs, the p=1.5 ensemble calculation, overlap
statistics of large independent sets, and branching-process tail checks.
"""

__version__ = "0.1.0"

from .errors import (
    ConeOverflowError,
    EnumerationCapError,
    GraphFormatError,
    ParameterError,
    QubitLimitError,
)
from .graphs import EnsembleSpec, Graph, InterpolationPath, sample_graph
from .statevector import CostModel, PureState, QaoaParams

__all__ = [
    "ConeOverflowError",
    "CostModel",
    "EnsembleSpec",
    "EnumerationCapError",
    "Graph",
    "GraphFormatError",
    "InterpolationPath",
    "ParameterError",
    "PureState",
    "QaoaParams",
    "QubitLimitError",
    "sample_graph",
]
