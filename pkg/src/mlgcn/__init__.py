"""Graph classification with learned combinations of graph laplacians."""

from .config import RunConfig, TrainConfig
from .errors import DataError, MLGCNError, NumericalError, ParameterError, UsageError
from .graph import Graph, LaplacianSpec, build_laplacian, build_stack, read_graph, write_graph
from .model import Architecture, ModelState, Sample, forward

__version__ = "0.1.0"

__all__ = [
    "Architecture", "DataError", "Graph", "LaplacianSpec", "MLGCNError", "ModelState", "NumericalError",
    "ParameterError", "RunConfig", "Sample", "TrainConfig", "UsageError", "build_laplacian", "build_stack",
    "forward", "read_graph", "write_graph",
]
