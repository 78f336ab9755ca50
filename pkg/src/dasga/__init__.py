"""Graph-spectral domain adaptation: transfer labels between two graphs by
aligning their Laplacian eigenbases."""

from .align import (
    AlignmentParams,
    AlignmentProblem,
    AlignmentResult,
    AlignmentState,
    LabelSet,
    decode_labels,
    run,
    run_one_vs_all,
)
from .baselines import nearest_neighbor, ssl_gaussian_fields
from .estimator import DASGAClassifier, DASGARegressor
from .exceptions import ConfigurationError, InvalidParameterError, NumericalFailure, ParseError
from .graph import Graph, Laplacian, build_knn_graph, laplacian, load_edge_list, variation
from .spectral import SpectralBasis, eigendecompose, gft, igft

__version__ = "0.1.0"

__all__ = [
    "AlignmentParams",
    "AlignmentProblem",
    "AlignmentResult",
    "AlignmentState",
    "ConfigurationError",
    "DASGAClassifier",
    "DASGARegressor",
    "Graph",
    "InvalidParameterError",
    "LabelSet",
    "Laplacian",
    "NumericalFailure",
    "ParseError",
    "SpectralBasis",
    "build_knn_graph",
    "decode_labels",
    "eigendecompose",
    "gft",
    "igft",
    "laplacian",
    "load_edge_list",
    "nearest_neighbor",
    "run",
    "run_one_vs_all",
    "ssl_gaussian_fields",
    "variation",
]
