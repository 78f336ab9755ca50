"""Reference predictors: harmonic (Gaussian fields) SSL and 1-NN."""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu
from scipy.spatial.distance import cdist

from ._validation import check_features
from .exceptions import ConfigurationError, InvalidParameterError
from .graph import connected_components, laplacian

__all__ = [
    "BaselinePrediction",
    "ssl_gaussian_fields",
    "ssl_one_vs_all",
    "nearest_neighbor",
]


@dataclass(frozen=True)
class BaselinePrediction:
    f: np.ndarray
    method: str


def ssl_gaussian_fields(g, labels):
    """Harmonic interpolation of the observed labels over the graph.

    The unlabeled values solve ``L_uu f_u = -L_ul f_l``, which minimises
    ``f^T L f`` with ``f`` pinned to the labels. Raises
    ``ConfigurationError`` when a connected component carries no label.
    """
    labels.check_bounds(g.n)
    if len(labels) == 0:
        raise ConfigurationError("harmonic SSL needs at least one label")
    lab = labels.indices
    is_labeled = np.zeros(g.n, dtype=bool)
    is_labeled[lab] = True
    for comp in connected_components(g):
        if not is_labeled[comp].any():
            raise ConfigurationError(
                f"connected component containing nodes {comp[:5].tolist()}"
                f"{'...' if comp.size > 5 else ''} has no labeled node"
            )
    f = np.empty(g.n)
    f[lab] = labels.values
    unl = np.flatnonzero(~is_labeled)
    if unl.size:
        L = laplacian(g).matrix.tocsr()
        L_uu = L[unl][:, unl].tocsc()
        rhs = -(L[unl][:, lab] @ labels.values)
        f[unl] = splu(L_uu).solve(rhs)
    return BaselinePrediction(f, "ssl")


def ssl_one_vs_all(g, labels, classes):
    """Harmonic scores for each class indicator (``+1`` in class, ``-1`` else)."""
    cols = []
    for c in classes:
        ind = type(labels)(labels.indices, np.where(labels.values == c, 1.0, -1.0), "binary")
        cols.append(ssl_gaussian_fields(g, ind).f)
    return np.column_stack(cols)


def nearest_neighbor(features_train, labels_train, features_test):
    """Label of the Euclidean-nearest training sample (lowest index on ties)."""
    Xtr = check_features(features_train, "features_train")
    Xte = check_features(features_test, "features_test")
    ytr = np.asarray(labels_train)
    if ytr.shape[0] != Xtr.shape[0]:
        raise InvalidParameterError("one training label per training sample is required")
    if Xtr.shape[1] != Xte.shape[1]:
        raise InvalidParameterError("train and test dimensions differ")
    return ytr[np.argmin(cdist(Xte, Xtr), axis=1)]
