"""scikit-learn style wrappers around the alignment pipeline.

Both estimators are transductive on the target domain: ``fit`` receives the
target samples (partially labeled) together with a fully or partially
labeled source domain, and ``transduction_`` holds the inferred target
labels. ``predict`` maps new points to the label of their nearest fitted
target sample.
"""

import numbers

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .align import (
    AlignmentParams,
    AlignmentProblem,
    LabelSet,
    pick_matched_pairs,
    run,
    run_one_vs_all,
)
from .exceptions import ConfigurationError, InvalidParameterError
from .graph import Graph, build_knn_graph

__all__ = ["DASGAClassifier", "DASGARegressor"]


class _DASGABase(BaseEstimator):
    def __init__(self, n_components=9, mu1=0.1, mu2=1.0, sigma=None, n_neighbors=25,
                 kernel_scale="auto", affinity="knn", n_pairs=None, max_iter=50, tol=1e-6,
                 transform_starts=4, random_state=0):
        self.n_components = n_components
        self.mu1 = mu1
        self.mu2 = mu2
        self.sigma = sigma
        self.n_neighbors = n_neighbors
        self.kernel_scale = kernel_scale
        self.affinity = affinity
        self.n_pairs = n_pairs
        self.max_iter = max_iter
        self.tol = tol
        self.transform_starts = transform_starts
        self.random_state = random_state

    def _params(self):
        return AlignmentParams(
            mu1=self.mu1, mu2=self.mu2, sigma=self.sigma, R=self.n_components,
            max_outer_iters=self.max_iter, outer_tol=self.tol, n_pairs=self.n_pairs,
            transform_starts=self.transform_starts,
        )

    def _seed(self):
        if isinstance(self.random_state, numbers.Integral):
            return int(self.random_state)
        return int(check_random_state(self.random_state).randint(np.iinfo(np.int32).max))

    def _graph(self, X, name):
        if self.affinity == "knn":
            X = check_array(X, dtype=np.float64, ensure_all_finite=True, input_name=name)
            return X, build_knn_graph(X, self.n_neighbors, self.kernel_scale)
        if self.affinity == "precomputed":
            if isinstance(X, Graph):
                return None, X
            W = sp.csr_matrix(check_array(X, accept_sparse="csr", dtype=np.float64,
                                          input_name=name))
            return None, Graph(W.shape[0], W)
        raise InvalidParameterError(
            f"affinity must be 'knn' or 'precomputed', got {self.affinity!r}"
        )

    def _problem(self, X, X_source, labels_s, labels_t):
        Xt, gt = self._graph(X, "X")
        _, gs = self._graph(X_source, "X_source")
        self.fit_X_ = Xt
        self.n_features_in_ = None if Xt is None else Xt.shape[1]
        return AlignmentProblem.from_graphs(gs, gt, labels_s, labels_t, self._params())

    def predict(self, X=None):
        """Labels for ``X`` from their nearest fitted target sample.

        With ``X=None`` (or a precomputed affinity) the transductive labels
        of the fitted target samples are returned.
        """
        check_is_fitted(self, "transduction_")
        if X is None:
            return self.transduction_.copy()
        if self.fit_X_ is None:
            raise InvalidParameterError(
                "out-of-sample prediction needs feature inputs; use predict() without X"
            )
        X = check_array(X, dtype=np.float64, ensure_all_finite=True)
        if X.shape[1] != self.n_features_in_:
            raise InvalidParameterError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return self.transduction_[np.argmin(cdist(X, self.fit_X_), axis=1)]


class DASGAClassifier(ClassifierMixin, _DASGABase):
    """Transductive classifier that transfers source labels through aligned
    graph Fourier bases.

    Parameters
    ----------
    n_components : int, default=9
        Number of low-frequency Fourier vectors per graph.
    mu1, mu2 : float
        Weights of the coefficient-mismatch and off-diagonal transform
        penalties.
    sigma : float, optional
        Width of the off-diagonal penalty; ``n_components / 4`` if omitted.
    n_neighbors : int, default=25
        Neighbours per node of the k-NN graphs.
    kernel_scale : float or "auto"
        Gaussian kernel width for edge weights.
    affinity : {"knn", "precomputed"}
        With ``"precomputed"`` the data arguments are symmetric weight
        matrices (or :class:`Graph` objects) instead of feature rows.
    n_pairs : int, optional
        Matched node pairs used to initialise the transform.
    max_iter, tol : outer-loop iteration cap and relative tolerance.
    transform_starts : int
        Extra random restarts allowed per transform update.
    random_state : int, RandomState or None

    Attributes
    ----------
    classes_ : ndarray
    transduction_ : ndarray of shape (n_target,)
    label_function_ : ndarray of shape (n_target, n_classes)
        Target class scores; the argmax gives ``transduction_``.
    results_ : list of AlignmentResult
    """

    def fit(self, X, y, X_source, y_source):
        """Fit on target samples ``X`` (``y == -1`` marks unlabeled samples)
        and source samples ``X_source`` (same convention)."""
        y = np.asarray(y)
        y_source = np.asarray(y_source)
        labeled_t = np.flatnonzero(y != -1)
        labeled_s = np.flatnonzero(y_source != -1)
        if labeled_s.size == 0 or labeled_t.size == 0:
            raise ConfigurationError("both domains need at least one labeled sample")
        self.classes_ = np.unique(np.concatenate([y_source[labeled_s], y[labeled_t]]))
        if self.classes_.size < 2:
            raise ConfigurationError("at least two classes are required")
        # class codes become their positions so LabelSet values are numeric
        code = {c: k for k, c in enumerate(self.classes_.tolist())}
        ls = LabelSet(labeled_s, np.array([code[v] for v in y_source[labeled_s].tolist()],
                                           dtype=np.float64), "one-vs-all")
        lt = LabelSet(labeled_t, np.array([code[v] for v in y[labeled_t].tolist()],
                                           dtype=np.float64), "one-vs-all")
        problem = self._problem(X, X_source, ls, lt)
        if y.shape[0] != problem.basis_t.n or y_source.shape[0] != problem.basis_s.n:
            raise InvalidParameterError("label vectors must match the sample counts")
        scores_t, _, results = run_one_vs_all(
            problem, np.arange(self.classes_.size, dtype=np.float64), seed=self._seed()
        )
        self.label_function_ = scores_t
        self.transduction_ = self.classes_[np.argmax(scores_t, axis=1)]
        self.results_ = results
        return self

    def decision_function(self, X=None):
        """Class scores of the nearest fitted target samples."""
        check_is_fitted(self, "label_function_")
        if X is None:
            return self.label_function_.copy()
        X = check_array(X, dtype=np.float64, ensure_all_finite=True)
        return self.label_function_[np.argmin(cdist(X, self.fit_X_), axis=1)]


class DASGARegressor(RegressorMixin, _DASGABase):
    """Transductive regressor on the target graph; ``NaN`` marks unknown
    values in ``y`` and ``y_source``. Parameters as in
    :class:`DASGAClassifier`.

    Attributes
    ----------
    transduction_ : ndarray of shape (n_target,)
    result_ : AlignmentResult
    """

    def fit(self, X, y, X_source, y_source):
        y = np.asarray(y, dtype=np.float64)
        y_source = np.asarray(y_source, dtype=np.float64)
        labeled_t = np.flatnonzero(~np.isnan(y))
        labeled_s = np.flatnonzero(~np.isnan(y_source))
        if labeled_s.size == 0 or labeled_t.size == 0:
            raise ConfigurationError("both domains need at least one labeled sample")
        ls = LabelSet(labeled_s, y_source[labeled_s], "regression")
        lt = LabelSet(labeled_t, y[labeled_t], "regression")
        problem = self._problem(X, X_source, ls, lt)
        if y.shape[0] != problem.basis_t.n or y_source.shape[0] != problem.basis_s.n:
            raise InvalidParameterError("label vectors must match the sample counts")
        # matched pairs need shared values; regression pairs nodes on rounded labels
        pairs_ls = LabelSet(labeled_s, np.rint(y_source[labeled_s]), "regression")
        pairs_lt = LabelSet(labeled_t, np.rint(y[labeled_t]), "regression")
        pairs = pick_matched_pairs(pairs_ls, pairs_lt, self.n_pairs, self._seed())
        self.result_ = run(problem, seed=self._seed(), pairs=pairs)
        self.transduction_ = self.result_.f_t
        return self
