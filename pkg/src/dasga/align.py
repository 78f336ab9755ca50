"""Spectral graph alignment for domain adaptation (DASGA).

The source label function is written as ``f_s = U_s a_s`` and the target
one as ``f_t = U_t T a_t`` with reduced Fourier bases ``U_s``, ``U_t``. The
objective

    ||S_s U_s a_s - y_s||^2 + ||S_t U_t T a_t - y_t||^2
        + mu1 ||a_s - a_t||^2 + mu2 ||M * T||_F^2

is minimised subject to unit-norm columns of ``T`` by alternating a
closed-form coefficient update with an SQP solve for ``T``.
"""

import json
import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import sqp
from ._validation import check_indices, check_positive
from .exceptions import ConfigurationError, InvalidParameterError, NumericalFailure
from .spectral import SpectralBasis, eigendecompose
from .graph import laplacian

__all__ = [
    "LabelSet",
    "AlignmentParams",
    "AlignmentProblem",
    "AlignmentState",
    "AlignmentResult",
    "BoundConstants",
    "penalty_mask",
    "pick_matched_pairs",
    "init_transform",
    "objective",
    "update_coefficients",
    "update_transform",
    "run",
    "run_one_vs_all",
    "decode_labels",
    "variation_gap_bound",
]

logger = logging.getLogger(__name__)

_ENCODINGS = ("binary", "one-vs-all", "regression")


@dataclass(frozen=True)
class LabelSet:
    """Observed labels ``values[k]`` on nodes ``indices[k]``."""

    indices: np.ndarray
    values: np.ndarray
    encoding: str = "binary"

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.ndim != 1 or (idx.size and not np.issubdtype(idx.dtype, np.integer)):
            raise InvalidParameterError("label indices must be a 1-D integer array")
        if idx.size and idx.min() < 0:
            raise InvalidParameterError("label indices must be nonnegative")
        if np.unique(idx).size != idx.size:
            raise InvalidParameterError("label indices must be distinct")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != idx.shape:
            raise InvalidParameterError("one label value is needed per index")
        if self.encoding not in _ENCODINGS:
            raise InvalidParameterError(f"unknown encoding {self.encoding!r}")
        object.__setattr__(self, "indices", idx.astype(np.intp))
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.indices.size

    def check_bounds(self, n):
        check_indices(self.indices, n, "label indices")


@dataclass(frozen=True)
class AlignmentParams:
    """Hyperparameters.

    ``sigma=None`` means ``R / 4``. ``n_pairs=None`` means
    ``min(#same-class labeled pairs, 2 * #classes)``. ``transform_starts``
    is the number of random restarts the transform update may add when the
    warm-started SQP solution is not certified globally optimal.
    """

    mu1: float = 0.1
    mu2: float = 1.0
    sigma: float = None
    R: int = 9
    max_outer_iters: int = 50
    outer_tol: float = 1e-6
    n_pairs: int = None
    transform_starts: int = 4

    def __post_init__(self):
        check_positive(self.mu1, "mu1")
        check_positive(self.mu2, "mu2")
        check_positive(self.R, "R", integer=True)
        if self.R < 2:
            raise InvalidParameterError("R must be at least 2")
        if self.sigma is not None:
            check_positive(self.sigma, "sigma")
        check_positive(self.max_outer_iters, "max_outer_iters", integer=True)
        check_positive(self.outer_tol, "outer_tol")
        if self.n_pairs is not None:
            check_positive(self.n_pairs, "n_pairs", integer=True)
        if self.transform_starts < 0:
            raise InvalidParameterError("transform_starts must be nonnegative")

    @property
    def mask_scale(self):
        return self.sigma if self.sigma is not None else self.R / 4.0


def penalty_mask(R, sigma):
    """``M[i, j] = exp((i - j)**2 / sigma**2)``; symmetric, ones on the diagonal."""
    check_positive(R, "R", integer=True)
    check_positive(sigma, "sigma")
    i = np.arange(1, R + 1, dtype=np.float64)
    return np.exp((i[:, None] - i[None, :]) ** 2 / sigma**2)


@dataclass(frozen=True)
class AlignmentProblem:
    """Reduced bases, observed labels on both graphs and hyperparameters."""

    basis_s: SpectralBasis
    basis_t: SpectralBasis
    labels_s: LabelSet
    labels_t: LabelSet
    params: AlignmentParams = field(default_factory=AlignmentParams)

    def __post_init__(self):
        R = self.params.R
        for name, basis in (("source", self.basis_s), ("target", self.basis_t)):
            if basis.R < R:
                raise InvalidParameterError(f"{name} basis has {basis.R} < R={R} vectors")
        if self.basis_s.R != R:
            object.__setattr__(self, "basis_s", self.basis_s.truncate(R))
        if self.basis_t.R != R:
            object.__setattr__(self, "basis_t", self.basis_t.truncate(R))
        self.labels_s.check_bounds(self.basis_s.n)
        self.labels_t.check_bounds(self.basis_t.n)

    @classmethod
    def from_graphs(cls, graph_s, graph_t, labels_s, labels_t, params=None):
        params = params or AlignmentParams()
        basis_s = eigendecompose(laplacian(graph_s), params.R)
        basis_t = eigendecompose(laplacian(graph_t), params.R)
        return cls(basis_s, basis_t, labels_s, labels_t, params)

    @property
    def R(self):
        return self.params.R

    @property
    def mask(self):
        return penalty_mask(self.R, self.params.mask_scale)

    def with_labels(self, labels_s, labels_t):
        return replace(self, labels_s=labels_s, labels_t=labels_t)

    def with_params(self, **changes):
        return replace(self, params=replace(self.params, **changes))

    def labeled_source_rows(self):
        return self.basis_s.eigenvectors[self.labels_s.indices]

    def labeled_target_rows(self):
        return self.basis_t.eigenvectors[self.labels_t.indices]


@dataclass(frozen=True)
class AlignmentState:
    alpha_s: np.ndarray
    alpha_t: np.ndarray
    T: np.ndarray

    def to_dict(self):
        return {
            "alpha_s": self.alpha_s.tolist(),
            "alpha_t": self.alpha_t.tolist(),
            "T": self.T.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["alpha_s"], float), np.asarray(d["alpha_t"], float),
                   np.asarray(d["T"], float))


@dataclass
class AlignmentResult:
    """Output of :func:`run`.

    ``history`` holds the objective after every half-step (coefficient
    update, then transform update, repeated).
    """

    f_s: np.ndarray
    f_t: np.ndarray
    state: AlignmentState
    history: list
    iterations: int
    converged: bool
    pairs: list
    warnings: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(
            {
                "state": self.state.to_dict(),
                "history": self.history,
                "iterations": self.iterations,
                "converged": self.converged,
                "warnings": self.warnings,
            }
        )


def pick_matched_pairs(source_labels, target_labels, K=None, seed=0):
    """Draw ``K`` (source node, target node) pairs sharing a class label.

    Classes are visited round-robin in sorted order and each draw picks a
    labeled node of that class uniformly on both sides, so nodes may repeat.
    Classes labeled on the target side only are skipped with a warning.
    """
    rng = np.random.default_rng(seed)
    src_classes = set(np.unique(source_labels.values).tolist())
    members = []
    for c in np.unique(target_labels.values):
        if c not in src_classes:
            warnings.warn(f"class {c:g} has target labels but no source labels; skipped")
            continue
        members.append((
            source_labels.indices[source_labels.values == c],
            target_labels.indices[target_labels.values == c],
        ))
    if not members:
        raise ConfigurationError("no class is labeled on both graphs; cannot match nodes")
    available = sum(s.size * t.size for s, t in members)
    if K is None:
        K = min(available, 2 * len(members))
    check_positive(K, "K", integer=True)
    pairs = []
    for d in range(K):
        src, tgt = members[d % len(members)]
        pairs.append((int(src[rng.integers(src.size)]), int(tgt[rng.integers(tgt.size)])))
    return pairs


def init_transform(basis_s, basis_t, pairs):
    """Diagonal +-1 initial transform fixing the sign of each target vector.

    For target vector i the best source match ``j`` maximises
    ``|<u_s_j, u_t_i>|`` over the paired entries; ``T[i, i]`` takes the sign
    of that inner product (``+1`` when it is zero).
    """
    if basis_s.R != basis_t.R:
        raise InvalidParameterError("source and target bases must have the same size")
    if not pairs:
        raise InvalidParameterError("at least one matched pair is required")
    idx = np.asarray(pairs, dtype=np.intp)
    Us = basis_s.eigenvectors[idx[:, 0]]
    Ut = basis_t.eigenvectors[idx[:, 1]]
    C = Us.T @ Ut
    best = np.argmax(np.abs(C), axis=0)
    signs = np.sign(C[best, np.arange(C.shape[1])])
    signs[signs == 0] = 1.0
    return np.diag(signs)


def _terms(state, problem):
    Ps = problem.labeled_source_rows()
    Pt = problem.labeled_target_rows()
    rs = Ps @ state.alpha_s - problem.labels_s.values
    rt = Pt @ (state.T @ state.alpha_t) - problem.labels_t.values
    d = state.alpha_s - state.alpha_t
    MT = problem.mask * state.T
    p = problem.params
    return rs @ rs, rt @ rt, p.mu1 * (d @ d), p.mu2 * np.sum(MT * MT)


def objective(state, problem):
    """Value of the alignment objective at ``state``."""
    R = problem.R
    if state.alpha_s.shape != (R,) or state.alpha_t.shape != (R,) or state.T.shape != (R, R):
        raise InvalidParameterError("state dimensions do not match R")
    return float(sum(_terms(state, problem)))


def update_coefficients(state, problem):
    """Closed-form minimiser of the objective over ``(a_s, a_t)`` for fixed ``T``.

    Returns the pair and a list of warnings (non-empty when the linear
    system was singular and a least-squares solution was used).
    """
    if not np.all(np.isfinite(state.T)):
        raise NumericalFailure("transform matrix is not finite")
    mu1 = problem.params.mu1
    Ps = problem.labeled_source_rows()
    PtT = problem.labeled_target_rows() @ state.T
    ys, yt = problem.labels_s.values, problem.labels_t.values
    As = Ps.T @ Ps
    At = PtT.T @ PtT
    Bys = Ps.T @ ys
    Byt = PtT.T @ yt
    lhs = At @ As / mu1 + At + As
    rhs = At @ Bys / mu1 + Bys + Byt
    notes = []
    try:
        singular = np.linalg.cond(lhs) > 1e12
        if not singular:
            alpha_s = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError:
        singular = True
    if singular:
        msg = "coefficient system is singular; using a least-squares solution"
        warnings.warn(msg)
        notes.append(msg)
        alpha_s = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
    alpha_t = (As @ alpha_s) / mu1 + alpha_s - Bys / mu1
    return alpha_s, alpha_t, notes


def _transform_problem(state, problem):
    return sqp.QuadraticAlignProblem.from_alignment(
        problem.labeled_target_rows(), state.alpha_t, problem.labels_t.values,
        problem.mask, problem.params.mu2,
    )


def update_transform(state, problem, sqp_opts=None, seed=0):
    """Minimise the objective over unit-column ``T`` for fixed coefficients.

    The SQP search is warm-started from the incoming ``T``. If the result is
    worse than the incoming matrix, or the solver fails, the incoming matrix
    is kept so the outer iteration never increases the objective.
    """
    qp = _transform_problem(state, problem)
    t_old = sqp.vectorize(state.T)
    h_old = sqp.objective_h(qp, t_old)
    notes = []
    try:
        res = sqp.solve_global(qp, t_old, n_random=problem.params.transform_starts,
                               seed=seed, opts=sqp_opts)
    except NumericalFailure as exc:
        msg = f"transform update failed ({exc}); keeping previous T"
        logger.warning(msg)
        return state.T, None, [msg]
    if not res.converged:
        notes.append(f"SQP stopped after {res.iterations} iterations without converging")
    if res.objective <= h_old:
        return sqp.devectorize(res.t).copy(), res, notes
    notes.append("SQP did not improve the transform; keeping previous T")
    return state.T, res, notes


def _check_connected(basis, name):
    lam = basis.eigenvalues
    if lam[1] <= 1e-10 * max(1.0, lam[-1]):
        raise ConfigurationError(
            f"{name} graph is disconnected (second Laplacian eigenvalue {lam[1]:.3g})"
        )


def run(problem, seed=0, pairs=None, sqp_opts=None):
    """Alternating minimisation from the sign-matched initial transform.

    Parameters
    ----------
    problem : AlignmentProblem
    seed : int
        Seeds the matched-pair draw and the SQP restarts.
    pairs : list of (int, int), optional
        Matched (source, target) nodes for the initial transform. Drawn
        with :func:`pick_matched_pairs` when omitted.

    Returns
    -------
    AlignmentResult
    """
    _check_connected(problem.basis_s, "source")
    _check_connected(problem.basis_t, "target")
    if len(problem.labels_s) == 0 or len(problem.labels_t) == 0:
        raise ConfigurationError("both graphs need at least one labeled node")
    params = problem.params
    if pairs is None:
        pairs = pick_matched_pairs(problem.labels_s, problem.labels_t, params.n_pairs, seed)
    R = problem.R
    state = AlignmentState(np.zeros(R), np.zeros(R),
                           init_transform(problem.basis_s, problem.basis_t, pairs))
    history, notes = [], []
    converged = False
    prev = None
    it = 0
    for it in range(1, params.max_outer_iters + 1):
        a_s, a_t, w = update_coefficients(state, problem)
        notes.extend(w)
        state = AlignmentState(a_s, a_t, state.T)
        history.append(objective(state, problem))
        T, _, w = update_transform(state, problem, sqp_opts, seed=seed + it)
        notes.extend(w)
        state = AlignmentState(a_s, a_t, T)
        obj = objective(state, problem)
        if not np.isfinite(obj):
            raise NumericalFailure(f"objective became non-finite at iteration {it}")
        history.append(obj)
        if prev is not None and prev - obj <= params.outer_tol * max(abs(prev), 1e-300):
            converged = True
            break
        prev = obj

    f_s = problem.basis_s.eigenvectors @ state.alpha_s
    f_t = problem.basis_t.eigenvectors @ (state.T @ state.alpha_t)
    return AlignmentResult(f_s, f_t, state, history, it, converged, list(pairs), notes)


def run_one_vs_all(problem, classes, seed=0, sqp_opts=None):
    """One ``+-1`` run per class sharing a single matched-pair draw.

    ``problem`` carries the raw class codes in its label sets. Returns the
    target score matrix (``n_t x C``), the source score matrix and the
    per-class results. With two classes a single binary run is made and its
    scores are mirrored.
    """
    classes = np.asarray(classes)
    pairs = pick_matched_pairs(problem.labels_s, problem.labels_t, problem.params.n_pairs, seed)
    ls, lt = problem.labels_s, problem.labels_t

    def indicator(ls_, c):
        return LabelSet(ls_.indices, np.where(ls_.values == c, 1.0, -1.0), "binary")

    if classes.size == 2:
        c1 = classes[1]
        res = run(problem.with_labels(indicator(ls, c1), indicator(lt, c1)), seed, pairs, sqp_opts)
        return (np.column_stack([-res.f_t, res.f_t]),
                np.column_stack([-res.f_s, res.f_s]), [res])
    results = []
    for c in classes:
        sub = problem.with_labels(indicator(ls, c), indicator(lt, c))
        results.append(run(sub, seed, pairs, sqp_opts))
    scores_t = np.column_stack([r.f_t for r in results])
    scores_s = np.column_stack([r.f_s for r in results])
    return scores_t, scores_s, results


def decode_labels(f, encoding="binary", classes=None, clamp=None, round_to_int=False):
    """Turn label-function values into predictions.

    ``binary``: sign with 0 mapped to +1. ``one-vs-all``: ``f`` is an
    ``n x C`` score matrix and the argmax column is mapped through
    ``classes`` (defaults to ``0..C-1``). ``regression``: values are
    optionally clamped to ``clamp=(lo, hi)`` and rounded.
    """
    f = np.asarray(f, dtype=np.float64)
    if encoding == "binary":
        return np.where(f >= 0, 1, -1)
    if encoding == "one-vs-all":
        if f.ndim != 2:
            raise InvalidParameterError("one-vs-all decoding needs an n x C score matrix")
        idx = np.argmax(f, axis=1)
        return idx if classes is None else np.asarray(classes)[idx]
    if encoding == "regression":
        out = f.copy()
        if clamp is not None:
            out = np.clip(out, clamp[0], clamp[1])
        if round_to_int:
            out = np.rint(out)
        return out
    raise InvalidParameterError(f"unknown encoding {encoding!r}")


@dataclass(frozen=True)
class BoundConstants:
    delta: float
    lambda_R: float
    delta_alpha: float
    delta_T: float
    C: float


def variation_gap_bound(state, problem):
    """Compare the source/target variation gap with its theoretical bound.

    Returns ``(lhs, rhs, constants)`` where ``lhs`` is
    ``|f_s^T L_s f_s - f_t^T L_t f_t|`` evaluated in the eigenbasis and
    ``rhs = C^2 delta + 2 C lambda_R d_alpha + C^2 lambda_R (2 d_T + d_T^2)``.
    """
    lam_s = problem.basis_s.eigenvalues
    lam_t = problem.basis_t.eigenvalues
    a_s, a_t, T = state.alpha_s, state.alpha_t, state.T
    Ta = T @ a_t
    lhs = abs(float(a_s @ (lam_s * a_s)) - float(Ta @ (lam_t * Ta)))

    R = problem.R
    consts = BoundConstants(
        delta=float(np.max(np.abs(lam_s - lam_t))),
        lambda_R=float(max(lam_s[R - 1], lam_t[R - 1])),
        delta_alpha=float(np.linalg.norm(a_s - a_t)),
        delta_T=float(np.linalg.norm(T - np.eye(R), 2)),
        C=float(max(np.linalg.norm(a_s), np.linalg.norm(a_t))),
    )
    c = consts
    rhs = (c.C**2 * c.delta + 2 * c.C * c.lambda_R * c.delta_alpha
           + c.C**2 * c.lambda_R * (2 * c.delta_T + c.delta_T**2))
    return lhs, float(rhs), consts
