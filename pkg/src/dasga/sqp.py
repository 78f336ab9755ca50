"""Equality-constrained SQP for the transformation-matrix subproblem.

The subproblem is

    minimize    h(t) = ||A t - y||^2 + mu2 * ||F t||^2
    subject to  g_j(t) = sum_i T_ij^2 - 1 = 0,   j = 1..R

where ``t`` is the column-major vectorisation of the R x R matrix ``T`` and
``F`` is diagonal. The Lagrangian is ``h(t) - sum_j eta_j g_j(t)``.
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .exceptions import InvalidParameterError, NumericalFailure

__all__ = [
    "QuadraticAlignProblem",
    "SqpOptions",
    "SqpResult",
    "ConvergenceReport",
    "vectorize",
    "devectorize",
    "objective_h",
    "gradient_h",
    "hessian_h",
    "constraints",
    "lagrangian_hessian",
    "solve",
    "solve_global",
    "convergence_diagnostic",
    "write_trace_csv",
]

logger = logging.getLogger(__name__)


def vectorize(T):
    """Column-major vectorisation: ``t[j*R + i] = T[i, j]``."""
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise InvalidParameterError(f"expected a square matrix, got shape {T.shape}")
    return T.ravel(order="F")


def devectorize(t):
    t = np.asarray(t, dtype=np.float64)
    R = int(round(np.sqrt(t.size)))
    if t.ndim != 1 or R * R != t.size:
        raise InvalidParameterError(f"length {t.size} is not a perfect square")
    return t.reshape((R, R), order="F")


@dataclass(frozen=True)
class QuadraticAlignProblem:
    """Data of the vectorised transform subproblem.

    ``F`` is stored as its diagonal ``f_diag`` (length ``R**2``).
    """

    A: np.ndarray
    y: np.ndarray
    f_diag: np.ndarray
    mu2: float
    R: int

    def __post_init__(self):
        R2 = self.R * self.R
        if self.A.ndim != 2 or self.A.shape[1] != R2:
            raise InvalidParameterError(f"A must have {R2} columns, got {self.A.shape}")
        if self.y.shape != (self.A.shape[0],):
            raise InvalidParameterError("y length must match the rows of A")
        if self.f_diag.shape != (R2,):
            raise InvalidParameterError(f"F diagonal must have length {R2}")
        if self.mu2 <= 0:
            raise InvalidParameterError("mu2 must be positive")

    @classmethod
    def from_alignment(cls, P, alpha_t, y, mask, mu2):
        """Build the problem from ``P = S^t U^t`` (labeled rows of the reduced
        target basis), fixed target coefficients, labels and penalty mask."""
        P = np.asarray(P, dtype=np.float64)
        alpha_t = np.asarray(alpha_t, dtype=np.float64)
        R = P.shape[1]
        # block j of the columns is alpha_t[j] * P, i.e. A_{l,(j,i)} = P_{li} alpha_j
        A = np.kron(alpha_t.reshape(1, R), P)
        return cls(A, np.asarray(y, dtype=np.float64), vectorize(mask), float(mu2), R)

    @property
    def F(self):
        return np.diag(self.f_diag)


def objective_h(problem, t):
    r = problem.A @ t - problem.y
    Ft = problem.f_diag * t
    return float(r @ r + problem.mu2 * (Ft @ Ft))


def gradient_h(problem, t):
    A = problem.A
    return 2.0 * (A.T @ (A @ t) + problem.mu2 * problem.f_diag**2 * t) - 2.0 * A.T @ problem.y


def hessian_h(problem):
    """Constant Hessian ``2 (A^T A + mu2 F^T F)``."""
    A = problem.A
    H = 2.0 * (A.T @ A)
    H[np.diag_indices_from(H)] += 2.0 * problem.mu2 * problem.f_diag**2
    return H


def constraints(t, R):
    """Unit-column residuals ``g`` and their Jacobian (shape ``(R, R**2)``)."""
    T = devectorize(t)
    if T.shape[0] != R:
        raise InvalidParameterError(f"t has block size {T.shape[0]}, expected {R}")
    g = np.sum(T * T, axis=0) - 1.0
    J = np.zeros((R, R * R))
    for j in range(R):
        J[j, j * R:(j + 1) * R] = 2.0 * T[:, j]
    return g, J


def _constraint_curvature(eta, R):
    return np.repeat(2.0 * np.asarray(eta, dtype=np.float64), R)


def lagrangian_hessian(problem, eta, H=None):
    """Hessian of ``h - sum_j eta_j g_j``; ``eta_j`` acts on column block j."""
    if H is None:
        H = hessian_h(problem)
    W = H.copy()
    W[np.diag_indices_from(W)] -= _constraint_curvature(eta, problem.R)
    return W


def _ls_multipliers(grad, t, R):
    # eta minimising ||grad - J^T eta||; J is block diagonal so this is per block
    G = devectorize(grad)
    T = devectorize(t)
    denom = 2.0 * np.sum(T * T, axis=0)
    denom[denom == 0] = 1.0
    return np.sum(G * T, axis=0) / denom


def _normalize_columns(t, R):
    T = devectorize(t).copy()
    norms = np.linalg.norm(T, axis=0)
    zero = norms == 0
    if zero.any():
        # a vanished column is reset to its canonical unit vector
        T[:, zero] = 0.0
        T[np.flatnonzero(zero), np.flatnonzero(zero)] = 1.0
        norms[zero] = 1.0
    return vectorize(T / norms)


@dataclass
class SqpOptions:
    """Solver settings.

    ``tol`` bounds both ``||g||_inf`` and the relative stationarity residual
    ``||grad h - J^T eta|| / (1 + ||grad h(t0)||)``.
    """

    max_iter: int = 100
    tol: float = 1e-6
    armijo: float = 1e-4
    max_backtracks: int = 40
    reg_start: float = 1e-10
    reg_max: float = 1e-4


@dataclass
class SqpResult:
    """``trace`` rows are ``(iteration, h, max |g|, stationarity residual)``;
    ``merit_steps`` holds the merit value before and after each accepted step."""

    t: np.ndarray
    eta: np.ndarray
    kkt_residual: float
    constraint_residual: float
    iterations: int
    converged: bool
    objective: float
    trace: list = field(default_factory=list)
    certified: bool = False
    starts: int = 1
    merit_steps: list = field(default_factory=list)

    @property
    def T(self):
        return devectorize(self.t)


def _solve_kkt(W, J, rhs, opts):
    # symmetric form [[W, J^T], [J, 0]] [dt; -eta] = rhs, equilibrated before the
    # conditioning test since the mask makes raw entries span many decades
    n, m = W.shape[0], J.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = W
    K[:n, n:] = J.T
    K[n:, :n] = J
    shift = 0.0
    while True:
        Kr = K
        if shift:
            Kr = K.copy()
            Kr[np.arange(n), np.arange(n)] += shift
            Kr[np.arange(n, n + m), np.arange(n, n + m)] -= shift
        d = 1.0 / np.sqrt(np.maximum(np.max(np.abs(Kr), axis=1), 1e-300))
        Ks = Kr * d[:, None] * d[None, :]
        lu, piv, info = lapack.dgetrf(Ks)
        if info == 0:
            rcond, _ = lapack.dgecon(lu, np.linalg.norm(Ks, 1), norm="1")
            if rcond > 1e-12:
                sol, _ = lapack.dgetrs(lu, piv, d * rhs)
                sol = d * sol
                if np.all(np.isfinite(sol)):
                    return sol[:n], -sol[n:]
        shift = opts.reg_start if shift == 0.0 else 2.0 * shift
        if shift > opts.reg_max:
            raise NumericalFailure("KKT system is singular even after regularisation")


def solve(problem, t0, opts=None):
    """Run Newton-KKT SQP from the feasible start ``t0``.

    Each iteration solves

        [ W  -J^T ] [dt  ]   [-grad h]
        [ J    0  ] [eta+] = [  -g   ]

    with ``W`` the Lagrangian Hessian, then backtracks on the l1 merit
    function ``h + rho * ||g||_1``. A rejected trial point is retried after
    column renormalisation (a second-order correction) before halving.
    Curvature that is not positive along ``dt`` is fixed by shifting ``W``.

    The returned iterate always has exactly unit-norm columns. When the
    iteration cap is hit, the best feasible iterate seen is returned with
    ``converged=False``.
    """
    opts = opts or SqpOptions()
    R = problem.R
    t = np.asarray(t0, dtype=np.float64).copy()
    if t.shape != (R * R,):
        raise InvalidParameterError(f"t0 must have length {R * R}")
    g, _ = constraints(t, R)
    if np.max(np.abs(g)) > 1e-6:
        raise InvalidParameterError("t0 must have unit-norm columns (within 1e-6)")

    H = hessian_h(problem)
    h_scale = max(1.0, float(np.max(np.abs(np.diag(H)))))
    grad0 = gradient_h(problem, t)
    stat_tol = opts.tol * (1.0 + np.linalg.norm(grad0))
    eta = np.zeros(R)
    rho = 1.0
    trace = []
    merit_steps = []
    best_t, best_h = t.copy(), objective_h(problem, t)

    def status(t):
        grad = gradient_h(problem, t)
        g, J = constraints(t, R)
        eta_ls = _ls_multipliers(grad, t, R)
        return grad, g, J, eta_ls, float(np.linalg.norm(grad - J.T @ eta_ls))

    converged = False
    it = 0
    for it in range(opts.max_iter + 1):
        grad, g, J, eta_ls, stat = status(t)
        h = objective_h(problem, t)
        cres = float(np.max(np.abs(g)))
        trace.append((it, h, cres, stat))
        if cres <= 1e-6 and h < best_h:
            best_t, best_h = t.copy(), h
        if stat <= stat_tol and cres <= opts.tol:
            tn = _normalize_columns(t, R)
            _, gn, _, _, statn = status(tn)
            if statn <= stat_tol:
                t = tn
                converged = True
                break
            t = tn
            continue
        if it == opts.max_iter:
            break

        W = lagrangian_hessian(problem, eta, H)
        shift = 0.0
        for _ in range(60):
            Ws = W if shift == 0.0 else W + shift * np.eye(W.shape[0])
            dt, eta_new = _solve_kkt(Ws, J, np.concatenate([-grad, -g]), opts)
            rho = max(rho, float(np.max(np.abs(eta_new))) + 1.0)
            curv = float(dt @ Ws @ dt)
            deriv = float(grad @ dt) - rho * float(np.sum(np.abs(g)))
            if curv > 1e-12 * float(np.abs(np.diag(Ws)) @ (dt * dt)) and deriv < 0:
                break
            if np.linalg.norm(dt) <= 1e-15 * (1 + np.linalg.norm(t)):
                break
            shift = 1e-8 * h_scale if shift == 0.0 else 4.0 * shift
        else:
            raise NumericalFailure("could not obtain a descent direction")

        def merit(x):
            gx, _ = constraints(x, R)
            return objective_h(problem, x) + rho * float(np.sum(np.abs(gx)))

        phi0 = merit(t)
        step = 1.0
        accepted = None
        for k in range(opts.max_backtracks):
            cand = t + step * dt
            if merit(cand) <= phi0 + opts.armijo * step * deriv:
                accepted = cand
                break
            soc = _normalize_columns(cand, R)
            if merit(soc) <= phi0 + opts.armijo * step * deriv:
                accepted = soc
                break
            step *= 0.5
        if accepted is None:
            logger.debug("SQP line search stalled at iteration %d", it)
            break
        merit_steps.append((phi0, merit(accepted)))
        logger.debug("SQP it=%d h=%.6g step=%.3g shift=%.3g rho=%.3g |dt|=%.3g",
                     it, h, step, shift, rho, np.linalg.norm(dt))
        t = accepted
        eta = eta_new

    if not converged:
        t = best_t
    grad, g, J, eta_ls, stat = status(t)
    return SqpResult(
        t=t,
        eta=eta_ls,
        kkt_residual=stat,
        constraint_residual=float(np.max(np.abs(g))),
        iterations=it,
        converged=converged,
        objective=objective_h(problem, t),
        trace=trace,
        merit_steps=merit_steps,
    )


@dataclass(frozen=True)
class ConvergenceReport:
    """Local convergence check at an SQP solution.

    ``condition_holds`` is ``mu2 > eta_j`` for every j, the sufficient
    condition for a positive definite Lagrangian Hessian; ``hessian_pd`` is
    the verdict of a dense eigensolve of that Hessian (``None`` when no
    problem was supplied).
    """

    condition_holds: bool
    hessian_pd: bool
    min_eigenvalue: float
    max_eta: float


def convergence_diagnostic(result, mu2, problem=None):
    """Check ``mu2 > eta_j`` at ``result`` and, given the ``problem``, the
    definiteness of the Lagrangian Hessian there."""
    eta = np.asarray(result.eta, dtype=np.float64)
    hessian_pd = min_eig = None
    if problem is not None:
        min_eig = float(np.linalg.eigvalsh(lagrangian_hessian(problem, eta))[0])
        hessian_pd = min_eig > 0.0
    return ConvergenceReport(
        condition_holds=bool(np.all(mu2 > eta)),
        hessian_pd=hessian_pd,
        min_eigenvalue=min_eig,
        max_eta=float(eta.max()) if eta.size else 0.0,
    )


def _is_certified(problem, eta):
    # a PD Lagrangian Hessian makes L(., eta) strictly convex, so a feasible
    # stationary point is then the global constrained minimiser
    W = lagrangian_hessian(problem, eta)
    try:
        np.linalg.cholesky(W)
    except np.linalg.LinAlgError:
        return False
    return True


def _sign_starts(T0):
    R = T0.shape[1]
    if R <= 4:
        patterns = itertools.product((1.0, -1.0), repeat=R)
        next(patterns)
        for s in patterns:
            yield T0 * np.array(s)
    else:
        for j in range(R):
            T = T0.copy()
            T[:, j] *= -1.0
            yield T


def solve_global(problem, t0, n_random=20, seed=0, opts=None):
    """Multistart wrapper around :func:`solve`.

    Starts are tried in a fixed order: ``t0``; column sign flips of ``t0``
    (all patterns for R <= 4, single flips otherwise); then ``n_random``
    random unit-column matrices drawn from ``seed``. The search stops at the
    first converged point whose Lagrangian Hessian is positive definite,
    which certifies global optimality. Otherwise the lowest-objective
    converged point is returned (falling back to any point if none
    converged).
    """
    R = problem.R
    T0 = devectorize(np.asarray(t0, dtype=np.float64))
    rng = np.random.default_rng(seed)

    def starts():
        yield T0
        yield from _sign_starts(T0)
        for _ in range(n_random):
            X = rng.standard_normal((R, R))
            yield X / np.linalg.norm(X, axis=0)

    best = None
    count = 0
    for T in starts():
        count += 1
        res = solve(problem, vectorize(T), opts)
        if res.converged and _is_certified(problem, res.eta):
            res.certified = True
            best = res
            break
        if best is None or (res.converged, -res.objective) > (best.converged, -best.objective):
            best = res
    best.starts = count
    return best


def write_trace_csv(result, path):
    with open(path, "w") as fh:
        fh.write("iter,h,constraint_residual,kkt_residual\n")
        for it, h, cres, stat in result.trace:
            fh.write(f"{it},{h!r},{cres!r},{stat!r}\n")
