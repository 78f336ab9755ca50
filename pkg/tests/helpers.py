import numpy as np

from dasga.align import AlignmentParams, AlignmentProblem, AlignmentState, LabelSet, penalty_mask
from dasga.graph import Graph, is_connected, laplacian
from dasga.spectral import eigendecompose
from dasga.sqp import QuadraticAlignProblem


def random_connected_graph(rng, n, density=0.3):
    """Random weighted graph with a spanning path so it is connected."""
    W = np.triu(rng.uniform(0.1, 1.0, (n, n)) * (rng.random((n, n)) < density), 1)
    perm = rng.permutation(n)
    for a, b in zip(perm[:-1], perm[1:]):
        i, j = min(a, b), max(a, b)
        W[i, j] = max(W[i, j], rng.uniform(0.1, 1.0))
    g = Graph.from_dense(W + W.T)
    assert is_connected(g)
    return g


def pairwise_variation(W, f):
    n = len(f)
    return 0.5 * sum(W[i, j] * (f[i] - f[j]) ** 2 for i in range(n) for j in range(n))


def constrained_oracle(L, idx, y):
    """Minimise f^T L f subject to f[idx] = y via the dense KKT system."""
    n = L.shape[0]
    E = np.zeros((len(idx), n))
    E[np.arange(len(idx)), idx] = 1.0
    K = np.block([[2 * L, E.T], [E, np.zeros((len(idx), len(idx)))]])
    sol = np.linalg.solve(K, np.concatenate([np.zeros(n), y]))
    return sol[:n]


def random_sqp_problem(rng, R, L=None):
    L = L or int(rng.integers(2, 3 * R + 2))
    P = rng.standard_normal((L, R))
    alpha = rng.standard_normal(R)
    y = rng.standard_normal(L)
    mask = penalty_mask(R, rng.uniform(0.5, 3.0))
    return QuadraticAlignProblem.from_alignment(P, alpha, y, mask, rng.uniform(0.05, 2.0))


def random_unit_columns(rng, R):
    X = rng.standard_normal((R, R))
    return X / np.linalg.norm(X, axis=0)


def central_grad(fun, x, h=1e-6):
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def central_jac(fun, x, h=1e-6):
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.column_stack(cols)


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(1.0, np.linalg.norm(b))


def random_basis(rng, n, R):
    return eigendecompose(laplacian(random_connected_graph(rng, n)), R)


def random_labels(rng, n, m, binary=True):
    idx = np.sort(rng.choice(n, size=m, replace=False))
    vals = rng.choice([-1.0, 1.0], size=m) if binary else rng.standard_normal(m)
    return LabelSet(idx, vals)


def random_alignment_problem(rng, n=12, R=4, mu1=None, mu2=None):
    params = AlignmentParams(mu1=mu1 or rng.uniform(0.01, 2), mu2=mu2 or rng.uniform(0.05, 2),
                             R=R)
    return AlignmentProblem(
        random_basis(rng, n, R), random_basis(rng, n, R),
        random_labels(rng, n, int(rng.integers(R, n + 1)), binary=False),
        random_labels(rng, n, int(rng.integers(R, n + 1)), binary=False), params,
    )


def random_state(rng, R):
    T = rng.standard_normal((R, R))
    return AlignmentState(rng.standard_normal(R), rng.standard_normal(R),
                          T / np.linalg.norm(T, axis=0))


def stacked_oracle(p, T):
    R = p.R
    mu1 = p.params.mu1
    Ps = p.labeled_source_rows()
    PtT = p.labeled_target_rows() @ T
    A = np.block([
        [Ps, np.zeros((Ps.shape[0], R))],
        [np.zeros((PtT.shape[0], R)), PtT],
        [np.sqrt(mu1) * np.eye(R), -np.sqrt(mu1) * np.eye(R)],
    ])
    b = np.concatenate([p.labels_s.values, p.labels_t.values, np.zeros(R)])
    x = np.linalg.solve(A.T @ A, A.T @ b)
    return x[:R], x[R:]


ACCEPTANCE_LINES = []


def report(criterion, ok, detail):
    """Record one acceptance verdict line and fail the calling test if needed."""
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
