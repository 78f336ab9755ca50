"""Weighted undirected graphs, k-NN construction and the combinatorial Laplacian."""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial.distance import cdist

from ._validation import check_features, check_positive, check_signal
from .exceptions import InvalidParameterError, ParseError

__all__ = [
    "Graph",
    "Laplacian",
    "build_knn_graph",
    "laplacian",
    "variation",
    "load_edge_list",
    "write_edge_list",
    "connected_components",
    "is_connected",
]


@dataclass(frozen=True)
class Graph:
    """Undirected graph with a sparse, symmetric, nonnegative weight matrix.

    The matrix is stored in CSR format with a zero diagonal. Instances are
    validated on construction and should be treated as immutable.
    """

    n: int
    weights: sparse.csr_matrix

    def __post_init__(self):
        W = sparse.csr_matrix(self.weights, dtype=np.float64)
        W.eliminate_zeros()
        W.sort_indices()
        if W.shape != (self.n, self.n):
            raise InvalidParameterError(
                f"weight matrix shape {W.shape} does not match n={self.n}"
            )
        if self.n < 1:
            raise InvalidParameterError("a graph needs at least one node")
        if W.nnz:
            if not np.all(np.isfinite(W.data)):
                raise InvalidParameterError("weights must be finite")
            if W.data.min() < 0:
                raise InvalidParameterError("weights must be nonnegative")
        if W.diagonal().any():
            raise InvalidParameterError("self-loops are not allowed")
        if (W != W.T).nnz:
            raise InvalidParameterError("weight matrix must be symmetric")
        object.__setattr__(self, "weights", W)

    @classmethod
    def from_dense(cls, W):
        W = np.asarray(W, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise InvalidParameterError("weight matrix must be square")
        return cls(W.shape[0], sparse.csr_matrix(W))

    @property
    def n_edges(self):
        return self.weights.nnz // 2

    def degrees(self):
        return np.asarray(self.weights.sum(axis=1)).ravel()

    def subgraph(self, nodes):
        nodes = np.asarray(nodes, dtype=np.intp)
        return Graph(nodes.size, self.weights[nodes][:, nodes])


@dataclass(frozen=True)
class Laplacian:
    """Combinatorial Laplacian ``L = D - W`` together with the degree vector."""

    matrix: sparse.csr_matrix
    degree: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0]

    def toarray(self):
        return self.matrix.toarray()


def _kernel_weights(dist, sigma):
    return np.exp(-(dist**2) / sigma**2)


def build_knn_graph(features, k, kernel_scale="auto"):
    """Connect every sample to its ``k`` nearest neighbours.

    Distances are Euclidean and ties are broken by the lower node index. The
    directed neighbour relation is symmetrised by union and each edge gets
    the Gaussian weight ``exp(-d**2 / kernel_scale**2)``. With
    ``kernel_scale="auto"`` the scale is the mean distance from each node to
    its k-th neighbour.
    """
    X = check_features(features)
    n = X.shape[0]
    check_positive(k, "k", integer=True)
    if k >= n:
        raise InvalidParameterError(f"k={k} must be smaller than n={n}")

    dist = cdist(X, X)
    # the node itself goes last so ties with duplicates never select it
    order_key = dist.copy()
    np.fill_diagonal(order_key, np.inf)
    order = np.argsort(order_key, axis=1, kind="stable")[:, :k]

    if isinstance(kernel_scale, str):
        if kernel_scale != "auto":
            raise InvalidParameterError(f"unknown kernel_scale policy {kernel_scale!r}")
        kth = dist[np.arange(n), order[:, -1]]
        sigma = float(kth.mean())
        if sigma == 0.0:
            sigma = 1.0
    else:
        sigma = float(check_positive(kernel_scale, "kernel_scale"))

    rows = np.repeat(np.arange(n), k)
    cols = order.ravel()
    lo = np.minimum(rows, cols)
    hi = np.maximum(rows, cols)
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)
    lo, hi = pairs[:, 0], pairs[:, 1]
    w = _kernel_weights(dist[lo, hi], sigma)
    W = sparse.coo_matrix(
        (np.concatenate([w, w]), (np.concatenate([lo, hi]), np.concatenate([hi, lo]))),
        shape=(n, n),
    ).tocsr()
    # weights underflowing to 0 (d >> sigma) are dropped by Graph
    return Graph(n, W)


def laplacian(g):
    """Assemble ``L = D - W`` for the graph ``g``."""
    deg = g.degrees()
    L = (sparse.diags(deg) - g.weights).tocsr()
    L.sort_indices()
    return Laplacian(L, deg)


def variation(L, f):
    """Quadratic form ``f^T L f``, the total variation energy of ``f``."""
    f = check_signal(f, L.n)
    return float(f @ (L.matrix @ f))


def connected_components(g):
    """Partition the nodes into connected components.

    Components are returned as sorted index arrays, ordered by their
    smallest node.
    """
    _, lab = csgraph.connected_components(g.weights, directed=False)
    parts = {}
    for node, c in enumerate(lab):
        parts.setdefault(c, []).append(node)
    return sorted((np.array(p, dtype=np.intp) for p in parts.values()), key=lambda p: p[0])


def is_connected(g):
    return csgraph.connected_components(g.weights, directed=False)[0] == 1


def load_edge_list(path, n_nodes=None, remap=False):
    """Read a whitespace separated ``src dst [weight]`` edge list.

    Lines starting with ``#`` and blank lines are skipped; a missing weight
    means 1. Node ids are 0-based; with ``remap=True`` arbitrary integer ids
    are mapped to ``0..m-1`` in sorted order. A repeated edge (in either
    direction) keeps the last weight read.
    """
    edges = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ParseError(f"expected 'src dst [weight]', got {raw.strip()!r}", lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if u < 0 or v < 0:
                raise ParseError("node ids must be nonnegative", lineno)
            if u == v:
                raise ParseError(f"self-loop on node {u}", lineno)
            if not np.isfinite(w) or w < 0:
                raise ParseError(f"invalid weight {w}", lineno)
            edges[(min(u, v), max(u, v))] = w

    ids = sorted({u for e in edges for u in e})
    if remap:
        index = {node: i for i, node in enumerate(ids)}
        edges = {(index[u], index[v]): w for (u, v), w in edges.items()}
        n = len(ids)
    else:
        n = (ids[-1] + 1) if ids else 0
    if n_nodes is not None:
        if n_nodes < n:
            raise ParseError(f"edge list references {n} nodes but n_nodes={n_nodes}")
        n = n_nodes
    if n == 0:
        raise ParseError("edge list is empty")

    if edges:
        uv = np.array(list(edges.keys()), dtype=np.intp)
        w = np.array(list(edges.values()), dtype=np.float64)
        keep = w > 0
        uv, w = uv[keep], w[keep]
    else:
        uv, w = np.empty((0, 2), dtype=np.intp), np.empty(0)
    W = sparse.coo_matrix(
        (np.concatenate([w, w]), (np.concatenate([uv[:, 0], uv[:, 1]]),
                                  np.concatenate([uv[:, 1], uv[:, 0]]))),
        shape=(n, n),
    ).tocsr()
    return Graph(n, W)


def write_edge_list(g, path):
    U = sparse.triu(g.weights, k=1).tocoo()
    order = np.lexsort((U.col, U.row))
    with open(path, "w") as fh:
        fh.write(f"# n={g.n}\n")
        for i in order:
            fh.write(f"{int(U.row[i])} {int(U.col[i])} {float(U.data[i])!r}\n")
