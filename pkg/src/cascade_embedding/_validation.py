"""Input coercion for the estimators."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graph import Graph
from .inference import RateMatrix
from .sampler import CascadeSet


def check_graph(X, directed: bool = True) -> Graph:
    """Accept a :class:`Graph`, a square adjacency matrix or an ``(m, 2)`` edge array."""
    if isinstance(X, Graph):
        return X
    if sp.issparse(X) or (hasattr(X, "ndim") and np.ndim(X) == 2 and np.shape(X)[0] == np.shape(X)[1]
                          and np.shape(X)[1] != 2):
        a = sp.coo_matrix(X)
        return Graph.from_edges(zip(a.row[a.data != 0], a.col[a.data != 0]), a.shape[0],
                                directed=directed)
    edges = np.asarray(X)
    if edges.ndim != 2 or edges.shape[1] != 2 or not np.issubdtype(edges.dtype, np.integer):
        raise ValueError("expected a Graph, a square adjacency matrix or an integer edge array")
    n = int(edges.max()) + 1 if len(edges) else 0
    return Graph.from_edges(edges, n, directed=directed)


def check_cascades(X) -> CascadeSet:
    if isinstance(X, CascadeSet):
        if not len(X):
            raise ValueError("cascade set is empty")
        return X
    raise TypeError(f"expected a CascadeSet, got {type(X).__name__}")


def check_rates(X) -> RateMatrix:
    if isinstance(X, RateMatrix):
        return X
    return RateMatrix(sp.csr_matrix(X))


def support_pattern(graph: Graph) -> sp.csr_matrix:
    """Boolean ``(n, n)`` pattern with ``[i, j]`` set for every arc ``i -> j``."""
    e = graph.edges()
    n = graph.n_nodes
    return sp.csr_matrix((np.ones(len(e), dtype=bool), (e[:, 0], e[:, 1])), shape=(n, n))
