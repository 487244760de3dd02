"""Low-rank node embeddings from a rate matrix.

The rate matrix is normalised (row-stochastic by default) and factored by a
truncated SVD ``A ~ U_d S_d V_d^T``; node ``i`` is represented by row ``i`` of
``Y = U_d S_d^{1/2}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import svds
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .inference import RateMatrix
from .rng import check_random_state

NORMALIZATIONS = ("row", "symmetric", "none")


@dataclass(frozen=True, eq=False)
class SvdResult:
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.sigma))

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


@dataclass(frozen=True, eq=False)
class Embedding:
    """``vectors`` is the ``(n_nodes, dim)`` matrix; ``labels`` name its rows."""

    vectors: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("embedding must be a 2-d array")
        if not np.all(np.isfinite(v)):
            raise ValueError("embedding contains non-finite values")
        if self.labels is not None and len(self.labels) != len(v):
            raise ValueError("one label per row required")
        object.__setattr__(self, "vectors", v)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    @property
    def n_nodes(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _to_sparse(matrix) -> sp.csr_matrix:
    if isinstance(matrix, RateMatrix):
        return matrix.matrix
    return sp.csr_matrix(matrix, dtype=np.float64)


def normalize_rates(rates, method: str = "row", symmetrize: bool = False) -> sp.csr_matrix:
    """Normalise a rate matrix before factorisation.

    ``row`` divides each nonzero row by its sum (zero rows stay zero);
    ``symmetric`` applies ``D^{-1/2} A D^{-1/2}`` with ``D`` the row sums;
    ``none`` leaves the values alone. ``symmetrize`` first replaces ``A``
    with ``(A + A^T) / 2``.
    """
    a = _to_sparse(rates).astype(np.float64)
    if symmetrize:
        a = ((a + a.T) * 0.5).tocsr()
    if method == "none":
        return a.tocsr()
    sums = np.asarray(a.sum(axis=1)).ravel()
    if method == "row":
        inv = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
        return sp.diags(inv) @ a
    if method == "symmetric":
        inv = np.divide(1.0, np.sqrt(sums), out=np.zeros_like(sums), where=sums > 0)
        return (sp.diags(inv) @ a @ sp.diags(inv)).tocsr()
    raise ValueError(f"normalization must be one of {NORMALIZATIONS}, got {method!r}")


def _complete_basis(Q: np.ndarray, missing: np.ndarray, rng) -> np.ndarray:
    # replace columns flagged in `missing` by an orthonormal complement of the rest
    if not missing.any():
        return Q
    keep = Q[:, ~missing]
    fill = rng.standard_normal((Q.shape[0], int(missing.sum())))
    if keep.shape[1]:
        fill -= keep @ (keep.T @ fill)
        fill -= keep @ (keep.T @ fill)
    fill, _ = np.linalg.qr(fill)
    out = Q.copy()
    out[:, missing] = fill
    return out


def truncated_svd(matrix, d: int, random_state=None) -> SvdResult:
    """Top-``d`` singular triplets.

    Uses Lanczos (ARPACK) for ``d`` well below the matrix size and a dense
    LAPACK decomposition otherwise. Singular values below the numerical
    rank tolerance are set to exactly zero and their vectors replaced by an
    orthonormal completion. Each left vector is signed so that its first
    nonzero entry is positive.
    """
    a = _to_sparse(matrix)
    n, m = a.shape
    k = min(n, m)
    if not 1 <= d <= k:
        raise ValueError(f"dimension d={d} must lie in [1, {k}]")
    if a.nnz and not np.all(np.isfinite(a.data)):
        raise ValueError("matrix contains non-finite entries")
    rng = check_random_state(random_state)
    v0 = rng.uniform(-1.0, 1.0, size=k)

    if a.nnz == 0:
        U, s, V = np.eye(n, d), np.zeros(d), np.eye(m, d)
    elif k <= 64 or 4 * d >= k:
        U, s, Vt = scipy.linalg.svd(a.toarray(), full_matrices=False, lapack_driver="gesdd")
        U, s, V = U[:, :d], s[:d], Vt[:d].T
    else:
        U, s, Vt = svds(a, k=d, v0=v0, tol=0, maxiter=max(20 * k, 1000), solver="arpack")
        order = np.argsort(-s, kind="stable")
        U, s, V = U[:, order], s[order], Vt[order].T

    s = np.maximum(s, 0.0)
    tol = (s.max() if len(s) else 0.0) * max(n, m) * np.finfo(float).eps * 10
    zero = s <= tol
    s = np.where(zero, 0.0, s)
    U = _complete_basis(U, zero, rng)
    V = _complete_basis(V, zero, rng)

    for c in range(d):
        col = U[:, c]
        nz = np.flatnonzero(np.abs(col) > 1e-10 * max(np.abs(col).max(), 1e-300))
        if len(nz) and col[nz[0]] < 0:
            U[:, c] = -col
            V[:, c] = -V[:, c]
    return SvdResult(np.ascontiguousarray(U), s, np.ascontiguousarray(V))


def embed(rates, d: int = 128, random_state=None, normalization: str = "row",
          symmetrize: bool = False, labels=None) -> Embedding:
    """``Y = U_d diag(sqrt(sigma))`` of the normalised rate matrix."""
    svd = truncated_svd(normalize_rates(rates, normalization, symmetrize), d, random_state)
    # + 0.0 turns negative zeros into zeros
    return Embedding(svd.U * np.sqrt(svd.sigma) + 0.0, labels)


class RateSVDEmbedding(TransformerMixin, BaseEstimator):
    """Truncated-SVD embedding of a rate matrix.

    Parameters
    ----------
    n_components : int, default=128
        Embedding dimension ``d``.
    normalization : {"row", "symmetric", "none"}, default="row"
    symmetrize : bool, default=False
        Factor ``(A + A^T) / 2`` instead of ``A``.
    random_state : int or None, default=None

    Attributes
    ----------
    embedding_ : ndarray of shape (n_nodes, n_components)
    singular_values_ : ndarray of shape (n_components,)
    components_ : ndarray of shape (n_components, n_nodes)
        Right factor ``W = S^{1/2} V^T``.
    """

    def __init__(self, n_components=128, normalization="row", symmetrize=False,
                 random_state=None):
        self.n_components = n_components
        self.normalization = normalization
        self.symmetrize = symmetrize
        self.random_state = random_state

    def fit(self, X, y=None):
        a = normalize_rates(X, self.normalization, self.symmetrize)
        svd = truncated_svd(a, self.n_components, self.random_state)
        root = np.sqrt(svd.sigma)
        self.svd_ = svd
        self.singular_values_ = svd.sigma
        self.embedding_ = svd.U * root + 0.0
        self.components_ = (svd.V * root).T
        self.n_features_in_ = a.shape[1]
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_

    def transform(self, X):
        """Map rows of a (normalised the same way) rate matrix to the embedding space.

        Rows of the fitted matrix map to ``embedding_`` up to rank truncation.
        """
        check_is_fitted(self, "svd_")
        a = normalize_rates(X, self.normalization, self.symmetrize)
        if a.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {a.shape[1]}")
        s = self.svd_.sigma
        scale = np.divide(1.0, np.sqrt(s), out=np.zeros_like(s), where=s > 0)
        return np.asarray(a @ self.svd_.V) * scale


def write_embedding(embedding: Embedding, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_embedding(embedding))


def format_embedding(embedding: Embedding) -> str:
    labels = embedding.labels or tuple(str(i) for i in range(embedding.n_nodes))
    lines = [f"{embedding.n_nodes} {embedding.dim}"]
    for label, row in zip(labels, embedding.vectors.tolist()):
        lines.append(label + " " + " ".join(f"{v + 0.0:.9g}" for v in row))
    return "\n".join(lines) + "\n"


def read_embedding(path) -> Embedding:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("line 1: expected 'N d' header")
        n, d = int(header[0]), int(header[1])
        labels, rows = [], []
        for lineno, raw in enumerate(fh, start=2):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) != d + 1:
                raise ValueError(f"line {lineno}: expected a label and {d} values")
            labels.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if len(rows) != n:
        raise ValueError(f"expected {n} rows, found {len(rows)}")
    vectors = np.array(rows, dtype=np.float64).reshape(n, d)
    return Embedding(vectors, tuple(labels))


def reconstruction_error(matrix, svd: SvdResult) -> float:
    a = _to_sparse(matrix).toarray()
    return float(np.linalg.norm(a - svd.reconstruct()))


def best_rank_error(singular_values: np.ndarray, d: int) -> float:
    """Frobenius error of the best rank-``d`` approximation given all singular values."""
    return math.sqrt(float(np.sum(np.asarray(singular_values)[d:] ** 2)))
