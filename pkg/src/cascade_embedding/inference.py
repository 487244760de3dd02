"""Maximum-likelihood transmission rates from cascades.

Under exponential transmission, the negative log-likelihood of a set of
cascades is convex in the rates and splits into one independent problem per
target node ``j``::

    f_j(a) = sum_i a_i * L_ij - sum_{events e of j} log(sum_i a_i * M_ei)

``L_ij`` collects survival exposure (how long ``i`` was infected while ``j``
was not) and ``M_ei`` flags the nodes infected strictly before ``j`` in the
cascade of event ``e``. Each column is minimised by projected gradient
descent onto ``a >= 0``.
"""
from __future__ import annotations

import math
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from joblib import Parallel, delayed

from .sampler import Cascade, CascadeSet

logger = logging.getLogger(__name__)


class ImpossibleCascadeError(ArithmeticError):
    """A cascade has zero likelihood under the given rates.

    Some infected non-seed node has no positive rate from any node infected
    before it.
    """

    def __init__(self, cascade_index: int | None, node: int | None = None):
        self.cascade_index = cascade_index
        self.node = node
        msg = "impossible cascade"
        if cascade_index is not None:
            msg += f" #{cascade_index}"
        if node is not None:
            msg += f": node {node} has zero total hazard"
        super().__init__(msg)


class NonFiniteObjectiveError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# pairwise exponential model


def pair_density(dt: float, alpha: float) -> float:
    """Transmission density ``alpha * exp(-alpha * dt)``, zero unless ``dt > 0``."""
    if dt <= 0:
        return 0.0
    return alpha * math.exp(-alpha * dt)


def pair_survival(dt: float, alpha: float) -> float:
    if dt < 0:
        raise ValueError("elapsed time must be non-negative")
    return math.exp(-alpha * dt)


def pair_hazard(dt: float, alpha: float) -> float:
    # constant under the exponential model
    if dt <= 0:
        raise ValueError("elapsed time must be positive")
    return float(alpha)


# ---------------------------------------------------------------------------
# rate matrix


@dataclass(frozen=True, eq=False)
class RateMatrix:
    """Nonnegative off-diagonal rates ``alpha[i, j]`` held as CSR."""

    matrix: sp.csr_matrix

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=np.float64)
        if m.shape[0] != m.shape[1]:
            raise ValueError("rate matrix must be square")
        m.sum_duplicates()
        m.sort_indices()
        if m.nnz and (m.data.min() < 0 or not np.all(np.isfinite(m.data))):
            raise ValueError("rates must be finite and non-negative")
        if m.diagonal().any():
            raise ValueError("rate matrix must have an empty diagonal")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_dict(cls, entries: dict, n_nodes: int) -> "RateMatrix":
        if entries:
            (rows, cols), vals = zip(*entries.keys()), list(entries.values())
        else:
            rows, cols, vals = (), (), ()
        m = sp.coo_matrix((np.asarray(vals, float), (np.asarray(rows, int), np.asarray(cols, int))),
                          shape=(n_nodes, n_nodes))
        return cls(m.tocsr())

    @classmethod
    def zeros(cls, n_nodes: int) -> "RateMatrix":
        return cls(sp.csr_matrix((n_nodes, n_nodes)))

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]

    def to_dict(self) -> dict:
        coo = self.matrix.tocoo()
        return {(int(i), int(j)): float(v) for i, j, v in zip(coo.row, coo.col, coo.data)}

    def pruned(self, threshold: float) -> "RateMatrix":
        m = self.matrix.copy()
        m.data[m.data < threshold] = 0.0
        m.eliminate_zeros()
        return RateMatrix(m)

    def __eq__(self, other):
        if not isinstance(other, RateMatrix):
            return NotImplemented
        return self.matrix.shape == other.matrix.shape and (self.matrix != other.matrix).nnz == 0

    __hash__ = None


def write_rates(rates: RateMatrix, path) -> None:
    """Write ``i<TAB>j<TAB>alpha`` triplets sorted by (i, j)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_rates(rates))


def format_rates(rates: RateMatrix) -> str:
    m = rates.matrix.copy()
    m.eliminate_zeros()
    coo = m.tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [f"# nodes={rates.n_nodes}"]
    lines += [f"{coo.row[k]}\t{coo.col[k]}\t{coo.data[k]:.17g}" for k in order]
    return "\n".join(lines) + "\n"


def read_rates(path, n_nodes: int | None = None) -> RateMatrix:
    entries = {}
    header = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                if key.strip() == "nodes":
                    header = int(value)
                continue
            parts = line.split()
            try:
                i, j, a = int(parts[0]), int(parts[1]), float(parts[2])
                if len(parts) != 3:
                    raise ValueError
            except (ValueError, IndexError):
                raise ValueError(f"line {lineno}: expected 'i<TAB>j<TAB>alpha'") from None
            entries[(i, j)] = a
    if n_nodes is None:
        n_nodes = header
    if n_nodes is None:
        n_nodes = 1 + max((max(k) for k in entries), default=-1)
    return RateMatrix.from_dict(entries, n_nodes)


# ---------------------------------------------------------------------------
# likelihood, one cascade at a time


def _as_csr(rates) -> sp.csr_matrix:
    return rates.matrix if isinstance(rates, RateMatrix) else sp.csr_matrix(rates)


def cascade_nll(cascade: Cascade, rates) -> float:
    """Negative log-likelihood of one cascade; ``inf`` if it is impossible.

    Sum of survival exposure of every uninfected node to every infected
    node, survival exposure among infected pairs, minus the log of the total
    hazard into each infected non-seed node.
    """
    return _cascade_nll(cascade, _as_csr(rates), None)


def _cascade_nll(cascade: Cascade, a, row_sums) -> float:
    # `a` is CSR or a dense array; `row_sums` may be precomputed
    nodes, t, T = cascade.nodes, cascade.times, cascade.horizon
    if isinstance(a, np.ndarray):
        sub = a[np.ix_(nodes, nodes)]
    else:
        sub = a[nodes][:, nodes].toarray()
    if row_sums is None:
        row_sums = np.asarray(a.sum(axis=1)).ravel()
    exposure = T - t
    # survival against uninfected nodes
    out_total = row_sums[nodes] - sub.sum(axis=1)
    nll = float(exposure @ out_total)
    earlier = t[:, None] < t[None, :]
    dt = np.where(earlier, t[None, :] - t[:, None], 0.0)
    nll += float((sub * dt).sum())
    hazard = (sub * earlier).sum(axis=0)[t > 0]
    if np.any(hazard <= 0):
        return math.inf
    return nll - float(np.log(hazard).sum())


def total_nll(cascades: CascadeSet, rates) -> float:
    """Sum of :func:`cascade_nll`; raises :class:`ImpossibleCascadeError`."""
    a = _as_csr(rates)
    if a.shape[0] <= 4096:
        a = a.toarray()
    row_sums = np.asarray(a.sum(axis=1)).ravel()
    total = 0.0
    for k, c in enumerate(cascades):
        v = _cascade_nll(c, a, row_sums)
        if math.isinf(v):
            raise ImpossibleCascadeError(k)
        total += v
    return total


# ---------------------------------------------------------------------------
# column decomposition


@dataclass
class _Column:
    target: int
    sources: np.ndarray          # candidate source nodes (variables)
    linear: np.ndarray           # L_ij for each source
    events: np.ndarray           # (n_events, n_sources) 0/1 matrix
    event_cascades: np.ndarray   # cascade index of each event

    def objective(self, a):
        h = self.events @ a
        if np.any(h <= 0):
            return math.inf
        return float(self.linear @ a - np.log(h).sum())

    def gradient(self, a):
        h = self.events @ a
        return self.linear - self.events.T @ (1.0 / h)

    def value_and_gradient(self, a):
        h = self.events @ a
        if np.any(h <= 0):
            return math.inf, None
        return float(self.linear @ a - np.log(h).sum()), self.linear - self.events.T @ (1.0 / h)


@dataclass
class _CascadeTable:
    """Cascades as a CSC matrix of ``time + 1`` (zero means uninfected)."""

    n_nodes: int
    horizons: np.ndarray
    by_node: sp.csc_matrix
    exposure_total: np.ndarray   # sum over cascades of (T - t_i) for infected i
    infected_count: np.ndarray   # number of cascades infecting each node
    dense: np.ndarray | None = None

    DENSE_LIMIT = 25_000_000

    @classmethod
    def build(cls, cascades: CascadeSet) -> "_CascadeTable":
        if not len(cascades):
            raise ValueError("need at least one cascade")
        n = cascades.n_nodes
        rows = np.concatenate([np.full(len(c), k) for k, c in enumerate(cascades)])
        cols = np.concatenate([c.nodes for c in cascades])
        times = np.concatenate([c.times for c in cascades])
        horizons = np.array([c.horizon for c in cascades])
        m = sp.csc_matrix((times + 1.0, (rows, cols)), shape=(len(cascades), n))
        exposure = np.bincount(cols, weights=horizons[rows] - times, minlength=n)
        count = np.bincount(cols, minlength=n)
        dense = m.toarray() if len(cascades) * n <= cls.DENSE_LIMIT else None
        return cls(n, horizons, m, exposure, count, dense)

    def column_times(self, j):
        lo, hi = self.by_node.indptr[j], self.by_node.indptr[j + 1]
        return self.by_node.indices[lo:hi], self.by_node.data[lo:hi] - 1.0

    def column(self, j: int, allowed: np.ndarray | None = None) -> _Column:
        """Assemble the subproblem for target ``j``.

        ``allowed`` optionally restricts the source nodes considered.
        """
        n = self.n_nodes
        rows, tj = self.column_times(j)
        if allowed is None:
            sources = np.flatnonzero(self.infected_count > 0)
        else:
            sources = np.asarray(allowed, dtype=np.int64)
            sources = sources[self.infected_count[sources] > 0]
        sources = sources[sources != j]
        if len(rows):
            if self.dense is not None:
                block = self.dense[np.ix_(rows, sources)]
            else:
                block = self.by_node[:, sources].tocsr()[rows].toarray()
            present = block > 0
            ti = np.where(present, block - 1.0, np.inf)
        else:
            present = np.zeros((0, len(sources)), dtype=bool)
            ti = np.zeros((0, len(sources)))
        T = self.horizons[rows][:, None]
        # exposure of i that j's infection cuts short: (T - max(t_i, t_j))
        overlap = np.where(present, T - np.maximum(ti, tj[:, None]), 0.0).sum(axis=0)
        linear = self.exposure_total[sources] - overlap
        # cascades in which i is infected but j is infected no later than i
        blocked = (present & (ti >= tj[:, None])).sum(axis=0)
        keep = self.infected_count[sources] > blocked
        sources, linear = sources[keep], linear[keep]
        is_event = tj > 0
        events = (ti[is_event][:, keep] < tj[is_event][:, None]).astype(np.float64)
        return _Column(int(j), sources, linear, events, rows[is_event])


def candidate_pairs(cascades: CascadeSet, support=None) -> set:
    """Ordered pairs ``(i, j)`` that carry likelihood information.

    ``t_i < t_j`` in some cascade, or ``i`` infected while ``j`` is not.
    """
    table = _CascadeTable.build(cascades)
    allowed = _support_lists(support, table.n_nodes)
    out = set()
    for j in range(table.n_nodes):
        col = table.column(j, None if allowed is None else allowed[j])
        out.update((int(i), j) for i in col.sources)
    return out


def _support_lists(support, n):
    """Per-target allowed sources from a boolean/sparse ``(n, n)`` pattern."""
    if support is None:
        return None
    s = sp.csc_matrix(support)
    if s.shape != (n, n):
        raise ValueError(f"support pattern must be {n}x{n}")
    return [s.indices[s.indptr[j]:s.indptr[j + 1]] for j in range(n)]


def _rates_of(column: _Column, a: sp.csr_matrix) -> np.ndarray:
    return np.asarray(a[column.sources, column.target].toarray()).ravel() if len(column.sources) \
        else np.zeros(0)


def _check_hazard(column: _Column, x: np.ndarray):
    h = column.events @ x
    bad = np.flatnonzero(h <= 0)
    if len(bad):
        raise ImpossibleCascadeError(int(column.event_cascades[bad[0]]), column.target)


def nll_gradient(cascades: CascadeSet, rates, support=None) -> sp.csr_matrix:
    """Gradient of the total NLL on the candidate pairs.

    Returned as CSR with every candidate pair stored explicitly (zeros
    included); other entries are structurally absent.
    """
    table = _CascadeTable.build(cascades)
    a = sp.csc_matrix(_as_csr(rates))
    allowed = _support_lists(support, table.n_nodes)
    rows, cols, vals = [], [], []
    for j in range(table.n_nodes):
        col = table.column(j, None if allowed is None else allowed[j])
        if not len(col.sources):
            continue
        x = _rates_of(col, a)
        _check_hazard(col, x)
        rows.append(col.sources)
        cols.append(np.full(len(col.sources), j))
        vals.append(col.gradient(x))
    n = table.n_nodes
    if not rows:
        return sp.csr_matrix((n, n))
    coo = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n, n))
    return coo.tocsr()


# ---------------------------------------------------------------------------
# solver


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 2000
    step_size: float = 0.1
    tolerance: float = 1e-8
    initial_rate: float = 0.1
    prune_threshold: float = 1e-4

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        for name in ("step_size", "tolerance", "initial_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.prune_threshold < 0:
            raise ValueError("prune_threshold must be non-negative")


@dataclass
class SolveResult:
    x: np.ndarray
    objective: float
    n_iter: int
    history: list = field(default_factory=list)


def projected_gradient(fun, x0, config: SolverConfig, record: bool = False) -> SolveResult:
    """Minimise ``fun`` over ``x >= 0``.

    ``fun(x)`` returns ``(value, gradient)``, with value ``inf`` outside the
    domain. Trial steps start from ``config.step_size`` and afterwards from
    the Barzilai-Borwein estimate; the step is halved while the objective
    increases. Stops when the relative decrease drops below
    ``config.tolerance``.
    """
    x = np.maximum(np.asarray(x0, dtype=np.float64), 0.0)
    f, g = fun(x)
    if not math.isfinite(f):
        raise NonFiniteObjectiveError("objective is not finite at the starting point")
    history = [f] if record else []
    step = config.step_size
    n_iter = 0
    for n_iter in range(1, config.max_iterations + 1):
        for _ in range(80):
            x_new = np.maximum(x - step * g, 0.0)
            f_new, g_new = fun(x_new)
            if f_new <= f:
                break
            step *= 0.5
        else:
            break
        if not math.isfinite(f_new):
            raise NonFiniteObjectiveError("objective became non-finite")
        s, y = x_new - x, g_new - g
        decrease = f - f_new
        x, f, g = x_new, f_new, g_new
        if record:
            history.append(f)
        if decrease <= config.tolerance * max(abs(f), 1.0):
            break
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else config.step_size
        step = min(max(step, 1e-12), 1e12)
    return SolveResult(x, f, n_iter, history)


def _solve_column(column: _Column, config: SolverConfig):
    if not len(column.sources):
        return column, SolveResult(np.zeros(0), 0.0, 0)
    x0 = np.full(len(column.sources), config.initial_rate)
    return column, projected_gradient(column.value_and_gradient, x0, config)


def _solve_joint(columns, config: SolverConfig):
    sizes = [len(c.sources) for c in columns]
    linear = np.concatenate([c.linear for c in columns])
    events = sp.block_diag([sp.csr_matrix(c.events) for c in columns], format="csr")
    joint = _Column(-1, np.arange(sum(sizes)), linear, events, np.zeros(0, dtype=np.int64))
    res = projected_gradient(joint.value_and_gradient, np.full(len(linear), config.initial_rate),
                             config)
    parts = np.split(res.x, np.cumsum(sizes)[:-1])
    return [(c, SolveResult(p, c.objective(p), res.n_iter)) for c, p in zip(columns, parts)]


@dataclass
class InferenceResult:
    rates: RateMatrix
    objective: float
    n_iter: int


def fit_rates(cascades: CascadeSet, config: SolverConfig | None = None, support=None,
              decompose: bool = True, n_jobs: int | None = None) -> InferenceResult:
    """Solve every column and return rates, summed objective and max iterations."""
    config = config or SolverConfig()
    table = _CascadeTable.build(cascades)
    n = table.n_nodes
    allowed = _support_lists(support, n)
    columns = [table.column(j, None if allowed is None else allowed[j]) for j in range(n)]
    columns = [c for c in columns if len(c.sources)]
    for c in columns:
        _check_hazard(c, np.full(len(c.sources), config.initial_rate))
    if not columns:
        return InferenceResult(RateMatrix.zeros(n), 0.0, 0)
    if not decompose:
        solved = _solve_joint(columns, config)
    elif n_jobs in (None, 1):
        solved = [_solve_column(c, config) for c in columns]
    else:
        solved = Parallel(n_jobs=n_jobs)(delayed(_solve_column)(c, config) for c in columns)
    rows = np.concatenate([c.sources for c, _ in solved])
    cols = np.concatenate([np.full(len(c.sources), c.target) for c, _ in solved])
    vals = np.concatenate([r.x for _, r in solved])
    objective = float(sum(r.objective for _, r in solved))
    n_iter = max(r.n_iter for _, r in solved)
    logger.info("solved %d columns, objective %.6g", len(solved), objective)
    keep = vals >= config.prune_threshold
    keep &= vals > 0
    m = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    return InferenceResult(RateMatrix(m), objective, n_iter)


def infer_rates(cascades: CascadeSet, config: SolverConfig | None = None, support=None,
                decompose: bool = True, n_jobs: int | None = None) -> RateMatrix:
    return fit_rates(cascades, config, support, decompose, n_jobs).rates


# ---------------------------------------------------------------------------
# support recovery


def support_recovery(rates: RateMatrix, true_edges, threshold: float = 0.0):
    """Precision and recall of ``{(i, j): alpha_ij > threshold}`` against ``true_edges``."""
    truth = {(int(i), int(j)) for i, j in true_edges}
    coo = rates.matrix.tocoo()
    found = {(int(i), int(j)) for i, j, v in zip(coo.row, coo.col, coo.data) if v > threshold}
    hit = len(found & truth)
    precision = hit / len(found) if found else 0.0
    recall = hit / len(truth) if truth else 0.0
    return precision, recall


def best_threshold_recovery(rates: RateMatrix, true_edges):
    """Scan every distinct rate as threshold; return ``(threshold, precision, recall)``.

    The threshold maximising ``min(precision, recall)`` wins.
    """
    truth = {(int(i), int(j)) for i, j in true_edges}
    coo = rates.matrix.tocoo()
    keep = coo.data > 0
    rows, cols, vals = coo.row[keep], coo.col[keep], coo.data[keep]
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    hits = np.array([(int(i), int(j)) in truth for i, j in zip(rows[order], cols[order])])
    best = (0.0, 0.0, 0.0)
    if not len(vals) or not truth:
        return best
    tp = np.cumsum(hits)
    k = np.arange(1, len(vals) + 1)
    # only cut after the last entry of each run of equal values
    cut = np.ones(len(vals), dtype=bool)
    cut[:-1] = vals[1:] != vals[:-1]
    precision, recall = tp / k, tp / len(truth)
    score = np.where(cut, np.minimum(precision, recall), -1.0)
    b = int(np.argmax(score))
    thr = float(np.nextafter(vals[b], -np.inf))
    return thr, float(precision[b]), float(recall[b])
