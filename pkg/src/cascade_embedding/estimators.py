"""Estimator front-ends composing sampling, inference and factorisation."""
from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import rng as _rng
from ._validation import check_cascades, check_graph, check_rates, support_pattern
from .embedding import RateSVDEmbedding
from .inference import SolverConfig, fit_rates
from .sampler import generate_cascades, make_time_model


class NetworkRateEstimator(BaseEstimator):
    """Maximum-likelihood transmission rates from a :class:`CascadeSet`.

    Parameters
    ----------
    max_iter : int, default=2000
    step_size : float, default=0.1
    tol : float, default=1e-8
        Relative objective decrease at which a column stops.
    initial_rate : float, default=0.1
    prune_threshold : float, default=1e-4
    support : None or sparse (n, n) pattern, default=None
        Restrict the candidate pairs to the nonzero pattern.
    n_jobs : int or None, default=None

    Attributes
    ----------
    rates_ : RateMatrix
    objective_ : float
        Total negative log-likelihood at the solution before pruning.
    n_iter_ : int
        Largest iteration count over all columns.
    """

    def __init__(self, max_iter=2000, step_size=0.1, tol=1e-8, initial_rate=0.1,
                 prune_threshold=1e-4, support=None, n_jobs=None):
        self.max_iter = max_iter
        self.step_size = step_size
        self.tol = tol
        self.initial_rate = initial_rate
        self.prune_threshold = prune_threshold
        self.support = support
        self.n_jobs = n_jobs

    def _config(self):
        return SolverConfig(self.max_iter, self.step_size, self.tol, self.initial_rate,
                            self.prune_threshold)

    def fit(self, X, y=None):
        cascades = check_cascades(X)
        result = fit_rates(cascades, self._config(), self.support, n_jobs=self.n_jobs)
        self.rates_ = result.rates
        self.objective_ = result.objective
        self.n_iter_ = result.n_iter
        self.n_nodes_ = cascades.n_nodes
        return self


class DiffusionEmbedding(TransformerMixin, BaseEstimator):
    """Node embedding by cascade simulation, rate inference and truncated SVD.

    ``fit`` takes a graph; ``embedding_`` (or ``fit_transform``) holds one
    row per node. The sampler and SVD seeds are derived from
    ``random_state`` through :func:`cascade_embedding.rng.stage_seed`.

    Parameters
    ----------
    n_components : int, default=128
    steps : int, default=40
    horizon : float, default=10.0
    passes : int, default=1
    time_model : {"exp", "powerlaw"}, default="exp"
    time_param : float, default=1.0
        Rate of the exponential or exponent of the power law.
    normalization : {"row", "symmetric", "none"}, default="row"
    symmetrize : bool, default=False
    support : {"all", "graph"}, default="all"
        ``"graph"`` restricts inferred rates to arcs of the input graph.
    max_iter, step_size, tol, initial_rate, prune_threshold
        Solver settings, see :class:`NetworkRateEstimator`.
    random_state : int, default=0
    n_jobs : int or None, default=None
    """

    def __init__(self, n_components=128, steps=40, horizon=10.0, passes=1, time_model="exp",
                 time_param=1.0, normalization="row", symmetrize=False, support="all",
                 max_iter=2000, step_size=0.1, tol=1e-8, initial_rate=0.1,
                 prune_threshold=1e-4, random_state=0, n_jobs=None):
        self.n_components = n_components
        self.steps = steps
        self.horizon = horizon
        self.passes = passes
        self.time_model = time_model
        self.time_param = time_param
        self.normalization = normalization
        self.symmetrize = symmetrize
        self.support = support
        self.max_iter = max_iter
        self.step_size = step_size
        self.tol = tol
        self.initial_rate = initial_rate
        self.prune_threshold = prune_threshold
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        graph = check_graph(X)
        if self.support not in ("all", "graph"):
            raise ValueError(f"support must be 'all' or 'graph', got {self.support!r}")
        seed = 0 if self.random_state is None else int(self.random_state)
        self.cascades_ = generate_cascades(
            graph, self.steps, self.horizon, self.passes,
            make_time_model(self.time_model, self.time_param),
            _rng.stage_seed(seed, "sampler"), self.n_jobs)
        inference = NetworkRateEstimator(
            self.max_iter, self.step_size, self.tol, self.initial_rate, self.prune_threshold,
            support_pattern(graph) if self.support == "graph" else None, self.n_jobs)
        self.rates_ = inference.fit(self.cascades_).rates_
        self.objective_ = inference.objective_
        svd = RateSVDEmbedding(self.n_components, self.normalization, self.symmetrize,
                               _rng.stage_seed(seed, "svd"))
        self.embedding_ = svd.fit_transform(check_rates(self.rates_))
        self.singular_values_ = svd.singular_values_
        self.graph_ = graph
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_

    def transform(self, X=None):
        """Embedding of the fitted graph's nodes; ``X`` is ignored."""
        check_is_fitted(self, "embedding_")
        return self.embedding_
