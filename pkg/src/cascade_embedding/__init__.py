"""Node embeddings from simulated diffusion cascades.

Cascades are sampled from a memorised multi-walker diffusion over the graph,
a transmission-rate matrix is fitted to them by maximum likelihood, and the
normalised rate matrix is factored by truncated SVD.
"""
from .embedding import Embedding, RateSVDEmbedding, embed, normalize_rates, truncated_svd
from .estimators import DiffusionEmbedding, NetworkRateEstimator
from .evaluation import EvalConfig, EvalReport, OneVsRestLogisticRegression, evaluate, f1_scores
from .graph import Graph, LabelTable, load_edge_list, load_labels
from .inference import (ImpossibleCascadeError, RateMatrix, SolverConfig, cascade_nll,
                        infer_rates, nll_gradient, total_nll)
from .sampler import (Cascade, CascadeSet, Exponential, PowerLaw, formulate_cascade,
                      generate_cascades, random_walk, sample_delay, simulate_diffusion)

__version__ = "0.1.0"

__all__ = [
    "Cascade", "CascadeSet", "DiffusionEmbedding", "Embedding", "EvalConfig", "EvalReport",
    "Exponential", "Graph", "ImpossibleCascadeError", "LabelTable", "NetworkRateEstimator",
    "OneVsRestLogisticRegression", "PowerLaw", "RateMatrix", "RateSVDEmbedding", "SolverConfig",
    "cascade_nll", "embed", "evaluate", "f1_scores", "formulate_cascade", "generate_cascades",
    "infer_rates", "load_edge_list", "load_labels", "nll_gradient", "normalize_rates",
    "random_walk", "sample_delay", "simulate_diffusion", "total_nll", "truncated_svd",
]
