"""Node-classification evaluation of embeddings.

Stratified train/test splits over a sweep of training ratios, a one-vs-rest
L2-regularised logistic regression, and Micro/Macro-F1 averaged over
repeated splits.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .embedding import Embedding
from .graph import LabelTable
from .rng import check_random_state, generator

logger = logging.getLogger(__name__)

DEFAULT_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def split(labels: LabelTable, ratio: float, rng=None):
    """Stratified split of the labelled nodes.

    Each class with ``n >= 2`` members puts ``ceil(ratio * n)`` of them in
    the training set, capped at ``n - 1`` so that the class is also tested.
    Classes with a single member go entirely to training.

    Returns ``(train, test)`` arrays of node indices.
    """
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    rng = check_random_state(rng)
    train, test = [], []
    for c in range(labels.class_count):
        members = labels.nodes[labels.classes == c]
        if len(members) == 0:
            continue
        if len(members) < 2:
            logger.warning("class %d has %d member(s); kept whole in training", c, len(members))
            train.append(members)
            continue
        members = members[rng.permutation(len(members))]
        k = min(math.ceil(ratio * len(members) - 1e-9), len(members) - 1)
        train.append(members[:k])
        test.append(members[k:])
    cat = lambda parts: np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    return cat(train), cat(test)


def _binary_loss(params, X, y, lam, scale=1.0):
    # y in {-1, +1}; bias is the last parameter and is not penalised.
    # The weights are optimised as w * scale, which keeps the problem
    # well conditioned when lam is large.
    w, b = params[:-1] / scale, params[-1]
    z = y * (X @ w + b)
    loss = np.mean(np.logaddexp(0.0, -z)) + 0.5 * lam * (w @ w)
    r = -y * expit(-z) / len(y)
    grad = np.empty_like(params)
    grad[:-1] = (X.T @ r + lam * w) / scale
    grad[-1] = r.sum()
    return loss, grad


class OneVsRestLogisticRegression(ClassifierMixin, BaseEstimator):
    """One binary logistic model per class; predict the highest score.

    Each model minimises the mean logistic loss plus
    ``regularization / 2 * ||w||^2`` (intercept unpenalised), starting from
    zero, with L-BFGS until the relative objective decrease falls below
    ``tol``.

    Parameters
    ----------
    regularization : float, default=1e-4
    tol : float, default=1e-6
    max_iter : int, default=1000
    """

    def __init__(self, regularization=1e-4, tol=1e-6, max_iter=1000):
        self.regularization = regularization
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        if self.regularization < 0:
            raise ValueError("regularization must be non-negative")
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("training set contains a single class")
        n, d = X.shape
        coef = np.zeros((len(self.classes_), d))
        intercept = np.zeros(len(self.classes_))
        self.n_iter_ = np.zeros(len(self.classes_), dtype=int)
        scale = math.sqrt(1.0 + self.regularization)
        for k, c in enumerate(self.classes_):
            target = np.where(y == c, 1.0, -1.0)
            res = minimize(_binary_loss, np.zeros(d + 1),
                           args=(X, target, self.regularization, scale),
                           jac=True, method="L-BFGS-B",
                           options={"ftol": self.tol, "gtol": 1e-10, "maxiter": self.max_iter})
            coef[k], intercept[k] = res.x[:-1] / scale, res.x[-1]
            self.n_iter_[k] = res.nit
        self.coef_ = coef
        self.intercept_ = intercept
        self.n_features_in_ = d
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X @ self.coef_.T + self.intercept_

    def predict(self, X):
        # argmax takes the first maximum, i.e. the lowest class id on ties
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


def train_ovr_logreg(embedding, train, labels: LabelTable, regularization: float = 1e-4,
                     rng=None) -> OneVsRestLogisticRegression:
    X = _vectors(embedding)
    y = _class_of(labels, train)
    return OneVsRestLogisticRegression(regularization).fit(X[train], y)


def predict(model: OneVsRestLogisticRegression, embedding, indices) -> np.ndarray:
    return model.predict(_vectors(embedding)[indices])


def _vectors(embedding) -> np.ndarray:
    return embedding.vectors if isinstance(embedding, Embedding) else np.asarray(embedding, float)


def _class_of(labels: LabelTable, nodes) -> np.ndarray:
    lookup = labels.labels
    return np.array([lookup[int(v)] for v in nodes], dtype=np.int64)


def f1_scores(predicted, truth, class_count: int):
    """Return ``(micro, macro)`` F1.

    Macro averages per-class F1 over all ``class_count`` classes; a class
    with no true and no predicted members scores 0.
    """
    predicted = np.asarray(predicted, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predicted.shape != truth.shape:
        raise ValueError("predicted and truth must have equal length")
    if predicted.size == 0:
        raise ValueError("cannot score empty label vectors")
    tp = np.bincount(truth[predicted == truth], minlength=class_count).astype(float)
    fp = np.bincount(predicted, minlength=class_count) - tp
    fn = np.bincount(truth, minlength=class_count) - tp
    denom = 2 * tp + fp + fn
    per_class = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    macro = float(per_class[:class_count].mean())
    TP, FP, FN = tp.sum(), fp.sum(), fn.sum()
    micro = float(2 * TP / (2 * TP + FP + FN))
    return micro, macro


@dataclass(frozen=True)
class EvalConfig:
    train_ratios: tuple = DEFAULT_RATIOS
    repetitions: int = 10
    regularization: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not self.train_ratios:
            raise ValueError("need at least one training ratio")
        if any(not 0 < r < 1 for r in self.train_ratios):
            raise ValueError("training ratios must lie in (0, 1)")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.regularization < 0:
            raise ValueError("regularization must be non-negative")


@dataclass
class EvalReport:
    """Per-ratio Micro/Macro-F1 scores of every repetition."""

    micro: dict = field(default_factory=dict)
    macro: dict = field(default_factory=dict)

    @property
    def ratios(self):
        return list(self.micro)

    def mean(self, metric: str, ratio: float) -> float:
        return float(np.mean(getattr(self, metric)[ratio]))

    def std(self, metric: str, ratio: float) -> float:
        return float(np.std(getattr(self, metric)[ratio]))

    def rows(self):
        for r in self.ratios:
            for metric in ("micro", "macro"):
                yield r, f"{metric}_f1", self.mean(metric, r), self.std(metric, r)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["ratio", "metric", "mean", "std"])
        for r, metric, mean, std in self.rows():
            w.writerow([f"{r:g}", metric, f"{mean:.6f}", f"{std:.6f}"])
        return buf.getvalue()

    def format_table(self) -> str:
        lines = [f"{'ratio':>6}  {'micro-F1':>16}  {'macro-F1':>16}"]
        for r in self.ratios:
            lines.append(f"{r:>6.2f}  {self.mean('micro', r):.4f} ± {self.std('micro', r):.4f}"
                         f"  {self.mean('macro', r):.4f} ± {self.std('macro', r):.4f}")
        return "\n".join(lines)


def evaluate(embedding, labels: LabelTable, config: EvalConfig | None = None) -> EvalReport:
    """Train/test over every ratio and repetition.

    Repetition ``r`` at ratio index ``k`` draws its split from the stream
    keyed by ``(config.seed, k, r)``.
    """
    config = config or EvalConfig()
    X = _vectors(embedding)
    report = EvalReport()
    for k, ratio in enumerate(config.train_ratios):
        micro, macro = [], []
        for rep in range(config.repetitions):
            train, test = split(labels, ratio, generator(config.seed, k, rep))
            model = OneVsRestLogisticRegression(config.regularization)
            model.fit(X[train], _class_of(labels, train))
            pred = model.predict(X[test])
            mi, ma = f1_scores(pred, _class_of(labels, test), labels.class_count)
            micro.append(mi)
            macro.append(ma)
        report.micro[ratio] = micro
        report.macro[ratio] = macro
    return report


def write_report(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
