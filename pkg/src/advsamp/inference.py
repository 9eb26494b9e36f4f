"""Bias-corrected prediction and evaluation metrics.

The trained negative-sampling scores xi_y(x) are biased by the noise
distribution; adding log p_n(y|x) recovers softmax-equivalent scores up to
a y-independent constant, which cancels in rankings and in the softmax
readout. ``bias_removal=False`` gives the NCE-style readout that uses the
raw scores.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .data_io import SparseDataset, SparseVector
from .errors import DataError
from .linear_model import LinearClassifier
from .noise import NoiseModel


@dataclass
class PredictionConfig:
    bias_removal: bool = True
    top_k: int = 1

    def __post_init__(self):
        if self.top_k < 1:
            raise DataError("top_k must be positive")


@dataclass
class EvalReport:
    accuracy: float
    log_likelihood: float  # mean predictive log likelihood per point, nats
    n_points: int
    wall_clock_s: float

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "log_likelihood": self.log_likelihood,
            "n_points": self.n_points,
            "wall_clock_s": self.wall_clock_s,
        }


def corrected_score(model: LinearClassifier, noise: NoiseModel, x: SparseVector,
                    y: int) -> float:
    """xi_y(x) + log p_n(y|x); the y-independent constant is omitted."""
    return model.score(x, y) + noise.log_prob(x, y)


def corrected_scores_all(model: LinearClassifier, noise, x: SparseVector,
                         bias_removal: bool = True) -> np.ndarray:
    scores = model.scores_all(x)
    if bias_removal and noise is not None:
        scores = scores + noise.log_prob_all(x)
    return scores


def predict_topk(model: LinearClassifier, noise, x: SparseVector,
                 cfg: PredictionConfig) -> list[int]:
    """Labels ranked by (corrected) score descending, ties by label id."""
    scores = corrected_scores_all(model, noise, x, cfg.bias_removal)
    if cfg.top_k > scores.size:
        raise DataError("top_k exceeds number of labels")
    order = np.lexsort((np.arange(scores.size), -scores))
    return [int(y) for y in order[: cfg.top_k]]


def _score_matrix(model: LinearClassifier, noise, dataset: SparseDataset,
                  bias_removal: bool) -> np.ndarray:
    scores = np.asarray(dataset.features @ model.weights.T) + model.biases
    if bias_removal and noise is not None:
        scores = scores + noise.log_prob_matrix(dataset.features)
    return scores


def evaluate(model: LinearClassifier, noise, dataset: SparseDataset,
             cfg: PredictionConfig) -> EvalReport:
    """Top-1 accuracy and mean predictive log likelihood (softmax readout)."""
    if dataset.num_examples == 0:
        raise DataError("cannot evaluate on an empty dataset")
    start = time.perf_counter()
    scores = _score_matrix(model, noise, dataset, cfg.bias_removal)
    # np.argmax returns the lowest index among ties, matching the tie-break
    predictions = np.argmax(scores, axis=1)
    accuracy = float(np.mean(predictions == dataset.labels))
    log_norm = logsumexp(scores, axis=1)
    log_lik = float(
        np.mean(scores[np.arange(len(dataset)), dataset.labels] - log_norm)
    )
    return EvalReport(accuracy, log_lik, dataset.num_examples,
                      time.perf_counter() - start)
