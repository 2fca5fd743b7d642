"""Ranking-quality metrics for binary click prediction: AUC and log loss."""

from __future__ import annotations

import numpy as np

#: probabilities are clamped to [PROB_EPS, 1 - PROB_EPS] before taking logs
PROB_EPS = 1e-12


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks of `scores`, tied values receiving their average rank."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        # ranks i+1 .. j+1 share the same score; assign their mean
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc(scores, labels) -> float:
    """Probability that a positive sample outranks a negative one.

    Equals the area under the ROC curve. Tied (positive, negative) score
    pairs count one half. Computed from average ranks in O(m log m).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be parallel 1-D sequences")
    pos = int(np.sum(labels == 1))
    neg = int(np.sum(labels == 0))
    if pos + neg != labels.size:
        raise ValueError("labels must be binary 0/1")
    if pos == 0 or neg == 0:
        raise ValueError("AUC undefined: need at least one positive and one negative label")
    ranks = _average_ranks(scores)
    pos_rank_sum = float(np.sum(ranks[labels == 1]))
    return (pos_rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)


def log_loss(scores, labels) -> float:
    """Mean negative log-likelihood of binary labels under predicted probabilities."""
    p = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError("scores and labels must be parallel 1-D sequences")
    if p.size == 0:
        raise ValueError("log loss undefined on empty input")
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
