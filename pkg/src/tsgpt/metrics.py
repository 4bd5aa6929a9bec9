"""Evaluation metrics shared by fine-tuning and the CLI."""

from __future__ import annotations

import numpy as np

Array = np.ndarray


def accuracy(pred_labels, labels) -> float:
    pred_labels = np.asarray(pred_labels)
    labels = np.asarray(labels)
    return float(np.mean(pred_labels == labels))


def mae(a, b) -> float:
    return float(np.mean(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))))


def average_precision(scores, positives) -> float:
    """Area under the precision-recall curve (binary labels).

    Standard step-wise AP: mean of precision@k over the positive hits in
    score-descending order.  A scorer that ranks every positive above every
    negative gets 1.0 on any label distribution.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives).astype(bool)
    n_pos = int(positives.sum())
    if n_pos == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    hits = positives[order]
    cum_pos = np.cumsum(hits)
    ranks = np.arange(1, len(scores) + 1)
    precision_at_hit = cum_pos[hits] / ranks[hits]
    return float(precision_at_hit.sum() / n_pos)


def macro_auprc(class_scores: Array, labels) -> float:
    """One-vs-rest average precision, averaged over classes."""
    class_scores = np.asarray(class_scores, dtype=np.float64)
    labels = np.asarray(labels)
    aps = []
    for c in range(class_scores.shape[1]):
        pos = labels == c
        if pos.any():
            aps.append(average_precision(class_scores[:, c], pos))
    return float(np.mean(aps)) if aps else 0.0
