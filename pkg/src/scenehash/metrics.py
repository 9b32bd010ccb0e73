"""Retrieval metrics: precision@k, average precision, PR curves, latency."""

from __future__ import annotations

import numpy as np

from .errors import DataError

RECALL_GRID = np.round(np.linspace(0.0, 1.0, 21), 2)


def precision_at_k(ranked_relevance, k: int) -> float:
    """Fraction of the top min(k, len) ranked items that are relevant."""
    rel = np.asarray(ranked_relevance, dtype=np.float64)
    if rel.size == 0:
        raise DataError("empty ranking")
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    top = rel[: min(k, rel.size)]
    return float(top.mean())


def average_precision(ranked_relevance, num_relevant: int | None = None) -> float:
    """Mean of precision@r over the ranks r of relevant items.

    ``num_relevant`` is the ground-truth relevant count; by default it is
    taken from the ranking itself (valid when the ranking covers the whole
    index).
    """
    rel = np.asarray(ranked_relevance, dtype=np.float64)
    if num_relevant is None:
        num_relevant = int(rel.sum())
    if num_relevant < 1:
        raise DataError("average precision needs at least one relevant item")
    hits = np.cumsum(rel)
    ranks = np.arange(1, rel.size + 1)
    return float(np.sum((hits / ranks) * rel) / num_relevant)


def interpolated_precision(ranked_relevance, num_relevant: int | None = None,
                           recall_grid: np.ndarray = RECALL_GRID) -> np.ndarray:
    """Precision at fixed recall levels, interpolated as the running max of
    precision over all ranks with recall >= the level."""
    rel = np.asarray(ranked_relevance, dtype=np.float64)
    if num_relevant is None:
        num_relevant = int(rel.sum())
    if num_relevant < 1:
        raise DataError("PR curve needs at least one relevant item")
    hits = np.cumsum(rel)
    ranks = np.arange(1, rel.size + 1)
    precision = hits / ranks
    recall = hits / num_relevant
    # best precision achievable at recall >= level, scanning from the tail
    best_from_here = np.maximum.accumulate(precision[::-1])[::-1]
    out = np.zeros(len(recall_grid))
    for i, level in enumerate(recall_grid):
        reached = recall >= level - 1e-12
        out[i] = float(best_from_here[np.argmax(reached)]) if reached.any() else 0.0
    return out


def mean_pr_curve(relevance_lists, relevant_counts=None,
                  recall_grid: np.ndarray = RECALL_GRID) -> list[tuple[float, float]]:
    """Macro-averaged PR curve over queries, as (recall, precision) pairs."""
    if relevant_counts is None:
        relevant_counts = [None] * len(relevance_lists)
    curves = [
        interpolated_precision(rel, cnt, recall_grid)
        for rel, cnt in zip(relevance_lists, relevant_counts)
    ]
    mean = np.mean(np.stack(curves), axis=0)
    return [(float(r), float(p)) for r, p in zip(recall_grid, mean)]


def latency_stats(values_us) -> dict:
    """Mean / median / p95 of timings, microseconds."""
    arr = np.asarray(values_us, dtype=np.float64)
    if arr.size == 0:
        raise DataError("no latency samples")
    return {
        "mean_us": float(arr.mean()),
        "median_us": float(np.median(arr)),
        "p95_us": float(np.percentile(arr, 95)),
        "count": int(arr.size),
    }
