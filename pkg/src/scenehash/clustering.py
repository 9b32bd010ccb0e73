"""Intensity-based scene clustering of a diagnosis video.

Frames are downsampled to 32x32 grayscale intensity vectors and grouped
with seeded k-means (k-means++ init, Lloyd iterations, empty clusters
re-seeded from farthest points). Deterministic given the seed.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError
from .images import GrayImage, bilinear_resize

FEATURE_SIZE = 32
MAX_ITERATIONS = 100
REL_TOLERANCE = 1e-4


def intensity_features(images: list[GrayImage], size: int = FEATURE_SIZE) -> np.ndarray:
    if not images:
        raise DataError("no images to featurize")
    return np.stack([bilinear_resize(img.data, size, size).ravel() for img in images])


def _squared_distances(features, centers):
    # ||x||^2 - 2 x.c + ||c||^2, clipped against float cancellation
    d = (
        np.sum(features**2, axis=1)[:, None]
        - 2.0 * features @ centers.T
        + np.sum(centers**2, axis=1)[None, :]
    )
    return np.maximum(d, 0.0)


def _kmeans_pp_init(features, k, rng):
    n = features.shape[0]
    centers = np.empty((k, features.shape[1]))
    centers[0] = features[rng.integers(n)]
    closest = _squared_distances(features, centers[:1]).ravel()
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            centers[i] = features[rng.integers(n)]
            continue
        centers[i] = features[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, _squared_distances(features, centers[i : i + 1]).ravel())
    return centers


def kmeans(features: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Cluster rows of ``features`` into k nonempty groups, labels 0..k-1."""
    n = features.shape[0]
    if k < 1:
        raise DataError(f"cluster count {k} must be >= 1")
    if k > n:
        raise DataError(f"cannot form {k} clusters from {n} images")
    features = np.asarray(features, dtype=np.float64)
    rng = np.random.default_rng(np.random.SeedSequence([seed, n, k]))
    centers = _kmeans_pp_init(features, k, rng)

    prev_inertia = np.inf
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(MAX_ITERATIONS):
        dists = _squared_distances(features, centers)
        labels = dists.argmin(axis=1)
        point_cost = dists[np.arange(n), labels]

        for cluster in range(k):
            if not np.any(labels == cluster):
                farthest = int(np.argmax(point_cost))
                labels[farthest] = cluster
                point_cost[farthest] = 0.0

        inertia = float(point_cost.sum())
        for cluster in range(k):
            centers[cluster] = features[labels == cluster].mean(axis=0)
        if np.isfinite(prev_inertia) and prev_inertia - inertia <= REL_TOLERANCE * max(prev_inertia, 1e-300):
            break
        prev_inertia = inertia
    return labels


def cluster_scenes(images: list[GrayImage], k: int, seed: int) -> np.ndarray:
    """Scene labels for a frame sequence from raw downsampled intensities."""
    return kmeans(intensity_features(images), k, seed)


def smooth_temporal(labels: np.ndarray, window: int) -> np.ndarray:
    """Optional post-step (off by default): majority-vote each frame's label
    over a +-window neighborhood in frame order, so scenes stay contiguous
    runs even when raw k-means splits them. Ties keep the current label.
    """
    if window < 1:
        raise DataError(f"smoothing window {window} must be >= 1")
    labels = np.asarray(labels, dtype=np.int64)
    out = labels.copy()
    n = len(labels)
    for i in range(n):
        lo, hi = max(0, i - window), min(n, i + window + 1)
        votes = np.bincount(labels[lo:hi])
        best = int(votes.argmax())
        if votes[best] > votes[labels[i]]:
            out[i] = best
    return out
