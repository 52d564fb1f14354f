"""Criterion accounting, silhouette analysis and an exhaustive oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, DataMatrix, DistanceKind
from .metrics import PreparedData, pairwise, prepare, stacked_centroids, stacked_sums

MAX_BRUTE_FORCE_N = 12


def total_criterion(data: PreparedData, assignment, centroids, metric: DistanceKind = None):
    """Per-cluster sums of member-to-centroid distances and their total.

    Returns ``(cluster_sums, total)``.
    """
    metric = data.metric if metric is None else DistanceKind.parse(metric)
    assignment = np.asarray(assignment)
    centroids = np.asarray(centroids, dtype=np.float64)
    k = len(centroids)
    if assignment.shape != (data.n,):
        raise ValueError(f"assignment has shape {assignment.shape}, expected ({data.n},)")
    if assignment.size and (assignment.min() < 0 or assignment.max() >= k):
        raise IndexError(f"cluster index out of range for k={k}")
    point = pairwise(metric, data.values, centroids)[np.arange(data.n), assignment]
    sums = np.array([point[assignment == c].sum() for c in range(k)])
    return sums, float(sums.sum())


@dataclass(frozen=True)
class SilhouetteReport:
    per_point: np.ndarray
    per_cluster_mean: np.ndarray
    overall_mean: float
    metric: DistanceKind
    assignment: np.ndarray


def silhouette_values(D: np.ndarray, assignment: np.ndarray, k: int) -> np.ndarray:
    """Silhouette of every point from a full distance matrix.

    Points in singleton clusters get 0; 0/0 (a == b == 0) is also 0.
    """
    n = len(assignment)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), assignment] = 1.0
    counts = onehot.sum(axis=0)
    totals = D @ onehot  # totals[i, c] = sum of distances from i to members of c
    own = assignment
    own_count = counts[own]
    a = np.divide(totals[np.arange(n), own], own_count - 1,
                  out=np.zeros(n), where=own_count > 1)
    means = totals / counts
    means[np.arange(n), own] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.divide(b - a, denom, out=np.zeros(n), where=denom > 0)
    s[own_count <= 1] = 0.0
    return np.clip(s, -1.0, 1.0)


def silhouette(data: PreparedData, assignment, metric: DistanceKind = None) -> SilhouetteReport:
    metric = data.metric if metric is None else DistanceKind.parse(metric)
    assignment = np.asarray(assignment)
    k = int(assignment.max()) + 1 if assignment.size else 0
    if k < 2:
        raise ConfigError("silhouette needs at least 2 clusters")
    counts = np.bincount(assignment, minlength=k)
    if counts.min() == 0:
        raise ConfigError("silhouette needs every cluster to be non-empty")
    D = pairwise(metric, data.values, data.values)
    s = silhouette_values(D, assignment, k)
    per_cluster = np.array([s[assignment == c].mean() for c in range(k)])
    return SilhouetteReport(s, per_cluster, float(s.mean()), metric, assignment.copy())


def _partitions(n: int, k: int):
    """Restricted growth strings: each set partition of n items into k blocks once."""
    labels = [0] * n

    def rec(i, used):
        if n - i < k - used:
            return
        if i == n:
            if used == k:
                yield list(labels)
            return
        for c in range(min(used + 1, k)):
            labels[i] = c
            yield from rec(i + 1, max(used, c + 1))

    yield from rec(0, 0)


def brute_force_optimum(data: DataMatrix, k: int, metric: DistanceKind):
    """Global minimum of the clustering criterion by full enumeration.

    Every partition of the rows into exactly k non-empty clusters is
    scored with the metric's optimal centroids. Returns
    ``(best_total, best_assignment)``; ties keep the first partition in
    enumeration order.
    """
    metric = DistanceKind.parse(metric)
    if data.n > MAX_BRUTE_FORCE_N:
        raise ValueError(f"brute force refused for n={data.n} > {MAX_BRUTE_FORCE_N}")
    if not 1 <= k <= data.n:
        raise ConfigError(f"k={k} must be between 1 and n={data.n}")
    X = prepare(data, metric).values
    best_total, best = np.inf, None
    for labels in _partitions(data.n, k):
        lab = np.array(labels)
        total = 0.0
        for c in range(k):
            members = X[lab == c][None, :, :]
            cent = stacked_centroids(metric, members, warn=False)
            total += float(stacked_sums(metric, members, cent)[0])
        if total < best_total:
            best_total, best = total, lab
    return best_total, best
