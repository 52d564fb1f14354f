"""Distance functions, per-metric preprocessing and centroid rules.

Every metric comes with the centroid rule that minimizes the
within-cluster sum of that metric for a fixed set of members:

=============  ===================================================
cityblock      component-wise median
sqeuclidean    component-wise mean
cosine         mean of unit rows, rescaled to unit norm
correlation    mean of centered unit rows, re-centered and rescaled
=============  ===================================================

Cosine and correlation work on *prepared* rows (unit norm, and also
zero mean for correlation), so on prepared data both distances reduce
to ``1 - a . b``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import DataMatrix, DistanceKind, DomainError

log = logging.getLogger(__name__)

# norms at or below this are treated as zero
_ZERO_NORM = 1e-12


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape or a.size == 0:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def cityblock(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.sum(np.abs(a - b)))


def sq_euclidean(a, b) -> float:
    a, b = _pair(a, b)
    diff = a - b
    return float(diff @ diff)


def euclidean(a, b) -> float:
    """Rooted Euclidean distance; not used as a clustering criterion."""
    return float(np.sqrt(sq_euclidean(a, b)))


def cosine_distance(a, b) -> float:
    a, b = _pair(a, b)
    na, nb = np.sqrt(a @ a), np.sqrt(b @ b)
    if na == 0:
        raise DomainError("cosine distance undefined for a zero-norm vector (first argument)")
    if nb == 0:
        raise DomainError("cosine distance undefined for a zero-norm vector (second argument)")
    return float(np.clip(1.0 - (a @ b) / (na * nb), 0.0, 2.0))


def correlation_distance(a, b) -> float:
    a, b = _pair(a, b)
    if a.size < 2:
        raise DomainError("correlation distance needs at least 2 components")
    ca, cb = a - a.mean(), b - b.mean()
    na, nb = np.sqrt(ca @ ca), np.sqrt(cb @ cb)
    if na == 0:
        raise DomainError("correlation distance undefined for a constant vector (first argument)")
    if nb == 0:
        raise DomainError("correlation distance undefined for a constant vector (second argument)")
    return float(np.clip(1.0 - (ca @ cb) / (na * nb), 0.0, 2.0))


@dataclass(frozen=True)
class PreparedData:
    matrix: DataMatrix
    metric: DistanceKind
    transform_note: str

    @property
    def values(self) -> np.ndarray:
        return self.matrix.values

    @property
    def n(self) -> int:
        return self.matrix.n

    @property
    def d(self) -> int:
        return self.matrix.d


def prepare_rows(metric: DistanceKind, rows: np.ndarray) -> np.ndarray:
    """Apply the metric's row transform to a 2-D array (returns a new array)."""
    metric = DistanceKind.parse(metric)
    rows = np.array(rows, dtype=np.float64, ndmin=2)
    if metric in (DistanceKind.CITYBLOCK, DistanceKind.SQEUCLIDEAN):
        return rows
    scale = np.maximum(1.0, np.abs(rows).max(axis=1))
    if metric is DistanceKind.CORRELATION:
        if rows.shape[1] < 2:
            raise DomainError("correlation distance needs at least 2 columns")
        rows = rows - rows.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", rows, rows))
    bad = np.flatnonzero(norms <= _ZERO_NORM * scale)
    if len(bad):
        what = "constant row" if metric is DistanceKind.CORRELATION else "zero-norm row"
        raise DomainError(f"{what} is undefined under {metric} distance", row=int(bad[0]))
    return rows / norms[:, None]


def prepare(data: DataMatrix, metric: DistanceKind) -> PreparedData:
    metric = DistanceKind.parse(metric)
    if metric in (DistanceKind.CITYBLOCK, DistanceKind.SQEUCLIDEAN):
        return PreparedData(data, metric, "none")
    rows = prepare_rows(metric, data.values)
    note = "rows scaled to unit norm" if metric is DistanceKind.COSINE else (
        "rows centered to zero mean and scaled to unit norm")
    return PreparedData(DataMatrix(rows, data.labels), metric, note)


def distance(metric: DistanceKind, a, b) -> float:
    """Distance between two prepared vectors."""
    a, b = _pair(a, b)
    if metric is DistanceKind.CITYBLOCK:
        return float(np.sum(np.abs(a - b)))
    if metric is DistanceKind.SQEUCLIDEAN:
        diff = a - b
        return float(diff @ diff)
    if metric in (DistanceKind.COSINE, DistanceKind.CORRELATION):
        return float(max(0.0, 1.0 - a @ b))
    raise ValueError(f"unhandled metric {metric!r}")


def pairwise(metric: DistanceKind, X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Distances between every row of X and every row of C (prepared)."""
    X = np.asarray(X, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if X.shape[1] != C.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {C.shape[1]} columns")
    if metric is DistanceKind.CITYBLOCK:
        return np.abs(X[:, None, :] - C[None, :, :]).sum(axis=2)
    if metric is DistanceKind.SQEUCLIDEAN:
        diff = X[:, None, :] - C[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)
    if metric in (DistanceKind.COSINE, DistanceKind.CORRELATION):
        return np.maximum(0.0, 1.0 - X @ C.T)
    raise ValueError(f"unhandled metric {metric!r}")


def paired(metric: DistanceKind, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Row-wise distances d(A[i], B[i]) between prepared rows."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    if metric is DistanceKind.CITYBLOCK:
        return np.abs(A - B).sum(axis=1)
    if metric is DistanceKind.SQEUCLIDEAN:
        diff = A - B
        return np.einsum("ij,ij->i", diff, diff)
    if metric in (DistanceKind.COSINE, DistanceKind.CORRELATION):
        return np.maximum(0.0, 1.0 - np.einsum("ij,ij->i", A, B))
    raise ValueError(f"unhandled metric {metric!r}")


def stacked_centroids(metric: DistanceKind, stacks: np.ndarray, warn: bool = True) -> np.ndarray:
    """Centroids of several equal-size member sets at once.

    ``stacks`` has shape (sets, members, d); the result has shape (sets, d).
    A cosine/correlation set whose mean vector vanishes falls back to its
    first member; ``warn=False`` logs that at debug level instead.
    """
    if stacks.shape[1] == 0:
        raise ValueError("cannot compute the centroid of an empty member set")
    if metric is DistanceKind.CITYBLOCK:
        return np.median(stacks, axis=1)
    means = stacks.mean(axis=1)
    if metric is DistanceKind.SQEUCLIDEAN:
        return means
    if metric is DistanceKind.CORRELATION:
        means = means - means.mean(axis=1, keepdims=True)
    elif metric is not DistanceKind.COSINE:
        raise ValueError(f"unhandled metric {metric!r}")
    norms = np.sqrt(np.einsum("ij,ij->i", means, means))
    degenerate = norms <= _ZERO_NORM
    if degenerate.any():
        log.log(
            logging.WARNING if warn else logging.DEBUG,
            "%s centroid: member mean has zero norm in %d set(s); using first member",
            metric, int(degenerate.sum()),
        )
        norms = np.where(degenerate, 1.0, norms)
        means = np.where(degenerate[:, None], stacks[:, 0, :], means)
    return means / norms[:, None]


def stacked_sums(metric: DistanceKind, stacks: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Within-set criterion for each (member set, centroid) pair."""
    if metric is DistanceKind.CITYBLOCK:
        return np.abs(stacks - centroids[:, None, :]).sum(axis=(1, 2))
    if metric is DistanceKind.SQEUCLIDEAN:
        diff = stacks - centroids[:, None, :]
        return np.einsum("ijk,ijk->i", diff, diff)
    if metric in (DistanceKind.COSINE, DistanceKind.CORRELATION):
        dots = np.einsum("ijk,ik->ij", stacks, centroids)
        return np.maximum(0.0, 1.0 - dots).sum(axis=1)
    raise ValueError(f"unhandled metric {metric!r}")


def update_centroid(metric: DistanceKind, members) -> np.ndarray:
    """Criterion-minimizing centroid for one non-empty set of prepared rows."""
    members = np.asarray(members, dtype=np.float64)
    if members.ndim == 1:
        members = members.reshape(-1, 1)
    if members.shape[0] == 0:
        raise ValueError("update_centroid called with no members; repair empty clusters first")
    return stacked_centroids(metric, members[None, :, :])[0]


def cluster_sum(metric: DistanceKind, members, centroid) -> float:
    members = np.asarray(members, dtype=np.float64)
    if members.shape[0] == 0:
        return 0.0
    return float(pairwise(metric, members, np.asarray(centroid, dtype=np.float64)[None, :]).sum())
