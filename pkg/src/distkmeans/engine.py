"""Two-phase K-means over any of the four metrics.

Phase 1 is the classic batch loop: assign every point to its nearest
centroid, then recompute all centroids. Phase 2 refines the batch
result with single-point moves; a move is accepted only when it
strictly lowers the total criterion after both affected centroids are
re-optimized. Each replicate is sequential so its trace is well defined.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from .core import (
    ClusteringResult,
    ConfigError,
    DataMatrix,
    DistanceKind,
    IterationRecord,
    KMeansConfig,
    Rng,
    derive_subseed,
)
from .metrics import PreparedData, pairwise, prepare, prepare_rows, stacked_centroids, stacked_sums

log = logging.getLogger(__name__)

# phase-2 moves must improve the total by more than this times max(total, 1)
MOVE_TOLERANCE = 1e-12
# cap on member sets evaluated per vectorized block in phase 2
_BLOCK = 256


@dataclass
class EngineState:
    assignment: Optional[np.ndarray]
    centroids: np.ndarray
    point_dist: Optional[np.ndarray]
    iter: int = 0
    phase: int = 1
    converged: bool = True


def init_centroids(data: PreparedData, cfg: KMeansConfig, rng: Rng) -> np.ndarray:
    X = data.values
    n = data.n
    if cfg.k > n:
        raise ConfigError(f"k={cfg.k} exceeds the number of rows n={n}")
    init = cfg.init
    if init.kind == "sample":
        return X[rng.sample(n, cfg.k)].copy()
    if init.kind == "spread":
        chosen = [rng.below(n)]
        nearest = pairwise(data.metric, X, X[chosen])[:, 0]
        while len(chosen) < cfg.k:
            nearest[chosen] = -1.0
            nxt = int(np.argmax(nearest))
            chosen.append(nxt)
            nearest = np.minimum(nearest, pairwise(data.metric, X, X[[nxt]])[:, 0])
        return X[chosen].copy()
    cfg.check_against(data.matrix)
    if init.rows is not None:
        return X[list(init.rows)].copy()
    return prepare_rows(data.metric, np.array(init.centroids, dtype=np.float64))


def assign_all(data: PreparedData, centroids: np.ndarray, metric: DistanceKind,
               prev: Optional[np.ndarray] = None):
    """Nearest-centroid assignment.

    Ties go to the lowest centroid index, except that a point whose
    previous cluster is among the tied nearest ones stays where it is.
    Returns ``(assignment, point_dist, num_moved)``; with no previous
    assignment every point counts as moved.
    """
    D = pairwise(metric, data.values, centroids)
    assignment = np.argmin(D, axis=1)
    rows = np.arange(data.n)
    if prev is None:
        return assignment, D[rows, assignment], data.n
    stay = D[rows, prev] <= D[rows, assignment]
    assignment = np.where(stay, prev, assignment)
    return assignment, D[rows, assignment], int(np.count_nonzero(assignment != prev))


def compute_centroids(data: PreparedData, assignment: np.ndarray, k: int) -> np.ndarray:
    X = data.values
    out = np.empty((k, data.d))
    for c in range(k):
        members = X[assignment == c]
        out[c] = stacked_centroids(data.metric, members[None, :, :])[0]
    return out


def cluster_sums(data: PreparedData, assignment: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    D = pairwise(data.metric, data.values, centroids)
    point = D[np.arange(data.n), assignment]
    return np.array([point[assignment == c].sum() for c in range(len(centroids))])


def repair_empty(state: EngineState, data: PreparedData) -> EngineState:
    """Give every empty cluster the point lying farthest from its centroid.

    Empty clusters are handled in ascending order; donors must keep at
    least one member. A donor's centroid and member distances are
    recomputed before the next empty cluster is served.
    """
    k = len(state.centroids)
    assignment = state.assignment.copy()
    centroids = state.centroids.copy()
    point_dist = state.point_dist.copy()
    counts = np.bincount(assignment, minlength=k)
    empties = np.flatnonzero(counts == 0)
    if len(empties) == 0:
        return state
    X = data.values
    for e in empties:
        eligible = counts[assignment] >= 2
        if not eligible.any():
            raise RuntimeError("cannot repair empty cluster: every cluster is a singleton")
        candidates = np.where(eligible, point_dist, -np.inf)
        i = int(np.argmax(candidates))
        donor = assignment[i]
        assignment[i] = e
        counts[donor] -= 1
        counts[e] = 1
        centroids[e] = X[i]
        point_dist[i] = 0.0
        members = np.flatnonzero(assignment == donor)
        centroids[donor] = stacked_centroids(data.metric, X[members][None, :, :])[0]
        point_dist[members] = pairwise(data.metric, X[members], centroids[[donor]])[:, 0]
    return replace(state, assignment=assignment, centroids=centroids, point_dist=point_dist)


def batch_phase(data: PreparedData, cfg: KMeansConfig, state: EngineState,
                trace: List[IterationRecord]) -> EngineState:
    k = cfg.k
    assignment, centroids = state.assignment, state.centroids
    point_dist = state.point_dist
    it = state.iter
    prev_total = np.inf
    emitted = False
    converged = False
    for _ in range(cfg.max_iters):
        new_assign, dist, num = assign_all(data, centroids, data.metric, prev=assignment)
        if num == 0 and emitted:
            converged = True
            break
        trial = EngineState(new_assign, centroids, dist, it, 1)
        if np.bincount(new_assign, minlength=k).min() == 0:
            trial = repair_empty(trial, data)
            if assignment is not None:
                num = int(np.count_nonzero(trial.assignment != assignment))
        new_centroids = compute_centroids(data, trial.assignment, k)
        total = float(cluster_sums(data, trial.assignment, new_centroids).sum())
        if emitted and total >= prev_total:
            # no real progress (rounding); keep the previous configuration
            converged = True
            break
        it += 1
        trace.append(IterationRecord(it, 1, num, total))
        emitted = True
        assignment, centroids, prev_total = trial.assignment, new_centroids, total
        point_dist = pairwise(data.metric, data.values, centroids)[np.arange(data.n), assignment]
        if num == 0:
            converged = True
            break
    if not converged:
        log.warning("batch phase stopped at max_iters=%d without converging", cfg.max_iters)
    return EngineState(assignment, centroids, point_dist, it, 1, converged)


class _MoveTable:
    """Exact criterion changes for single-point moves.

    ``leave[i]`` is the change in the sum of point i's own cluster when
    i leaves it; ``join[i, c]`` is the change in cluster c's sum when i
    joins it. Both come from recomputing the optimal centroid of the
    changed member set. Only clusters whose membership changed are
    refreshed after a move.
    """

    def __init__(self, data: PreparedData, assignment: np.ndarray, sums: np.ndarray):
        self.data = data
        self.assignment = assignment
        self.sums = sums
        n, k = data.n, len(sums)
        self.leave = np.zeros(n)
        self.join = np.full((n, k), np.inf)
        for c in range(k):
            self.refresh(c)

    def _evaluate(self, stacks_of) -> np.ndarray:
        out = []
        for start in range(0, stacks_of.shape[0], _BLOCK):
            block = self.data.values[stacks_of[start:start + _BLOCK]]
            cents = stacked_centroids(self.data.metric, block, warn=False)
            out.append(stacked_sums(self.data.metric, block, cents))
        return np.concatenate(out) if out else np.empty(0)

    def refresh(self, c: int) -> None:
        members = np.flatnonzero(self.assignment == c)
        others = np.flatnonzero(self.assignment != c)
        m = len(members)
        if m >= 2:
            keep = ~np.eye(m, dtype=bool)
            without = np.broadcast_to(members, (m, m))[keep].reshape(m, m - 1)
            self.leave[members] = self._evaluate(without) - self.sums[c]
        elif m == 1:
            self.leave[members] = np.nan
        self.join[members, c] = np.inf
        if len(others):
            with_point = np.empty((len(others), m + 1), dtype=np.intp)
            with_point[:, :m] = members
            with_point[:, m] = others
            self.join[others, c] = self._evaluate(with_point) - self.sums[c]


def online_phase(data: PreparedData, cfg: KMeansConfig, state: EngineState,
                 trace: List[IterationRecord]) -> EngineState:
    X = data.values
    n, k = data.n, cfg.k
    assignment = state.assignment.copy()
    centroids = state.centroids.copy()
    sums = cluster_sums(data, assignment, centroids)
    total = float(sums.sum())
    it = state.iter
    counts = np.bincount(assignment, minlength=k)
    table = _MoveTable(data, assignment, sums)
    max_moves = cfg.max_iters * n
    moves = 0
    pos = 0
    quiet = 0
    converged = True
    while quiet < n:
        i = pos
        pos = (pos + 1) % n
        src = assignment[i]
        if counts[src] < 2:
            quiet += 1
            continue
        deltas = table.leave[i] + table.join[i]
        dst = int(np.argmin(deltas))
        if not deltas[dst] < -MOVE_TOLERANCE * max(total, 1.0):
            quiet += 1
            continue
        if moves >= max_moves:
            converged = False
            log.warning("online phase stopped after %d moves without converging", moves)
            break
        assignment[i] = dst
        counts[src] -= 1
        counts[dst] += 1
        for c in (src, dst):
            members = X[assignment == c]
            centroids[c] = stacked_centroids(data.metric, members[None, :, :])[0]
        new_sums = cluster_sums(data, assignment, centroids)
        new_total = float(new_sums.sum())
        if not new_total < total:
            # predicted gain lost to rounding; undo and treat the point as settled
            assignment[i] = src
            counts[src] += 1
            counts[dst] -= 1
            for c in (src, dst):
                members = X[assignment == c]
                centroids[c] = stacked_centroids(data.metric, members[None, :, :])[0]
            table.leave[i] = 0.0
            quiet += 1
            continue
        sums[:] = new_sums
        total = new_total
        moves += 1
        it += 1
        trace.append(IterationRecord(it, 2, 1, total))
        table.refresh(src)
        table.refresh(dst)
        quiet = 0
    if converged:
        it += 1
        trace.append(IterationRecord(it, 2, 0, total))
    point_dist = pairwise(data.metric, X, centroids)[np.arange(n), assignment]
    return EngineState(assignment, centroids, point_dist, it, 2, converged and state.converged)


def run_replicate(data: PreparedData, cfg: KMeansConfig, rng: Rng):
    """One init -> batch -> online run. Returns ``(state, trace)``."""
    trace: List[IterationRecord] = []
    state = EngineState(None, init_centroids(data, cfg, rng), None)
    state = batch_phase(data, cfg, state, trace)
    state = online_phase(data, cfg, state, trace)
    return state, trace


def kmeans(data: DataMatrix, cfg: KMeansConfig) -> ClusteringResult:
    """Best-of-replicates two-phase K-means.

    Replicate r is seeded with ``derive_subseed(cfg.seed, r)``; the
    replicate with the smallest total criterion wins, ties going to the
    lowest replicate index. Centroids are reported in the metric's
    prepared space (unit rows for cosine, centered unit rows for
    correlation).
    """
    cfg.check_against(data)
    prepared = prepare(data, cfg.metric)
    start = time.perf_counter()
    best = None
    for r in range(cfg.replicates):
        state, trace = run_replicate(prepared, cfg, Rng(derive_subseed(cfg.seed, r)))
        sums = cluster_sums(prepared, state.assignment, state.centroids)
        total = float(sums.sum())
        if best is None or total < best[0]:
            best = (total, r, state, trace, sums)
    elapsed = time.perf_counter() - start
    total, r, state, trace, sums = best
    return ClusteringResult(
        assignment=state.assignment,
        centroids=state.centroids,
        cluster_sums=sums,
        total_sum=total,
        trace=tuple(trace),
        replicate_index=r,
        elapsed=elapsed,
        metric=cfg.metric,
        converged=state.converged,
        config=cfg,
    )
