import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import check_trace
from distkmeans.core import (
    ConfigError,
    DataMatrix,
    DistanceKind,
    DomainError,
    InitStrategy,
    KMeansConfig,
    Rng,
    derive_subseed,
)
from distkmeans.engine import (
    EngineState,
    assign_all,
    batch_phase,
    init_centroids,
    kmeans,
    online_phase,
    repair_empty,
)
from distkmeans.evaluation import brute_force_optimum, total_criterion
from distkmeans.metrics import pairwise, prepare, update_centroid

SQ = DistanceKind.SQEUCLIDEAN


def col(*values):
    return DataMatrix(np.array(values, dtype=float).reshape(-1, 1))


# ---------------------------------------------------------------- init


def test_init_explicit_rows(iris):
    prep = prepare(iris, SQ)
    cfg = KMeansConfig(k=3, init=InitStrategy.from_rows([0, 5, 9]))
    np.testing.assert_array_equal(init_centroids(prep, cfg, Rng(0)), iris.values[[0, 5, 9]])


def test_init_explicit_centroids_are_prepared():
    prep = prepare(DataMatrix([[3.0, 4.0], [1.0, 0.0]]), DistanceKind.COSINE)
    cfg = KMeansConfig(k=1, metric="cosine", init=InitStrategy.from_centroids([[0.0, 5.0]]))
    np.testing.assert_allclose(init_centroids(prep, cfg, Rng(0)), [[0.0, 1.0]])


def test_init_sample_k_equals_n_is_permutation():
    data = col(*range(8))
    cfg = KMeansConfig(k=8)
    cents = init_centroids(prepare(data, SQ), cfg, Rng(3))
    assert sorted(cents[:, 0]) == list(range(8))


def test_init_sample_golden(iris, golden):
    prep = prepare(iris, SQ)
    cfg = KMeansConfig(k=3)
    a = init_centroids(prep, cfg, Rng(derive_subseed(1, 0)))
    b = init_centroids(prep, cfg, Rng(derive_subseed(1, 0)))
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, iris.values[golden["sample_iris_seed1_r0"]])


def test_init_spread_picks_far_rows():
    data = col(0, 0.1, 0.2, 5, 10)
    cfg = KMeansConfig(k=2, init="spread")
    for seed in range(5):
        cents = sorted(init_centroids(prepare(data, SQ), cfg, Rng(seed))[:, 0])
        assert cents[1] - cents[0] >= 5


def test_init_k_too_large():
    with pytest.raises(ConfigError):
        init_centroids(prepare(col(1, 2), SQ), KMeansConfig(k=3), Rng(0))


# ---------------------------------------------------------------- assign


def test_assign_all_basic():
    prep = prepare(col(0, 10), SQ)
    a, dist, num = assign_all(prep, np.array([[1.0], [9.0]]), SQ)
    assert list(a) == [0, 1] and num == 2
    np.testing.assert_array_equal(dist, [1.0, 1.0])


def test_assign_all_tie_goes_to_lowest_index():
    prep = prepare(col(5), SQ)
    a, _, _ = assign_all(prep, np.array([[1.0], [9.0]]), SQ)
    assert list(a) == [0]


def test_assign_all_tie_keeps_previous_cluster():
    prep = prepare(col(5), SQ)
    a, _, num = assign_all(prep, np.array([[1.0], [9.0]]), SQ, prev=np.array([1]))
    assert list(a) == [1] and num == 0


def test_assign_all_counts_moves():
    prep = prepare(col(0, 1, 9, 10), SQ)
    a, _, num = assign_all(prep, np.array([[0.5], [9.5]]), SQ, prev=np.array([0, 1, 1, 1]))
    assert list(a) == [0, 0, 1, 1] and num == 1


def test_first_iris_assignment_moves_every_point(iris):
    prep = prepare(iris, DistanceKind.CITYBLOCK)
    _, _, num = assign_all(prep, iris.values[[0, 60, 120]], DistanceKind.CITYBLOCK)
    assert num == 150


# ---------------------------------------------------------------- repair


def _state(prep, centroids, prev=None):
    a, dist, _ = assign_all(prep, centroids, prep.metric, prev)
    return EngineState(a, centroids, dist)


def test_repair_single_empty_cluster():
    prep = prepare(col(0, 0.1, 10), SQ)
    state = _state(prep, np.array([[0.05], [50.0]]))
    assert list(state.assignment) == [0, 0, 0]
    fixed = repair_empty(state, prep)
    assert list(fixed.assignment) == [0, 0, 1]
    assert fixed.centroids[1, 0] == 10.0
    assert fixed.centroids[0, 0] == pytest.approx(0.05)


def test_repair_two_empty_clusters():
    # all points start in cluster 0 (centroid 1); dists 1, 0, 1, 81, 361.
    # cluster 1 takes 20; donor mean becomes 3.25 so 10 (45.5625) is next for cluster 2
    prep = prepare(col(0, 1, 2, 10, 20), SQ)
    state = _state(prep, np.array([[1.0], [100.0], [200.0]]))
    fixed = repair_empty(state, prep)
    assert list(fixed.assignment) == [0, 0, 0, 2, 1]
    assert fixed.centroids[0, 0] == pytest.approx(1.0)
    np.testing.assert_allclose(fixed.point_dist[:3], [1.0, 0.0, 1.0])


def test_repair_noop_without_empty_clusters():
    prep = prepare(col(0, 1, 9, 10), SQ)
    state = _state(prep, np.array([[0.5], [9.5]]))
    assert repair_empty(state, prep) is state


# ---------------------------------------------------------------- phases


def test_batch_then_online_on_line4(line4):
    cfg = KMeansConfig(k=2, init=InitStrategy.from_rows([0, 3]))
    result = kmeans(line4, cfg)
    assert [(r.iter, r.phase, r.num, r.sum) for r in result.trace] == [(1, 1, 4, 1.0), (2, 2, 0, 1.0)]
    assert list(result.assignment) == [0, 0, 1, 1]
    best, _ = brute_force_optimum(line4, 2, SQ)
    assert result.total_sum == best == 1.0


def test_batch_on_converged_state_emits_single_zero_row(line4):
    prep = prepare(line4, SQ)
    state = EngineState(np.array([0, 0, 1, 1]), np.array([[0.5], [9.5]]), None)
    trace = []
    out = batch_phase(prep, KMeansConfig(k=2), state, trace)
    assert [(r.phase, r.num, r.sum) for r in trace] == [(1, 0, 1.0)]
    assert out.converged


def test_online_at_local_optimum_emits_single_zero_row(line4):
    prep = prepare(line4, SQ)
    state = EngineState(np.array([0, 0, 1, 1]), np.array([[0.5], [9.5]]), None, iter=3)
    trace = []
    online_phase(prep, KMeansConfig(k=2), state, trace)
    assert [(r.iter, r.phase, r.num) for r in trace] == [(4, 2, 0)]


def test_online_phase_improves_batch_fixed_point():
    # batch-stable but not single-move optimal: moving 9 to the right cluster helps
    data = col(0, 9, 10, 15, 19)
    prep = prepare(data, SQ)
    cents = np.array([[4.5], [44 / 3]])
    state = EngineState(np.array([0, 0, 1, 1, 1]), cents, None, iter=2)
    a, _, num = assign_all(prep, state.centroids, SQ, prev=state.assignment)
    assert num == 0  # batch would not move anything
    trace = []
    out = online_phase(prep, KMeansConfig(k=2), state, trace)
    assert [r.num for r in trace] == [1, 0]
    assert list(out.assignment) == [0, 1, 1, 1, 1]
    assert trace[0].sum == pytest.approx(64.75)
    assert trace[0].sum < total_criterion(prep, [0, 0, 1, 1, 1], cents)[1]


def test_non_convergence_is_flagged():
    rng = np.random.default_rng(0)
    data = DataMatrix(rng.normal(size=(200, 2)))
    result = kmeans(data, KMeansConfig(k=8, max_iters=1, seed=3))
    assert not result.converged


# ---------------------------------------------------------------- kmeans


@pytest.mark.parametrize("metric", list(DistanceKind))
def test_k_equals_n_gives_zero(metric):
    data = DataMatrix([[1.0, 2.0, 0.5], [3.0, 1.0, 2.0], [0.5, 0.5, 4.0], [2.0, 5.0, 1.0]])
    result = kmeans(data, KMeansConfig(k=4, metric=metric, seed=2))
    assert result.total_sum == pytest.approx(0.0, abs=1e-12)
    assert sorted(result.assignment) == [0, 1, 2, 3]


def test_domain_error_propagates():
    data = DataMatrix([[1.0, 2.0], [0.0, 0.0], [3.0, 1.0]])
    with pytest.raises(DomainError, match="row 1"):
        kmeans(data, KMeansConfig(k=2, metric="cosine"))


def test_k_greater_than_n():
    with pytest.raises(ConfigError):
        kmeans(col(1, 2), KMeansConfig(k=3))


def _result_invariants(data, result, cfg):
    prep = prepare(data, cfg.metric)
    n, k = data.n, cfg.k
    check_trace(list(result.trace), n)
    assert np.bincount(result.assignment, minlength=k).min() >= 1
    sums, total = total_criterion(prep, result.assignment, result.centroids)
    assert result.total_sum == pytest.approx(sum(result.cluster_sums), rel=1e-9, abs=1e-12)
    assert result.total_sum == pytest.approx(total, rel=1e-9, abs=1e-12)
    # centroids are the metric's optimum for the final assignment
    for c in range(k):
        members = prep.values[result.assignment == c]
        np.testing.assert_allclose(result.centroids[c], update_centroid(cfg.metric, members), atol=1e-12)
    # assignment is nearest-centroid up to exact ties
    D = pairwise(cfg.metric, prep.values, result.centroids)
    own = D[np.arange(n), result.assignment]
    assert np.all(own <= D.min(axis=1) + 1e-12)
    # no single move lowers the criterion (centroids re-optimized)
    base = result.total_sum
    for i in range(n):
        src = result.assignment[i]
        if np.count_nonzero(result.assignment == src) < 2:
            continue
        for dst in range(k):
            if dst == src:
                continue
            trial = result.assignment.copy()
            trial[i] = dst
            cents = np.array([update_centroid(cfg.metric, prep.values[trial == c]) for c in range(k)])
            assert total_criterion(prep, trial, cents)[1] >= base - 1e-9 * max(1.0, base)


@pytest.mark.parametrize("metric", list(DistanceKind))
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(4, 25), d=st.integers(2, 4), k=st.integers(1, 4))
def test_random_runs_satisfy_invariants(metric, seed, n, d, k):
    rng = np.random.default_rng(seed)
    data = DataMatrix(rng.normal(size=(n, d)) + rng.integers(0, 3, size=(n, 1)) * 3)
    cfg = KMeansConfig(k=min(k, n), metric=metric, replicates=3, seed=seed)
    _result_invariants(data, kmeans(data, cfg), cfg)


@pytest.mark.parametrize("metric", list(DistanceKind))
def test_iris_invariants(iris, metric):
    cfg = KMeansConfig(k=3, metric=metric, replicates=5, seed=11)
    _result_invariants(iris, kmeans(iris, cfg), cfg)


@pytest.mark.parametrize("metric", list(DistanceKind))
def test_seed_determinism(wine, metric):
    cfg = KMeansConfig(k=3, metric=metric, replicates=4, seed=99)
    assert kmeans(wine, cfg).same_outcome(kmeans(wine, cfg))


def test_best_replicate_is_minimum(iris):
    cfg = KMeansConfig(k=3, metric="cityblock", replicates=10, seed=4)
    result = kmeans(iris, cfg)
    prep = prepare(iris, cfg.metric)
    from distkmeans.engine import cluster_sums, run_replicate

    totals = []
    for r in range(10):
        state, _ = run_replicate(prep, cfg, Rng(derive_subseed(4, r)))
        totals.append(float(cluster_sums(prep, state.assignment, state.centroids).sum()))
    assert result.total_sum == min(totals)
    assert result.replicate_index == totals.index(min(totals))


@pytest.mark.parametrize("metric", list(DistanceKind))
def test_small_instance_reaches_brute_force_optimum(metric):
    rng = np.random.default_rng(77)
    data = DataMatrix(rng.normal(size=(7, 3)))
    best, _ = brute_force_optimum(data, 3, metric)
    result = kmeans(data, KMeansConfig(k=3, metric=metric, replicates=50, seed=5))
    assert result.total_sum == pytest.approx(best, abs=1e-9)
    assert result.total_sum >= best - 1e-9
