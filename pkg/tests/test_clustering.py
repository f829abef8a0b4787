import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_macqueen
from redcut.clustering import (
    DistanceCounter,
    FeatureMetric,
    cluster_radius,
    enclosing_radius,
    macqueen_distance_count,
    split_count,
    tau_bounds,
    tlkm,
    variant_macqueen,
)
from redcut.errors import ConfigError
from redcut.infotheory import distance_matrix


def _metric(seed, m=30, n=20, precomputed=True):
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 3, (m, n)).astype(np.int8)
    return FeatureMetric(codes, distance_matrix(codes) if precomputed else None), codes


def test_count_formula_frozen():
    assert macqueen_distance_count(10, 1) == 20 - 2 + 20
    assert macqueen_distance_count(100, 50) == 10000 - 5000 + 200


@pytest.mark.parametrize("m", [10, 50])
@pytest.mark.parametrize("k", [1, 2, 5])
def test_count_matches_formula(m, k):
    metric, _ = _metric(m, m=m)
    counter = DistanceCounter()
    res = variant_macqueen(np.arange(m), k, metric, counter)
    assert counter.count == res.distance_count == macqueen_distance_count(m, k)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 25), st.data())
def test_matches_brute_force(seed, m, data):
    k = data.draw(st.integers(1, m))
    metric, codes = _metric(seed, m=m, n=12)
    d = distance_matrix(codes)
    feats = np.random.default_rng(seed).permutation(m)
    res = variant_macqueen(feats, k, metric)
    clusters, reps, count = brute_macqueen(feats, k, d, codes.astype(float))
    assert res.representatives == reps
    assert [sorted(c.members.tolist()) for c in res.clusters] == [sorted(c) for c in clusters]
    assert res.distance_count == count


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 30), st.data())
def test_partition_and_representatives(seed, m, data):
    k = data.draw(st.integers(1, m))
    metric, _ = _metric(seed, m=m, n=10)
    feats = np.arange(100, 100 + m)
    metric = FeatureMetric(np.vstack([np.zeros((100, 10), np.int8), metric.codes]))
    res = variant_macqueen(feats, k, metric)
    allm = np.concatenate([c.members for c in res.clusters])
    assert sorted(allm.tolist()) == feats.tolist()
    assert len(res.clusters) == k
    for c in res.clusters:
        assert c.representative in c.members


def test_on_demand_metric_equals_lookup():
    lookup, codes = _metric(1, m=20)
    live = FeatureMetric(codes)
    rows, cols = np.arange(20), np.arange(5, 15)
    np.testing.assert_allclose(live.pairwise(rows, cols), lookup.pairwise(rows, cols), atol=1e-12)


def test_errors():
    metric, _ = _metric(0, m=5)
    with pytest.raises(ConfigError):
        variant_macqueen([], 1, metric)
    with pytest.raises(ConfigError):
        variant_macqueen(np.arange(5), 6, metric)
    with pytest.raises(ConfigError):
        tlkm(np.arange(5), 2, 1.5, metric)


def test_split_count():
    assert split_count(0.9, 0.8, 2, 100) == math.ceil((0.9 / 0.8) ** 2)
    assert split_count(0.99, 0.5, 500, 37) == 37
    assert split_count(0.81, 0.8, 1, 10) == 2


def test_tlkm_radii_and_counts():
    metric, _ = _metric(3, m=60, n=6)
    counter = DistanceCounter()
    res = tlkm(np.arange(60), 4, 0.9, metric, counter)
    lc = res.level_counts
    assert lc["level1"] == macqueen_distance_count(60, 4)
    assert lc["level1"] + lc["level2"] + lc["radius"] == res.distance_count == counter.count
    assert sorted(np.concatenate([c.members for c in res.clusters]).tolist()) == list(range(60))
    for c in res.clusters:
        assert c.radius is not None


def test_tlkm_no_split_when_tau_is_one():
    metric, _ = _metric(4, m=30)
    res = tlkm(np.arange(30), 5, 1.0, metric)
    assert len(res.clusters) == 5
    assert res.level_counts["level2"] == 0


def test_tau_bounds_frozen():
    b = tau_bounds(1.0, 5, 100, 40)
    assert b.lower == pytest.approx(max(5 ** (-1 / 40), 95 ** (-1 / 40)))
    assert b.lower == pytest.approx(0.9606, abs=1e-4)
    assert b.upper == 1.0
    with pytest.raises(ConfigError):
        tau_bounds(1.0, 100, 100, 4)


def test_enclosing_radius_within_factor_two():
    for seed in range(5):
        metric, codes = _metric(seed, m=40, n=15)
        d = distance_matrix(codes)
        best = d.max(axis=1).min()
        r = enclosing_radius(np.arange(40), metric)
        assert best - 1e-12 <= r <= 2 * best + 1e-12


def test_cluster_radius_counts_members():
    metric, _ = _metric(2, m=12)
    res = variant_macqueen(np.arange(12), 3, metric)
    counter = DistanceCounter()
    for c in res.clusters:
        cluster_radius(c, metric, counter)
    assert counter.count == 12
