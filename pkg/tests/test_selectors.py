import numpy as np
import pytest

from conftest import planted_dataset, random_dataset, space_of
from redcut.clustering import macqueen_distance_count
from redcut.errors import ConfigError
from redcut.selectors import IrrParams, ikm_qpfs, ikma_qpfs, qpfs, tlkm_qpfs, top_k


def test_qpfs_ranks_every_feature(small_space):
    res = qpfs(small_space.similarity)
    m = small_space.n_features
    assert sorted(res.ranked) == list(range(m))
    assert res.scores == sorted(res.scores, reverse=True)
    assert sum(res.scores) == pytest.approx(1.0)
    assert res.instrumentation["qp_calls"] == 1
    assert res.instrumentation["distance_count"] == 0


def test_theta_override_and_default(small_space):
    sm = small_space.similarity
    assert qpfs(sm).params["theta"] == sm.theta
    top = qpfs(sm, theta_override=1.0).ranked[0]
    assert top == int(np.argmax(sm.s))


def test_tlkm_full_k_equals_qpfs(small_space):
    m = small_space.n_features
    assert tlkm_qpfs(small_space, m, 0.8).ranked == qpfs(small_space.similarity).ranked


def test_tlkm_ranks_representatives_only(small_space):
    res = tlkm_qpfs(small_space, 6, 1.0)
    assert sorted(res.ranked) == res.representatives
    assert len(res.ranked) == 6
    assert res.instrumentation["kmeans_distance_count"] == macqueen_distance_count(small_space.n_features, 6)
    with pytest.raises(ConfigError):
        tlkm_qpfs(small_space, 0, 0.8)


def test_ikm_tau_one_never_splits(small_space):
    res = ikm_qpfs(small_space, IrrParams(k=5, tau=1.0, L=3))
    inst = res.instrumentation
    # radius is always < 1 unless a member is independent of its representative
    if inst["qp_calls"] == 2:
        assert inst["levels_used"] == 1
        assert inst["kmeans_distance_count"] == macqueen_distance_count(small_space.n_features, 5)


def test_ikma_never_costs_more(small_space):
    p = IrrParams(k=5, tau=0.7, L=3)
    a = ikm_qpfs(small_space, p)
    b = ikma_qpfs(small_space, p)
    assert b.instrumentation["distance_count"] <= a.instrumentation["distance_count"]
    assert b.method == "IKMA-QPFS" and a.method == "IKM-QPFS"
    assert "discarded_cluster_count" in b.instrumentation


def test_ikm_levels_bounded(small_space):
    for L in (1, 2, 4):
        res = ikm_qpfs(small_space, IrrParams(k=3, tau=0.5, L=L))
        assert res.instrumentation["levels_used"] <= L
        assert set(res.ranked) == set(res.representatives)


def test_ikm_survivors_are_representatives_with_weight():
    space = space_of(random_dataset(8, m=60, n=40))
    res = ikm_qpfs(space, IrrParams(k=4, tau=0.9, L=2))
    assert len(set(res.ranked)) == len(res.ranked) == res.instrumentation["n_survivors"]


def test_freeze_theta_uses_top_level_value(small_space):
    p = IrrParams(k=4, tau=0.6, L=2)
    frozen = ikm_qpfs(small_space, p, freeze_theta=True)
    forced = ikm_qpfs(small_space, p, theta_override=small_space.similarity.theta)
    assert frozen.ranked == forced.ranked


def test_final_cap(small_space):
    with pytest.raises(ConfigError, match="cap"):
        ikm_qpfs(small_space, IrrParams(k=5, tau=1.0, L=1), final_cap=1)


def test_top_k(small_space):
    res = qpfs(small_space.similarity)
    assert top_k(res, 3) == res.ranked[:3]
    assert top_k(res, 10_000) == res.ranked
    with pytest.raises(ConfigError):
        top_k(res, 0)


def test_irr_params_validation():
    with pytest.raises(ConfigError):
        IrrParams(k=1)
    with pytest.raises(ConfigError):
        IrrParams(tau=0.0)
    with pytest.raises(ConfigError):
        IrrParams(L=0)


def test_planted_small():
    space = space_of(planted_dataset(0))
    res = ikm_qpfs(space, IrrParams(k=15, tau=0.9, L=3))
    assert len(set(res.ranked[:15]) & set(range(10))) >= 8


def test_json_roundtrip(small_space):
    import json

    res = ikma_qpfs(small_space, IrrParams(k=4, tau=0.7, L=2))
    d = json.loads(res.to_json(timings=False))
    assert "wall_time" not in d["instrumentation"]
    assert d["ranked"] == res.ranked
