"""Feature selection pipelines: plain QPFS and its clustering-accelerated variants.

* ``qpfs`` ranks every feature by the simplex QP weights.
* ``tlkm_qpfs`` runs two-level k-means over the features and ranks the
  cluster representatives only.
* ``ikm_qpfs`` alternates k-means splitting with QPFS: clusters whose
  representative gets zero weight and whose radius is already small are
  dropped, wide clusters are split again, up to ``L`` levels.
* ``ikma_qpfs`` additionally drops every zero-weight cluster immediately,
  whatever its radius.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .clustering import (
    DistanceCounter,
    FeatureMetric,
    cluster_radius,
    tlkm,
    variant_macqueen,
)
from .errors import ConfigError
from .infotheory import SimilarityModel, cached_similarity
from .qp import DEFAULT_TOL, ZERO_TOL, rank_by_alpha, solve_theta_qp

METHODS = ("QPFS", "TLKM-QPFS", "IKM-QPFS", "IKMA-QPFS")
FINAL_QP_CAP = 5000


@dataclass
class FeatureSpace:
    """Everything a selector needs about one training set.

    The similarity model is computed once; clustered selectors read
    distances and sub-models out of it instead of re-estimating MI.
    """

    similarity: SimilarityModel
    metric: FeatureMetric

    @classmethod
    def from_codes(cls, codes, labels, normalized: bool = False, cache_dir=None) -> "FeatureSpace":
        codes = getattr(codes, "codes", codes)
        sim = cached_similarity(codes, labels, cache_dir, normalized)
        return cls(sim, FeatureMetric(codes, sim.distances()))

    @property
    def n_features(self) -> int:
        return self.similarity.n_features


@dataclass
class IrrParams:
    k: int = 15
    tau: float = 0.8
    L: int = 3
    zero_tol: float = ZERO_TOL
    aggressive: bool = False

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError(f"k must be at least 2, got {self.k}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")
        if self.L < 1:
            raise ConfigError(f"L (levels) must be at least 1, got {self.L}")


@dataclass
class SelectionResult:
    ranked: list
    scores: list
    method: str
    params: dict = field(default_factory=dict)
    instrumentation: dict = field(default_factory=dict)
    representatives: Optional[list] = None

    def to_dict(self, timings: bool = True) -> dict:
        inst = dict(self.instrumentation)
        if not timings:
            inst.pop("wall_time", None)
        return {
            "method": self.method,
            "params": self.params,
            "ranked": [int(i) for i in self.ranked],
            "scores": [float(x) for x in self.scores],
            "representatives": None if self.representatives is None
            else [int(i) for i in self.representatives],
            "instrumentation": inst,
        }

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2)


class _Tracker:
    """Mutable instrumentation shared by one selector run."""

    def __init__(self):
        self.counter = DistanceCounter()
        self.qp_sizes = []
        self.levels_used = 0
        self.discard_levels = []
        self.dropped_zero_alpha = 0

    def as_dict(self) -> dict:
        by = self.counter.by_label
        return {
            "distance_count": self.counter.count,
            "kmeans_distance_count": by.get("kmeans", 0) + by.get("level1", 0) + by.get("level2", 0),
            "radius_distance_count": by.get("radius", 0),
            "qp_calls": len(self.qp_sizes),
            "qp_sizes": list(self.qp_sizes),
            "max_qp_size": max(self.qp_sizes) if self.qp_sizes else 0,
            "levels_used": self.levels_used,
            "discarded_cluster_count": len(self.discard_levels),
            "discard_levels": list(self.discard_levels),
            "dropped_zero_alpha": self.dropped_zero_alpha,
        }


def _solve_sub(sim: SimilarityModel, indices, theta, freeze_theta, tol, tracker):
    """QPFS on the sub-model over sorted ``indices``; returns (indices, alpha, sub-model)."""
    idx = np.sort(np.asarray(indices, dtype=int))
    sub = sim if idx.size == sim.n_features and np.array_equal(idx, np.arange(idx.size)) else sim.restrict(idx)
    if theta is None:
        theta = sim.theta if freeze_theta else sub.theta
    sol = solve_theta_qp(sub.Q, sub.s, theta, tol=tol)
    tracker.qp_sizes.append(int(idx.size))
    return idx, sol.alpha, sub, theta


def _ranked(idx, alpha, s, zero_tol):
    order = rank_by_alpha(alpha, s, zero_tol)
    scores = np.where(alpha > zero_tol, alpha, 0.0)
    return [int(idx[i]) for i in order], [float(scores[i]) for i in order]


def qpfs(
    similarity: SimilarityModel,
    theta_override: Optional[float] = None,
    tol: float = DEFAULT_TOL,
    zero_tol: float = ZERO_TOL,
) -> SelectionResult:
    """Rank all features by their weight in the full simplex QP."""
    t0 = time.perf_counter()
    tracker = _Tracker()
    idx, alpha, sub, theta = _solve_sub(
        similarity, np.arange(similarity.n_features), theta_override, True, tol, tracker
    )
    ranked, scores = _ranked(idx, alpha, sub.s, zero_tol)
    inst = tracker.as_dict()
    inst["n_ranked"] = len(ranked)
    inst["wall_time"] = time.perf_counter() - t0
    return SelectionResult(
        ranked, scores, "QPFS",
        {"theta": theta, "tol": tol, "zero_tol": zero_tol},
        inst,
    )


def tlkm_qpfs(
    space: FeatureSpace,
    k_init: int,
    tau: float,
    theta_override: Optional[float] = None,
    tol: float = DEFAULT_TOL,
    zero_tol: float = ZERO_TOL,
    freeze_theta: bool = False,
) -> SelectionResult:
    """Two-level k-means over features, then QPFS on the representatives."""
    t0 = time.perf_counter()
    tracker = _Tracker()
    m = space.n_features
    if not 1 <= k_init <= m:
        raise ConfigError(f"k' (initial clusters) must lie in [1, {m}], got {k_init}")
    clusters = tlkm(np.arange(m), k_init, tau, space.metric, tracker.counter)
    tracker.levels_used = 2 if clusters.level_counts.get("level2", 0) else 1
    reps = clusters.representatives
    idx, alpha, sub, theta = _solve_sub(space.similarity, reps, theta_override, freeze_theta, tol, tracker)
    ranked, scores = _ranked(idx, alpha, sub.s, zero_tol)
    inst = tracker.as_dict()
    inst["n_clusters"] = len(clusters.clusters)
    inst["n_ranked"] = len(ranked)
    inst["wall_time"] = time.perf_counter() - t0
    return SelectionResult(
        ranked, scores, "TLKM-QPFS",
        {"k_init": k_init, "tau": tau, "theta": theta_override, "tol": tol, "zero_tol": zero_tol},
        inst,
        representatives=sorted(int(r) for r in reps),
    )


def irr(space, clusters, alpha, p: IrrParams, level: int, tracker, theta=None, freeze_theta=False, tol=DEFAULT_TOL):
    """Keep, drop or split each cluster; returns the surviving representatives.

    ``alpha[i]`` is the QP weight of ``clusters[i].representative``. A cluster
    is terminal when its radius is below ``tau`` or ``level == L``; a terminal
    cluster survives iff its weight is positive. Other clusters are split into
    ``min(k, size)`` sub-clusters, re-weighted by QPFS and refined one level
    deeper. In aggressive mode a zero-weight cluster is dropped before any of
    that.
    """
    tracker.levels_used = max(tracker.levels_used, level)
    metric = space.metric
    survivors = []
    for c, a in zip(clusters, alpha):
        relevant = a > p.zero_tol
        if p.aggressive and not relevant:
            tracker.discard_levels.append(level)
            continue
        r = cluster_radius(c, metric, tracker.counter, "radius")
        if r < p.tau or level == p.L:
            if relevant:
                survivors.append(int(c.representative))
            else:
                tracker.dropped_zero_alpha += 1
            continue
        sub = variant_macqueen(c.members, min(p.k, len(c)), metric, tracker.counter, "kmeans")
        sub_reps = sub.representatives
        idx, sub_alpha, _, _ = _solve_sub(space.similarity, sub_reps, theta, freeze_theta, tol, tracker)
        weight = dict(zip(idx.tolist(), sub_alpha))
        survivors.extend(
            irr(space, sub.clusters, [weight[r] for r in sub_reps], p, level + 1,
                tracker, theta, freeze_theta, tol)
        )
    return survivors


def ikm_qpfs(
    space: FeatureSpace,
    p: IrrParams,
    theta_override: Optional[float] = None,
    k_init: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    freeze_theta: bool = False,
    final_cap: int = FINAL_QP_CAP,
) -> SelectionResult:
    """Interleave k-means refinement with QPFS pruning, then rank the survivors.

    ``k_init`` (clusters of the first k-means pass) defaults to ``p.k``.
    """
    t0 = time.perf_counter()
    tracker = _Tracker()
    m = space.n_features
    k0 = p.k if k_init is None else k_init
    k0 = min(k0, m)
    if k0 < 1:
        raise ConfigError(f"k' (initial clusters) must be positive, got {k_init}")
    init = variant_macqueen(np.arange(m), k0, space.metric, tracker.counter, "kmeans")
    reps = init.representatives
    idx, alpha, _, _ = _solve_sub(space.similarity, reps, theta_override, freeze_theta, tol, tracker)
    weight = dict(zip(idx.tolist(), alpha))
    survivors = irr(
        space, init.clusters, [weight[r] for r in reps], p, 1, tracker,
        theta_override, freeze_theta, tol,
    )
    if len(survivors) > final_cap:
        raise ConfigError(
            f"{len(survivors)} features survived refinement, above the final QP cap of "
            f"{final_cap}; lower tau, k or L, or raise the cap"
        )
    idx, alpha, sub, theta = _solve_sub(space.similarity, survivors, theta_override, freeze_theta, tol, tracker)
    ranked, scores = _ranked(idx, alpha, sub.s, p.zero_tol)
    inst = tracker.as_dict()
    inst["n_initial_clusters"] = k0
    inst["n_survivors"] = len(survivors)
    inst["n_ranked"] = len(ranked)
    inst["wall_time"] = time.perf_counter() - t0
    params = asdict(p)
    params.update({"k_init": k0, "theta": theta_override, "tol": tol, "freeze_theta": freeze_theta})
    return SelectionResult(
        ranked, scores, "IKMA-QPFS" if p.aggressive else "IKM-QPFS",
        params, inst, representatives=sorted(survivors),
    )


def ikma_qpfs(
    space: FeatureSpace,
    p: IrrParams,
    theta_override: Optional[float] = None,
    k_init: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    freeze_theta: bool = False,
    final_cap: int = FINAL_QP_CAP,
) -> SelectionResult:
    """:func:`ikm_qpfs` with aggressive discarding of zero-weight clusters."""
    if not p.aggressive:
        p = IrrParams(p.k, p.tau, p.L, p.zero_tol, True)
    return ikm_qpfs(space, p, theta_override, k_init, tol, freeze_theta, final_cap)


def top_k(result: SelectionResult, k: int) -> list:
    """First ``min(k, len(ranked))`` selected features."""
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}")
    return list(result.ranked[:k])
