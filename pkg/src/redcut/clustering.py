"""K-means over features with concrete representatives, and two-level k-means.

Features are points in instance space (their discretized code vectors) and
the dissimilarity between two features is the MI distance. Every metric
evaluation goes through a :class:`DistanceCounter` so the clustering cost can
be checked against closed-form counts.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .infotheory import _cross_mi, _one_hot, entropies


class DistanceCounter:
    """Running tally of distance evaluations, also broken down by label."""

    def __init__(self):
        self.count = 0
        self.by_label = defaultdict(int)

    def add(self, n: int, label: Optional[str] = None) -> None:
        self.count += int(n)
        if label is not None:
            self.by_label[label] += int(n)

    def as_dict(self) -> dict:
        return {"total": self.count, **dict(self.by_label)}


class FeatureMetric:
    """MI distance between features of a code matrix.

    Pass ``distances`` (e.g. from a cached similarity model) to turn every
    evaluation into a lookup; otherwise entries are computed on demand.
    """

    def __init__(self, codes: np.ndarray, distances: Optional[np.ndarray] = None):
        self.codes = np.asarray(codes)
        self._points = self.codes.astype(float)
        self._d = distances
        if distances is None:
            self._hot = _one_hot(self.codes)
            self._h = entropies(self.codes)

    @property
    def n_instances(self) -> int:
        return self.codes.shape[1]

    @property
    def points(self) -> np.ndarray:
        return self._points

    def pairwise(self, rows, cols, counter: Optional[DistanceCounter] = None, label=None) -> np.ndarray:
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        if counter is not None:
            counter.add(rows.size * cols.size, label)
        if rows.size == 0 or cols.size == 0:
            return np.zeros((rows.size, cols.size))
        if self._d is not None:
            return self._d[np.ix_(rows, cols)]
        mi = _cross_mi(
            [x[rows] for x in self._hot], [x[cols] for x in self._hot],
            self._h[rows], self._h[cols], self.n_instances,
        )
        hmax = np.maximum(self._h[rows][:, None], self._h[cols][None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            d = 1.0 - mi / hmax
        d[hmax == 0.0] = 0.0
        d[rows[:, None] == cols[None, :]] = 0.0
        return np.clip(d, 0.0, 1.0)


@dataclass
class FeatureCluster:
    members: np.ndarray
    representative: int
    radius: Optional[float] = None

    def __len__(self):
        return len(self.members)

    def to_dict(self) -> dict:
        return {
            "members": [int(i) for i in self.members],
            "representative": int(self.representative),
            "radius": None if self.radius is None else float(self.radius),
        }


@dataclass
class ClusteringResult:
    clusters: list
    distance_count: int
    level_counts: dict = field(default_factory=dict)

    @property
    def representatives(self) -> list:
        return [c.representative for c in self.clusters]

    def to_dict(self) -> dict:
        return {
            "clusters": [c.to_dict() for c in self.clusters],
            "distance_count": int(self.distance_count),
            "level_counts": {k: int(v) for k, v in self.level_counts.items()},
        }


def macqueen_distance_count(m: int, k: int) -> int:
    """Metric evaluations made by :func:`variant_macqueen` on ``m`` features."""
    return 2 * m * k - 2 * k * k + 2 * m


def _nearest_to_mean(points, assign, k, counter, label):
    """Per cluster, the member position closest (squared Euclidean) to the cluster mean."""
    counter.add(assign.size, label)
    onehot = np.zeros((k, assign.size))
    onehot[assign, np.arange(assign.size)] = 1.0
    sizes = onehot.sum(axis=1)
    means = (onehot @ points) / sizes[:, None]
    dist = ((points - means[assign]) ** 2).sum(axis=1)
    order = np.lexsort((np.arange(assign.size), dist, assign))
    first = np.ones(order.size, dtype=bool)
    first[1:] = assign[order[1:]] != assign[order[:-1]]
    chosen = order[first]
    return chosen[np.argsort(assign[chosen])]


def _assign(metric, feats, positions, rep_pos, assign, counter, label):
    if positions.size == 0:
        return
    d = metric.pairwise(feats[positions], feats[rep_pos], counter, label)
    # argmin returns the first minimum: lowest cluster index wins ties
    assign[positions] = np.argmin(d, axis=1)


def variant_macqueen(
    features: Sequence[int],
    k: int,
    metric: FeatureMetric,
    counter: Optional[DistanceCounter] = None,
    label: Optional[str] = None,
) -> ClusteringResult:
    """Two-pass MacQueen k-means whose centers are actual features.

    The first ``k`` features seed the clusters. Each pass assigns every
    non-center feature to its nearest center under the MI distance, then
    moves each center to the member nearest the cluster mean in code space.
    A center always stays in its own cluster, so no cluster empties. Cost:
    ``2 M k - 2 k^2 + 2 M`` distance evaluations.
    """
    feats = np.asarray(features, dtype=int)
    m = feats.size
    if m == 0:
        raise ConfigError("cannot cluster an empty feature set")
    if not 1 <= k <= m:
        raise ConfigError(f"k must lie in [1, {m}], got {k}")
    counter = counter if counter is not None else DistanceCounter()
    start = counter.count
    points = metric.points[feats]

    assign = np.empty(m, dtype=int)
    rep_pos = np.arange(k)
    for _ in range(2):
        assign[rep_pos] = np.arange(k)
        others = np.setdiff1d(np.arange(m), rep_pos, assume_unique=True)
        _assign(metric, feats, others, rep_pos, assign, counter, label)
        rep_pos = _nearest_to_mean(points, assign, k, counter, label)

    clusters = []
    for c in range(k):
        members = feats[assign == c]
        clusters.append(FeatureCluster(members, int(feats[rep_pos[c]]), 0.0 if members.size == 1 else None))
    used = counter.count - start
    return ClusteringResult(clusters, used, {label or "macqueen": used})


def cluster_radius(
    c: FeatureCluster,
    metric: FeatureMetric,
    counter: Optional[DistanceCounter] = None,
    label: Optional[str] = "radius",
) -> float:
    """Largest distance from the representative to a member; caches it on ``c``."""
    d = metric.pairwise(c.members, [c.representative], counter, label)
    c.radius = float(d.max()) if d.size else 0.0
    return c.radius


def split_count(radius: float, tau: float, n_dims: int, size: int) -> int:
    """``ceil((radius / tau) ** n_dims)`` evaluated in log space, capped at ``size``."""
    e = n_dims * math.log(radius / tau)
    if e >= math.log(size):
        return size
    return min(size, max(2, math.ceil(math.exp(e))))


def tlkm(
    features: Sequence[int],
    k_init: int,
    tau: float,
    metric: FeatureMetric,
    counter: Optional[DistanceCounter] = None,
) -> ClusteringResult:
    """Two-level k-means: a coarse pass, then split every cluster wider than ``tau``."""
    if not 0.0 < tau <= 1.0:
        raise ConfigError(f"tau must lie in (0, 1], got {tau}")
    counter = counter if counter is not None else DistanceCounter()
    start = counter.count
    before = dict(counter.by_label)
    level1 = variant_macqueen(features, k_init, metric, counter, "level1")
    out = []
    for c in level1.clusters:
        r = cluster_radius(c, metric, counter)
        if r <= tau:
            out.append(c)
            continue
        n_sub = split_count(r, tau, metric.n_instances, len(c))
        sub = variant_macqueen(c.members, n_sub, metric, counter, "level2")
        for sc in sub.clusters:
            cluster_radius(sc, metric, counter)
            out.append(sc)
    counts = {
        key: counter.by_label.get(key, 0) - before.get(key, 0)
        for key in ("level1", "level2", "radius")
    }
    return ClusteringResult(out, counter.count - start, counts)


@dataclass(frozen=True)
class TauBounds:
    lower: float
    upper: float


def tau_bounds(R: float, k: int, M: int, N: int) -> TauBounds:
    """Range of radius thresholds for which two-level k-means saves work."""
    if R <= 0:
        raise ConfigError(f"R must be positive, got {R}")
    if not 0 < k < M:
        raise ConfigError(f"need 0 < k < M, got k={k}, M={M}")
    lower = max(R / k ** (1.0 / N), R / (M - k) ** (1.0 / N))
    return TauBounds(lower, R)


def enclosing_radius(
    features: Sequence[int],
    metric: FeatureMetric,
    counter: Optional[DistanceCounter] = None,
) -> float:
    """Radius of the feature set around the feature nearest the global mean.

    This is within a factor two of the best radius over any feature as center.
    """
    feats = np.asarray(features, dtype=int)
    if feats.size == 0:
        raise ConfigError("enclosing_radius needs at least one feature")
    points = metric.points[feats]
    center = feats[int(np.argmin(((points - points.mean(axis=0)) ** 2).sum(axis=1)))]
    return float(metric.pairwise(feats, [center], counter, "enclosing").max())
