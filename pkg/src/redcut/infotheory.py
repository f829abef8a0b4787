"""Plug-in entropy and mutual information for discrete features, in bits.

Besides the scalar functions this module builds the inputs of the feature
selection quadratic program: the pairwise redundancy matrix ``Q``, the
relevance vector ``s`` and the default trade-off ``theta``.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError

_BLOCK = 1024


def _as_codes(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 1 or a.size == 0:
        raise DataError("expected a non-empty 1-D sequence of codes")
    return a


def _entropy_from_counts(counts: np.ndarray, n: int) -> float:
    # sorted so the sum does not depend on the order np.unique reports cells
    counts = np.sort(counts[counts > 0]).astype(float)
    p = counts / n
    return float(-(p * np.log2(p)).sum())


def entropy(codes) -> float:
    """Empirical Shannon entropy of a discrete sequence."""
    codes = _as_codes(codes)
    _, counts = np.unique(codes, return_counts=True)
    return _entropy_from_counts(counts, codes.size)


def joint_entropy(a, b) -> float:
    """Entropy of the paired sequence ``(a[t], b[t])``."""
    a = _as_codes(a)
    b = _as_codes(b)
    if a.size != b.size:
        raise DataError(f"length mismatch: {a.size} vs {b.size}")
    _, counts = np.unique(np.stack([a, b]), axis=1, return_counts=True)
    return _entropy_from_counts(counts, a.size)


def mutual_information(a, b) -> float:
    """``H(a) + H(b) - H(a, b)``, clamped at zero."""
    a = _as_codes(a)
    b = _as_codes(b)
    if a.size != b.size:
        raise DataError(f"length mismatch: {a.size} vs {b.size}")
    return max(0.0, entropy(a) + entropy(b) - joint_entropy(a, b))


def mi_distance(a, b) -> float:
    """Normalized information distance ``1 - MI(a, b) / max(H(a), H(b))``.

    Lies in [0, 1]. Two constant sequences are at distance 0.
    """
    a = _as_codes(a)
    b = _as_codes(b)
    ha, hb = entropy(a), entropy(b)
    hmax = max(ha, hb)
    if hmax == 0.0:
        return 0.0
    mi = max(0.0, ha + hb - joint_entropy(a, b))
    return min(1.0, max(0.0, 1.0 - mi / hmax))


# ---------------------------------------------------------------------------
# vectorized pairwise quantities


def _one_hot(codes: np.ndarray):
    codes = np.asarray(codes)
    if codes.min() < 0:
        raise DataError("codes must be non-negative integers")
    levels = int(codes.max()) + 1
    return [(codes == v).astype(np.float64) for v in range(levels)]


def _xlogx(c: np.ndarray) -> np.ndarray:
    out = np.zeros_like(c)
    pos = c > 0
    out[pos] = c[pos] * np.log2(c[pos])
    return out


def entropies(codes: np.ndarray) -> np.ndarray:
    """Row-wise entropy of a features-by-instances code matrix."""
    codes = np.atleast_2d(codes)
    n = codes.shape[1]
    acc = np.zeros(codes.shape[0])
    constant = np.zeros(codes.shape[0], dtype=bool)
    for ind in _one_hot(codes):
        cnt = ind.sum(axis=1)
        constant |= cnt == n
        acc += _xlogx(cnt)
    h = np.maximum(np.log2(n) - acc / n, 0.0)
    h[constant] = 0.0
    return h


def _cross_mi(left: list, right: list, h_left: np.ndarray, h_right: np.ndarray, n: int) -> np.ndarray:
    acc = np.zeros((left[0].shape[0], right[0].shape[0]))
    for a in left:
        for b in right:
            acc += _xlogx(a @ b.T)
    h_joint = np.log2(n) - acc / n
    mi = h_left[:, None] + h_right[None, :] - h_joint
    # 0 <= MI <= min(H) holds exactly; rounding can step outside it
    return np.clip(mi, 0.0, np.minimum(h_left[:, None], h_right[None, :]))


def mutual_information_matrix(codes: np.ndarray) -> np.ndarray:
    """Pairwise MI between all rows of ``codes``; the diagonal holds the entropies.

    Only the upper triangle is computed; it is mirrored so the result is
    exactly symmetric.
    """
    codes = np.atleast_2d(codes)
    m, n = codes.shape
    hot = _one_hot(codes)
    h = entropies(codes)
    out = np.zeros((m, m))
    for r0 in range(0, m, _BLOCK):
        r1 = min(m, r0 + _BLOCK)
        left = [x[r0:r1] for x in hot]
        right = [x[r0:] for x in hot]
        out[r0:r1, r0:] = _cross_mi(left, right, h[r0:r1], h[r0:], n)
    out = np.triu(out, 1)
    out = out + out.T
    out[np.diag_indices(m)] = h
    return out


def relevance_vector(codes: np.ndarray, labels) -> np.ndarray:
    """MI between every feature row and the label vector."""
    codes = np.atleast_2d(codes)
    labels = np.asarray(labels)
    if labels.shape != (codes.shape[1],):
        raise DataError("labels length does not match instance count")
    n = codes.shape[1]
    hot = _one_hot(codes)
    hy = np.array([entropy(labels)])
    lab_hot = [(labels == v).astype(np.float64)[None, :] for v in np.unique(labels)]
    return _cross_mi(hot, lab_hot, entropies(codes), hy, n)[:, 0]


def distance_from_mi(mi: np.ndarray, h: Optional[np.ndarray] = None) -> np.ndarray:
    """MI distance matrix from a raw MI matrix whose diagonal holds entropies."""
    if h is None:
        h = np.diag(mi)
    hmax = np.maximum(h[:, None], h[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        d = 1.0 - mi / hmax
    d[hmax == 0.0] = 0.0
    np.clip(d, 0.0, 1.0, out=d)
    d[np.diag_indices_from(d)] = 0.0
    return d


def distance_matrix(codes: np.ndarray) -> np.ndarray:
    return distance_from_mi(mutual_information_matrix(codes))


# ---------------------------------------------------------------------------
# QP inputs


def theta_from_means(q_bar: float, m_bar: float) -> float:
    total = q_bar + m_bar
    return 0.5 if total == 0 else float(q_bar / total)


@dataclass(frozen=True)
class SimilarityModel:
    """Redundancy matrix ``Q``, relevance ``s`` and default trade-off ``theta``.

    ``kind`` is ``"mi"`` for raw mutual information (diagonal = entropies) or
    ``"normalized"`` for ``1 - d`` with the MI distance ``d``.
    """

    Q: np.ndarray
    s: np.ndarray
    theta: float
    q_bar: float
    m_bar: float
    kind: str = "mi"
    entropies: Optional[np.ndarray] = None

    @property
    def n_features(self) -> int:
        return self.s.size

    def restrict(self, indices) -> "SimilarityModel":
        """Sub-model over ``indices`` with ``theta`` recomputed from its own means."""
        idx = np.asarray(indices, dtype=int)
        q = self.Q[np.ix_(idx, idx)]
        s = self.s[idx]
        q_bar, m_bar = float(q.mean()), float(s.mean())
        h = None if self.entropies is None else self.entropies[idx]
        return SimilarityModel(q, s, theta_from_means(q_bar, m_bar), q_bar, m_bar, self.kind, h)

    def distances(self) -> np.ndarray:
        """Pairwise MI distances recovered from ``Q``."""
        if self.kind != "mi":
            return 1.0 - self.Q
        return distance_from_mi(self.Q, self.entropies)

    def save(self, path) -> None:
        path = Path(path)
        np.savez(
            path,
            Q=self.Q,
            s=self.s,
            entropies=np.array([]) if self.entropies is None else self.entropies,
            meta=np.array(json.dumps({
                "theta": self.theta, "q_bar": self.q_bar, "m_bar": self.m_bar,
                "kind": self.kind, "version": 1,
            })),
        )

    @classmethod
    def load(cls, path) -> "SimilarityModel":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            h = z["entropies"]
            return cls(
                z["Q"], z["s"], meta["theta"], meta["q_bar"], meta["m_bar"],
                meta["kind"], h if h.size else None,
            )


def build_similarity(dd, labels, normalized: bool = False) -> SimilarityModel:
    """Compute ``Q``, ``s`` and the mean-ratio ``theta = q_bar / (q_bar + m_bar)``.

    ``dd`` may be a DiscretizedDataset or a raw code matrix.
    """
    codes = getattr(dd, "codes", dd)
    mi = mutual_information_matrix(codes)
    h = np.diag(mi).copy()
    s = relevance_vector(codes, labels)
    if normalized:
        q = 1.0 - distance_from_mi(mi, h)
        kind = "normalized"
    else:
        q = mi
        kind = "mi"
    q_bar, m_bar = float(q.mean()), float(s.mean())
    return SimilarityModel(q, s, theta_from_means(q_bar, m_bar), q_bar, m_bar, kind, h)


def cached_similarity(dd, labels, cache_dir=None, normalized: bool = False) -> SimilarityModel:
    """``build_similarity`` backed by an on-disk cache keyed by content hash.

    The ``REDCUT_CACHE`` environment variable overrides ``cache_dir``. With no
    cache directory the model is simply computed.
    """
    cache_dir = os.environ.get("REDCUT_CACHE") or cache_dir
    if not cache_dir:
        return build_similarity(dd, labels, normalized)
    codes = np.ascontiguousarray(getattr(dd, "codes", dd), dtype=np.int8)
    h = hashlib.sha256()
    h.update(str(codes.shape).encode())
    h.update(codes.tobytes())
    h.update(np.ascontiguousarray(np.asarray(labels, dtype=np.int64)).tobytes())
    h.update(b"normalized" if normalized else b"mi")
    path = Path(cache_dir) / f"similarity-{h.hexdigest()[:24]}.npz"
    if path.exists():
        return SimilarityModel.load(path)
    model = build_similarity(codes, labels, normalized)
    path.parent.mkdir(parents=True, exist_ok=True)
    # unique temp name: parallel folds may build the same entry at once
    tmp = path.with_name(f"{path.stem}.{os.getpid()}.{threading.get_ident()}.tmp.npz")
    model.save(tmp)
    os.replace(tmp, path)
    return model


def scale_for_theta(sm: SimilarityModel, theta_override: Optional[float] = None):
    """Fold the trade-off into the QP data: ``((1 - theta) Q, theta s)``."""
    theta = sm.theta if theta_override is None else theta_override
    if not 0.0 <= theta <= 1.0:
        raise ConfigError(f"theta must lie in [0, 1], got {theta}")
    return (1.0 - theta) * sm.Q, theta * sm.s
