"""Dataset loading, normalization, discretization and train/test splitting.

Feature matrices are stored features-first: ``values[i]`` is the vector of
feature ``i`` over all instances. Clustering works in this orientation, so
everything downstream expects it.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class Dataset:
    """M features by N instances, with integer class labels in ``0..Y-1``."""

    name: str
    values: np.ndarray
    labels: np.ndarray
    feature_names: Optional[tuple] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if values.ndim != 2:
            raise DataError("values must be a 2-D array (features x instances)")
        m, n = values.shape
        if m < 1:
            raise DataError("dataset has no features")
        if n < 2:
            raise DataError("dataset needs at least 2 instances")
        if labels.shape != (n,):
            raise DataError(
                f"labels has shape {labels.shape}, expected ({n},)"
            )
        if not np.all(np.isfinite(values)):
            raise DataError("feature values must be finite")
        classes = np.unique(labels)
        if classes.size < 2:
            raise DataError("degenerate labels: only one class present")
        if not np.array_equal(classes, np.arange(classes.size)):
            raise DataError("labels must take exactly the values 0..Y-1")
        if self.feature_names is not None and len(self.feature_names) != m:
            raise DataError("feature_names length does not match feature count")
        values.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_features(self) -> int:
        return self.values.shape[0]

    @property
    def n_instances(self) -> int:
        return self.values.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    def subset(self, instances) -> "Dataset":
        """Restrict to the given instance indices, re-encoding labels if a class vanishes."""
        idx = np.asarray(instances, dtype=int)
        labels = self.labels[idx]
        _, labels = np.unique(labels, return_inverse=True)
        return Dataset(self.name, self.values[:, idx], labels, self.feature_names)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.values).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class DiscretizedDataset:
    """Three-level codes per feature plus the ``(mean - std, mean + std)`` edges used."""

    codes: np.ndarray
    bin_edges: np.ndarray

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int8)
        if codes.ndim != 2:
            raise DataError("codes must be 2-D (features x instances)")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @property
    def n_features(self) -> int:
        return self.codes.shape[0]

    @property
    def n_instances(self) -> int:
        return self.codes.shape[1]

    def subset(self, instances) -> "DiscretizedDataset":
        return DiscretizedDataset(self.codes[:, np.asarray(instances, dtype=int)], self.bin_edges)

    def content_hash(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.codes).tobytes()).hexdigest()


@dataclass(frozen=True)
class SplitPlan:
    """Train/test index assignments, one pair per repeat.

    ``kind`` is ``"holdout"`` or ``"loocv"``; ``params`` records the holdout
    fraction, repeat count and seed for reports.
    """

    kind: str
    assignments: tuple
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.assignments)

    def __iter__(self):
        return iter(self.assignments)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _encode_labels(raw: Sequence[str]) -> np.ndarray:
    mapping = {}
    out = np.empty(len(raw), dtype=int)
    for i, lab in enumerate(raw):
        out[i] = mapping.setdefault(lab, len(mapping))
    if len(mapping) < 2:
        raise DataError("degenerate labels: only one class present")
    return out


def load_csv(path, label_column: Union[int, str] = -1, name: Optional[str] = None) -> Dataset:
    """Read a comma-separated file with one instance per row.

    ``label_column`` is a column index (negative counts from the end) or a
    header name. A header row is assumed iff some non-label cell of the first
    row does not parse as a number. Class ids are re-encoded to ``0..Y-1`` in
    order of first appearance.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: no instances")
    width = len(rows[0])
    if width < 2:
        raise DataError(f"{path}: need at least one feature column and a label column")

    first = [c.strip() for c in rows[0]]
    header = None
    if isinstance(label_column, str):
        if label_column not in first:
            raise ConfigError(f"label column {label_column!r} not found in header")
        label_idx = first.index(label_column)
        header = first
    else:
        label_idx = label_column if label_column >= 0 else width + label_column
        if not 0 <= label_idx < width:
            raise ConfigError(f"label column index {label_column} out of range for {width} columns")
        if any(not _is_number(c) for j, c in enumerate(first) if j != label_idx):
            header = first
    body = rows[1:] if header is not None else rows
    line_offset = 2 if header is not None else 1
    if not body:
        raise DataError(f"{path}: no instances")

    feat_cols = [j for j in range(width) if j != label_idx]
    values = np.empty((len(feat_cols), len(body)))
    raw_labels = []
    for i, row in enumerate(body):
        if len(row) != width:
            raise DataError(
                f"{path}: row {i + line_offset} has {len(row)} columns, expected {width}"
            )
        for jj, j in enumerate(feat_cols):
            cell = row[j].strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: row {i + line_offset}, column {j + 1}: cannot parse {cell!r} as a number"
                ) from None
            if not math.isfinite(v):
                raise DataError(f"{path}: row {i + line_offset}, column {j + 1}: non-finite value")
            values[jj, i] = v
        raw_labels.append(row[label_idx].strip())

    labels = _encode_labels(raw_labels)
    names = tuple(header[j] for j in feat_cols) if header is not None else None
    return Dataset(name or str(path), values, labels, names)


def load_sparse(path, name: Optional[str] = None) -> Dataset:
    """Read the ``label idx:value ...`` sparse text format (1-based indices).

    The feature count is the largest index seen; absent entries are zero.
    """
    raw_labels = []
    entries = []
    max_idx = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            raw_labels.append(tokens[0])
            row = {}
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                try:
                    if not sep:
                        raise ValueError
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise DataError(f"{path}: line {lineno}: malformed token {tok!r}") from None
                if idx < 1:
                    raise DataError(f"{path}: line {lineno}: index must be positive, got {idx}")
                if not math.isfinite(val):
                    raise DataError(f"{path}: line {lineno}: non-finite value in {tok!r}")
                row[idx] = val
                max_idx = max(max_idx, idx)
            entries.append(row)
    if not entries:
        raise DataError(f"{path}: no instances")
    if max_idx == 0:
        raise DataError(f"{path}: no feature entries")

    values = np.zeros((max_idx, len(entries)))
    for i, row in enumerate(entries):
        for idx, val in row.items():
            values[idx - 1, i] = val
    return Dataset(name or str(path), values, _encode_labels(raw_labels))


def normalize(d: Dataset) -> Dataset:
    """Min-max map every feature onto [-1, 1]; constant features become 0."""
    v = d.values
    lo = v.min(axis=1, keepdims=True)
    hi = v.max(axis=1, keepdims=True)
    span = hi - lo
    out = np.zeros_like(v)
    varying = (span > 0).ravel()
    out[varying] = 2.0 * (v[varying] - lo[varying]) / span[varying] - 1.0
    # rows already spanning exactly [-1, 1] are left untouched so that
    # normalize is idempotent bit for bit
    exact = ((lo == -1.0) & (hi == 1.0)).ravel()
    out[exact] = v[exact]
    np.clip(out, -1.0, 1.0, out=out)
    return Dataset(d.name, out, d.labels, d.feature_names)


def discretize(d: Union[Dataset, np.ndarray], fit_instances=None) -> DiscretizedDataset:
    """Code each feature as 0 / 1 / 2 for below / within / above one std of its mean.

    Values exactly on ``mean +- std`` go to the middle bin. The population
    standard deviation is used. ``fit_instances`` restricts the instances used
    to estimate mean and std (e.g. a training fold); all instances are coded.
    """
    v = d.values if isinstance(d, Dataset) else np.asarray(d, dtype=float)
    fit = v if fit_instances is None else v[:, np.asarray(fit_instances, dtype=int)]
    mu = fit.mean(axis=1, keepdims=True)
    sigma = fit.std(axis=1, keepdims=True)
    lower = mu - sigma
    upper = mu + sigma
    codes = np.ones(v.shape, dtype=np.int8)
    codes[v < lower] = 0
    codes[v > upper] = 2
    constant = (fit.max(axis=1) == fit.min(axis=1))
    codes[constant] = 1
    edges = np.hstack([lower, upper])
    return DiscretizedDataset(codes, edges)


def _stratified_train_counts(class_sizes: np.ndarray, train_fraction: float) -> np.ndarray:
    n = class_sizes.sum()
    target = int(round(train_fraction * n))
    ideal = class_sizes * train_fraction
    counts = np.floor(ideal).astype(int)
    counts = np.clip(counts, 1, class_sizes - 1)
    # largest-remainder top-up towards the overall target
    order = np.argsort(-(ideal - np.floor(ideal)), kind="stable")
    for c in order:
        if counts.sum() >= target:
            break
        if counts[c] < class_sizes[c] - 1:
            counts[c] += 1
    return counts


def make_splits(
    d: Union[Dataset, np.ndarray],
    kind: str = "holdout",
    seed: int = 13,
    train_fraction: float = 0.6,
    n_repeats: int = 100,
) -> SplitPlan:
    """Build a split plan for ``d`` (a Dataset or a label vector).

    ``holdout`` draws ``n_repeats`` stratified random splits so every class
    is present in each training fold; ``loocv`` leaves one instance out per
    repeat. The plan is a pure function of its arguments.
    """
    labels = d.labels if isinstance(d, Dataset) else np.asarray(d, dtype=int)
    n = labels.size
    all_idx = np.arange(n)
    if kind == "loocv":
        assignments = tuple(
            (np.delete(all_idx, i), np.array([i])) for i in range(n)
        )
        return SplitPlan("loocv", assignments, {"n_repeats": n})
    if kind != "holdout":
        raise ConfigError(f"unknown split kind {kind!r}")
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    if n_repeats < 1:
        raise ConfigError("n_repeats must be at least 1")
    classes, sizes = np.unique(labels, return_counts=True)
    if np.any(sizes < 2):
        bad = classes[sizes < 2].tolist()
        raise DataError(f"classes {bad} have a single instance; cannot stratify a holdout split")
    counts = _stratified_train_counts(sizes, train_fraction)
    members = [np.flatnonzero(labels == c) for c in classes]
    rng = np.random.default_rng(seed)
    assignments = []
    for _ in range(n_repeats):
        train = []
        for idx, cnt in zip(members, counts):
            perm = rng.permutation(idx)
            train.append(perm[:cnt])
        train = np.sort(np.concatenate(train))
        test = np.setdiff1d(all_idx, train)
        assignments.append((train, test))
    return SplitPlan(
        "holdout",
        tuple(assignments),
        {"train_fraction": train_fraction, "n_repeats": n_repeats, "seed": seed},
    )
