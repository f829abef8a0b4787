"""Benchmark harness: linear classifier, top-k error curves and parameter search.

Classification uses an L2-regularized squared-hinge linear SVM trained in
the primal by a generalized Newton method. Feature selection is redone on
every training fold unless ``select_once`` is set.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dataset import Dataset, SplitPlan, discretize
from .errors import ConfigError, DataError, NumericalError
from .selectors import (
    FeatureSpace,
    IrrParams,
    SelectionResult,
    ikm_qpfs,
    qpfs,
    tlkm_qpfs,
    top_k,
)

REPORT_SCHEMA_VERSION = 1

DEFAULT_GRIDS = {
    "theta": [0.0, 0.1, 0.3, 0.5, 0.7, 0.9],
    "tau": [round(0.70 + 0.01 * i, 2) for i in range(30)],
    "k": list(range(5, 1001, 5)),
    "k_init": list(range(3, 151)),
}


# ---------------------------------------------------------------------------
# classifier


@dataclass
class LinearModel:
    """One weight row and bias per binary problem.

    Binary models hold a single row scoring ``classes[1]`` against
    ``classes[0]``; multiclass models hold one one-vs-rest row per class.
    """

    weights: np.ndarray
    bias: np.ndarray
    classes: np.ndarray

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X @ self.weights.T + self.bias

    def predict(self, X) -> np.ndarray:
        scores = self.decision_function(X)
        if self.classes.size == 2:
            return np.where(scores[:, 0] > 0, self.classes[1], self.classes[0])
        return self.classes[np.argmax(scores, axis=1)]


def svm_objective(wb: np.ndarray, X: np.ndarray, y: np.ndarray, C: float) -> float:
    """``0.5 |w|^2 + C sum max(0, 1 - y (w.x + b))^2`` with ``wb = [w, b]`` and y in {-1, +1}."""
    w, b = wb[:-1], wb[-1]
    margin = np.maximum(0.0, 1.0 - y * (X @ w + b))
    return 0.5 * float(w @ w) + C * float(margin @ margin)


def svm_gradient(wb: np.ndarray, X: np.ndarray, y: np.ndarray, C: float) -> np.ndarray:
    w, b = wb[:-1], wb[-1]
    margin = np.maximum(0.0, 1.0 - y * (X @ w + b))
    coef = -2.0 * C * margin * y
    return np.append(w + X.T @ coef, coef.sum())


def _train_binary(X, y, C, tol=1e-6, max_iter=200):
    n, p = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    wb = np.zeros(p + 1)
    reg = np.ones(p + 1)
    reg[-1] = 1e-12
    f = svm_objective(wb, X, y, C)
    for _ in range(max_iter):
        g = svm_gradient(wb, X, y, C)
        if np.linalg.norm(g) <= tol:
            return wb
        active = y * (Xb @ wb) < 1.0
        Xa = Xb[active]
        H = np.diag(reg) + 2.0 * C * (Xa.T @ Xa)
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(H, g, rcond=None)[0]
        t = 1.0
        slope = float(g @ step)
        while True:
            cand = wb + t * step
            fc = svm_objective(cand, X, y, C)
            if fc <= f + 1e-4 * t * slope or t < 1e-10:
                break
            t *= 0.5
        if fc > f:
            return wb
        wb, f = cand, fc
    if np.linalg.norm(svm_gradient(wb, X, y, C)) > 1e3 * tol:
        raise NumericalError("linear SVM training did not converge")
    return wb


def train_linear(X, y, C: float = 1.0, tol: float = 1e-6) -> LinearModel:
    """Fit an L2-regularized squared-hinge SVM (one-vs-rest when Y > 2).

    ``X`` is instances by features.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if C <= 0:
        raise ConfigError(f"C must be positive, got {C}")
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DataError("X must be (instances, features) matching y")
    classes = np.unique(y)
    if classes.size < 2:
        raise DataError("training fold contains a single class")
    if classes.size == 2:
        yy = np.where(y == classes[1], 1.0, -1.0)
        wb = _train_binary(X, yy, C, tol)
        return LinearModel(wb[None, :-1], wb[-1:], classes)
    rows = [_train_binary(X, np.where(y == c, 1.0, -1.0), C, tol) for c in classes]
    W = np.array(rows)
    return LinearModel(W[:, :-1], W[:, -1], classes)


def error_rate(model: LinearModel, X_test, y_test) -> float:
    """Percentage of misclassified instances."""
    y_test = np.asarray(y_test)
    if y_test.size == 0:
        raise DataError("empty test set")
    return 100.0 * float(np.mean(model.predict(X_test) != y_test))


# ---------------------------------------------------------------------------
# selector dispatch


@dataclass(frozen=True)
class SelectorSpec:
    """Which selector to run and with what parameters.

    ``method`` is one of ``qpfs``, ``tlkm``, ``ikm``, ``ikma``, or
    ``identity`` (features in index order; used as a control).
    """

    method: str = "qpfs"
    theta: Optional[float] = None
    k: int = 15
    k_init: Optional[int] = None
    tau: float = 0.8
    L: int = 3
    freeze_theta: bool = False
    normalized_similarity: bool = False
    tol: float = 1e-7

    def __post_init__(self):
        if self.method not in ("qpfs", "tlkm", "ikm", "ikma", "identity"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.theta is not None and not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"theta must lie in [0, 1], got {self.theta}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")

    def run(self, space: FeatureSpace) -> SelectionResult:
        m = space.n_features
        if self.method == "identity":
            return SelectionResult(list(range(m)), [0.0] * m, "identity", {}, {"n_ranked": m, "wall_time": 0.0})
        if self.method == "qpfs":
            return qpfs(space.similarity, self.theta, tol=self.tol)
        if self.method == "tlkm":
            k0 = self.k_init if self.k_init is not None else self.k
            return tlkm_qpfs(space, min(k0, m), self.tau, self.theta, tol=self.tol,
                             freeze_theta=self.freeze_theta)
        p = IrrParams(self.k, self.tau, self.L, aggressive=self.method == "ikma")
        return ikm_qpfs(space, p, self.theta, self.k_init, tol=self.tol, freeze_theta=self.freeze_theta)

    def as_dict(self) -> dict:
        return {
            "method": self.method, "theta": self.theta, "k": self.k, "k_init": self.k_init,
            "tau": self.tau, "L": self.L, "freeze_theta": self.freeze_theta,
            "normalized_similarity": self.normalized_similarity, "tol": self.tol,
        }


# ---------------------------------------------------------------------------
# top-k curves


@dataclass
class EvalReport:
    method: str
    per_k_error: dict
    baseline_error: tuple
    kmeans_baseline_error: Optional[tuple]
    timings: dict = field(default_factory=dict)
    counters: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def lowest_error(self):
        """``(k, mean error)`` of the best point on the curve; smallest k on ties."""
        best = min(self.per_k_error.items(), key=lambda kv: (kv[1][0], kv[0]))
        return best[0], best[1][0]

    def to_dict(self, timings: bool = True) -> dict:
        counters = [dict(c) for c in self.counters]
        if not timings:
            for c in counters:
                c.pop("wall_time", None)
        k_best, e_best = self.lowest_error
        out = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "method": self.method,
            "params": self.params,
            "per_k_error": {str(k): {"mean": m, "std": s} for k, (m, s) in self.per_k_error.items()},
            "baseline_error": {"mean": self.baseline_error[0], "std": self.baseline_error[1]},
            "kmeans_baseline_error": None if self.kmeans_baseline_error is None else {
                "mean": self.kmeans_baseline_error[0], "std": self.kmeans_baseline_error[1],
            },
            "lowest_error": {"k": k_best, "mean": e_best},
            "counters": counters,
        }
        if timings:
            out["timings"] = self.timings
        return out

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "k", "mean_error", "std_error"])
        for k, (m, s) in self.per_k_error.items():
            w.writerow([self.method, k, repr(m), repr(s)])
        return buf.getvalue()


def _mean_std(values) -> tuple:
    a = np.asarray(values, dtype=float)
    return float(a.mean()), float(a.std())


def _score(X_tr, y_tr, X_te, y_te, feats, C):
    model = train_linear(X_tr[:, feats], y_tr, C)
    return error_rate(model, X_te[:, feats], y_te)


def _space_for(dataset, instances, fold_stats, spec, cache_dir):
    dd = discretize(dataset, fit_instances=instances if fold_stats else None)
    codes = dd.codes[:, instances]
    labels = dataset.labels[instances]
    return FeatureSpace.from_codes(codes, labels, spec.normalized_similarity, cache_dir)


def topk_curve(
    dataset: Dataset,
    spec: SelectorSpec,
    k_grid: Sequence[int],
    splits: SplitPlan,
    C: float = 1.0,
    select_once: bool = False,
    fold_stats: bool = False,
    cache_dir=None,
    threads: int = 1,
) -> EvalReport:
    """Mean/std test error of top-k features for every k in ``k_grid``.

    Also reports the all-features baseline and, for clustered selectors, the
    error using every representative the selector kept.
    """
    if not k_grid:
        raise ConfigError("k_grid must not be empty")
    m = dataset.n_features
    ks = sorted({int(k) for k in k_grid if 1 <= k <= m})
    if not ks:
        raise ConfigError(f"no k in the grid lies within [1, {m}]")
    X = dataset.values.T
    y = dataset.labels

    once = None
    if select_once:
        t0 = time.perf_counter()
        once = spec.run(_space_for(dataset, np.arange(dataset.n_instances), fold_stats, spec, cache_dir))
        once_time = time.perf_counter() - t0

    def one_repeat(split):
        train, test = split
        t0 = time.perf_counter()
        if once is None:
            space = _space_for(dataset, train, fold_stats, spec, cache_dir)
            t1 = time.perf_counter()
            result = spec.run(space)
        else:
            t1 = t0
            result = once
        t2 = time.perf_counter()
        Xtr, ytr, Xte, yte = X[train], y[train], X[test], y[test]
        errs = {k: _score(Xtr, ytr, Xte, yte, top_k(result, k), C) for k in ks}
        base = _score(Xtr, ytr, Xte, yte, np.arange(m), C)
        reps = None
        if result.representatives is not None:
            reps = _score(Xtr, ytr, Xte, yte, np.asarray(result.representatives, dtype=int), C)
        t3 = time.perf_counter()
        timing = {"similarity": t1 - t0, "selection": t2 - t1, "training": t3 - t2}
        return errs, base, reps, result.instrumentation, timing

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(one_repeat, splits.assignments))
    else:
        outs = [one_repeat(s) for s in splits.assignments]

    per_k = {k: _mean_std([o[0][k] for o in outs]) for k in ks}
    base = _mean_std([o[1] for o in outs])
    reps = [o[2] for o in outs if o[2] is not None]
    timings = {key: float(sum(o[4][key] for o in outs)) for key in ("similarity", "selection", "training")}
    if once is not None:
        timings["selection"] = once_time
    params = {
        "selector": spec.as_dict(), "C": C, "k_grid": ks, "select_once": select_once,
        "fold_stats": fold_stats, "splits": {"kind": splits.kind, **splits.params},
    }
    return EvalReport(
        spec.method, per_k, base, _mean_std(reps) if reps else None,
        timings, [dict(o[3]) for o in outs], params,
    )


# ---------------------------------------------------------------------------
# parameter search


def _model_size_key(params: dict):
    k_init = params.get("k_init")
    k = params.get("k")
    tau = params.get("tau")
    return (
        k_init if k_init is not None else 0,
        k if k is not None else 0,
        -tau if tau is not None else 0.0,
    )


def cross_validate_params(
    dataset: Dataset,
    spec: SelectorSpec,
    param_grids: dict,
    splits: SplitPlan,
    k_grid: Sequence[int],
    C: float = 1.0,
    reference_k: Optional[int] = None,
    **curve_kwargs,
):
    """Grid search over ``param_grids`` (name -> values) minimizing CV error.

    The score of a candidate is its mean error at ``reference_k``, or its
    lowest mean error over ``k_grid`` when that is None. Ties prefer the
    smaller model: fewer initial clusters, fewer sub-clusters, larger tau.
    Returns ``(best_params, table)`` where ``table`` lists every candidate
    with its score in grid order.
    """
    if not param_grids or any(len(v) == 0 for v in param_grids.values()):
        raise ConfigError("every parameter grid must be non-empty")
    names = list(param_grids)
    table = []
    for values in itertools.product(*(param_grids[n] for n in names)):
        params = dict(zip(names, values))
        report = topk_curve(dataset, replace(spec, **params), k_grid, splits, C, **curve_kwargs)
        if reference_k is None:
            score = report.lowest_error[1]
        else:
            ks = [k for k in report.per_k_error if k <= reference_k]
            score = report.per_k_error[max(ks)][0] if ks else report.lowest_error[1]
        table.append((params, score))
    best_i = min(
        range(len(table)),
        key=lambda i: (table[i][1], _model_size_key(table[i][0]), i),
    )
    return table[best_i][0], table


BENCH_COLUMNS = (
    "method", "selection_time_s", "distance_count", "qp_calls", "max_qp_size",
    "lowest_error", "k_at_lowest_error", "features_at_lowest_error",
)


def bench_rows(reports: Sequence[EvalReport]) -> list:
    """One comparison row per report, averaged over repeats."""
    rows = []
    for rep in reports:
        n = max(1, len(rep.counters))
        k_best, e_best = rep.lowest_error
        n_ranked = [c.get("n_ranked") for c in rep.counters]
        feats = k_best
        if rep.counters and all(x is not None for x in n_ranked):
            # clustered selectors may keep fewer than k features
            feats = min(k_best, int(min(n_ranked)))
        rows.append({
            "method": rep.method,
            "selection_time_s": rep.timings.get("selection", 0.0) / n,
            "distance_count": float(np.mean([c.get("distance_count", 0) for c in rep.counters])) if rep.counters else 0.0,
            "qp_calls": float(np.mean([c.get("qp_calls", 0) for c in rep.counters])) if rep.counters else 0.0,
            "max_qp_size": int(max((c.get("max_qp_size", 0) for c in rep.counters), default=0)),
            "lowest_error": e_best,
            "k_at_lowest_error": k_best,
            "features_at_lowest_error": feats,
        })
    return rows


def bench_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()
