"""Command-line entry point: ``redcut select|eval|bench``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .dataset import Dataset, discretize, load_csv, load_sparse, make_splits, normalize
from .errors import ConfigError, RedcutError
from .evaluation import SelectorSpec, bench_csv, bench_rows, topk_curve
from .selectors import FeatureSpace

DEFAULT_SEED = 13
METHOD_CHOICES = ("qpfs", "tlkm", "ikm", "ikma")


@dataclass
class RunConfig:
    data: str
    format: str = "csv"
    label_column: object = -1
    methods: list = field(default_factory=lambda: ["qpfs"])
    theta: Optional[float] = None
    k: int = 15
    k_init: Optional[int] = None
    tau: float = 0.8
    levels: int = 3
    c: float = 1.0
    seed: int = DEFAULT_SEED
    tol: float = 1e-7
    splits: str = "holdout:0.6:100"
    k_grid: str = "1:100"
    out: Optional[str] = None
    cache: Optional[str] = None
    threads: int = 1
    select_once: bool = False
    fold_stats: bool = False
    freeze_theta: bool = False
    normalized_similarity: bool = False

    def __post_init__(self):
        if self.format not in ("csv", "sparse"):
            raise ConfigError(f"--format must be csv or sparse, got {self.format!r}")
        for m in self.methods:
            if m not in METHOD_CHOICES:
                raise ConfigError(f"--method must be one of {', '.join(METHOD_CHOICES)}, got {m!r}")
        if self.theta is not None and not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"--theta must lie in [0, 1], got {self.theta}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"--tau must lie in (0, 1], got {self.tau}")
        if self.k < 2:
            raise ConfigError(f"--k must be at least 2, got {self.k}")
        if self.k_init is not None and self.k_init < 1:
            raise ConfigError(f"--k-init must be positive, got {self.k_init}")
        if self.levels < 1:
            raise ConfigError(f"--levels must be at least 1, got {self.levels}")
        if self.c <= 0:
            raise ConfigError(f"--c must be positive, got {self.c}")
        if self.tol <= 0:
            raise ConfigError(f"--tol must be positive, got {self.tol}")
        if self.threads < 1:
            raise ConfigError(f"--threads must be positive, got {self.threads}")
        self.split_spec = parse_splits(self.splits)
        self.k_values = parse_k_grid(self.k_grid)

    def spec(self, method: str) -> SelectorSpec:
        return SelectorSpec(
            method=method, theta=self.theta, k=self.k, k_init=self.k_init, tau=self.tau,
            L=self.levels, freeze_theta=self.freeze_theta,
            normalized_similarity=self.normalized_similarity, tol=self.tol,
        )

    @property
    def cache_dir(self) -> Optional[str]:
        return os.environ.get("REDCUT_CACHE") or self.cache


def parse_splits(text: str) -> dict:
    """``holdout:FRAC:REPS`` or ``loocv``."""
    if text == "loocv":
        return {"kind": "loocv"}
    parts = text.split(":")
    if len(parts) == 3 and parts[0] == "holdout":
        try:
            frac, reps = float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(f"--splits: cannot parse {text!r}") from None
        if not 0.0 < frac < 1.0 or reps < 1:
            raise ConfigError(f"--splits: need 0 < FRAC < 1 and REPS >= 1, got {text!r}")
        return {"kind": "holdout", "train_fraction": frac, "n_repeats": reps}
    raise ConfigError(f"--splits must be holdout:FRAC:REPS or loocv, got {text!r}")


def parse_k_grid(text: str) -> list:
    """``A:B[:STEP]``, inclusive of both ends."""
    try:
        parts = [int(p) for p in text.split(":")]
    except ValueError:
        raise ConfigError(f"--k-grid: cannot parse {text!r}") from None
    if len(parts) == 1:
        parts = [parts[0], parts[0]]
    if len(parts) not in (2, 3):
        raise ConfigError(f"--k-grid must be A:B[:STEP], got {text!r}")
    a, b = parts[:2]
    step = parts[2] if len(parts) == 3 else 1
    if a < 1 or b < a or step < 1:
        raise ConfigError(f"--k-grid needs 1 <= A <= B and STEP >= 1, got {text!r}")
    return list(range(a, b + 1, step))


def load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.format == "sparse":
        return load_sparse(cfg.data)
    return load_csv(cfg.data, cfg.label_column)


def run_select(cfg: RunConfig) -> dict:
    """Library path behind ``redcut select``."""
    d = normalize(load_dataset(cfg))
    dd = discretize(d)
    space = FeatureSpace.from_codes(dd, d.labels, cfg.normalized_similarity, cfg.cache_dir)
    result = cfg.spec(cfg.methods[0]).run(space)
    out = result.to_dict()
    out["seed"] = cfg.seed
    out["dataset"] = {"name": d.name, "n_features": d.n_features, "n_instances": d.n_instances,
                      "n_classes": d.n_classes}
    return out


def _splits_for(cfg: RunConfig, d: Dataset):
    s = cfg.split_spec
    if s["kind"] == "loocv":
        return make_splits(d, "loocv", cfg.seed)
    return make_splits(d, "holdout", cfg.seed, s["train_fraction"], s["n_repeats"])


def run_eval(cfg: RunConfig, method: Optional[str] = None):
    """Library path behind ``redcut eval``; returns the EvalReport."""
    d = normalize(load_dataset(cfg))
    report = topk_curve(
        d, cfg.spec(method or cfg.methods[0]), cfg.k_values, _splits_for(cfg, d), cfg.c,
        select_once=cfg.select_once, fold_stats=cfg.fold_stats, cache_dir=cfg.cache_dir,
        threads=cfg.threads,
    )
    report.params["seed"] = cfg.seed
    return report


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_select(cfg: RunConfig) -> int:
    text = json.dumps(run_select(cfg), indent=2)
    if cfg.out:
        _write(Path(cfg.out), text + "\n")
    else:
        print(text)
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    report = run_eval(cfg)
    text = report.to_json(timings=False) + "\n"
    if cfg.out:
        out = Path(cfg.out)
        _write(out, text)
        _write(out.with_suffix(".csv"), report.to_csv())
        _write(out.with_suffix(".timings.json"), json.dumps(report.timings, indent=2) + "\n")
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(cfg: RunConfig) -> int:
    if len(cfg.methods) < 2:
        raise ConfigError("bench: need >=2 methods (e.g. --method qpfs,tlkm)")
    reports = [run_eval(cfg, m) for m in cfg.methods]
    rows = bench_rows(reports)
    table = bench_csv(rows)
    sys.stdout.write(table)
    if cfg.out:
        out = Path(cfg.out)
        payload = {
            "seed": cfg.seed,
            "rows": rows,
            "reports": [r.to_dict(timings=True) for r in reports],
        }
        _write(out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
        _write(out.with_suffix(".csv"), table)
    return 0


def _label_column(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("data", help="dataset file")
    common.add_argument("--method", default="qpfs",
                        help="qpfs|tlkm|ikm|ikma; bench takes a comma-separated list")
    common.add_argument("--theta", type=float, default=None,
                        help="relevance/redundancy trade-off; default from the Q and s means")
    common.add_argument("--k", type=int, default=15, help="sub-clusters per split")
    common.add_argument("--k-init", type=int, default=None,
                        help="clusters of the first k-means pass (default: --k)")
    common.add_argument("--tau", type=float, default=0.8, help="radius threshold in (0, 1]")
    common.add_argument("--levels", type=int, default=3, help="maximum interleaved levels L")
    common.add_argument("--c", type=float, default=1.0, help="SVM regularization C")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--tol", type=float, default=1e-7, help="QP KKT tolerance")
    common.add_argument("--splits", default="holdout:0.6:100", help="holdout:FRAC:REPS or loocv")
    common.add_argument("--k-grid", default="1:100", help="A:B[:STEP]")
    common.add_argument("--format", choices=("csv", "sparse"), default="csv")
    common.add_argument("--label-column", type=_label_column, default=-1,
                        help="CSV label column, by index or header name (default: last)")
    common.add_argument("--cache", default=None,
                        help="similarity cache directory (REDCUT_CACHE overrides)")
    common.add_argument("--out", default=None, help="output path")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--select-once", action="store_true",
                        help="select on the full data once instead of per training fold")
    common.add_argument("--fold-stats", action="store_true",
                        help="estimate discretization mean/std on the training fold only")
    common.add_argument("--freeze-theta", action="store_true",
                        help="reuse the top-level theta inside sub-problems")
    common.add_argument("--normalized-similarity", action="store_true",
                        help="use 1 - MI distance instead of raw MI as redundancy")

    parser = argparse.ArgumentParser(prog="redcut", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("select", parents=[common], help="rank features and print JSON")
    sub.add_parser("eval", parents=[common], help="top-k error curve (JSON + CSV)")
    sub.add_parser("bench", parents=[common], help="compare methods under identical splits")
    return parser


def config_from_args(args) -> RunConfig:
    return RunConfig(
        data=args.data, format=args.format, label_column=args.label_column,
        methods=[m.strip() for m in args.method.split(",") if m.strip()],
        theta=args.theta, k=args.k, k_init=args.k_init, tau=args.tau, levels=args.levels,
        c=args.c, seed=args.seed, tol=args.tol, splits=args.splits, k_grid=args.k_grid,
        out=args.out, cache=args.cache, threads=args.threads, select_once=args.select_once,
        fold_stats=args.fold_stats, freeze_theta=args.freeze_theta,
        normalized_similarity=args.normalized_similarity,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.command == "select" and len(cfg.methods) != 1:
            raise ConfigError("select takes a single --method")
        handler = {"select": cmd_select, "eval": cmd_eval, "bench": cmd_bench}[args.command]
        return handler(cfg)
    except RedcutError as exc:
        print(f"redcut: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"redcut: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
