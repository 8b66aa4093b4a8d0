"""Time-aware split generation and out-of-sample portfolio assembly.

Walk-forward and combinatorial purged cross-validation (CPCV) emit SplitPlans
of index arrays; cross_val_predict turns a plan plus an allocator into
out-of-sample MultiPeriodPortfolios with a strict no-leakage guarantee.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .analytics import MultiPeriodPortfolio
from .base import clone
from .exceptions import EmptyCv, InvalidConfig
from .market_data import ReturnsMatrix


@dataclass
class SplitPlan:
    """Ordered (train, test) index pairs; CPCV plans carry path metadata.

    `test_folds` lists, per split, the (fold_id, indices) blocks under test;
    `path_of` maps (split_index, fold_id) to a path id.
    """

    splits: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    test_folds: list[list[tuple[int, np.ndarray]]] | None = None
    path_of: dict[tuple[int, int], int] | None = None
    n_paths: int = 0

    @property
    def n_splits(self) -> int:
        return len(self.splits)

    def to_json(self) -> str:
        """Audit serialization: half-open index ranges per split."""
        payload = {
            "splits": [
                {"train": _to_ranges(train), "test": _to_ranges(test)}
                for train, test in self.splits
            ]
        }
        if self.path_of is not None:
            payload["paths"] = [
                {"split": s, "fold": f, "path": p}
                for (s, f), p in sorted(self.path_of.items())
            ]
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        payload = json.loads(text)
        splits = [
            (_from_ranges(item["train"]), _from_ranges(item["test"]))
            for item in payload["splits"]
        ]
        plan = cls(splits=splits)
        if "paths" in payload:
            plan.path_of = {
                (item["split"], item["fold"]): item["path"] for item in payload["paths"]
            }
            plan.n_paths = 1 + max((p for p in plan.path_of.values()), default=-1)
        return plan


def _to_ranges(idx: np.ndarray) -> list[list[int]]:
    idx = np.asarray(idx, dtype=int)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) != 1)
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [idx.size - 1]])
    return [[int(idx[s]), int(idx[e]) + 1] for s, e in zip(starts, ends)]


def _from_ranges(ranges) -> np.ndarray:
    if not ranges:
        return np.zeros(0, dtype=int)
    return np.concatenate([np.arange(lo, hi) for lo, hi in ranges])


def walk_forward(T: int, train_size: int, test_size: int, expanding: bool = False) -> SplitPlan:
    """Rolling (or expanding) chronological splits; only full test windows count."""
    if train_size < 1 or test_size < 1:
        raise InvalidConfig("train_size and test_size must be >= 1")
    if T < train_size + test_size:
        warnings.warn(
            f"T={T} is too short for train {train_size} + test {test_size}; empty plan",
            stacklevel=2,
        )
        return SplitPlan()
    splits = []
    i = 0
    while True:
        test_start = train_size + i * test_size
        test_end = test_start + test_size
        if test_end > T:
            break
        train_start = 0 if expanding else i * test_size
        splits.append((
            np.arange(train_start, test_start),
            np.arange(test_start, test_end),
        ))
        i += 1
    return SplitPlan(splits=splits)


@dataclass(frozen=True)
class CpcvConfig:
    k: int = 10
    p: int = 2
    purge_horizon: int = 1
    embargo_fraction: float = 0.01

    def __post_init__(self):
        if self.k < 2:
            raise InvalidConfig("k must be >= 2")
        if not 1 <= self.p < self.k:
            raise InvalidConfig("p must satisfy 1 <= p < k")
        if self.purge_horizon < 0:
            raise InvalidConfig("purge_horizon must be >= 0")
        if not 0 <= self.embargo_fraction < 1:
            raise InvalidConfig("embargo_fraction must lie in [0, 1)")

    @property
    def n_splits(self) -> int:
        return math.comb(self.k, self.p)

    @property
    def n_paths(self) -> int:
        return math.comb(self.k - 1, self.p - 1)

    def plan(self, T: int) -> "SplitPlan":
        return cpcv(T, self)


@dataclass(frozen=True)
class WalkForwardConfig:
    train_size: int
    test_size: int
    expanding: bool = False

    def plan(self, T: int) -> "SplitPlan":
        return walk_forward(T, self.train_size, self.test_size, self.expanding)


def _fold_bounds(T: int, k: int) -> list[tuple[int, int]]:
    """Contiguous folds, sizes differing by at most 1, longer folds first."""
    base, extra = divmod(T, k)
    bounds = []
    start = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        bounds.append((start, start + size))
        start += size
    return bounds


def cpcv(T: int, cfg: CpcvConfig) -> SplitPlan:
    """Combinatorial purged CV: C(k,p) splits, purge/embargo around test blocks."""
    if T < cfg.k:
        raise InvalidConfig(f"T={T} smaller than k={cfg.k}")
    bounds = _fold_bounds(T, cfg.k)
    embargo_n = math.ceil(cfg.embargo_fraction * T)

    splits: list[tuple[np.ndarray, np.ndarray]] = []
    test_folds: list[list[tuple[int, np.ndarray]]] = []
    path_of: dict[tuple[int, int], int] = {}
    occurrences = {f: 0 for f in range(cfg.k)}
    for s_idx, combo in enumerate(combinations(range(cfg.k), cfg.p)):
        excluded = np.zeros(T, dtype=bool)
        test_mask = np.zeros(T, dtype=bool)
        blocks = []
        for f in combo:
            start, end = bounds[f]
            test_mask[start:end] = True
            blocks.append((f, np.arange(start, end)))
            lo = max(0, start - cfg.purge_horizon)
            hi = min(T, end + cfg.purge_horizon + embargo_n)
            excluded[lo:hi] = True
            path_of[(s_idx, f)] = occurrences[f]
            occurrences[f] += 1
        train = np.flatnonzero(~excluded & ~test_mask)
        splits.append((train, np.flatnonzero(test_mask)))
        test_folds.append(blocks)
    return SplitPlan(splits=splits, test_folds=test_folds, path_of=path_of,
                     n_paths=cfg.n_paths)


def _take_rows(X: ReturnsMatrix, idx: np.ndarray) -> ReturnsMatrix:
    return ReturnsMatrix(
        dates=tuple(X.dates[i] for i in idx),
        assets=X.assets,
        values=X.values[idx],
        kind=X.kind,
    )


def cross_val_predict(
    allocator,
    X: ReturnsMatrix,
    plan: SplitPlan,
    n_jobs: int = 1,
    name: str | None = None,
):
    """Fit per split on train rows, predict test rows out of sample.

    Returns one MultiPeriodPortfolio for sequential plans (walk-forward), or a
    list of per-path MultiPeriodPortfolios for CPCV plans. Results are
    aggregated by split index, so thread count never changes the output.
    """
    if plan.n_splits == 0:
        raise EmptyCv("split plan is empty")
    label = name if name is not None else type(allocator).__name__

    def fit_one(s_idx: int):
        train, test = plan.splits[s_idx]
        try:
            est = clone(allocator)
            est.fit(_take_rows(X, train))
            weights = np.asarray(est.weights_, dtype=float)
        except Exception as exc:
            raise type(exc)(f"split {s_idx}: {exc}") from exc
        return weights, X.values[test] @ weights

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(fit_one, range(plan.n_splits)))
    else:
        results = [fit_one(s) for s in range(plan.n_splits)]

    if plan.path_of is None:
        segments = []
        returns = []
        for (_, test), (weights, series) in zip(plan.splits, results):
            segments.append((weights, (X.dates[test[0]], X.dates[test[-1]])))
            returns.append(series)
        return MultiPeriodPortfolio(
            name=label,
            segments=segments,
            returns=np.concatenate(returns),
            dates=tuple(X.dates[i] for s in plan.splits for i in s[1]),
        )

    # CPCV: assemble each path from one test occurrence of every fold
    portfolios = []
    for path in range(plan.n_paths):
        values = np.full(X.n_periods, np.nan)
        segments = []
        for s_idx, blocks in enumerate(plan.test_folds):
            weights, _ = results[s_idx]
            for fold, idx in blocks:
                if plan.path_of[(s_idx, fold)] != path:
                    continue
                values[idx] = X.values[idx] @ weights
                segments.append((weights, (X.dates[idx[0]], X.dates[idx[-1]])))
        if np.any(np.isnan(values)):
            raise EmptyCv(f"path {path} does not cover every sample")
        segments.sort(key=lambda item: item[1][0])
        portfolios.append(MultiPeriodPortfolio(
            name=f"{label}_path{path}",
            segments=segments,
            returns=values,
            dates=tuple(X.dates),
        ))
    return portfolios
