"""Portfolio and Population value types plus the summary statistics report."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import measures
from .exceptions import AssetMismatch, EmptyPopulation, TooFewSamples
from .market_data import ReturnsMatrix
from .measures import RiskMeasure

PERIODS_PER_YEAR = 252


@dataclass
class Portfolio:
    """A realized return series, optionally with the weights that produced it."""

    name: str
    returns: np.ndarray
    weights: np.ndarray | None = None
    dates: tuple = ()
    periods_per_year: int = PERIODS_PER_YEAR

    def __post_init__(self):
        self.returns = np.asarray(self.returns, dtype=float).ravel()
        if not np.all(np.isfinite(self.returns)):
            raise ValueError("portfolio returns must be finite")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float).ravel()
            if not np.all(np.isfinite(self.weights)):
                raise ValueError("weights must be finite")
        if self.dates and len(self.dates) != self.returns.size:
            raise ValueError("date axis length does not match return series")

    @property
    def n_periods(self) -> int:
        return self.returns.size

    def summary(self) -> dict[str, float]:
        return summary(self)


@dataclass
class MultiPeriodPortfolio:
    """Concatenated out-of-sample segments, each with its own weights."""

    name: str
    segments: list[tuple[np.ndarray, tuple]] = field(default_factory=list)
    returns: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dates: tuple = ()
    periods_per_year: int = PERIODS_PER_YEAR

    def __post_init__(self):
        self.returns = np.asarray(self.returns, dtype=float).ravel()
        if not np.all(np.isfinite(self.returns)):
            raise ValueError("portfolio returns must be finite")

    @property
    def n_periods(self) -> int:
        return self.returns.size

    def summary(self) -> dict[str, float]:
        return summary(self)


@dataclass
class Population:
    members: list

    def summary(self) -> list[dict[str, float | str]]:
        return population_summary(self)


def summary(p) -> dict[str, float]:
    """Ordered statistics map; every risk figure delegates to the measures module."""
    r = np.asarray(p.returns, dtype=float)
    if r.size < 2:
        raise TooFewSamples("summary needs at least 2 return periods")
    periods = getattr(p, "periods_per_year", PERIODS_PER_YEAR)
    ann_mean = float(r.mean()) * periods
    ann_vol = measures.standard_deviation(r) * np.sqrt(periods)
    sharpe = ann_mean / ann_vol if ann_vol > 0 else 0.0
    return {
        "cumulative_return": float(np.prod(1.0 + r) - 1.0),
        "annualized_mean": ann_mean,
        "annualized_volatility": float(ann_vol),
        "sharpe_ratio": float(sharpe),
        "cvar_95": measures.cvar(r, beta=0.95),
        "cdar_95": measures.cdar(r, beta=0.95, compounded=False),
        "max_drawdown": measures.max_drawdown(r, compounded=True),
        "worst_realization": measures.worst_realization(r),
    }


def population_summary(pop: Population) -> list[dict[str, float | str]]:
    """One row per member, input order preserved."""
    members = pop.members if isinstance(pop, Population) else list(pop)
    if not members:
        raise EmptyPopulation("population has no members")
    rows: list[dict[str, float | str]] = []
    for member in members:
        row: dict[str, float | str] = {"name": member.name}
        row.update(summary(member))
        rows.append(row)
    return rows


def frontier_report(
    points,
    X_train,
    X_test,
    risk_measure: RiskMeasure = RiskMeasure.STANDARD_DEVIATION,
    beta: float = 0.95,
) -> list[dict[str, float | str | int]]:
    """Realized (mean, risk) of every frontier point on train and test data."""
    if not points:
        raise ValueError("no frontier points to report")
    datasets = (("train", X_train), ("test", X_test))
    rows: list[dict[str, float | str | int]] = []
    for idx, point in enumerate(points):
        w = np.asarray(point.weights, dtype=float)
        for label, X in datasets:
            values = X.values if isinstance(X, ReturnsMatrix) else np.asarray(X, dtype=float)
            if values.shape[1] != w.size:
                raise AssetMismatch(
                    f"{w.size} weights vs {values.shape[1]} columns in {label} data"
                )
            series = values @ w
            rows.append({
                "point": idx,
                "dataset": label,
                "mean": float(series.mean()),
                "risk": measures.measure_value(series, risk_measure, beta=beta),
            })
    return rows
