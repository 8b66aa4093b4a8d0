"""CSV price ingestion, price-to-return conversion, alignment, chronological splits."""

from __future__ import annotations

import csv
import datetime
import io
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DegenerateSplit,
    EmptyIntersection,
    MalformedCsv,
    MissingCell,
    NonMonotonicDates,
    NonPositivePrice,
    TooFewRows,
)


@dataclass(frozen=True)
class PriceFrame:
    """T×N positive prices on a strictly increasing date axis."""

    dates: tuple[datetime.date, ...]
    assets: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (len(self.dates), len(self.assets)):
            raise MalformedCsv(
                f"shape {values.shape} does not match {len(self.dates)} dates × {len(self.assets)} assets"
            )
        for a, b in zip(self.dates, self.dates[1:]):
            if a >= b:
                raise NonMonotonicDates(f"dates not strictly increasing at {b}")
        if not np.all(np.isfinite(values)):
            raise MissingCell("non-finite price")
        if values.size and values.min() <= 0:
            raise NonPositivePrice(f"minimum price {values.min()} is not > 0")

    @property
    def n_periods(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.assets)


@dataclass(frozen=True)
class ReturnsMatrix:
    """T×N per-period returns; `kind` records the convention used to build them."""

    dates: tuple[datetime.date, ...]
    assets: tuple[str, ...]
    values: np.ndarray
    kind: str = "simple"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if self.kind not in ("simple", "log"):
            raise ValueError(f"kind must be 'simple' or 'log', got {self.kind!r}")
        if values.shape != (len(self.dates), len(self.assets)):
            raise MalformedCsv(
                f"shape {values.shape} does not match {len(self.dates)} dates × {len(self.assets)} assets"
            )
        for a, b in zip(self.dates, self.dates[1:]):
            if a >= b:
                raise NonMonotonicDates(f"dates not strictly increasing at {b}")
        if not np.all(np.isfinite(values)):
            raise MissingCell("non-finite return")
        if self.kind == "simple" and values.size and values.min() <= -1:
            raise NonPositivePrice("simple return ≤ −1 implies non-positive price")

    @property
    def n_periods(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.assets)


def _parse_date(text: str, row: int) -> datetime.date:
    try:
        return datetime.date.fromisoformat(text.strip())
    except ValueError as exc:
        raise MalformedCsv(f"row {row}: cannot parse date {text!r}") from exc


def load_prices(source) -> PriceFrame:
    """Parse a CSV price history (`date,ASSET1,ASSET2,...`) into a PriceFrame.

    `source` may be a path, bytes, str, or a readable file object.
    """
    if isinstance(source, bytes):
        stream = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str) and source and "\n" not in source and "," not in source:
        stream = open(source, "r", encoding="utf-8", newline="")
    elif isinstance(source, str):
        stream = io.StringIO(source)
    elif hasattr(source, "read"):
        raw = source.read()
        stream = io.StringIO(raw.decode("utf-8") if isinstance(raw, bytes) else raw)
    else:
        stream = open(source, "r", encoding="utf-8", newline="")

    with stream:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsv("empty file")
        if not header or header[0].strip().lower() != "date":
            raise MalformedCsv(f"first column header must be 'date', got {header[:1]!r}")
        assets = tuple(h.strip() for h in header[1:])
        if not assets:
            raise MalformedCsv("no asset columns")

        dates: list[datetime.date] = []
        rows: list[list[float]] = []
        for i, record in enumerate(reader, start=2):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue  # tolerate trailing blank line
            if len(record) != len(assets) + 1:
                raise MissingCell(f"row {i}: expected {len(assets) + 1} cells, got {len(record)}")
            dates.append(_parse_date(record[0], i))
            row = []
            for j, cell in enumerate(record[1:], start=1):
                text = cell.strip()
                if not text:
                    raise MissingCell(f"row {i}, column {header[j]}: empty cell")
                try:
                    value = float(text)
                except ValueError as exc:
                    raise MalformedCsv(f"row {i}, column {header[j]}: {text!r}") from exc
                if not math.isfinite(value):
                    raise MissingCell(f"row {i}, column {header[j]}: non-finite value")
                row.append(value)
            rows.append(row)

    if not rows:
        raise MalformedCsv("no data rows")
    return PriceFrame(dates=tuple(dates), assets=assets, values=np.array(rows, dtype=float))


def prices_to_returns(prices: PriceFrame, kind: str = "simple") -> ReturnsMatrix:
    """Convert prices to per-period returns; the return date is the later date of each pair."""
    if prices.n_periods < 2:
        raise TooFewRows("need at least 2 price rows to form returns")
    p = prices.values
    if kind == "simple":
        values = p[1:] / p[:-1] - 1.0
    elif kind == "log":
        values = np.log(p[1:] / p[:-1])
    else:
        raise ValueError(f"kind must be 'simple' or 'log', got {kind!r}")
    return ReturnsMatrix(dates=prices.dates[1:], assets=prices.assets, values=values, kind=kind)


def align(prices: PriceFrame, factor_prices: PriceFrame) -> tuple[PriceFrame, PriceFrame]:
    """Restrict both frames to their common dates, preserving chronological order."""
    common = set(prices.dates) & set(factor_prices.dates)
    if not common:
        raise EmptyIntersection("no common dates between the two frames")

    def restrict(frame: PriceFrame) -> PriceFrame:
        keep = [i for i, d in enumerate(frame.dates) if d in common]
        return PriceFrame(
            dates=tuple(frame.dates[i] for i in keep),
            assets=frame.assets,
            values=frame.values[keep],
        )

    return restrict(prices), restrict(factor_prices)


def time_split(X: ReturnsMatrix, test_fraction: float) -> tuple[ReturnsMatrix, ReturnsMatrix]:
    """Chronological train/test split; test = trailing floor(T·fraction) rows, at least 1."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    T = X.n_periods
    n_test = max(1, int(T * test_fraction))
    n_train = T - n_test
    if n_train < 1:
        raise DegenerateSplit(f"T={T} leaves no training rows for test_fraction={test_fraction}")

    def slice_rows(lo: int, hi: int) -> ReturnsMatrix:
        return ReturnsMatrix(
            dates=X.dates[lo:hi], assets=X.assets, values=X.values[lo:hi], kind=X.kind
        )

    return slice_rows(0, n_train), slice_rows(n_train, T)
