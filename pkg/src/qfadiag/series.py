"""
Time-series containers, price ingestion and second-order diagnostics.
"""

from __future__ import annotations

import csv
import datetime as _dt
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from qfadiag.errors import (
    DegenerateError,
    EmptyFileError,
    InputError,
    MissingColumnError,
    ValueParseError,
)

__all__ = [
    "FrequencyGrid",
    "PriceSeries",
    "TimeSeries",
    "as_values",
    "autocorrelation",
    "fold",
    "load_csv",
    "log_returns",
    "ordinary_periodogram",
    "write_series_csv",
]

MIN_SPECTRAL_LENGTH = 8


@dataclass(frozen=True)
class TimeSeries:
    """Finite real-valued series observed at t = 1, ..., n."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size == 0:
            raise InputError("time series is empty")
        if not np.all(np.isfinite(v)):
            raise InputError("time series contains NaN or infinite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __len__(self) -> int:
        return self.n

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def grid(self) -> "FrequencyGrid":
        return FrequencyGrid(self.n)


@dataclass(frozen=True)
class PriceSeries:
    """Daily closing values with strictly increasing dates."""

    dates: tuple
    closes: np.ndarray

    def __post_init__(self):
        closes = np.array(self.closes, dtype=float).ravel()
        dates = tuple(self.dates)
        if len(dates) != closes.size:
            raise InputError("dates and closes differ in length")
        if not np.all(np.isfinite(closes)) or np.any(closes <= 0):
            raise InputError("closing values must be finite and strictly positive")
        for i in range(1, len(dates)):
            if not dates[i] > dates[i - 1]:
                raise InputError(f"dates not strictly increasing at position {i + 1}: "
                                 f"{dates[i - 1]} then {dates[i]}")
        closes.setflags(write=False)
        object.__setattr__(self, "closes", closes)
        object.__setattr__(self, "dates", dates)

    def __len__(self) -> int:
        return self.closes.shape[0]


@dataclass(frozen=True)
class FrequencyGrid:
    """
    Fourier frequencies strictly inside (0, pi) for a series of length n.

    ``omegas[k-1] = 2*pi*k/n`` for k = 1, ..., K with K = ceil(n/2) - 1.
    """

    n: int
    indices: np.ndarray = field(init=False, repr=False)
    omegas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 3:
            raise InputError("frequency grid needs n >= 3")
        K = math.ceil(self.n / 2) - 1
        idx = np.arange(1, K + 1)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "omegas", 2.0 * np.pi * idx / self.n)

    @property
    def K(self) -> int:
        return self.indices.shape[0]

    @property
    def freqs(self) -> np.ndarray:
        """Frequencies in cycles per observation, omega / (2 pi)."""
        return self.indices / self.n

    def design(self) -> tuple[np.ndarray, np.ndarray]:
        """Cosine and sine regressors, each K x n, evaluated at t = 1..n.

        Phases are reduced modulo n in integer arithmetic so that observations
        sharing a phase get bit-identical rows.
        """
        t = np.arange(1, self.n + 1)
        phase = 2.0 * np.pi * ((self.indices[:, None] * t[None, :]) % self.n) / self.n
        return np.ascontiguousarray(np.cos(phase)), np.ascontiguousarray(np.sin(phase))


def as_values(series) -> np.ndarray:
    """Return the float array behind ``series`` (TimeSeries or array-like)."""
    if isinstance(series, TimeSeries):
        return series.values
    return TimeSeries(series).values


def log_returns(prices) -> TimeSeries:
    """X_t = log(Y_t / Y_{t-1}); accepts a PriceSeries or positive array."""
    closes = prices.closes if isinstance(prices, PriceSeries) else np.asarray(prices, dtype=float)
    if closes.size < 2:
        raise InputError("need at least 2 prices")
    if not np.all(np.isfinite(closes)) or np.any(closes <= 0):
        raise InputError("prices must be finite and strictly positive")
    return TimeSeries(np.diff(np.log(closes)))


def fold(series, kind: str = "absolute") -> TimeSeries:
    x = as_values(series)
    if kind == "absolute":
        return TimeSeries(np.abs(x))
    if kind == "square":
        return TimeSeries(x * x)
    raise InputError(f"unknown fold kind {kind!r}; expected 'absolute' or 'square'")


def autocorrelation(series, max_lag: int) -> np.ndarray:
    """
    Sample autocorrelations at lags 0..max_lag.

    Mean-centered with the biased 1/n autocovariance, so lag 0 is exactly 1
    and every value lies in [-1, 1].
    """
    x = as_values(series)
    n = x.shape[0]
    if max_lag < 0 or max_lag >= n:
        raise InputError(f"max_lag must be in [0, n) with n = {n}")
    xc = x - x.mean()
    gamma0 = np.dot(xc, xc) / n
    if gamma0 == 0.0:
        raise DegenerateError("constant series has no autocorrelation")
    acf = np.empty(max_lag + 1)
    acf[0] = 1.0
    for lag in range(1, max_lag + 1):
        acf[lag] = np.dot(xc[lag:], xc[:-lag]) / n / gamma0
    return acf


def ordinary_periodogram(series) -> np.ndarray:
    """Mean-centered periodogram on the interior Fourier grid, scaled to sum to 1."""
    x = as_values(series)
    n = x.shape[0]
    if n < MIN_SPECTRAL_LENGTH:
        raise InputError(f"need n >= {MIN_SPECTRAL_LENGTH} for spectral operations")
    K = math.ceil(n / 2) - 1
    spec = np.abs(np.fft.rfft(x - x.mean())[1:K + 1]) ** 2
    total = spec.sum()
    if not total > 0.0:
        raise DegenerateError("constant series has zero total power")
    return spec / total


def _parse_float(text: str, line: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValueParseError(f"line {line}: cannot parse {column}={text!r} as a number",
                              row=line) from None
    if not math.isfinite(value):
        raise ValueParseError(f"line {line}: {column}={text!r} is not finite", row=line)
    return value


def load_csv(path, date_column: str | None = None, close_column: str | None = None,
             value_column: str | None = None):
    """
    Read a price file (``date_column`` + ``close_column``) into a PriceSeries,
    or a single-column file (``value_column``) into a TimeSeries.

    Rows are kept in file order.  Any unparseable cell raises
    :class:`ValueParseError` naming the line; nothing is skipped.
    """
    price_mode = value_column is None
    if price_mode and (date_column is None or close_column is None):
        raise InputError("give either value_column, or both date_column and close_column")
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise EmptyFileError(f"{path}: file is empty")
        header = [h.strip() for h in header]
        wanted = [date_column, close_column] if price_mode else [value_column]
        for col in wanted:
            if col not in header:
                raise MissingColumnError(f"{path}: missing column {col!r} (have {header})")
        pos = {col: header.index(col) for col in wanted}
        dates, values = [], []
        for line, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise ValueParseError(f"line {line}: expected {len(header)} fields, got {len(row)}",
                                      row=line)
            if price_mode:
                raw = row[pos[date_column]].strip()
                try:
                    dates.append(_dt.date.fromisoformat(raw))
                except ValueError:
                    raise ValueParseError(f"line {line}: cannot parse date {raw!r}",
                                          row=line) from None
                values.append(_parse_float(row[pos[close_column]].strip(), line, close_column))
            else:
                values.append(_parse_float(row[pos[value_column]].strip(), line, value_column))
    if not values:
        raise EmptyFileError(f"{path}: no data rows")
    if price_mode:
        return PriceSeries(tuple(dates), np.array(values))
    return TimeSeries(np.array(values))


def write_series_csv(path, series, column: str = "value") -> None:
    """One value per row under a single header, full round-trip precision."""
    x = as_values(series)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(column + "\n")
        for v in x:
            fh.write(repr(float(v)) + "\n")
