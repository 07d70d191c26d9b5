"""Price series container, CSV ingest, smoothing, labels, synthetic generators."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .exceptions import (
    BadParams,
    DuplicateTimestamp,
    EmptyInput,
    IndexOutOfRange,
    MalformedRow,
    NonPositivePrice,
    SeriesTooShort,
)
from .validation import (
    as_float_vector,
    check_fraction,
    check_in_open_interval,
    check_int_at_least,
    check_nonnegative,
    check_positive,
)


class Frequency(enum.Enum):
    DAY1 = "1d"
    HOUR1 = "1h"
    MIN5 = "5m"
    CUSTOM = "custom"


@dataclass(eq=False)
class PriceSeries:
    """A single instrument's close prices on a strictly increasing time grid.

    timestamps are integer epoch seconds; closes are strictly positive.
    """

    ticker: str
    frequency: Frequency
    timestamps: np.ndarray
    closes: np.ndarray

    def __post_init__(self) -> None:
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.closes = np.asarray(self.closes, dtype=np.float64)
        if self.timestamps.ndim != 1 or self.closes.ndim != 1:
            raise BadParams("timestamps and closes must be 1-D")
        if len(self.timestamps) != len(self.closes):
            raise BadParams("timestamps and closes must have equal length")
        if len(self.closes) == 0:
            raise EmptyInput("a PriceSeries cannot be empty")
        if not np.all(np.isfinite(self.closes)):
            raise BadParams("closes contain non-finite values")
        if np.any(self.closes <= 0):
            raise NonPositivePrice("closes must be strictly positive")
        if np.any(np.diff(self.timestamps) <= 0):
            raise DuplicateTimestamp("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.closes)

    def slice(self, start: int, stop: int) -> "PriceSeries":
        """Contiguous sub-series over [start, stop)."""
        if not 0 <= start < stop <= len(self):
            raise IndexOutOfRange(f"slice [{start}, {stop}) outside series of length {len(self)}")
        return PriceSeries(self.ticker, self.frequency,
                           self.timestamps[start:stop], self.closes[start:stop])


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for price CSVs.

    timestamp_format is either a strptime pattern or the literal "epoch"
    for integer epoch seconds.
    """

    timestamp_col: str = "date"
    close_col: str = "close"
    timestamp_format: str = "%Y-%m-%d"


def _parse_timestamp(text: str, fmt: str, line_no: int) -> int:
    text = text.strip()
    try:
        if fmt == "epoch":
            return int(text)
        dt = datetime.strptime(text, fmt).replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    except (ValueError, OverflowError) as exc:
        raise MalformedRow(line_no, f"bad timestamp {text!r}: {exc}") from exc


def parse_csv(
    data: bytes | str,
    schema: CsvSchema = CsvSchema(),
    *,
    ticker: str = "series",
    frequency: Frequency = Frequency.DAY1,
) -> PriceSeries:
    """Parse CSV bytes into a PriceSeries, sorted by timestamp ascending.

    Raises MalformedRow (with the 1-based line number), NonPositivePrice,
    or DuplicateTimestamp.
    """
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInput("CSV has no header row") from None
    header = [h.strip() for h in header]
    try:
        ts_idx = header.index(schema.timestamp_col)
        close_idx = header.index(schema.close_col)
    except ValueError:
        raise MalformedRow(1, f"header {header!r} lacks column "
                              f"{schema.timestamp_col!r} or {schema.close_col!r}") from None

    rows: list[tuple[int, float]] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) <= max(ts_idx, close_idx):
            raise MalformedRow(line_no, f"expected >= {max(ts_idx, close_idx) + 1} columns, got {len(row)}")
        ts = _parse_timestamp(row[ts_idx], schema.timestamp_format, line_no)
        try:
            close = float(row[close_idx])
        except ValueError as exc:
            raise MalformedRow(line_no, f"bad close {row[close_idx]!r}") from exc
        if not math.isfinite(close):
            raise MalformedRow(line_no, f"non-finite close {close!r}")
        if close <= 0:
            raise NonPositivePrice(f"line {line_no}: close={close} must be > 0")
        rows.append((ts, close))

    if not rows:
        raise EmptyInput("CSV contains no data rows")
    rows.sort(key=lambda r: r[0])
    timestamps = np.array([r[0] for r in rows], dtype=np.int64)
    if np.any(np.diff(timestamps) == 0):
        dup = int(timestamps[np.nonzero(np.diff(timestamps) == 0)[0][0]])
        raise DuplicateTimestamp(f"duplicate timestamp {dup}")
    closes = np.array([r[1] for r in rows], dtype=np.float64)
    return PriceSeries(ticker, frequency, timestamps, closes)


def series_to_csv(series: PriceSeries, schema: CsvSchema = CsvSchema()) -> str:
    """Inverse of parse_csv for the epoch/strftime formats this package writes."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([schema.timestamp_col, schema.close_col])
    for ts, close in zip(series.timestamps, series.closes):
        if schema.timestamp_format == "epoch":
            stamp = str(int(ts))
        else:
            stamp = datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime(schema.timestamp_format)
        writer.writerow([stamp, repr(float(close))])
    return out.getvalue()


def ema(values, decay: float = 0.5) -> np.ndarray:
    """Exponential moving average y[0]=x[0], y[t] = decay*y[t-1] + (1-decay)*x[t].

    decay in [0, 1); decay=0 returns the input unchanged.
    """
    x = as_float_vector(values, "values")
    decay = float(decay)
    if not 0 <= decay < 1:
        raise BadParams(f"decay must lie in [0, 1), got {decay}")
    y = np.empty_like(x)
    y[0] = x[0]
    for t in range(1, len(x)):
        y[t] = decay * y[t - 1] + (1.0 - decay) * x[t]
    return y


def future_return_label(values, t: int, horizon: int) -> int:
    """1 when the log return from index t to t+horizon is strictly positive, else 0."""
    x = as_float_vector(values, "values")
    t = check_int_at_least(t, 0, "t")
    horizon = check_int_at_least(horizon, 1, "horizon")
    if t + horizon >= len(x):
        raise IndexOutOfRange(f"t+horizon = {t + horizon} outside series of length {len(x)}")
    p_now, p_future = x[t], x[t + horizon]
    if p_now <= 0 or p_future <= 0:
        raise NonPositivePrice("future_return_label needs strictly positive prices")
    return 1 if math.log(p_future / p_now) > 0 else 0


@dataclass(frozen=True)
class SineParams:
    """base * (1 + amplitude * sin(2*pi*i / period)) for i = 0..n_points-1."""

    base: float = 100.0
    amplitude: float = 0.05
    period: float = 60.0
    n_points: int = 300


@dataclass(frozen=True)
class TrendPlusAr1Params:
    """base * exp(trend*i) * exp(u_i) with u an AR(1): u_i = ar_coef*u_{i-1} + noise_scale*eps_i."""

    base: float = 100.0
    trend: float = 0.0
    ar_coef: float = 0.9
    noise_scale: float = 0.01
    n_points: int = 300


@dataclass(frozen=True)
class ZigzagParams:
    """Alternating exact relative moves: p_{k+1} = p_k * (1 + moves[k])."""

    base: float = 100.0
    moves: tuple = field(default=(0.02, -0.02, 0.02))


SYNTHETIC_KINDS = ("sine", "trend_ar1", "zigzag")


def _sine(params: SineParams) -> np.ndarray:
    base = check_positive(params.base, "base")
    amplitude = check_nonnegative(params.amplitude, "amplitude")
    if amplitude >= 1:
        raise BadParams(f"amplitude must be < 1 to keep prices positive, got {amplitude}")
    period = check_positive(params.period, "period")
    n = check_int_at_least(params.n_points, 1, "n_points")
    i = np.arange(n, dtype=np.float64)
    return base * (1.0 + amplitude * np.sin(2.0 * np.pi * i / period))


def _trend_ar1(params: TrendPlusAr1Params, rng: np.random.Generator) -> np.ndarray:
    base = check_positive(params.base, "base")
    rho = check_in_open_interval(params.ar_coef, -1.0, 1.0, "ar_coef")
    sigma = check_nonnegative(params.noise_scale, "noise_scale")
    n = check_int_at_least(params.n_points, 1, "n_points")
    eps = rng.standard_normal(n)
    u = np.empty(n)
    # stationary start so early windows look like late ones
    u[0] = sigma * eps[0] / math.sqrt(1.0 - rho * rho) if sigma > 0 else 0.0
    for i in range(1, n):
        u[i] = rho * u[i - 1] + sigma * eps[i]
    i = np.arange(n, dtype=np.float64)
    return base * np.exp(float(params.trend) * i) * np.exp(u)


def _zigzag(params: ZigzagParams) -> np.ndarray:
    base = check_positive(params.base, "base")
    moves = [float(m) for m in params.moves]
    if any(m <= -1 for m in moves):
        raise BadParams("every zigzag move must be > -1")
    closes = np.empty(len(moves) + 1)
    closes[0] = base
    for k, m in enumerate(moves):
        closes[k + 1] = closes[k] * (1.0 + m)
    return closes


def generate_synthetic(
    kind: str,
    params: SineParams | TrendPlusAr1Params | ZigzagParams | dict | None = None,
    seed: int = 0,
    *,
    ticker: str | None = None,
    frequency: Frequency = Frequency.DAY1,
) -> PriceSeries:
    """Deterministically generate a synthetic PriceSeries of the given kind."""
    if kind not in SYNTHETIC_KINDS:
        raise BadParams(f"unknown synthetic kind {kind!r}, expected one of {SYNTHETIC_KINDS}")
    cls = {"sine": SineParams, "trend_ar1": TrendPlusAr1Params, "zigzag": ZigzagParams}[kind]
    if params is None:
        params = cls()
    elif isinstance(params, dict):
        try:
            params = cls(**{k: (tuple(v) if k == "moves" else v) for k, v in params.items()})
        except TypeError as exc:
            raise BadParams(f"bad parameters for kind {kind!r}: {exc}") from exc
    elif not isinstance(params, cls):
        raise BadParams(f"params of type {type(params).__name__} do not match kind {kind!r}")

    if kind == "sine":
        closes = _sine(params)
    elif kind == "trend_ar1":
        closes = _trend_ar1(params, np.random.default_rng(seed))
    else:
        closes = _zigzag(params)
    timestamps = np.arange(len(closes), dtype=np.int64) * 86400
    return PriceSeries(ticker or f"{kind}-{seed}", frequency, timestamps, closes)


def chronological_split(series: PriceSeries, train_fraction: float = 0.8) -> tuple[PriceSeries, PriceSeries]:
    """Split a series into leading train and trailing test parts, no overlap."""
    frac = check_fraction(train_fraction, "train_fraction", closed_right=False)
    cut = int(len(series) * frac)
    if cut < 1 or cut >= len(series):
        raise SeriesTooShort(f"cannot split a series of length {len(series)} at fraction {frac}")
    return series.slice(0, cut), series.slice(cut, len(series))
