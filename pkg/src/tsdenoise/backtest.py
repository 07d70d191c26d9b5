"""Backtests over close prices: rule signals and classifier predictions.

Conventions shared by every runner here:
  - a decision made at index t is executed at index t+1 (one-step delay),
    except prediction trades whose action window is stated explicitly;
  - a position still open at the end of the series is closed at the last
    price;
  - per-trade accounting uses log returns, signed by direction, and a hit
    is a strictly positive signed log return (zero counts as a miss).

Summary statistics: lor sums log returns of long trades only, lsr sums
signed log returns of all trades, n_trades counts completed round trips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import BadParams, Misalignment, NonPositivePrice, ShapeMismatch
from .strategies import BUY, SELL
from .validation import as_float_vector, check_int_at_least

LONG = 1
SHORT = -1


@dataclass(frozen=True)
class Trade:
    entry_index: int
    exit_index: int
    direction: int
    entry_price: float
    exit_price: float

    def __post_init__(self) -> None:
        if self.direction not in (LONG, SHORT):
            raise BadParams(f"direction must be +1 or -1, got {self.direction}")
        if self.exit_index <= self.entry_index:
            raise BadParams("exit must come after entry")
        if self.entry_price <= 0 or self.exit_price <= 0:
            raise NonPositivePrice("trade prices must be positive")

    @property
    def log_return(self) -> float:
        """Signed log return: positive when the position direction was right."""
        return self.direction * math.log(self.exit_price / self.entry_price)


@dataclass
class BacktestReport:
    mode: str
    trades: list = field(default_factory=list)

    @property
    def n_trades(self) -> int:
        return len(self.trades)

    @property
    def lor(self) -> float:
        return float(sum(t.log_return for t in self.trades if t.direction == LONG))

    @property
    def lsr(self) -> float:
        return float(sum(t.log_return for t in self.trades))

    @property
    def long_hit_rate(self) -> float:
        longs = [t for t in self.trades if t.direction == LONG]
        if not longs:
            return 0.0
        return sum(1 for t in longs if t.log_return > 0) / len(longs)

    @property
    def signed_hit_rate(self) -> float:
        if not self.trades:
            return 0.0
        return sum(1 for t in self.trades if t.log_return > 0) / len(self.trades)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n_trades": self.n_trades,
            "lor": self.lor,
            "lsr": self.lsr,
            "long_hit_rate": self.long_hit_rate,
            "signed_hit_rate": self.signed_hit_rate,
        }


def _check_prices(prices) -> np.ndarray:
    prices = as_float_vector(prices, "prices", min_len=2)
    if np.any(prices <= 0):
        raise NonPositivePrice("backtest prices must be positive")
    return prices


def run_signal_backtest(prices, signals, mode: str = "long_only") -> BacktestReport:
    """Execute +1/-1/0 signals against a price series.

    long_only: buy opens a long, sell closes it, shorts never happen.
    long_short: an opposite signal closes the current position and opens the
    reverse one in the same execution step.
    """
    prices = _check_prices(prices)
    signals = np.asarray(signals)
    if signals.shape != prices.shape:
        raise ShapeMismatch(f"signals shape {signals.shape} != prices shape {prices.shape}")
    if mode not in ("long_only", "long_short"):
        raise BadParams(f"unknown mode {mode!r}")

    report = BacktestReport(mode=mode)
    last = len(prices) - 1
    position = 0
    entry_index = -1

    def close(at: int) -> None:
        nonlocal position, entry_index
        report.trades.append(Trade(
            entry_index=entry_index, exit_index=at, direction=position,
            entry_price=float(prices[entry_index]), exit_price=float(prices[at]),
        ))
        position = 0

    for t in range(len(signals)):
        sig = int(signals[t])
        if sig == 0:
            continue
        at = t + 1
        if at > last:
            break
        if sig == BUY:
            if position == SHORT:
                close(at)
            if position == 0 and at < last:
                position = LONG
                entry_index = at
        elif sig == SELL:
            if position == LONG:
                close(at)
            if mode == "long_short" and position == 0 and at < last:
                position = SHORT
                entry_index = at
    if position != 0:
        close(last)
    return report


def run_prediction_backtest(prices, pred_indices, predictions, horizon: int,
                            mode: str = "following") -> BacktestReport:
    """Trade classifier predictions made at pred_indices.

    A prediction at index t claims the sign of the return over [t, t+h].
    Acting on it means holding over the next such interval, [t+h, t+2h]:
    enter at t+h, exit at t+2h. following goes long on an up prediction and
    short on a down one; countering inverts that. Trades never overlap:
    after acting at t, predictions before t+h are skipped, and predictions
    whose action window runs past the series are skipped too.
    """
    prices = _check_prices(prices)
    horizon = check_int_at_least(horizon, 1, "horizon")
    if mode not in ("following", "countering"):
        raise BadParams(f"unknown mode {mode!r}")
    pred_indices = np.asarray(pred_indices, dtype=np.int64)
    predictions = np.asarray(predictions)
    if pred_indices.shape != predictions.shape or pred_indices.ndim != 1:
        raise ShapeMismatch("pred_indices and predictions must be aligned 1-D arrays")
    if len(pred_indices) and np.any(np.diff(pred_indices) <= 0):
        raise Misalignment("pred_indices must be strictly increasing")
    bad = ~np.isin(predictions, (0, 1))
    if np.any(bad):
        raise BadParams(f"predictions must be 0 or 1, got {predictions[bad][:3]}")

    report = BacktestReport(mode=mode)
    next_free = -(1 << 62)
    for t, pred in zip(pred_indices.tolist(), predictions.tolist()):
        if t < next_free:
            continue
        entry, exit_ = t + horizon, t + 2 * horizon
        if exit_ >= len(prices):
            continue
        direction = LONG if pred == 1 else SHORT
        if mode == "countering":
            direction = -direction
        report.trades.append(Trade(
            entry_index=entry, exit_index=exit_, direction=direction,
            entry_price=float(prices[entry]), exit_price=float(prices[exit_]),
        ))
        next_free = t + horizon
    return report
