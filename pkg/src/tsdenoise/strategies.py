"""Rule-based trading signals over a close-price series.

Signals are int8 arrays aligned with the input: +1 buy, -1 sell, 0 hold.
Execution timing (acting one step after a signal) is the backtester's job,
not encoded here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import BadParams
from .timeseries import ema
from .validation import as_float_vector, check_int_at_least

BUY = 1
SELL = -1
HOLD = 0


@dataclass(frozen=True)
class MacdParams:
    fast: int = 12
    slow: int = 26
    signal: int = 9

    def __post_init__(self) -> None:
        check_int_at_least(self.fast, 1, "fast")
        check_int_at_least(self.slow, 2, "slow")
        check_int_at_least(self.signal, 1, "signal")
        if self.fast >= self.slow:
            raise BadParams(f"fast span {self.fast} must be below slow span {self.slow}")


@dataclass(frozen=True)
class BollingerParams:
    window: int = 20
    n_std: float = 2.0

    def __post_init__(self) -> None:
        check_int_at_least(self.window, 2, "window")
        if not (float(self.n_std) > 0):
            raise BadParams(f"n_std must be positive, got {self.n_std}")


def span_ema(values: np.ndarray, span: int) -> np.ndarray:
    """EMA with the usual span smoothing factor 2/(span+1), seeded at x0."""
    check_int_at_least(span, 1, "span")
    return ema(values, decay=1.0 - 2.0 / (span + 1.0))


def macd_lines(prices, params: MacdParams = MacdParams()):
    """Return (macd, signal_line) for a price series."""
    prices = as_float_vector(prices, "prices", min_len=2)
    macd = span_ema(prices, params.fast) - span_ema(prices, params.slow)
    return macd, span_ema(macd, params.signal)


def macd_signals(prices, params: MacdParams = MacdParams()) -> np.ndarray:
    """Buy on the MACD line crossing above its signal line, sell on crossing
    below. The first slow+signal steps are held out as warmup."""
    prices = as_float_vector(prices, "prices", min_len=2)
    macd, sig_line = macd_lines(prices, params)
    out = np.zeros(len(prices), dtype=np.int8)
    start = max(params.slow + params.signal, 1)
    for i in range(start, len(prices)):
        prev = macd[i - 1] - sig_line[i - 1]
        now = macd[i] - sig_line[i]
        if prev <= 0 and now > 0:
            out[i] = BUY
        elif prev >= 0 and now < 0:
            out[i] = SELL
    return out


def bollinger_bands(prices, params: BollingerParams = BollingerParams()):
    """Return (mid, lower, upper); entries before one full window are NaN."""
    prices = as_float_vector(prices, "prices", min_len=params.window)
    w = params.window
    mid = np.full(len(prices), np.nan)
    sd = np.full(len(prices), np.nan)
    for i in range(w - 1, len(prices)):
        chunk = prices[i - w + 1:i + 1]
        mid[i] = chunk.mean()
        sd[i] = chunk.std()
    return mid, mid - params.n_std * sd, mid + params.n_std * sd


def bollinger_signals(prices, params: BollingerParams = BollingerParams()) -> np.ndarray:
    """Mean-reversion re-entry rule.

    Buy when the price comes back above the lower band after closing below
    it, sell when it comes back below the upper band after closing above it.
    Both comparisons are strict so touching a band is not a crossing.
    """
    prices = as_float_vector(prices, "prices", min_len=params.window + 1)
    _, lower, upper = bollinger_bands(prices, params)
    out = np.zeros(len(prices), dtype=np.int8)
    for i in range(params.window, len(prices)):
        if prices[i - 1] < lower[i - 1] and prices[i] > lower[i]:
            out[i] = BUY
        elif prices[i - 1] > upper[i - 1] and prices[i] < upper[i]:
            out[i] = SELL
    return out
