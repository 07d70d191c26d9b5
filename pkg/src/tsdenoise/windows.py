"""Rolling windows with per-window z-score normalization, plus window file I/O."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    BadParams,
    EmptyInput,
    IoError,
    MalformedRow,
    Misalignment,
    SeriesTooShort,
    ShapeMismatch,
    VersionMismatch,
)
from .timeseries import PriceSeries
from .validation import as_float_vector, check_int_at_least

SCALE_FLOOR = 1e-12
WINDOWS_FORMAT = "tsdenoise-windows"
WINDOWS_VERSION = 1


class Split(enum.Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class NormParams:
    """Affine map raw = shift + scale * normalized for one window."""

    shift: float
    scale: float
    degenerate: bool = False

    def __post_init__(self) -> None:
        if not np.isfinite(self.shift) or not np.isfinite(self.scale):
            raise BadParams("NormParams must be finite")
        if self.scale < SCALE_FLOOR:
            raise BadParams(f"scale must be >= {SCALE_FLOOR}, got {self.scale}")


@dataclass(eq=False)
class Window:
    """One normalized window plus the parameters to undo the normalization."""

    values: np.ndarray
    source_ticker: str
    origin_index: int
    norm: NormParams

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ShapeMismatch("window values must be 1-D")
        if self.origin_index < 0:
            raise BadParams(f"origin_index must be >= 0, got {self.origin_index}")

    def denormalized(self) -> np.ndarray:
        return denormalize(self.values, self.norm)


@dataclass(eq=False)
class WindowSet:
    """A homogeneous collection of windows (same length and stride)."""

    windows: list
    length: int
    stride: int
    split: Split | None = None

    def __post_init__(self) -> None:
        self.length = check_int_at_least(self.length, 2, "length")
        self.stride = check_int_at_least(self.stride, 1, "stride")
        for w in self.windows:
            if len(w.values) != self.length:
                raise ShapeMismatch(
                    f"window at origin {w.origin_index} has length {len(w.values)}, expected {self.length}")

    def __len__(self) -> int:
        return len(self.windows)

    def __iter__(self):
        return iter(self.windows)

    def matrix(self, include_degenerate: bool = True) -> np.ndarray:
        """Stack window values into an (n, length) array."""
        rows = [w.values for w in self.windows if include_degenerate or not w.norm.degenerate]
        if not rows:
            raise EmptyInput("no windows to stack")
        return np.stack(rows).astype(np.float64)


def normalize_values(raw) -> tuple[np.ndarray, NormParams]:
    """Z-score one window: shift=mean, scale=stdev (population), floored at 1e-12."""
    x = as_float_vector(raw, "window", min_len=2)
    shift = float(np.mean(x))
    std = float(np.std(x))
    degenerate = std < SCALE_FLOOR
    scale = max(std, SCALE_FLOOR)
    values = np.zeros_like(x) if degenerate else (x - shift) / scale
    return values, NormParams(shift=shift, scale=scale, degenerate=degenerate)


def denormalize(values, norm: NormParams) -> np.ndarray:
    x = as_float_vector(values, "values")
    return norm.shift + norm.scale * x


def rolling_windows(
    series: PriceSeries | np.ndarray,
    length: int = 60,
    stride: int = 20,
    *,
    split: Split | None = None,
    ticker: str | None = None,
) -> WindowSet:
    """Normalized rolling windows at origins 0, stride, 2*stride, ...

    Yields floor((n - length) / stride) + 1 windows; raises SeriesTooShort
    when the series has fewer than `length` points.
    """
    length = check_int_at_least(length, 2, "length")
    stride = check_int_at_least(stride, 1, "stride")
    if isinstance(series, PriceSeries):
        values = series.closes
        ticker = ticker or series.ticker
    else:
        values = as_float_vector(series, "series")
        ticker = ticker or "series"
    n = len(values)
    if n < length:
        raise SeriesTooShort(f"series of length {n} is shorter than window length {length}")
    windows = []
    for origin in range(0, n - length + 1, stride):
        norm_values, norm = normalize_values(values[origin:origin + length])
        windows.append(Window(norm_values, ticker, origin, norm))
    return WindowSet(windows, length, stride, split)


def windows_at_origins(
    series: PriceSeries | np.ndarray,
    origins,
    length: int,
    *,
    ticker: str | None = None,
) -> dict[int, Window]:
    """Normalized windows at explicit origins, keyed by origin.

    Origins that do not fit inside the series are silently skipped; callers
    count what is missing.
    """
    if isinstance(series, PriceSeries):
        values = series.closes
        ticker = ticker or series.ticker
    else:
        values = as_float_vector(series, "series")
        ticker = ticker or "series"
    length = check_int_at_least(length, 2, "length")
    out: dict[int, Window] = {}
    for origin in origins:
        origin = int(origin)
        if origin < 0 or origin + length > len(values):
            continue
        norm_values, norm = normalize_values(values[origin:origin + length])
        out[origin] = Window(norm_values, ticker, origin, norm)
    return out


def stitch_windows(windows) -> tuple[int, np.ndarray]:
    """Rebuild a contiguous denormalized series from stride-spaced windows.

    The first window contributes all of its values; each later window
    contributes its last `stride` values (the segment it newly reveals).
    Returns (start_origin, values).
    """
    ws = sorted(windows, key=lambda w: w.origin_index)
    if not ws:
        raise EmptyInput("no windows to stitch")
    diffs = {b.origin_index - a.origin_index for a, b in zip(ws, ws[1:])}
    if len(ws) == 1:
        return ws[0].origin_index, ws[0].denormalized()
    if len(diffs) != 1:
        raise Misalignment(f"window origins are not evenly spaced: gaps {sorted(diffs)}")
    stride = diffs.pop()
    length = len(ws[0].values)
    if stride <= 0 or stride > length:
        raise Misalignment(f"stride {stride} incompatible with window length {length}")
    pieces = [ws[0].denormalized()]
    for w in ws[1:]:
        pieces.append(w.denormalized()[length - stride:])
    return ws[0].origin_index, np.concatenate(pieces)


def save_windows(path, window_set: WindowSet, provenance: dict | None = None) -> None:
    """Write a WindowSet as CSV with a JSON metadata header line."""
    meta = {
        "format": WINDOWS_FORMAT,
        "version": WINDOWS_VERSION,
        "length": window_set.length,
        "stride": window_set.stride,
    }
    if provenance is not None:
        meta["provenance"] = provenance
    cols = ["ticker", "origin_index", "split", "degenerate", "shift", "scale"]
    cols += [f"v{i}" for i in range(window_set.length)]
    lines = [f"# {json.dumps(meta, sort_keys=True)}", ",".join(cols)]
    split_name = "" if window_set.split is None else window_set.split.value
    for w in window_set.windows:
        row = [w.source_ticker, str(w.origin_index), split_name,
               "1" if w.norm.degenerate else "0", repr(w.norm.shift), repr(w.norm.scale)]
        row += [repr(float(v)) for v in w.values]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_windows(path) -> tuple[WindowSet, dict | None]:
    """Read a windows CSV; returns (WindowSet, provenance or None)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# {"):
        raise IoError(f"{path}: missing windows metadata header")
    try:
        meta = json.loads(lines[0][2:])
    except json.JSONDecodeError as exc:
        raise IoError(f"{path}: bad metadata header: {exc}") from exc
    if meta.get("format") != WINDOWS_FORMAT:
        raise IoError(f"{path}: not a {WINDOWS_FORMAT} file")
    if meta.get("version") != WINDOWS_VERSION:
        raise VersionMismatch(f"{path}: version {meta.get('version')}, expected {WINDOWS_VERSION}")
    length, stride = int(meta["length"]), int(meta["stride"])
    if len(lines) < 2:
        raise IoError(f"{path}: missing column header")
    windows = []
    split_seen: set[str] = set()
    for line_no, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 6 + length:
            raise MalformedRow(line_no, f"expected {6 + length} fields, got {len(parts)}")
        try:
            origin = int(parts[1])
            degenerate = parts[3] == "1"
            shift, scale = float(parts[4]), float(parts[5])
            values = np.array([float(v) for v in parts[6:]], dtype=np.float64)
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from exc
        split_seen.add(parts[2])
        windows.append(Window(values, parts[0], origin,
                              NormParams(shift=shift, scale=scale, degenerate=degenerate)))
    split: Split | None = None
    if split_seen == {"train"}:
        split = Split.TRAIN
    elif split_seen == {"test"}:
        split = Split.TEST
    return WindowSet(windows, length, stride, split), meta.get("provenance")
