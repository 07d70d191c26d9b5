"""Run configuration: strict JSON in, the same JSON back out.

Every section is optional and falls back to defaults, but unknown keys are
rejected rather than ignored so a typoed option cannot silently run with
the default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .exceptions import ConfigError
from .sampling import DenoiseConfig
from .sde import SdeKind, SdeSpec
from .timeseries import SYNTHETIC_KINDS
from .training import TrainConfig

FAMILIES = ("ori", "ema", "ve", "vp")


def _take(section: str, data: dict, allowed) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected an object, got {type(data).__name__}")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")


def _num(section: str, data: dict, key: str, default, cls=float):
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number, got {value!r}")
    return cls(value)


def _str(section: str, data: dict, key: str, default: str) -> str:
    value = data.get(key, default)
    if not isinstance(value, str):
        raise ConfigError(f"{section}.{key}: expected a string, got {value!r}")
    return value


@dataclass
class InputConfig:
    kind: str = "synthetic"
    generator: str = "trend_ar1"
    params: dict = field(default_factory=dict)
    n_series: int = 8
    seed: int = 0
    ticker_prefix: str = "SYN"
    paths: list = field(default_factory=list)
    timestamp_col: str = "date"
    close_col: str = "close"
    timestamp_format: str = "%Y-%m-%d"

    @classmethod
    def from_dict(cls, data: dict) -> "InputConfig":
        _take("input", data, ("kind", "generator", "params", "n_series", "seed",
                              "ticker_prefix", "paths", "timestamp_col",
                              "close_col", "timestamp_format"))
        kind = _str("input", data, "kind", "synthetic")
        if kind not in ("synthetic", "csv"):
            raise ConfigError(f"input.kind must be 'synthetic' or 'csv', got {kind!r}")
        generator = _str("input", data, "generator", "trend_ar1")
        if generator not in SYNTHETIC_KINDS:
            raise ConfigError(f"input.generator must be one of {SYNTHETIC_KINDS}, got {generator!r}")
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("input.params: expected an object")
        paths = data.get("paths", [])
        if not isinstance(paths, list) or any(not isinstance(p, str) for p in paths):
            raise ConfigError("input.paths: expected a list of strings")
        if kind == "csv" and not paths:
            raise ConfigError("input.kind is 'csv' but input.paths is empty")
        n_series = int(_num("input", data, "n_series", 8, int))
        if n_series < 1:
            raise ConfigError(f"input.n_series must be positive, got {n_series}")
        return cls(
            kind=kind, generator=generator, params=dict(params),
            n_series=n_series,
            seed=int(_num("input", data, "seed", 0, int)),
            ticker_prefix=_str("input", data, "ticker_prefix", "SYN"),
            paths=list(paths),
            timestamp_col=_str("input", data, "timestamp_col", "date"),
            close_col=_str("input", data, "close_col", "close"),
            timestamp_format=_str("input", data, "timestamp_format", "%Y-%m-%d"),
        )

    def to_dict(self) -> dict:
        return {"kind": self.kind, "generator": self.generator,
                "params": dict(self.params), "n_series": self.n_series,
                "seed": self.seed, "ticker_prefix": self.ticker_prefix,
                "paths": list(self.paths), "timestamp_col": self.timestamp_col,
                "close_col": self.close_col,
                "timestamp_format": self.timestamp_format}


@dataclass
class RunConfig:
    input: InputConfig = field(default_factory=InputConfig)
    window_length: int = 60
    window_stride: int = 20
    train_fraction: float = 0.8
    ema_decay: float = 0.5
    ve: SdeSpec = field(default_factory=lambda: SdeSpec(kind=SdeKind.VE))
    vp: SdeSpec = field(default_factory=lambda: SdeSpec(kind=SdeKind.VP))
    train: TrainConfig = field(default_factory=TrainConfig)
    denoise: DenoiseConfig = field(default_factory=DenoiseConfig)
    classifier: dict = field(default_factory=lambda: {
        "n_rounds": 200, "max_depth": 3, "learning_rate": 0.1,
        "reg_lambda": 1.0, "min_child_weight": 1e-3, "subsample": 0.8,
        "max_bins": 64})
    classifier_seeds: int = 5
    dc_thresholds: list = field(default_factory=lambda: [0.005, 0.01, 0.02])
    signal_modes: list = field(default_factory=lambda: ["long_only", "long_short"])
    prediction_modes: list = field(default_factory=lambda: ["following", "countering"])
    macd_fast: int = 12
    macd_slow: int = 26
    macd_signal: int = 9
    bollinger_window: int = 20
    bollinger_n_std: float = 2.0
    families: list = field(default_factory=lambda: list(FAMILIES))
    horizons: list = field(default_factory=lambda: [1, 5, 10])
    output_dir: str = "runs/out"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        _take("config", data, ("input", "windows", "ema", "sde", "train",
                               "denoise", "classify", "dc", "backtest",
                               "families", "horizons", "output_dir"))
        cfg = cls()
        if "input" in data:
            cfg.input = InputConfig.from_dict(data["input"])

        win = data.get("windows", {})
        _take("windows", win, ("length", "stride", "train_fraction"))
        cfg.window_length = int(_num("windows", win, "length", cfg.window_length, int))
        cfg.window_stride = int(_num("windows", win, "stride", cfg.window_stride, int))
        cfg.train_fraction = _num("windows", win, "train_fraction", cfg.train_fraction)
        if cfg.window_length < 2 or cfg.window_stride < 1:
            raise ConfigError("windows: length must be >= 2 and stride >= 1")
        if not 0.0 < cfg.train_fraction < 1.0:
            raise ConfigError(f"windows.train_fraction must be in (0, 1), got {cfg.train_fraction}")

        ema_sec = data.get("ema", {})
        _take("ema", ema_sec, ("decay",))
        cfg.ema_decay = _num("ema", ema_sec, "decay", cfg.ema_decay)
        if not 0.0 <= cfg.ema_decay < 1.0:
            raise ConfigError(f"ema.decay must be in [0, 1), got {cfg.ema_decay}")

        sde_sec = data.get("sde", {})
        _take("sde", sde_sec, ("ve", "vp"))
        for name in ("ve", "vp"):
            sub = sde_sec.get(name, {})
            _take(f"sde.{name}", sub, ("n_steps", "sigma_min", "sigma_max",
                                       "beta_min", "beta_max"))
            base = getattr(cfg, name)
            try:
                setattr(cfg, name, SdeSpec.from_dict({**base.to_dict(), **sub}))
            except Exception as exc:
                raise ConfigError(f"sde.{name}: {exc}") from exc

        for name, ctor in (("train", TrainConfig), ("denoise", DenoiseConfig)):
            sub = data.get(name, {})
            base = getattr(cfg, name)
            _take(name, sub, base.to_dict().keys())
            try:
                setattr(cfg, name, ctor(**{**base.to_dict(), **sub}))
            except Exception as exc:
                raise ConfigError(f"{name}: {exc}") from exc

        clf = data.get("classify", {})
        _take("classify", clf, tuple(cfg.classifier) + ("seeds",))
        for key in cfg.classifier:
            as_int = key in ("n_rounds", "max_depth", "max_bins")
            cfg.classifier[key] = _num("classify", clf, key, cfg.classifier[key],
                                       int if as_int else float)
        cfg.classifier_seeds = int(_num("classify", clf, "seeds", cfg.classifier_seeds, int))

        dc = data.get("dc", {})
        _take("dc", dc, ("thresholds",))
        if "thresholds" in dc:
            ths = dc["thresholds"]
            if (not isinstance(ths, list) or not ths
                    or any(isinstance(t, bool) or not isinstance(t, (int, float)) for t in ths)):
                raise ConfigError("dc.thresholds: expected a non-empty list of numbers")
            if any(not 0.0 < t < 1.0 for t in ths):
                raise ConfigError("dc.thresholds: each threshold must be in (0, 1)")
            cfg.dc_thresholds = [float(t) for t in ths]

        bt = data.get("backtest", {})
        _take("backtest", bt, ("signal_modes", "prediction_modes", "macd_fast",
                               "macd_slow", "macd_signal", "bollinger_window",
                               "bollinger_n_std"))
        for key, allowed in (("signal_modes", ("long_only", "long_short")),
                             ("prediction_modes", ("following", "countering"))):
            if key in bt:
                modes = bt[key]
                if not isinstance(modes, list) or any(m not in allowed for m in modes):
                    raise ConfigError(f"backtest.{key}: entries must be among {allowed}")
                setattr(cfg, key, list(modes))
        cfg.macd_fast = int(_num("backtest", bt, "macd_fast", cfg.macd_fast, int))
        cfg.macd_slow = int(_num("backtest", bt, "macd_slow", cfg.macd_slow, int))
        cfg.macd_signal = int(_num("backtest", bt, "macd_signal", cfg.macd_signal, int))
        cfg.bollinger_window = int(_num("backtest", bt, "bollinger_window",
                                        cfg.bollinger_window, int))
        cfg.bollinger_n_std = _num("backtest", bt, "bollinger_n_std", cfg.bollinger_n_std)

        if "families" in data:
            fams = data["families"]
            if (not isinstance(fams, list) or not fams
                    or any(f not in FAMILIES for f in fams)):
                raise ConfigError(f"families: entries must be among {FAMILIES}")
            if len(set(fams)) != len(fams):
                raise ConfigError("families: duplicates are not allowed")
            cfg.families = list(fams)
        if "horizons" in data:
            hs = data["horizons"]
            if (not isinstance(hs, list) or not hs
                    or any(isinstance(h, bool) or not isinstance(h, int) or h < 1 for h in hs)):
                raise ConfigError("horizons: expected a non-empty list of positive integers")
            if len(set(hs)) != len(hs):
                raise ConfigError("horizons: duplicates are not allowed")
            cfg.horizons = list(hs)
        if "output_dir" in data:
            cfg.output_dir = _str("config", data, "output_dir", cfg.output_dir)
        return cfg

    def to_dict(self) -> dict:
        return {
            "input": self.input.to_dict(),
            "windows": {"length": self.window_length, "stride": self.window_stride,
                        "train_fraction": self.train_fraction},
            "ema": {"decay": self.ema_decay},
            "sde": {"ve": {k: v for k, v in self.ve.to_dict().items() if k != "kind"},
                    "vp": {k: v for k, v in self.vp.to_dict().items() if k != "kind"}},
            "train": self.train.to_dict(),
            "denoise": self.denoise.to_dict(),
            "classify": {**self.classifier, "seeds": self.classifier_seeds},
            "dc": {"thresholds": list(self.dc_thresholds)},
            "backtest": {"signal_modes": list(self.signal_modes),
                         "prediction_modes": list(self.prediction_modes),
                         "macd_fast": self.macd_fast, "macd_slow": self.macd_slow,
                         "macd_signal": self.macd_signal,
                         "bollinger_window": self.bollinger_window,
                         "bollinger_n_std": self.bollinger_n_std},
            "families": list(self.families),
            "horizons": list(self.horizons),
            "output_dir": self.output_dir,
        }


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return RunConfig.from_dict(data)


def save_config(path, cfg: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
