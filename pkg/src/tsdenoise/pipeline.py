"""End-to-end run: ingest, window, train, denoise, classify, backtest, report.

A run writes every artifact under one output directory:

    inputs/       one CSV per ingested series
    windows/      normalized windows per family and split
    models/       trained score models (ve/vp)
    datasets/     classifier samples with one label column per horizon
    predictions/  test-fold predictions per family and horizon
    report.json   everything measured, plus sha256 digests of the artifacts
    timings.json  wall-clock stage times, kept out of report.json so two
                  runs with the same config produce byte-identical reports

Family names: "ori" is the untouched series, "ema" its exponential
smoothing, "ve"/"vp" the score-model denoised versions. Labels for a family
come from that family's own values, so a classifier on denoised windows is
scored against denoised targets. Trades always execute on original prices.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import BacktestReport, run_prediction_backtest, run_signal_backtest
from .config import RunConfig
from .datasets import (
    ClassifierDataset,
    build_dataset,
    concat_datasets,
    evaluate_protocol,
    fit_and_predict,
    save_dataset_file,
)
from .exceptions import ConfigError, EmptyInput, NonPositivePrice, SeriesTooShort
from .metrics import dc_events
from .sampling import denoise_batch
from .sde import SdeKind
from .strategies import BollingerParams, MacdParams, bollinger_signals, macd_signals
from .timeseries import (
    CsvSchema,
    PriceSeries,
    chronological_split,
    ema,
    generate_synthetic,
    parse_csv,
    series_to_csv,
)
from .training import train_dsm
from .windows import (
    Split,
    Window,
    WindowSet,
    rolling_windows,
    save_windows,
    stitch_windows,
    windows_at_origins,
)

DENOISED_FAMILIES = ("ve", "vp")


def _load_series(cfg: RunConfig) -> list[PriceSeries]:
    inp = cfg.input
    if inp.kind == "synthetic":
        series = []
        for i in range(inp.n_series):
            ticker = f"{inp.ticker_prefix}{i:03d}"
            series.append(generate_synthetic(inp.generator, dict(inp.params),
                                             seed=inp.seed + i, ticker=ticker))
        return series
    schema = CsvSchema(timestamp_col=inp.timestamp_col, close_col=inp.close_col,
                       timestamp_format=inp.timestamp_format)
    series = []
    for path in inp.paths:
        text = Path(path).read_text(encoding="utf-8")
        series.append(parse_csv(text, schema, ticker=Path(path).stem))
    return series


def _split_values(series: PriceSeries, cfg: RunConfig):
    """Per-family value arrays for both splits of one series."""
    train_s, test_s = chronological_split(series, cfg.train_fraction)
    boundary = len(train_s)
    smoothed = ema(series.closes, decay=cfg.ema_decay)
    return boundary, {
        "ori": {Split.TRAIN: train_s.closes, Split.TEST: test_s.closes},
        "ema": {Split.TRAIN: smoothed[:boundary], Split.TEST: smoothed[boundary:]},
    }


def _family_windows(values: np.ndarray, ticker: str, split: Split, cfg: RunConfig):
    """Feature windows plus the shifted windows each horizon's labels need."""
    features = rolling_windows(values, cfg.window_length, cfg.window_stride,
                               split=split, ticker=ticker)
    shifted = {}
    for h in cfg.horizons:
        origins = [w.origin_index + h for w in features]
        shifted[h] = windows_at_origins(values, origins, cfg.window_length,
                                        ticker=ticker)
    return features, shifted


def _denoised_copy(structures: dict, model, cfg: RunConfig) -> dict:
    """Build a denoised family from the ori feature windows.

    All feature windows are denoised in one batch, stitched back into one
    series per (split, ticker), and that series is then windowed and
    labeled exactly like any other family. Labels must come from a single
    consistent curve: comparing endpoints of two independently denoised
    windows buries a one-step return under sampling noise.
    """
    keys, rows = [], []
    for split, by_ticker in structures.items():
        for ticker, (features, _) in by_ticker.items():
            for w in features:
                keys.append((split, ticker, w.origin_index))
                rows.append(w.values)
    result = denoise_batch(np.stack(rows), model, cfg=cfg.denoise)
    denoised = {key: result.denoised[i] for i, key in enumerate(keys)}

    out: dict = {}
    for split, by_ticker in structures.items():
        out[split] = {}
        for ticker, (features, _) in by_ticker.items():
            new_windows = [Window(denoised[(split, ticker, w.origin_index)],
                                  w.source_ticker, w.origin_index, w.norm)
                           for w in features]
            _, values = stitch_windows(new_windows)
            out[split][ticker] = _family_windows(values, ticker, split, cfg)
    return out


def _pooled_window_set(structures: dict, split: Split) -> WindowSet:
    pooled, length, stride = [], None, None
    for ticker in sorted(structures[split]):
        features, _ = structures[split][ticker]
        pooled.extend(features.windows)
        length, stride = features.length, features.stride
    return WindowSet(pooled, length, stride, split)


def _family_datasets(structures: dict, family: str, cfg: RunConfig) -> dict:
    """{horizon: {split: ClassifierDataset pooled across tickers}}."""
    out = {}
    for h in cfg.horizons:
        out[h] = {}
        for split in (Split.TRAIN, Split.TEST):
            parts = []
            for ticker in sorted(structures[split]):
                features, shifted = structures[split][ticker]
                parts.append(build_dataset(features, shifted[h], h, provenance=family))
            out[h][split] = concat_datasets(parts)
    return out


def _write_dataset_file(path, structures: dict, split: Split,
                        datasets_by_h: dict, family: str) -> None:
    pooled = _pooled_window_set(structures, split)
    tickers = [w.source_ticker for w in pooled]
    origins = [w.origin_index for w in pooled]
    features = pooled.matrix()
    labels_by_horizon = {}
    for h, by_split in datasets_by_h.items():
        ds: ClassifierDataset = by_split[split]
        labels_by_horizon[h] = {(str(t), int(o)): int(l)
                                for t, o, l in zip(ds.tickers, ds.origins, ds.labels)}
    save_dataset_file(path, tickers, origins, features, labels_by_horizon,
                      provenance=f"{family}/{split.value}")


def _write_predictions(path, test_ds: ClassifierDataset, predictions: np.ndarray,
                       window_length: int, family: str, horizon: int) -> None:
    meta = {"format": "tsdenoise-predictions", "version": 1, "family": family,
            "horizon": horizon, "index": "position of the prediction in its test split"}
    lines = [f"# {json.dumps(meta, sort_keys=True)}", "ticker,index,prediction"]
    for t, o, p in zip(test_ds.tickers, test_ds.origins, predictions):
        lines.append(f"{t},{int(o) + window_length - 1},{int(p)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _pooled_prediction_backtest(test_ds: ClassifierDataset, predictions: np.ndarray,
                                test_prices: dict, horizon: int, mode: str) -> BacktestReport:
    length_offset = test_ds.features.shape[1] - 1
    pooled = BacktestReport(mode=mode)
    for ticker in sorted(set(test_ds.tickers)):
        mask = test_ds.tickers == ticker
        indices = test_ds.origins[mask] + length_offset
        order = np.argsort(indices)
        r = run_prediction_backtest(test_prices[ticker], indices[order],
                                    predictions[mask][order], horizon, mode)
        pooled.trades.extend(r.trades)
    return pooled


def _stitched_test_prices(structures: dict) -> dict:
    """Per ticker, the test-split series rebuilt from that family's windows."""
    out = {}
    for ticker, (features, _) in structures[Split.TEST].items():
        _, values = stitch_windows(features.windows)
        out[ticker] = values
    return out


def _signal_backtests(prices_by_ticker: dict, cfg: RunConfig) -> dict:
    macd_p = MacdParams(cfg.macd_fast, cfg.macd_slow, cfg.macd_signal)
    boll_p = BollingerParams(cfg.bollinger_window, cfg.bollinger_n_std)
    out: dict = {}
    for strategy, make in (("macd", lambda p: macd_signals(p, macd_p)),
                           ("bollinger", lambda p: bollinger_signals(p, boll_p))):
        out[strategy] = {}
        for mode in cfg.signal_modes:
            pooled = BacktestReport(mode=mode)
            for ticker in sorted(prices_by_ticker):
                prices = prices_by_ticker[ticker]
                r = run_signal_backtest(prices, make(prices), mode)
                pooled.trades.extend(r.trades)
            out[strategy][mode] = pooled.to_dict()
    return out


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def pipeline_run(cfg: RunConfig, out_dir=None) -> dict:
    """Run the whole study described by cfg; returns the report dict."""
    timings: dict[str, float] = {}
    t_total = time.perf_counter()
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    for sub in ("inputs", "windows", "models", "datasets", "predictions"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def write_text(rel: str, text: str) -> None:
        path = out / rel
        path.write_text(text, encoding="utf-8")
        written.append(path)

    # ingest
    t0 = time.perf_counter()
    all_series = _load_series(cfg)
    if not all_series:
        raise EmptyInput("no input series")
    tickers = [s.ticker for s in all_series]
    if len(set(tickers)) != len(tickers):
        raise ConfigError(f"duplicate tickers in input: {sorted(tickers)}")
    min_len = cfg.window_length + max(cfg.horizons)
    for s in all_series:
        write_text(f"inputs/{s.ticker}.csv", series_to_csv(s))
    timings["ingest_s"] = time.perf_counter() - t0

    # windows per base family
    t0 = time.perf_counter()
    boundaries = {}
    raw_test_closes = {}
    structures: dict[str, dict] = {"ori": {Split.TRAIN: {}, Split.TEST: {}},
                                   "ema": {Split.TRAIN: {}, Split.TEST: {}}}
    for s in all_series:
        boundary, values_by_family = _split_values(s, cfg)
        boundaries[s.ticker] = boundary
        raw_test_closes[s.ticker] = values_by_family["ori"][Split.TEST]
        # prediction indices are test-split positions, so keep the raw test
        # segment around for replaying prediction backtests from files
        write_text(f"inputs/{s.ticker}_test.csv",
                   series_to_csv(s.slice(boundary, len(s))))
        for fam in ("ori", "ema"):
            for split in (Split.TRAIN, Split.TEST):
                values = values_by_family[fam][split]
                if len(values) < min_len:
                    raise SeriesTooShort(
                        f"{s.ticker} {split.value} split has {len(values)} points; "
                        f"need at least {min_len} for windows plus labels")
                structures[fam][split][s.ticker] = _family_windows(
                    values, s.ticker, split, cfg)
    timings["window_s"] = time.perf_counter() - t0

    # score-model training on original train windows
    t0 = time.perf_counter()
    models = {}
    losses = {}
    needed = [f for f in cfg.families if f in DENOISED_FAMILIES]
    if needed:
        train_matrix = _pooled_window_set(structures["ori"], Split.TRAIN).matrix(
            include_degenerate=False)
        for fam in needed:
            spec = cfg.ve if fam == "ve" else cfg.vp
            if spec.kind != SdeKind(fam):
                raise ConfigError(f"sde.{fam} has kind {spec.kind.value}")
            model, curve = train_dsm(train_matrix, spec, cfg.train)
            models[fam] = model
            losses[fam] = curve
            model_path = out / "models" / f"{fam}.tsdn"
            model.save(model_path)
            written.append(model_path)
    timings["train_s"] = time.perf_counter() - t0

    # denoised families
    t0 = time.perf_counter()
    for fam in needed:
        structures[fam] = _denoised_copy(structures["ori"], models[fam], cfg)
    timings["denoise_s"] = time.perf_counter() - t0

    # datasets and their files
    t0 = time.perf_counter()
    datasets: dict[str, dict] = {}
    for fam in cfg.families:
        datasets[fam] = _family_datasets(structures[fam], fam, cfg)
        for split in (Split.TRAIN, Split.TEST):
            ws = _pooled_window_set(structures[fam], split)
            win_path = out / "windows" / f"{fam}_{split.value}.csv"
            save_windows(win_path, ws, provenance={"family": fam})
            written.append(win_path)
            ds_path = out / "datasets" / f"{fam}_{split.value}.csv"
            _write_dataset_file(ds_path, structures[fam], split, datasets[fam], fam)
            written.append(ds_path)
    timings["datasets_s"] = time.perf_counter() - t0

    # classification protocol
    t0 = time.perf_counter()
    eval_input = {fam: {h: (datasets[fam][h][Split.TRAIN], datasets[fam][h][Split.TEST])
                        for h in cfg.horizons}
                  for fam in cfg.families}
    classification = evaluate_protocol(eval_input, seeds=cfg.classifier_seeds,
                                       model_params=cfg.classifier)
    timings["classify_s"] = time.perf_counter() - t0

    # directional-change counts and backtests
    t0 = time.perf_counter()
    dc_section: dict = {}
    signal_section: dict = {}
    prediction_section: dict = {}
    for fam in cfg.families:
        stitched = _stitched_test_prices(structures[fam])
        per_threshold = {}
        for threshold in cfg.dc_thresholds:
            per_ticker = {t: dc_events(stitched[t], threshold).count
                          for t in sorted(stitched)}
            per_threshold[f"{threshold:g}"] = {
                "total": int(sum(per_ticker.values())),
                "per_ticker": per_ticker,
            }
        dc_section[fam] = per_threshold
        try:
            signal_section[fam] = _signal_backtests(stitched, cfg)
        except NonPositivePrice as exc:
            signal_section[fam] = {"error": str(exc)}

        prediction_section[fam] = {}
        for h in cfg.horizons:
            train_ds = datasets[fam][h][Split.TRAIN]
            test_ds = datasets[fam][h][Split.TEST]
            preds = fit_and_predict(train_ds, test_ds,
                                    seed=0, model_params=cfg.classifier)
            pred_path = out / "predictions" / f"{fam}_h{h}.csv"
            _write_predictions(pred_path, test_ds, preds, cfg.window_length, fam, h)
            written.append(pred_path)
            prediction_section[fam][str(h)] = {
                mode: _pooled_prediction_backtest(test_ds, preds, raw_test_closes,
                                                  h, mode).to_dict()
                for mode in cfg.prediction_modes
            }
    timings["evaluate_s"] = time.perf_counter() - t0

    # report
    config_path = out / "config.json"
    config_path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
    written.append(config_path)
    report = {
        "run": {"package": "tsdenoise", "version": __version__},
        "config": cfg.to_dict(),
        "data": {
            "tickers": tickers,
            "n_points": {s.ticker: len(s) for s in all_series},
            "train_boundary": boundaries,
            "n_windows": {
                split.value: len(_pooled_window_set(structures["ori"], split))
                for split in (Split.TRAIN, Split.TEST)},
        },
        "training": {fam: {"final_loss": curve[-1], "epochs": len(curve)}
                     for fam, curve in losses.items()},
        "classification": classification,
        "dc": dc_section,
        "signal_backtests": signal_section,
        "prediction_backtests": prediction_section,
        "artifacts": {p.relative_to(out).as_posix(): _sha256(p)
                      for p in sorted(written)},
    }
    report_path = out / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
    timings["total_s"] = time.perf_counter() - t_total
    (out / "timings.json").write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    return report
