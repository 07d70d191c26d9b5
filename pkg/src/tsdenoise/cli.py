"""Command-line entry point.

Exit codes: 0 success, 1 expected failure (bad data, bad config, numeric
trouble), 2 usage error (argparse), 3 unexpected internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import run_prediction_backtest, run_signal_backtest
from .config import RunConfig, load_config
from .datasets import load_dataset_file
from .exceptions import BadParams, IoError, MalformedRow, TsdenoiseError
from .metrics import confusion_from_predictions, dc_events, f1_score, mcc, mcc_defined
from .nets import ScoreModel
from .pipeline import pipeline_run
from .sampling import DenoiseConfig, denoise_batch
from .sde import SdeKind, SdeSpec
from .strategies import BollingerParams, MacdParams, bollinger_signals, macd_signals
from .timeseries import (
    SYNTHETIC_KINDS,
    CsvSchema,
    chronological_split,
    ema,
    generate_synthetic,
    parse_csv,
)
from .training import TrainConfig, train_dsm
from .boosting import BoostedTreesClassifier
from .windows import Split, Window, WindowSet, load_windows, rolling_windows, save_windows

log = logging.getLogger("tsdenoise")


def _add_schema_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--timestamp-col", default="date")
    p.add_argument("--close-col", default="close")
    p.add_argument("--timestamp-format", default="%Y-%m-%d",
                   help="strptime format, or 'epoch' for integer seconds")


def _schema(args) -> CsvSchema:
    return CsvSchema(timestamp_col=args.timestamp_col, close_col=args.close_col,
                     timestamp_format=args.timestamp_format)


def _read_series(path: str, args):
    text = Path(path).read_text(encoding="utf-8")
    return parse_csv(text, _schema(args), ticker=Path(path).stem)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
        print(out)
    else:
        print(text)


def cmd_ingest(args) -> int:
    series = []
    if args.synthetic:
        params = json.loads(args.params) if args.params else {}
        for i in range(args.n_series):
            series.append(generate_synthetic(
                args.synthetic, dict(params), seed=args.seed + i,
                ticker=f"{args.ticker_prefix}{i:03d}"))
    else:
        if not args.input:
            raise BadParams("ingest needs --input files or --synthetic KIND")
        series = [_read_series(p, args) for p in args.input]

    by_split: dict[Split, list[Window]] = {Split.TRAIN: [], Split.TEST: []}
    for s in series:
        train_s, test_s = chronological_split(s, args.train_fraction)
        for split, part in ((Split.TRAIN, train_s), (Split.TEST, test_s)):
            values = part.closes
            if args.smooth_ema is not None:
                smoothed = ema(s.closes, decay=args.smooth_ema)
                cut = len(train_s)
                values = smoothed[:cut] if split is Split.TRAIN else smoothed[cut:]
            ws = rolling_windows(values, args.length, args.stride,
                                 split=split, ticker=s.ticker)
            by_split[split].extend(ws.windows)
    for split in (Split.TRAIN, Split.TEST):
        ws = WindowSet(by_split[split], args.length, args.stride, split)
        path = f"{args.out}_{split.value}.csv"
        save_windows(path, ws, provenance={"source": "ingest"})
        print(f"{path}: {len(ws)} windows")
    return 0


def cmd_train(args) -> int:
    ws, _ = load_windows(args.windows)
    spec = SdeSpec(kind=SdeKind(args.kind), n_steps=args.n_steps,
                   sigma_min=args.sigma_min, sigma_max=args.sigma_max,
                   beta_min=args.beta_min, beta_max=args.beta_max)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                      learning_rate=args.learning_rate, p_uncond=args.p_uncond,
                      seed=args.seed, hidden=args.hidden, depth=args.depth,
                      embed_dim=args.embed_dim)
    model, losses = train_dsm(ws, spec, cfg)
    model.save(args.out)
    print(f"{args.out}: trained {args.kind} model, "
          f"loss {losses[0]:.6f} -> {losses[-1]:.6f} over {len(losses)} epochs")
    return 0


def cmd_denoise(args) -> int:
    model = ScoreModel.load(args.model)
    ws, provenance = load_windows(args.windows)
    cfg = DenoiseConfig(t_prime=args.t_prime, n_seeds=args.seeds,
                        base_seed=args.base_seed,
                        corrector_steps=args.corrector_steps, snr=args.snr,
                        omega=args.omega, eta_tv=args.eta_tv, eta_f=args.eta_f,
                        fourier_threshold=args.fourier_threshold)
    result = denoise_batch(ws.matrix(), model, cfg=cfg)
    denoised = [Window(row, w.source_ticker, w.origin_index, w.norm)
                for row, w in zip(result.denoised, ws.windows)]
    out_ws = WindowSet(denoised, ws.length, ws.stride, ws.split)
    meta = {"denoised_with": Path(args.model).name, "config": cfg.to_dict()}
    if isinstance(provenance, dict):
        meta = {**provenance, **meta}
    save_windows(args.out, out_ws, provenance=meta)
    print(f"{args.out}: {len(out_ws)} windows denoised")
    return 0


def cmd_classify(args) -> int:
    train_file = load_dataset_file(args.train)
    test_file = load_dataset_file(args.test)
    train_ds = train_file.for_horizon(args.horizon)
    test_ds = test_file.for_horizon(args.horizon)
    f1s, mccs, defined = [], [], True
    for seed in range(args.seeds):
        clf = BoostedTreesClassifier(
            n_rounds=args.n_rounds, max_depth=args.max_depth,
            learning_rate=args.learning_rate, subsample=args.subsample,
            random_state=seed)
        clf.fit(train_ds.features, train_ds.labels)
        cm = confusion_from_predictions(test_ds.labels, clf.predict(test_ds.features))
        f1s.append(f1_score(cm))
        mccs.append(mcc(cm))
        defined = defined and mcc_defined(cm)
    _emit({"horizon": args.horizon, "n_train": len(train_ds), "n_test": len(test_ds),
           "f1_per_seed": f1s, "f1_mean": float(np.mean(f1s)),
           "mcc_per_seed": mccs, "mcc_mean": float(np.mean(mccs)),
           "mcc_defined_all": defined}, args.out)
    return 0


def cmd_dc_events(args) -> int:
    series = _read_series(args.input, args)
    payload = {"ticker": series.ticker, "n_points": len(series), "thresholds": {}}
    for threshold in args.threshold:
        report = dc_events(series.closes, threshold)
        payload["thresholds"][f"{threshold:g}"] = {
            "count": report.count,
            "confirmation_indices": list(report.indices),
        }
    _emit(payload, args.out)
    return 0


def cmd_backtest(args) -> int:
    series = _read_series(args.input, args)
    if args.strategy == "macd":
        signals = macd_signals(series.closes, MacdParams(args.fast, args.slow, args.signal))
    else:
        signals = bollinger_signals(series.closes,
                                    BollingerParams(args.window, args.n_std))
    report = run_signal_backtest(series.closes, signals, args.mode)
    payload = report.to_dict()
    payload.update({"ticker": series.ticker, "strategy": args.strategy})
    _emit(payload, args.out)
    return 0


def cmd_backtest_pred(args) -> int:
    series = _read_series(args.input, args)
    lines = Path(args.predictions).read_text(encoding="utf-8").splitlines()
    rows = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    if not rows or rows[0] != "ticker,index,prediction":
        raise IoError(f"{args.predictions}: expected a ticker,index,prediction table")
    pairs = []
    for line_no, line in enumerate(rows[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise MalformedRow(line_no, "expected 3 fields")
        ticker, index, pred = parts
        if args.ticker is not None and ticker != args.ticker:
            continue
        pairs.append((int(index), int(pred)))
    if not pairs:
        what = f"no rows for ticker {args.ticker}" if args.ticker else "no prediction rows"
        raise IoError(f"{args.predictions}: {what}")
    pairs.sort()
    indices = np.array([p[0] for p in pairs])
    preds = np.array([p[1] for p in pairs])
    report = run_prediction_backtest(series.closes, indices, preds,
                                     args.horizon, args.mode)
    payload = report.to_dict()
    payload.update({"ticker": series.ticker, "horizon": args.horizon})
    _emit(payload, args.out)
    return 0


def cmd_report(args) -> int:
    cfg = load_config(args.config)
    report = pipeline_run(cfg, out_dir=args.out)
    out = Path(args.out if args.out is not None else cfg.output_dir)
    print(out / "report.json")
    for fam, by_h in sorted(report["classification"].items()):
        for h, stats in sorted(by_h.items()):
            print(f"{fam} h={h}: f1={stats['f1_mean']:.4f} mcc={stats['mcc_mean']:.4f}")
    return 0


SELFTEST_CONFIG = {
    "input": {"kind": "synthetic", "generator": "trend_ar1",
              "params": {"n_points": 500}, "n_series": 2, "seed": 7},
    "sde": {"ve": {"n_steps": 50}, "vp": {"n_steps": 50}},
    "train": {"epochs": 2, "batch_size": 64},
    "denoise": {"n_seeds": 1, "t_prime": 0.4},
    "classify": {"n_rounds": 10, "seeds": 2},
    "families": ["ori", "ema", "ve"],
    "horizons": [1, 5],
}


def cmd_selftest(args) -> int:
    with tempfile.TemporaryDirectory(prefix="tsdenoise-selftest-") as tmp:
        cfg = RunConfig.from_dict(SELFTEST_CONFIG)
        report = pipeline_run(cfg, out_dir=tmp)
        missing = [k for k in ("classification", "dc", "signal_backtests",
                               "prediction_backtests", "artifacts") if k not in report]
        if missing:
            print(f"selftest failed: report lacks {missing}", file=sys.stderr)
            return 1
        if not (Path(tmp) / "report.json").exists():
            print("selftest failed: report.json was not written", file=sys.stderr)
            return 1
    print("selftest ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsdenoise",
        description="Denoise 1-D price series with a trained score model and "
                    "evaluate the result with classifiers and backtests.")
    parser.add_argument("--version", action="version", version=f"tsdenoise {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="turn price CSVs or synthetic series into window files")
    p.add_argument("--input", nargs="*", default=[], help="price CSV paths")
    p.add_argument("--synthetic", choices=SYNTHETIC_KINDS)
    p.add_argument("--params", help="JSON parameters for the synthetic generator")
    p.add_argument("--n-series", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ticker-prefix", default="SYN")
    p.add_argument("--length", type=int, default=60)
    p.add_argument("--stride", type=int, default=20)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--smooth-ema", type=float, default=None,
                   help="smooth the full series with this decay before windowing")
    p.add_argument("--out", required=True, help="output prefix for _train/_test window files")
    _add_schema_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="fit a score model on a window file")
    p.add_argument("--windows", required=True)
    p.add_argument("--kind", choices=("ve", "vp"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-steps", type=int, default=1000)
    p.add_argument("--sigma-min", type=float, default=0.01)
    p.add_argument("--sigma-max", type=float, default=1.0)
    p.add_argument("--beta-min", type=float, default=0.1)
    p.add_argument("--beta-max", type=float, default=20.0)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--p-uncond", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--embed-dim", type=int, default=32)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("denoise", help="denoise a window file with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--windows", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--t-prime", type=float, default=0.4)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--corrector-steps", type=int, default=1)
    p.add_argument("--snr", type=float, default=0.16)
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--eta-tv", type=float, default=0.1)
    p.add_argument("--eta-f", type=float, default=0.1)
    p.add_argument("--fourier-threshold", type=float, default=0.1)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("classify", help="train/test future-return classifiers on dataset files")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--n-rounds", type=int, default=200)
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--subsample", type=float, default=0.8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("dc-events", help="count directional-change events in a price CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--threshold", type=float, action="append", required=True,
                   help="relative move that confirms a direction change (repeatable)")
    p.add_argument("--out")
    _add_schema_flags(p)
    p.set_defaults(func=cmd_dc_events)

    p = sub.add_parser("backtest", help="run a rule-based strategy on a price CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--strategy", choices=("macd", "bollinger"), required=True)
    p.add_argument("--mode", choices=("long_only", "long_short"), default="long_only")
    p.add_argument("--fast", type=int, default=12)
    p.add_argument("--slow", type=int, default=26)
    p.add_argument("--signal", type=int, default=9)
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--n-std", type=float, default=2.0)
    p.add_argument("--out")
    _add_schema_flags(p)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("backtest-pred", help="trade saved predictions against a price CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--mode", choices=("following", "countering"), default="following")
    p.add_argument("--ticker", help="keep only this ticker's rows from the predictions file")
    p.add_argument("--out")
    _add_schema_flags(p)
    p.set_defaults(func=cmd_backtest_pred)

    p = sub.add_parser("report", help="run the full pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (defaults to the config's output_dir)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selftest", help="run a small end-to-end check in a temp directory")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TsdenoiseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
