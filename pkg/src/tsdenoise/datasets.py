"""Classification datasets: window features, future-return labels, protocol runs.

A sample's features are one processed window's values; its label is the sign
of the future return read from the same processed family, using the window
at origin+horizon to supply the continuation (for denoised families that
window is itself a denoised window, so labels stay family-consistent).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .boosting import BoostedTreesClassifier
from .exceptions import (
    BadParams,
    EmptyInput,
    IoError,
    MalformedRow,
    Misalignment,
    ShapeMismatch,
    UndefinedMetric,
    VersionMismatch,
)
from .metrics import confusion_from_predictions, f1_score, mcc, mcc_defined
from .timeseries import future_return_label
from .validation import check_int_at_least
from .windows import Window

DATASET_FORMAT = "tsdenoise-dataset"
DATASET_VERSION = 1

DEFAULT_PROTOCOL_MODEL = {
    "n_rounds": 200,
    "max_depth": 3,
    "learning_rate": 0.1,
    "subsample": 0.8,
}


@dataclass(eq=False)
class ClassifierDataset:
    """Feature matrix plus binary future-return labels for one horizon."""

    features: np.ndarray
    labels: np.ndarray
    horizon: int
    provenance: str = "unknown"
    origins: np.ndarray = field(default=None)
    tickers: np.ndarray = field(default=None)
    n_dropped: int = 0

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if self.features.ndim != 2 or len(self.labels) != self.features.shape[0]:
            raise ShapeMismatch("features must be (n, L) with one label per row")
        check_int_at_least(self.horizon, 1, "horizon")
        if self.origins is None:
            self.origins = np.full(len(self.labels), -1, dtype=np.int64)
        else:
            self.origins = np.asarray(self.origins, dtype=np.int64)
        if self.tickers is None:
            self.tickers = np.array([""] * len(self.labels), dtype=object)
        else:
            self.tickers = np.asarray(self.tickers, dtype=object)
        if len(self.origins) != len(self.labels) or len(self.tickers) != len(self.labels):
            raise ShapeMismatch("origins and tickers must align with labels")

    def __len__(self) -> int:
        return len(self.labels)


def build_dataset(
    windows,
    shifted,
    horizon: int,
    provenance: str = "unknown",
) -> ClassifierDataset:
    """Assemble samples from feature windows and their horizon-shifted partners.

    windows: feature windows from one series. shifted: mapping
    origin -> Window at that origin (must contain origin+horizon for a
    feature window to be labeled; others are dropped and counted). The label
    joins the denormalized feature window with the tail of the denormalized
    shifted window and applies the future-return rule at the window's last
    index. Rows with non-positive labeling prices are dropped and counted.
    """
    horizon = check_int_at_least(horizon, 1, "horizon")
    windows = list(windows)
    if not windows:
        raise EmptyInput("no feature windows")
    tickers = {w.source_ticker for w in windows}
    if len(tickers) > 1:
        raise Misalignment(f"build_dataset expects one series at a time, got {sorted(tickers)}")
    length = len(windows[0].values)
    if horizon > length:
        raise BadParams(f"horizon {horizon} exceeds window length {length}")

    feats, labels, origins = [], [], []
    n_dropped = 0
    for w in windows:
        partner = shifted.get(w.origin_index + horizon)
        if partner is None or len(partner.values) != length:
            n_dropped += 1
            continue
        base = w.denormalized()
        continuation = partner.denormalized()[length - horizon:]
        series = np.concatenate([base, continuation])
        if np.any(series[[length - 1, length - 1 + horizon]] <= 0):
            n_dropped += 1
            continue
        labels.append(future_return_label(series, length - 1, horizon))
        feats.append(w.values)
        origins.append(w.origin_index)
    if not feats:
        raise EmptyInput(f"every window was dropped (horizon {horizon})")
    ticker = tickers.pop()
    return ClassifierDataset(
        features=np.stack(feats),
        labels=np.array(labels, dtype=np.int8),
        horizon=horizon,
        provenance=provenance,
        origins=np.array(origins, dtype=np.int64),
        tickers=np.array([ticker] * len(labels), dtype=object),
        n_dropped=n_dropped,
    )


def concat_datasets(parts) -> ClassifierDataset:
    parts = list(parts)
    if not parts:
        raise EmptyInput("no datasets to concatenate")
    horizon = parts[0].horizon
    provenance = parts[0].provenance
    if any(p.horizon != horizon or p.provenance != provenance for p in parts):
        raise Misalignment("datasets disagree on horizon or provenance")
    return ClassifierDataset(
        features=np.vstack([p.features for p in parts]),
        labels=np.concatenate([p.labels for p in parts]),
        horizon=horizon,
        provenance=provenance,
        origins=np.concatenate([p.origins for p in parts]),
        tickers=np.concatenate([p.tickers for p in parts]),
        n_dropped=sum(p.n_dropped for p in parts),
    )


def fit_and_predict(train: ClassifierDataset, test: ClassifierDataset, seed: int,
                    model_params: dict | None = None) -> np.ndarray:
    """Train one classifier and return its test predictions."""
    params = dict(DEFAULT_PROTOCOL_MODEL if model_params is None else model_params)
    clf = BoostedTreesClassifier(random_state=seed, **params)
    clf.fit(train.features, train.labels)
    return clf.predict(test.features)


def evaluate_protocol(datasets, seeds=5, model_params: dict | None = None) -> dict:
    """Mean F1 and MCC over several classifier seeds per (family, horizon).

    datasets: {family: {horizon: (train, test)}}. seeds may be a count or an
    explicit list. A test fold with no positive class anywhere scores F1=0
    by convention (flagged); the MCC zero-denominator convention is flagged
    via "mcc_defined_all".
    """
    seed_list = list(range(seeds)) if isinstance(seeds, int) else [int(s) for s in seeds]
    if not seed_list:
        raise EmptyInput("no seeds")
    out: dict = {}
    for family, by_horizon in datasets.items():
        out[family] = {}
        for horizon, (train, test) in by_horizon.items():
            if train.horizon != horizon or test.horizon != horizon:
                raise Misalignment(f"{family}: dataset horizon does not match key {horizon}")
            if len(test) == 0 or len(train) == 0:
                raise EmptyInput(f"{family} horizon {horizon}: empty split")
            f1s, mccs, defined, degenerate_f1 = [], [], True, False
            for seed in seed_list:
                pred = fit_and_predict(train, test, seed, model_params)
                cm = confusion_from_predictions(test.labels, pred)
                try:
                    f1s.append(f1_score(cm))
                except UndefinedMetric:
                    f1s.append(0.0)
                    degenerate_f1 = True
                mccs.append(mcc(cm))
                defined = defined and mcc_defined(cm)
            out[family][horizon] = {
                "f1_per_seed": f1s,
                "mcc_per_seed": mccs,
                "f1_mean": float(np.mean(f1s)),
                "mcc_mean": float(np.mean(mccs)),
                "mcc_defined_all": bool(defined),
                "f1_degenerate": bool(degenerate_f1),
                "n_train": len(train),
                "n_test": len(test),
                "seeds": seed_list,
            }
    return out


def save_dataset_file(path, tickers, origins, features, labels_by_horizon: dict,
                      provenance: str) -> None:
    """Write one family/split's samples with one label column per horizon.

    labels_by_horizon maps horizon -> {(ticker, origin): 0/1}; rows missing a
    horizon's label get a blank cell there.
    """
    features = np.asarray(features, dtype=np.float64)
    n, length = features.shape
    horizons = sorted(labels_by_horizon)
    meta = {"format": DATASET_FORMAT, "version": DATASET_VERSION,
            "provenance": provenance, "horizons": horizons, "length": length}
    cols = ["ticker", "origin"] + [f"label_h{h}" for h in horizons] + [f"f{i}" for i in range(length)]
    lines = [f"# {json.dumps(meta, sort_keys=True)}", ",".join(cols)]
    for r in range(n):
        key = (str(tickers[r]), int(origins[r]))
        row = [key[0], str(key[1])]
        for h in horizons:
            label = labels_by_horizon[h].get(key)
            row.append("" if label is None else str(int(label)))
        row += [repr(float(v)) for v in features[r]]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass(eq=False)
class DatasetFile:
    tickers: np.ndarray
    origins: np.ndarray
    features: np.ndarray
    labels: dict
    provenance: str

    def for_horizon(self, horizon: int) -> ClassifierDataset:
        if horizon not in self.labels:
            raise BadParams(f"file has no labels for horizon {horizon}, "
                            f"available: {sorted(self.labels)}")
        col = self.labels[horizon]
        keep = ~np.isnan(col)
        if not np.any(keep):
            raise EmptyInput(f"no labeled rows for horizon {horizon}")
        return ClassifierDataset(
            features=self.features[keep],
            labels=col[keep].astype(np.int8),
            horizon=horizon,
            provenance=self.provenance,
            origins=self.origins[keep],
            tickers=self.tickers[keep],
            n_dropped=int(np.sum(~keep)),
        )


def load_dataset_file(path) -> DatasetFile:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("# {"):
        raise IoError(f"{path}: missing dataset metadata header")
    try:
        meta = json.loads(lines[0][2:])
    except json.JSONDecodeError as exc:
        raise IoError(f"{path}: bad metadata header: {exc}") from exc
    if meta.get("format") != DATASET_FORMAT:
        raise IoError(f"{path}: not a {DATASET_FORMAT} file")
    if meta.get("version") != DATASET_VERSION:
        raise VersionMismatch(f"{path}: version {meta.get('version')}, expected {DATASET_VERSION}")
    horizons = [int(h) for h in meta["horizons"]]
    length = int(meta["length"])
    n_label = len(horizons)
    tickers, origins, feats = [], [], []
    label_cols: dict[int, list] = {h: [] for h in horizons}
    for line_no, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2 + n_label + length:
            raise MalformedRow(line_no, f"expected {2 + n_label + length} fields, got {len(parts)}")
        tickers.append(parts[0])
        try:
            origins.append(int(parts[1]))
            for h, cell in zip(horizons, parts[2:2 + n_label]):
                label_cols[h].append(np.nan if cell == "" else float(cell))
            feats.append([float(v) for v in parts[2 + n_label:]])
        except ValueError as exc:
            raise MalformedRow(line_no, str(exc)) from exc
    if not feats:
        raise EmptyInput(f"{path}: no data rows")
    return DatasetFile(
        tickers=np.array(tickers, dtype=object),
        origins=np.array(origins, dtype=np.int64),
        features=np.array(feats, dtype=np.float64),
        labels={h: np.array(v) for h, v in label_cols.items()},
        provenance=str(meta.get("provenance", "unknown")),
    )
