"""tsdenoise: score-model denoising for 1-D price series, with evaluation tools.

The library covers the full loop: ingest or synthesize price series, cut
them into normalized rolling windows, train a conditional score network by
denoising score matching under a VE or VP noising process, partially
re-noise and reverse-integrate windows back to a cleaner version (guided by
the window itself, a total-variation penalty, and a low-pass spectrum
match), then judge the result with future-return classifiers,
directional-change counts, and trading backtests.
"""

__version__ = "0.1.0"

from .backtest import BacktestReport, Trade, run_prediction_backtest, run_signal_backtest
from .boosting import BoostedTreesClassifier
from .config import RunConfig, load_config, save_config
from .datasets import (
    ClassifierDataset,
    build_dataset,
    concat_datasets,
    evaluate_protocol,
    load_dataset_file,
    save_dataset_file,
)
from .estimators import DiffusionDenoiser, EmaSmoother
from .exceptions import TsdenoiseError, ValidationError
from .guidance import fourier_filter, fourier_grad, fourier_loss, tv_grad, tv_loss
from .metrics import (
    ConfusionMatrix,
    DcReport,
    confusion_from_predictions,
    dc_events,
    f1_score,
    mcc,
    mcc_defined,
    return_histogram,
)
from .nets import ScoreModel, cf_guided_score, time_embedding
from .pipeline import pipeline_run
from .sampling import (
    DenoiseConfig,
    DenoiseResult,
    corrector_step,
    denoise,
    denoise_batch,
    predictor_step,
    reverse_steps,
)
from .sde import SdeKind, SdeSpec, kernel_params, mean_std_of_t, perturb, score_target
from .strategies import (
    BollingerParams,
    MacdParams,
    bollinger_bands,
    bollinger_signals,
    macd_lines,
    macd_signals,
)
from .timeseries import (
    CsvSchema,
    Frequency,
    PriceSeries,
    chronological_split,
    ema,
    future_return_label,
    generate_synthetic,
    parse_csv,
    series_to_csv,
)
from .training import TrainConfig, train_dsm
from .windows import (
    NormParams,
    Split,
    Window,
    WindowSet,
    load_windows,
    normalize_values,
    rolling_windows,
    save_windows,
    stitch_windows,
    windows_at_origins,
)

__all__ = [
    "__version__",
    "BacktestReport", "Trade", "run_prediction_backtest", "run_signal_backtest",
    "BoostedTreesClassifier",
    "RunConfig", "load_config", "save_config",
    "ClassifierDataset", "build_dataset", "concat_datasets", "evaluate_protocol",
    "load_dataset_file", "save_dataset_file",
    "DiffusionDenoiser", "EmaSmoother",
    "TsdenoiseError", "ValidationError",
    "fourier_filter", "fourier_grad", "fourier_loss", "tv_grad", "tv_loss",
    "ConfusionMatrix", "DcReport", "confusion_from_predictions", "dc_events",
    "f1_score", "mcc", "mcc_defined", "return_histogram",
    "ScoreModel", "cf_guided_score", "time_embedding",
    "pipeline_run",
    "DenoiseConfig", "DenoiseResult", "corrector_step", "denoise", "denoise_batch",
    "predictor_step", "reverse_steps",
    "SdeKind", "SdeSpec", "kernel_params", "mean_std_of_t", "perturb", "score_target",
    "BollingerParams", "MacdParams", "bollinger_bands", "bollinger_signals",
    "macd_lines", "macd_signals",
    "CsvSchema", "Frequency", "PriceSeries", "chronological_split", "ema",
    "future_return_label", "generate_synthetic", "parse_csv", "series_to_csv",
    "TrainConfig", "train_dsm",
    "NormParams", "Split", "Window", "WindowSet", "load_windows", "normalize_values",
    "rolling_windows", "save_windows", "stitch_windows", "windows_at_origins",
]
