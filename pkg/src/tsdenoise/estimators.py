"""Estimator-style wrappers around training, sampling, and smoothing.

These follow the usual fit/transform contract: constructor arguments are
stored verbatim, fitted state lands in trailing-underscore attributes, and
get_params/set_params come from the base class.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .sampling import DenoiseConfig, denoise_batch
from .sde import SdeKind, SdeSpec
from .timeseries import ema
from .training import TrainConfig, train_dsm
from .validation import as_float_matrix


class DiffusionDenoiser(BaseEstimator, TransformerMixin):
    """Score-model denoiser for fixed-length normalized windows.

    fit trains a conditional score network on the rows of X by denoising
    score matching. transform partially re-noises each row to t_prime and
    integrates the reverse dynamics back, guided by the row itself, then
    averages the configured number of sampling seeds.
    """

    def __init__(self, kind="ve", n_steps=1000, sigma_min=0.01, sigma_max=1.0,
                 beta_min=0.1, beta_max=20.0, epochs=100, batch_size=128,
                 learning_rate=1e-3, p_uncond=0.2, clip_norm=1.0, hidden=128,
                 depth=3, embed_dim=32, t_prime=0.4, n_seeds=5, base_seed=0,
                 corrector_steps=1, snr=0.16, omega=1.0, eta_tv=0.1, eta_f=0.1,
                 fourier_threshold=0.1, random_state=0):
        self.kind = kind
        self.n_steps = n_steps
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max
        self.beta_min = beta_min
        self.beta_max = beta_max
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.p_uncond = p_uncond
        self.clip_norm = clip_norm
        self.hidden = hidden
        self.depth = depth
        self.embed_dim = embed_dim
        self.t_prime = t_prime
        self.n_seeds = n_seeds
        self.base_seed = base_seed
        self.corrector_steps = corrector_steps
        self.snr = snr
        self.omega = omega
        self.eta_tv = eta_tv
        self.eta_f = eta_f
        self.fourier_threshold = fourier_threshold
        self.random_state = random_state

    def _sde_spec(self) -> SdeSpec:
        return SdeSpec(kind=SdeKind(self.kind), n_steps=self.n_steps,
                       sigma_min=self.sigma_min, sigma_max=self.sigma_max,
                       beta_min=self.beta_min, beta_max=self.beta_max)

    def _denoise_config(self) -> DenoiseConfig:
        return DenoiseConfig(t_prime=self.t_prime, n_seeds=self.n_seeds,
                             base_seed=self.base_seed,
                             corrector_steps=self.corrector_steps, snr=self.snr,
                             omega=self.omega, eta_tv=self.eta_tv,
                             eta_f=self.eta_f,
                             fourier_threshold=self.fourier_threshold)

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        cfg = TrainConfig(epochs=self.epochs, batch_size=self.batch_size,
                          learning_rate=self.learning_rate,
                          p_uncond=self.p_uncond, seed=self.random_state,
                          clip_norm=self.clip_norm, hidden=self.hidden,
                          depth=self.depth, embed_dim=self.embed_dim)
        self.model_, self.train_losses_ = train_dsm(X, self._sde_spec(), cfg)
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "model_"):
            raise NotFittedError("this DiffusionDenoiser is not fitted; call fit first")

    def transform(self, X) -> np.ndarray:
        """Denoise each row, conditioning the reverse dynamics on the row."""
        self._check_fitted()
        X = as_float_matrix(X, "X", width=self.n_features_in_)
        result = denoise_batch(X, self.model_, cfg=self._denoise_config())
        return result.denoised

    def denoise_with_seeds(self, X):
        """Like transform but also return the per-seed trajectories."""
        self._check_fitted()
        X = as_float_matrix(X, "X", width=self.n_features_in_)
        result = denoise_batch(X, self.model_, cfg=self._denoise_config())
        return result.denoised, result.per_seed


class EmaSmoother(BaseEstimator, TransformerMixin):
    """Row-wise exponential smoothing with a fixed decay."""

    def __init__(self, decay=0.5):
        self.decay = decay

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "n_features_in_"):
            raise NotFittedError("this EmaSmoother is not fitted; call fit first")
        X = as_float_matrix(X, "X", width=self.n_features_in_)
        return np.stack([ema(row, decay=self.decay) for row in X])
