"""Guided predictor-corrector reverse sampling for noising-denoising inference.

The input window is perturbed to an intermediate noise level t_prime, then
reverse-diffused back to t=0 with the trained score model, a Langevin
corrector, and per-step total-variation and spectrum guidance, conditioning
on the input itself. Several independent seeds are averaged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields

import numpy as np

from .exceptions import BadParams, NonFiniteState, ShapeMismatch, WrongKind
from .guidance import fourier_grad, tv_grad
from .nets import ScoreModel, cf_guided_score
from .sde import T_EPS, T_MAX, SdeKind, SdeSpec, mean_std_of_t
from .validation import as_float_matrix, as_float_vector, check_int_at_least, check_nonnegative, check_positive

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DenoiseConfig:
    """Knobs for one denoising pass.

    t_prime: forward-noising level in (0, 1]; the reverse loop runs
    K = round(N * t_prime) predictor iterations.
    """

    t_prime: float = 0.4
    n_seeds: int = 5
    base_seed: int = 0
    corrector_steps: int = 1
    snr: float = 0.16
    omega: float = 1.0
    eta_tv: float = 0.1
    eta_f: float = 0.1
    fourier_threshold: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 < self.t_prime <= T_MAX:
            raise BadParams(f"t_prime must lie in (0, {T_MAX}], got {self.t_prime}")
        check_int_at_least(self.n_seeds, 1, "n_seeds")
        check_int_at_least(self.corrector_steps, 0, "corrector_steps")
        check_positive(self.snr, "snr")
        check_nonnegative(self.eta_tv, "eta_tv")
        check_nonnegative(self.eta_f, "eta_f")
        check_nonnegative(self.fourier_threshold, "fourier_threshold")

    def to_dict(self) -> dict:
        return {
            "t_prime": self.t_prime, "n_seeds": self.n_seeds, "base_seed": self.base_seed,
            "corrector_steps": self.corrector_steps, "snr": self.snr, "omega": self.omega,
            "eta_tv": self.eta_tv, "eta_f": self.eta_f,
            "fourier_threshold": self.fourier_threshold,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DenoiseConfig":
        extra = set(data) - {f.name for f in fields(cls)}
        if extra:
            raise BadParams(f"unknown DenoiseConfig keys: {sorted(extra)}")
        return cls(**data)


@dataclass(eq=False)
class DenoiseResult:
    """Seed-averaged output plus the per-seed samples and the config echo."""

    denoised: np.ndarray
    per_seed: np.ndarray
    config: DenoiseConfig


def _sigma_at(spec: SdeSpec, t: float) -> float:
    """VE sigma on the exact step grid (no epsilon flooring, t >= 0)."""
    return spec.sigma_min * (spec.sigma_max / spec.sigma_min) ** t


def _predictor_core(spec: SdeSpec, model, x: np.ndarray, i: int, c, omega: float,
                    z: np.ndarray) -> np.ndarray:
    n = spec.n_steps
    t_i = max(i / n, T_EPS)
    score = cf_guided_score(model, x, t_i, c, omega)
    if spec.kind is SdeKind.VE:
        sig_i = _sigma_at(spec, i / n)
        sig_prev = _sigma_at(spec, (i - 1) / n)
        diff = sig_i * sig_i - sig_prev * sig_prev
        return x + diff * score + np.sqrt(diff) * z
    beta_i = (spec.beta_min + (i / n) * (spec.beta_max - spec.beta_min)) / n
    return (x + 0.5 * beta_i * score) / np.sqrt(1.0 - beta_i) + np.sqrt(beta_i) * z


def _corrector_core(spec: SdeSpec, model, x: np.ndarray, t: float, c, omega: float,
                    snr: float, z: np.ndarray) -> np.ndarray:
    score = cf_guided_score(model, x, t, c, omega)
    score_norm = np.linalg.norm(score, axis=-1, keepdims=True)
    z_norm = np.linalg.norm(z, axis=-1, keepdims=True)
    zero = score_norm == 0
    if np.any(zero):
        logger.warning("corrector skipped: zero score norm at t=%g", t)
    safe = np.where(zero, 1.0, score_norm)
    eps_step = np.where(zero, 0.0, 2.0 * (snr * z_norm / safe) ** 2)
    return x + eps_step * score + np.sqrt(2.0 * eps_step) * z


def predictor_step(spec: SdeSpec, model, x, i: int, c=None, omega: float = 1.0,
                   rng: np.random.Generator | None = None, *, noise=None) -> np.ndarray:
    """One reverse step from grid index i to i-1 (1 <= i <= N).

    VE: x + (sigma_i^2 - sigma_{i-1}^2) * s + sqrt(sigma_i^2 - sigma_{i-1}^2) * z
    VP: (x + beta_i/2 * s) / sqrt(1 - beta_i) + sqrt(beta_i) * z
    Pass noise=0 arrays (or a generator) to control the injected z.
    """
    x = np.asarray(x, dtype=np.float64)
    i = check_int_at_least(i, 1, "i")
    if i > spec.n_steps:
        raise BadParams(f"step index {i} exceeds n_steps {spec.n_steps}")
    if noise is None:
        if rng is None:
            raise BadParams("predictor_step needs an rng when noise is not given")
        noise = rng.standard_normal(x.shape)
    return _predictor_core(spec, model, x, i, c, omega, np.asarray(noise, dtype=np.float64))


def corrector_step(spec: SdeSpec, model, x, t: float, c=None, omega: float = 1.0,
                   snr: float = 0.16, rng: np.random.Generator | None = None, *,
                   noise=None) -> np.ndarray:
    """One annealed Langevin step x + eps*s + sqrt(2*eps)*z.

    eps = 2 * (snr * ||z|| / ||s||)^2, per row for 2-D x. A numerically zero
    score skips the step for that row (logged).
    """
    x = np.asarray(x, dtype=np.float64)
    check_positive(snr, "snr")
    if noise is None:
        if rng is None:
            raise BadParams("corrector_step needs an rng when noise is not given")
        noise = rng.standard_normal(x.shape)
    return _corrector_core(spec, model, x, float(t), c, omega, snr,
                           np.asarray(noise, dtype=np.float64))


def reverse_steps(spec: SdeSpec, t_prime: float) -> int:
    """Number of reverse iterations K = round(N * t_prime / T); always >= 1."""
    k = int(round(spec.n_steps * float(t_prime) / T_MAX))
    if k < 1:
        raise BadParams(
            f"t_prime={t_prime} with n_steps={spec.n_steps} rounds to zero reverse steps")
    return k


def _denoise_matrix(x0: np.ndarray, model: ScoreModel, cfg: DenoiseConfig) -> DenoiseResult:
    spec = model.spec
    k = reverse_steps(spec, cfg.t_prime)
    n_rows, length = x0.shape
    cond = x0
    per_seed = np.empty((cfg.n_seeds, n_rows, length))
    t_start = max(k / spec.n_steps, T_EPS)
    for j in range(cfg.n_seeds):
        rng = np.random.default_rng(cfg.base_seed + j)
        mean_coeff, std = mean_std_of_t(spec, t_start)
        x = mean_coeff * x0 + std * rng.standard_normal(length)[None, :]
        for i in range(k, 0, -1):
            z = rng.standard_normal(length)[None, :]
            x = _predictor_core(spec, model, x, i, cond, cfg.omega, z)
            t_next = max((i - 1) / spec.n_steps, T_EPS)
            for _ in range(cfg.corrector_steps):
                z = rng.standard_normal(length)[None, :]
                x = _corrector_core(spec, model, x, t_next, cond, cfg.omega, cfg.snr, z)
            if cfg.eta_tv > 0.0:
                x = x - cfg.eta_tv * tv_grad(x)
            if cfg.eta_f > 0.0:
                x = x - cfg.eta_f * fourier_grad(x, cond, cfg.fourier_threshold)
            if not np.all(np.isfinite(x)):
                raise NonFiniteState(
                    f"non-finite sample state at seed {cfg.base_seed + j}, step {i}")
        per_seed[j] = x
    return DenoiseResult(per_seed.mean(axis=0), per_seed, cfg)


def denoise(x0, model: ScoreModel, spec: SdeSpec | None = None,
            cfg: DenoiseConfig = DenoiseConfig()) -> DenoiseResult:
    """Denoise one window: perturb to t_prime, guided reverse to 0, average seeds.

    Per-seed randomness comes from default_rng(base_seed + seed_index); draws
    happen in a fixed order (initial perturbation, then per reverse step the
    predictor noise followed by each corrector noise), so results are exactly
    reproducible.
    """
    if spec is not None and spec != model.spec:
        raise WrongKind("explicit spec disagrees with the spec the model was trained with")
    vec = as_float_vector(x0, "x0", min_len=2)
    if len(vec) != model.dims.length:
        raise ShapeMismatch(f"x0 has length {len(vec)}, model expects {model.dims.length}")
    result = _denoise_matrix(vec[None, :], model, cfg)
    return DenoiseResult(result.denoised[0], result.per_seed[:, 0, :], cfg)


def denoise_batch(x0, model: ScoreModel, spec: SdeSpec | None = None,
                  cfg: DenoiseConfig = DenoiseConfig()) -> DenoiseResult:
    """Denoise each row of a window matrix in one vectorized pass.

    Every row sees the same per-seed noise stream a single-window call would
    see, so row r of the result matches denoise(x0[r], ...) up to BLAS
    rounding differences.
    """
    if spec is not None and spec != model.spec:
        raise WrongKind("explicit spec disagrees with the spec the model was trained with")
    mat = as_float_matrix(x0, "x0", width=model.dims.length)
    return _denoise_matrix(mat, model, cfg)
