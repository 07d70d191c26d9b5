"""Forward-noising schedules and perturbation kernels for the two SDE kinds.

VE: sigma(t) = sigma_min * (sigma_max/sigma_min)**t, zero drift.
VP: beta(t) = beta_min + t * (beta_max - beta_min), linear.

Time runs over (0, T] with T = 1; times at or below T_EPS are floored to T_EPS.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import BadParams, OutOfRangeT, ShapeMismatch, WrongKind
from .validation import check_int_at_least, check_positive

T_MAX = 1.0
T_EPS = 1e-5


class SdeKind(enum.Enum):
    VE = "ve"
    VP = "vp"


@dataclass(frozen=True)
class SdeSpec:
    """Immutable schedule parameters for one SDE kind."""

    kind: SdeKind
    n_steps: int = 1000
    sigma_min: float = 0.01
    sigma_max: float = 1.0
    beta_min: float = 0.1
    beta_max: float = 20.0

    def __post_init__(self) -> None:
        if not isinstance(self.kind, SdeKind):
            object.__setattr__(self, "kind", SdeKind(self.kind))
        check_int_at_least(self.n_steps, 2, "n_steps")
        check_positive(self.sigma_min, "sigma_min")
        if not self.sigma_min < self.sigma_max:
            raise BadParams(f"need sigma_min < sigma_max, got {self.sigma_min} >= {self.sigma_max}")
        check_positive(self.beta_min, "beta_min")
        if not self.beta_min < self.beta_max:
            raise BadParams(f"need beta_min < beta_max, got {self.beta_min} >= {self.beta_max}")
        if self.kind is SdeKind.VP and self.beta_max / self.n_steps >= 1.0:
            raise BadParams(
                f"discrete betas beta(i/N)/N must stay below 1: need n_steps > beta_max "
                f"({self.n_steps} <= {self.beta_max})")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "n_steps": self.n_steps,
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
            "beta_min": self.beta_min,
            "beta_max": self.beta_max,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SdeSpec":
        extra = set(data) - {"kind", "n_steps", "sigma_min", "sigma_max", "beta_min", "beta_max"}
        if extra:
            raise BadParams(f"unknown SdeSpec keys: {sorted(extra)}")
        if "kind" not in data:
            raise BadParams("SdeSpec needs a 'kind' key")
        return cls(
            kind=SdeKind(data["kind"]),
            n_steps=int(data.get("n_steps", 1000)),
            sigma_min=float(data.get("sigma_min", 0.01)),
            sigma_max=float(data.get("sigma_max", 1.0)),
            beta_min=float(data.get("beta_min", 0.1)),
            beta_max=float(data.get("beta_max", 20.0)),
        )


@dataclass(frozen=True)
class KernelParams:
    """Gaussian perturbation kernel x_t | x_0 ~ N(mean_coeff * x_0, std**2 I)."""

    mean_coeff: float
    std: float


def clamp_t(t):
    """Floor times at T_EPS; reject anything negative or above T."""
    arr = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > T_MAX):
        raise OutOfRangeT(f"t must lie in [0, {T_MAX}], got {t}")
    out = np.maximum(arr, T_EPS)
    return float(out) if out.ndim == 0 else out


def sigma_of_t(spec: SdeSpec, t):
    """Geometric noise scale for the VE schedule."""
    if spec.kind is not SdeKind.VE:
        raise WrongKind("sigma_of_t is defined for the VE kind only")
    t = clamp_t(t)
    return spec.sigma_min * (spec.sigma_max / spec.sigma_min) ** t


def beta_of_t(spec: SdeSpec, t):
    """Linear noise rate for the VP schedule."""
    if spec.kind is not SdeKind.VP:
        raise WrongKind("beta_of_t is defined for the VP kind only")
    t = clamp_t(t)
    return spec.beta_min + t * (spec.beta_max - spec.beta_min)


def integrated_beta(spec: SdeSpec, t):
    """Closed form of int_0^t beta(s) ds for the VP schedule."""
    if spec.kind is not SdeKind.VP:
        raise WrongKind("integrated_beta is defined for the VP kind only")
    t = clamp_t(t)
    return spec.beta_min * t + 0.5 * t * t * (spec.beta_max - spec.beta_min)


def mean_std_of_t(spec: SdeSpec, t) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized kernel (mean_coeff, std) at times t (scalar or array)."""
    t = clamp_t(t)
    if spec.kind is SdeKind.VE:
        std = spec.sigma_min * (spec.sigma_max / spec.sigma_min) ** t
        return np.ones_like(std), std
    half_int = 0.5 * (spec.beta_min * t + 0.5 * t * t * (spec.beta_max - spec.beta_min))
    mean_coeff = np.exp(-half_int)
    std = np.sqrt(1.0 - np.exp(-2.0 * half_int))
    return mean_coeff, std


def kernel_params(spec: SdeSpec, t: float) -> KernelParams:
    """Perturbation kernel parameters at a scalar time t."""
    mean_coeff, std = mean_std_of_t(spec, float(t))
    return KernelParams(mean_coeff=float(mean_coeff), std=float(std))


def perturb(spec: SdeSpec, x0: np.ndarray, t, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw x_t = mean_coeff * x0 + std * z with z ~ N(0, I); returns (x_t, z).

    t may be a scalar (shared) or a per-row array when x0 is 2-D.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    mean_coeff, std = mean_std_of_t(spec, t)
    if np.ndim(mean_coeff) == 1:
        if x0.ndim != 2 or len(mean_coeff) != x0.shape[0]:
            raise ShapeMismatch("per-row t requires x0 with matching row count")
        mean_coeff = mean_coeff[:, None]
        std = std[:, None]
    z = rng.standard_normal(x0.shape)
    return mean_coeff * x0 + std * z, z


def score_target(spec: SdeSpec, x0: np.ndarray, xt: np.ndarray, t) -> np.ndarray:
    """Exact conditional score grad_x log q(x_t | x_0) = -(x_t - mean*x_0) / std**2."""
    x0 = np.asarray(x0, dtype=np.float64)
    xt = np.asarray(xt, dtype=np.float64)
    if x0.shape != xt.shape:
        raise ShapeMismatch(f"x0 {x0.shape} and xt {xt.shape} must match")
    mean_coeff, std = mean_std_of_t(spec, t)
    if np.ndim(mean_coeff) == 1:
        mean_coeff = mean_coeff[:, None]
        std = std[:, None]
    return -(xt - mean_coeff * x0) / (std * std)


def drift_diffusion(spec: SdeSpec, x: np.ndarray, t: float) -> tuple[np.ndarray, float]:
    """Forward SDE coefficients dx = f(x,t) dt + g(t) dw."""
    x = np.asarray(x, dtype=np.float64)
    t = float(clamp_t(t))
    if spec.kind is SdeKind.VE:
        sigma = spec.sigma_min * (spec.sigma_max / spec.sigma_min) ** t
        g = sigma * math.sqrt(2.0 * math.log(spec.sigma_max / spec.sigma_min))
        return np.zeros_like(x), g
    beta = spec.beta_min + t * (spec.beta_max - spec.beta_min)
    return -0.5 * beta * x, math.sqrt(beta)


def discrete_sigmas(spec: SdeSpec) -> np.ndarray:
    """sigma_i = sigma(i/N) for i = 1..N (VE)."""
    if spec.kind is not SdeKind.VE:
        raise WrongKind("discrete_sigmas is defined for the VE kind only")
    i = np.arange(1, spec.n_steps + 1, dtype=np.float64)
    return spec.sigma_min * (spec.sigma_max / spec.sigma_min) ** (i / spec.n_steps)


def discrete_betas(spec: SdeSpec) -> np.ndarray:
    """beta_i = beta(i/N) / N for i = 1..N (VP); all values lie in (0, 1)."""
    if spec.kind is not SdeKind.VP:
        raise WrongKind("discrete_betas is defined for the VP kind only")
    i = np.arange(1, spec.n_steps + 1, dtype=np.float64)
    return (spec.beta_min + (i / spec.n_steps) * (spec.beta_max - spec.beta_min)) / spec.n_steps
