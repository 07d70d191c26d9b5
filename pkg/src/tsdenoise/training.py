"""Denoising score-matching training loop with a hand-rolled Adam optimizer.

The std(t)^2 loss weighting makes the per-sample objective
|| std * s(x_t, t, c) + z ||^2, which equals || raw + z ||^2 for the raw
(unrescaled) network output, so the network simply regresses -z.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import BadParams, DivergedLoss, EmptyInput
from .nets import NetDims, ScoreModel, init_params, net_backward, net_forward, time_embedding
from .sde import T_EPS, T_MAX, SdeSpec, mean_std_of_t
from .validation import as_float_matrix, check_int_at_least, check_positive
from .windows import WindowSet


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 1e-3
    p_uncond: float = 0.2
    seed: int = 0
    clip_norm: float = 1.0
    hidden: int = 128
    depth: int = 3
    embed_dim: int = 32

    def __post_init__(self) -> None:
        check_int_at_least(self.epochs, 1, "epochs")
        check_int_at_least(self.batch_size, 1, "batch_size")
        check_positive(self.learning_rate, "learning_rate")
        if not 0.0 <= self.p_uncond <= 1.0:
            raise BadParams(f"p_uncond must lie in [0, 1], got {self.p_uncond}")
        check_positive(self.clip_norm, "clip_norm")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs, "batch_size": self.batch_size,
            "learning_rate": self.learning_rate, "p_uncond": self.p_uncond,
            "seed": self.seed, "clip_norm": self.clip_norm,
            "hidden": self.hidden, "depth": self.depth, "embed_dim": self.embed_dim,
        }


def as_training_matrix(dataset) -> np.ndarray:
    """Accept a WindowSet (degenerate windows excluded) or a plain matrix."""
    if isinstance(dataset, WindowSet):
        rows = [w.values for w in dataset if not w.norm.degenerate]
        if not rows:
            raise EmptyInput("dataset has no non-degenerate windows")
        return np.stack(rows).astype(np.float64)
    return as_float_matrix(dataset, "dataset")


def dsm_batch_loss(
    params: dict,
    spec: SdeSpec,
    dims: NetDims,
    x0: np.ndarray,
    t: np.ndarray,
    z: np.ndarray,
    cond_mask: np.ndarray,
) -> tuple[float, dict]:
    """Loss and parameter gradients on one fixed batch.

    x0, z: (b, L); t: (b,); cond_mask: (b,) bool, True keeps the condition,
    False substitutes the zero null token. Deterministic, so gradients can be
    finite-difference checked.
    """
    mean_coeff, std = mean_std_of_t(spec, t)
    xt = mean_coeff[:, None] * x0 + std[:, None] * z
    c_eff = np.where(cond_mask[:, None], x0, 0.0)
    emb = time_embedding(t, dims.embed_dim)
    xin = np.concatenate([xt, c_eff, emb], axis=1)
    raw, cache = net_forward(params, xin, dims.depth, keep_cache=True)
    resid = raw + z
    b = x0.shape[0]
    loss = float(np.sum(resid * resid) / b)
    dout = 2.0 * resid / b
    grads = net_backward(params, cache, dout, dims.depth)
    return loss, grads


def clip_gradients(grads: dict, max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most max_norm."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if total > max_norm > 0:
        factor = max_norm / total
        for g in grads.values():
            g *= factor
    return total


class Adam:
    """Standard Adam on a parameter dict, updating in place."""

    def __init__(self, params: dict, learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.step_count = 0

    def step(self, grads: dict) -> None:
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for name, g in grads.items():
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            self.params[name] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def train_dsm(dataset, spec: SdeSpec, cfg: TrainConfig = TrainConfig()) -> tuple[ScoreModel, list[float]]:
    """Train a conditional score model by denoising score matching.

    Per step: draw a window batch, t ~ U(T_EPS, T], z ~ N(0, I); with
    probability p_uncond the condition is dropped to the null token. Returns
    the model and the per-epoch mean loss curve. Fully deterministic given
    cfg.seed. Raises DivergedLoss when the loss goes non-finite.
    """
    x = as_training_matrix(dataset)
    n, length = x.shape
    dims = NetDims(length=length, embed_dim=cfg.embed_dim, hidden=cfg.hidden, depth=cfg.depth)
    rng = np.random.default_rng(cfg.seed)
    params = init_params(dims, rng)
    optimizer = Adam(params, cfg.learning_rate)
    unconditional = cfg.p_uncond >= 1.0

    losses: list[float] = []
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            x0 = x[idx]
            b = len(idx)
            t = rng.uniform(T_EPS, T_MAX, size=b)
            z = rng.standard_normal((b, length))
            cond_mask = rng.random(b) >= cfg.p_uncond
            loss, grads = dsm_batch_loss(params, spec, dims, x0, t, z, cond_mask)
            if not np.isfinite(loss):
                raise DivergedLoss(f"training loss became {loss}")
            clip_gradients(grads, cfg.clip_norm)
            optimizer.step(grads)
            epoch_loss += loss * b
        losses.append(epoch_loss / n)
    return ScoreModel(spec, dims, params, unconditional=unconditional), losses
