"""Conditional score network: a residual MLP over (window, condition, time embedding).

The network regresses the scaled noise direction; its raw output is divided
by the kernel std at t so the result approximates the score of the noised
data distribution. Forward and backward passes are plain numpy so parameter
gradients can be checked against finite differences.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import BadParams, IoError, ShapeMismatch, VersionMismatch
from .sde import SdeSpec, mean_std_of_t
from .validation import check_int_at_least

MODEL_MAGIC = b"TSDN"
MODEL_VERSION = 1

EMBED_FREQ_LO = 1.0
EMBED_FREQ_HI = 1.0e4


def time_embedding(t, dim: int) -> np.ndarray:
    """Sinusoidal embedding: sin/cos at dim/2 geometric frequencies in [1, 1e4].

    Accepts scalar or 1-D t; returns (dim,) or (n, dim).
    """
    dim = check_int_at_least(dim, 2, "dim")
    if dim % 2 != 0:
        raise BadParams(f"embedding dim must be even, got {dim}")
    arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if arr.ndim != 1:
        raise ShapeMismatch("t must be scalar or 1-D")
    half = dim // 2
    if half == 1:
        freqs = np.array([EMBED_FREQ_LO])
    else:
        freqs = EMBED_FREQ_LO * (EMBED_FREQ_HI / EMBED_FREQ_LO) ** (np.arange(half) / (half - 1))
    angles = arr[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
    return emb[0] if np.ndim(t) == 0 else emb


def _silu(a: np.ndarray) -> np.ndarray:
    sig = np.empty_like(a)
    pos = a >= 0
    sig[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    sig[~pos] = ea / (1.0 + ea)
    return a * sig


def _silu_grad(a: np.ndarray) -> np.ndarray:
    sig = np.empty_like(a)
    pos = a >= 0
    sig[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    sig[~pos] = ea / (1.0 + ea)
    return sig * (1.0 + a * (1.0 - sig))


@dataclass(frozen=True)
class NetDims:
    """Architecture hyperparameters; input arity is 2*length + embed_dim."""

    length: int
    embed_dim: int = 32
    hidden: int = 128
    depth: int = 3

    def __post_init__(self) -> None:
        check_int_at_least(self.length, 2, "length")
        check_int_at_least(self.embed_dim, 2, "embed_dim")
        if self.embed_dim % 2 != 0:
            raise BadParams("embed_dim must be even")
        check_int_at_least(self.hidden, 1, "hidden")
        check_int_at_least(self.depth, 1, "depth")

    @property
    def input_dim(self) -> int:
        return 2 * self.length + self.embed_dim


def param_order(depth: int) -> list[str]:
    names = ["w_in", "b_in"]
    for k in range(depth):
        names += [f"w1_{k}", f"b1_{k}", f"w2_{k}", f"b2_{k}"]
    names += ["w_out", "b_out"]
    return names


def param_shapes(dims: NetDims) -> dict[str, tuple]:
    shapes = {"w_in": (dims.input_dim, dims.hidden), "b_in": (dims.hidden,)}
    for k in range(dims.depth):
        shapes[f"w1_{k}"] = (dims.hidden, dims.hidden)
        shapes[f"b1_{k}"] = (dims.hidden,)
        shapes[f"w2_{k}"] = (dims.hidden, dims.hidden)
        shapes[f"b2_{k}"] = (dims.hidden,)
    shapes["w_out"] = (dims.hidden, dims.length)
    shapes["b_out"] = (dims.length,)
    return shapes


def init_params(dims: NetDims, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Glorot-uniform weights, zero biases."""
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(dims).items():
        if name.startswith("b"):
            params[name] = np.zeros(shape)
        else:
            fan_in, fan_out = shape
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def net_forward(params: dict, xin: np.ndarray, depth: int, keep_cache: bool = False):
    """Run the residual MLP; optionally keep activations for backprop."""
    a0 = xin @ params["w_in"] + params["b_in"]
    h = _silu(a0)
    cache = {"xin": xin, "a0": a0} if keep_cache else None
    for k in range(depth):
        a1 = h @ params[f"w1_{k}"] + params[f"b1_{k}"]
        u = _silu(a1)
        if keep_cache:
            cache[f"h_{k}"] = h
            cache[f"a1_{k}"] = a1
            cache[f"u_{k}"] = u
        h = h + u @ params[f"w2_{k}"] + params[f"b2_{k}"]
    out = h @ params["w_out"] + params["b_out"]
    if keep_cache:
        cache["h_final"] = h
    return (out, cache) if keep_cache else out


def net_backward(params: dict, cache: dict, dout: np.ndarray, depth: int) -> dict[str, np.ndarray]:
    """Parameter gradients for net_forward given dL/dout."""
    grads: dict[str, np.ndarray] = {}
    grads["w_out"] = cache["h_final"].T @ dout
    grads["b_out"] = dout.sum(axis=0)
    dh = dout @ params["w_out"].T
    for k in range(depth - 1, -1, -1):
        u = cache[f"u_{k}"]
        grads[f"w2_{k}"] = u.T @ dh
        grads[f"b2_{k}"] = dh.sum(axis=0)
        du = dh @ params[f"w2_{k}"].T
        da1 = du * _silu_grad(cache[f"a1_{k}"])
        grads[f"w1_{k}"] = cache[f"h_{k}"].T @ da1
        grads[f"b1_{k}"] = da1.sum(axis=0)
        dh = dh + da1 @ params[f"w1_{k}"].T
    da0 = dh * _silu_grad(cache["a0"])
    grads["w_in"] = cache["xin"].T @ da0
    grads["b_in"] = da0.sum(axis=0)
    return grads


class ScoreModel:
    """Trained conditional score approximator with binary save/load."""

    def __init__(self, spec: SdeSpec, dims: NetDims, params: dict[str, np.ndarray],
                 unconditional: bool = False):
        expected = param_shapes(dims)
        if set(params) != set(expected):
            raise BadParams("parameter names do not match the architecture")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ShapeMismatch(f"{name} has shape {params[name].shape}, expected {shape}")
        self.spec = spec
        self.dims = dims
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        self.unconditional = bool(unconditional)

    def _inputs(self, x: np.ndarray, t, c) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        batched = x.ndim == 2
        if not batched:
            x = x[None, :]
        if x.shape[1] != self.dims.length:
            raise ShapeMismatch(f"x has width {x.shape[1]}, model expects {self.dims.length}")
        n = x.shape[0]
        t_arr = np.broadcast_to(np.atleast_1d(np.asarray(t, dtype=np.float64)), (n,))
        if c is None or self.unconditional:
            c_arr = np.zeros_like(x)
        else:
            c_arr = np.asarray(c, dtype=np.float64)
            if c_arr.ndim == 1:
                c_arr = np.broadcast_to(c_arr[None, :], x.shape)
            if c_arr.shape != x.shape:
                raise ShapeMismatch(f"c has shape {c_arr.shape}, expected {x.shape}")
        emb = time_embedding(t_arr, self.dims.embed_dim)
        xin = np.concatenate([x, c_arr, emb], axis=1)
        return xin, t_arr

    def raw(self, x, t, c=None) -> np.ndarray:
        """Network output before the 1/std(t) rescale."""
        squeeze = np.ndim(x) == 1
        xin, _ = self._inputs(x, t, c)
        out = net_forward(self.params, xin, self.dims.depth)
        return out[0] if squeeze else out

    def score(self, x, t, c=None) -> np.ndarray:
        """Score estimate s(x, t, c) = raw(x, t, c) / std(t)."""
        squeeze = np.ndim(x) == 1
        xin, t_arr = self._inputs(x, t, c)
        out = net_forward(self.params, xin, self.dims.depth)
        _, std = mean_std_of_t(self.spec, t_arr)
        out = out / np.asarray(std)[:, None]
        return out[0] if squeeze else out

    def save(self, path) -> None:
        header = {
            "sde": self.spec.to_dict(),
            "length": self.dims.length,
            "embed_dim": self.dims.embed_dim,
            "hidden": self.dims.hidden,
            "depth": self.dims.depth,
            "unconditional": self.unconditional,
        }
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(MODEL_MAGIC)
            fh.write(struct.pack("<I", MODEL_VERSION))
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for name in param_order(self.dims.depth):
                fh.write(np.ascontiguousarray(self.params[name], dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "ScoreModel":
        with open(path, "rb") as fh:
            data = fh.read()
        if len(data) < 12 or data[:4] != MODEL_MAGIC:
            raise IoError(f"{path}: not a score model file")
        version = struct.unpack("<I", data[4:8])[0]
        if version != MODEL_VERSION:
            raise VersionMismatch(f"{path}: model version {version}, expected {MODEL_VERSION}")
        header_len = struct.unpack("<I", data[8:12])[0]
        if len(data) < 12 + header_len:
            raise IoError(f"{path}: truncated header")
        try:
            header = json.loads(data[12:12 + header_len].decode("utf-8"))
            spec = SdeSpec.from_dict(header["sde"])
            dims = NetDims(length=int(header["length"]), embed_dim=int(header["embed_dim"]),
                           hidden=int(header["hidden"]), depth=int(header["depth"]))
            unconditional = bool(header["unconditional"])
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise IoError(f"{path}: bad model header: {exc}") from exc
        offset = 12 + header_len
        params: dict[str, np.ndarray] = {}
        for name, shape in param_shapes(dims).items():
            count = int(np.prod(shape))
            end = offset + count * 8
            if end > len(data):
                raise IoError(f"{path}: truncated parameter block {name}")
            params[name] = np.frombuffer(data[offset:end], dtype="<f8").reshape(shape).copy()
            offset = end
        if offset != len(data):
            raise IoError(f"{path}: {len(data) - offset} trailing bytes")
        return cls(spec, dims, params, unconditional)


def forward(model: ScoreModel, x, t, c=None) -> np.ndarray:
    """Score estimate; c=None evaluates the unconditional branch."""
    return model.score(x, t, c)


def cf_guided_score(model: ScoreModel, x, t, c, omega: float = 1.0) -> np.ndarray:
    """Classifier-free combination omega * s(x,t,c) + (1 - omega) * s(x,t,None).

    omega=1 and omega=0 evaluate only the branch they need, so those cases
    are exact (and cost a single forward pass).
    """
    omega = float(omega)
    if c is None or omega == 0.0:
        return model.score(x, t, None)
    if omega == 1.0:
        return model.score(x, t, c)
    return omega * model.score(x, t, c) + (1.0 - omega) * model.score(x, t, None)
