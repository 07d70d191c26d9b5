"""Smoothness guidance: total-variation and thresholded-spectrum penalties.

Both penalties steer reverse-diffusion samples, one in the time domain and
one in the frequency domain. Gradients are exact subgradients (TV) or exact
gradients (Fourier) and are checked against finite differences in the tests.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ShapeMismatch
from .validation import as_float_vector, check_nonnegative


def tv_loss(x) -> float:
    """Total variation sum_i |x_{i+1} - x_i|."""
    x = as_float_vector(x, "x", min_len=2)
    return float(np.sum(np.abs(np.diff(x))))


def tv_grad(x) -> np.ndarray:
    """Subgradient of tv_loss with sign(0) = 0.

    Row-wise when x is 2-D. Each interior coordinate receives
    sign(x_j - x_{j-1}) - sign(x_{j+1} - x_j).
    """
    arr = np.asarray(x, dtype=np.float64)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise ShapeMismatch("tv_grad needs vectors of length >= 2")
    s = np.sign(np.diff(arr, axis=1))
    grad = np.zeros_like(arr)
    grad[:, 0] = -s[:, 0]
    grad[:, -1] = s[:, -1]
    grad[:, 1:-1] = s[:, :-1] - s[:, 1:]
    return grad[0] if squeeze else grad


def fourier_filter(x, threshold: float) -> np.ndarray:
    """FFT(x) with every bin whose magnitude / len(x) falls below `threshold`
    zeroed; the DC bin is always kept. Returns the (unnormalized) spectrum."""
    x = as_float_vector(x, "x", min_len=2)
    check_nonnegative(threshold, "threshold")
    spectrum = np.fft.fft(x)
    keep = np.abs(spectrum) / len(x) >= threshold
    keep[0] = True
    return np.where(keep, spectrum, 0.0)


def _filtered_target_ortho(c: np.ndarray, threshold: float) -> np.ndarray:
    """Thresholded spectrum of the condition, in the orthonormal convention."""
    spectrum = np.fft.fft(c, axis=-1, norm="ortho")
    # |F_k| / L with the unnormalized convention equals |X_k| / sqrt(L) here
    mags = np.abs(spectrum) / np.sqrt(c.shape[-1])
    keep = mags >= threshold
    keep[..., 0] = True
    return np.where(keep, spectrum, 0.0)


def fourier_loss(x, c, threshold: float) -> float:
    """|| FFT(x) - Filter(FFT(c), threshold) ||^2 in the orthonormal convention."""
    x = as_float_vector(x, "x", min_len=2)
    c = as_float_vector(c, "c", min_len=2)
    if x.shape != c.shape:
        raise ShapeMismatch(f"x {x.shape} and c {c.shape} must match")
    check_nonnegative(threshold, "threshold")
    delta = np.fft.fft(x, norm="ortho") - _filtered_target_ortho(c, threshold)
    return float(np.sum(np.abs(delta) ** 2))


def fourier_grad(x, c, threshold: float) -> np.ndarray:
    """Gradient of fourier_loss with respect to x.

    With the orthonormal FFT the loss equals the time-domain squared distance
    to the filtered reconstruction (Parseval), so the gradient is
    2 * IFFT(FFT(x) - target).real with no extra length factor. Row-wise when
    the inputs are 2-D.
    """
    arr_x = np.asarray(x, dtype=np.float64)
    arr_c = np.asarray(c, dtype=np.float64)
    if arr_x.shape != arr_c.shape:
        raise ShapeMismatch(f"x {arr_x.shape} and c {arr_c.shape} must match")
    squeeze = arr_x.ndim == 1
    if squeeze:
        arr_x = arr_x[None, :]
        arr_c = arr_c[None, :]
    if arr_x.ndim != 2 or arr_x.shape[1] < 2:
        raise ShapeMismatch("fourier_grad needs vectors of length >= 2")
    check_nonnegative(threshold, "threshold")
    delta = np.fft.fft(arr_x, axis=-1, norm="ortho") - _filtered_target_ortho(arr_c, threshold)
    grad = 2.0 * np.fft.ifft(delta, axis=-1, norm="ortho").real
    return grad[0] if squeeze else grad
