"""Differentiable array primitives for the self-supervised reconstruction net.

Every primitive is a plain float64 numpy function plus a hand-written
backward companion returning exact gradients (ReLU uses subgradient 0 at 0).
Convolutions are correlations (no kernel flip), matching the convention the
gradient checks in the test-suite assume.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv3x3_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Zero-padded 3x3 correlation: (Cin,Y,X) x (Cout,Cin,3,3) -> (Cout,Y,X)."""
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))
    return np.tensordot(w, win, axes=([1, 2, 3], [0, 3, 4])) + b[:, None, None]


def conv3x3_backward(
    x: np.ndarray, w: np.ndarray, g: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dw, db) of conv3x3_forward given upstream gradient g."""
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))
    grad_w = np.tensordot(g, win, axes=([1, 2], [1, 2]))
    grad_b = g.sum(axis=(1, 2))
    gp = np.pad(g, ((0, 0), (1, 1), (1, 1)))
    win_g = sliding_window_view(gp, (3, 3), axis=(1, 2))
    w_flip = w[:, :, ::-1, ::-1]
    grad_x = np.tensordot(w_flip, win_g, axes=([0, 2, 3], [0, 3, 4]))
    return grad_x, grad_w, grad_b


def shifted_taps_forward(
    frame: np.ndarray, w: np.ndarray, b: np.ndarray, width: int, step: int
) -> np.ndarray:
    """Valid correlation along x with taps dilated by the dispersion step.

    out[n, y, x] = sum_i w[n, i] * frame[y, x + i*step] + b[n], producing a
    (n_out, Y, width) stack from a frame of width width + (taps-1)*step.
    """
    taps = w.shape[1]
    if frame.shape[1] != width + (taps - 1) * step:
        raise ValueError(
            f"frame width {frame.shape[1]} does not match "
            f"{width} + ({taps} - 1) * {step}"
        )
    views = np.stack([frame[:, i * step : i * step + width] for i in range(taps)])
    return np.tensordot(w, views, axes=([1], [0])) + b[:, None, None]


def shifted_taps_backward(
    frame: np.ndarray, w: np.ndarray, g: np.ndarray, width: int, step: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dframe, dw, db) of shifted_taps_forward."""
    taps = w.shape[1]
    views = np.stack([frame[:, i * step : i * step + width] for i in range(taps)])
    grad_w = np.tensordot(g, views, axes=([1, 2], [1, 2]))
    grad_b = g.sum(axis=(1, 2))
    grad_frame = np.zeros_like(frame)
    for i in range(taps):
        grad_frame[:, i * step : i * step + width] += np.tensordot(
            w[:, i], g, axes=([0], [0])
        )
    return grad_frame, grad_w, grad_b


def mean_pool2_forward(x: np.ndarray) -> np.ndarray:
    """2x2 mean pooling; spatial dims must be even."""
    c, y, w = x.shape
    if y % 2 or w % 2:
        raise ValueError("mean_pool2 requires even spatial dimensions")
    return x.reshape(c, y // 2, 2, w // 2, 2).mean(axis=(2, 4))


def mean_pool2_backward(g: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(g, 2, axis=1), 2, axis=2) / 4.0


def nearest_up2_forward(x: np.ndarray) -> np.ndarray:
    """Nearest-neighbour 2x upsampling (each pixel becomes a 2x2 block)."""
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


def nearest_up2_backward(g: np.ndarray) -> np.ndarray:
    c, y, w = g.shape
    return g.reshape(c, y // 2, 2, w // 2, 2).sum(axis=(2, 4))


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    return g * (x > 0.0)
