"""
Forward/backward pairs for the predictor's building blocks.

Tensors are NHWC. Every forward returns ``(out, memory)``; the matching
backward takes the upstream gradient and that memory and returns the
input gradient (and parameter gradients where there are any).
Convolutions are 3x3 with zero padding 1.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from roamsim.exceptions import ShapeMismatchError

KERNEL = 3
PAD = 1
LEAK = 0.2


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1):
    """
    :param x: (N, H, W, Cin)
    :param w: (3, 3, Cin, Cout)
    :param b: (Cout,)
    """
    if x.shape[-1] != w.shape[2]:
        raise ShapeMismatchError(
            f"conv input has {x.shape[-1]} channels, kernel expects "
            f"{w.shape[2]}")
    xp = np.pad(x, ((0, 0), (PAD, PAD), (PAD, PAD), (0, 0)))
    # (N, H', W', Cin, 3, 3)
    windows = sliding_window_view(xp, (KERNEL, KERNEL), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]
    out = np.einsum('nhwcij,ijco->nhwo', windows, w, optimize=True) + b
    return out, (xp.shape, windows, w, stride)


def conv2d_backward(dout: np.ndarray, memory):
    padded_shape, windows, w, stride = memory
    dw = np.einsum('nhwcij,nhwo->ijco', windows, dout, optimize=True)
    db = dout.sum(axis=(0, 1, 2))
    dxp = np.zeros(padded_shape, dtype=dout.dtype)
    out_h, out_w = dout.shape[1:3]
    for i in range(KERNEL):
        for j in range(KERNEL):
            dxp[:, i:i + stride * out_h:stride,
                j:j + stride * out_w:stride, :] += dout @ w[i, j].T
    return dxp[:, PAD:-PAD, PAD:-PAD, :], dw, db


def leaky_relu(x: np.ndarray):
    return np.where(x > 0, x, LEAK * x), x


def leaky_relu_backward(dout: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, dout, LEAK * dout)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def upsample2(x: np.ndarray) -> np.ndarray:
    """
    Nearest neighbour x2
    """
    return x.repeat(2, axis=1).repeat(2, axis=2)


def upsample2_backward(dout: np.ndarray) -> np.ndarray:
    n, h, w, c = dout.shape
    return dout.reshape(n, h // 2, 2, w // 2, 2, c).sum(axis=(2, 4))
