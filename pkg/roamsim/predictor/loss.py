"""
Training objective on [-1, 1] frames::

    alpha_rec * mean(|pred - target| ** p)
        + lambda_gdl * (mean(| |dx pred| - |dx target| |)
                        + mean(| |dy pred| - |dy target| |))

dx and dy are forward differences along width and height.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from roamsim.config import TrainConfig
from roamsim.exceptions import ShapeMismatchError


@dataclass(frozen=True)
class LossValue:
    total: float
    mse: float
    gdl: float


def _gdl_axis(pred: np.ndarray, target: np.ndarray, axis: int):
    d_pred = np.diff(pred, axis=axis)
    d_target = np.diff(target, axis=axis)
    gap = np.abs(d_pred) - np.abs(d_target)
    value = np.mean(np.abs(gap))
    # gradient w.r.t. d_pred, then scatter back through the difference
    d_diff = np.sign(gap) * np.sign(d_pred) / gap.size
    grad = np.zeros_like(pred)
    head = [slice(None)] * pred.ndim
    tail = [slice(None)] * pred.ndim
    head[axis] = slice(1, None)
    tail[axis] = slice(None, -1)
    grad[tuple(head)] += d_diff
    grad[tuple(tail)] -= d_diff
    return value, grad


def loss_and_grad(pred: np.ndarray, target: np.ndarray,
                  cfg: TrainConfig = None) -> Tuple[LossValue, np.ndarray]:
    """
    :param pred: (..., H, W, 3) predictions in [-1, 1]
    :param target: same shape
    :returns: the loss terms and d total / d pred
    """
    cfg = cfg or TrainConfig()
    pred = np.asarray(pred)
    target = np.asarray(target, dtype=pred.dtype)
    if pred.shape != target.shape:
        raise ShapeMismatchError(
            f"prediction {pred.shape} vs target {target.shape}")
    diff = pred - target
    magnitude = np.abs(diff)
    rec = float(np.mean(magnitude ** cfg.p))
    d_rec = cfg.p * magnitude ** (cfg.p - 1.0) * np.sign(diff) / diff.size

    gdl_w, d_gdl_w = _gdl_axis(pred, target, axis=-2)
    gdl_h, d_gdl_h = _gdl_axis(pred, target, axis=-3)
    gdl = float(gdl_w + gdl_h)

    total = cfg.alpha_rec * rec + cfg.lambda_gdl * gdl
    grad = cfg.alpha_rec * d_rec + cfg.lambda_gdl * (d_gdl_w + d_gdl_h)
    return LossValue(total, rec, gdl), grad.astype(pred.dtype)


def loss(pred, target, cfg: TrainConfig = None) -> float:
    """
    Scalar objective of predicted against target frames, both in [-1, 1]
    """
    return loss_and_grad(np.asarray(pred), np.asarray(target), cfg)[0].total
