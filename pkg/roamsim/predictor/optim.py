"""
Adam with bias correction and decoupled weight decay
"""
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from roamsim.config import TrainConfig
from roamsim.exceptions import ShapeMismatchError
from roamsim.serialization.msgpack import register


@dataclass(eq=False)
class AdamState:
    """
    :param step: number of updates applied so far
    :param m: first moments per parameter
    :param v: second moments per parameter
    """
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


register(AdamState)


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
              state: AdamState, cfg: TrainConfig = None
              ) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    theta' = theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta

    Inputs are left untouched; new parameter and moment arrays are
    returned.
    """
    cfg = cfg or TrainConfig()
    step = state.step + 1
    correction1 = 1.0 - cfg.beta1 ** step
    correction2 = 1.0 - cfg.beta2 ** step
    updated, m_next, v_next = {}, {}, {}
    for name, theta in params.items():
        grad = grads[name]
        if grad.shape != theta.shape:
            raise ShapeMismatchError(
                f"{name}: gradient {grad.shape} vs parameter {theta.shape}")
        m = state.m.get(name, np.zeros_like(theta))
        v = state.v.get(name, np.zeros_like(theta))
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        updated[name] = (theta - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
                         - cfg.lr * cfg.weight_decay * theta
                         ).astype(theta.dtype)
        m_next[name] = m.astype(theta.dtype)
        v_next[name] = v.astype(theta.dtype)
    return updated, AdamState(step, m_next, v_next)
