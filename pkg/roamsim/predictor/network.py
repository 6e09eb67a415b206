"""
Action-conditioned frame predictor.

Frames enter and leave in [0, 1]. Inside the network frames live in
[-1, 1] (``2 * p - 1``) and the decoder ends in tanh. Flow maps are
differences of [0, 1] frames, so they stay in [-1, 1].

Channel plan (3x3 convolutions, leaky ReLU 0.2 unless noted)::

    motion:  [flow, action] 5 -> conv s2 16 -> conv s2 32
             -> gated recurrent cell 32 (update/reset sigmoid, candidate tanh)
    content: [frame, action] 5 -> conv 8 -> conv s2 16 -> conv s2 32
    fusion:  [content, motion] 64 -> conv 32
    decoder: up x2 -> conv 16 (+ content skip 16)
             -> up x2 -> conv 8 (+ content skip 8) -> conv 3 -> tanh

Recurrent cell update: ``h' = z * h + (1 - z) * n``.

Parameters whose name starts with ``motion.`` make up the recurrent group,
everything else the feed-forward group.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from roamsim.config import OMEGA_MAX, V_MAX, TrainConfig
from roamsim.exceptions import InvalidActionError, ShapeMismatchError
from roamsim.models import Twist
from roamsim.predictor.layers import (
    conv2d, conv2d_backward, leaky_relu, leaky_relu_backward, sigmoid,
    upsample2, upsample2_backward)
from roamsim.predictor.loss import loss_and_grad
from roamsim.rng import SplitMix64
from roamsim.serialization.msgpack import register

logger = logging.getLogger("roamsim-predictor")

ACTION_CHANNELS = 2
HIDDEN = 32
BLIND_VALUE = 0.5
RECURRENT_PREFIX = 'motion.'

# name, input channels, output channels, stride
LAYOUT = (
    ('motion.conv1', 3 + ACTION_CHANNELS, 16, 2),
    ('motion.conv2', 16, 32, 2),
    ('motion.gru.update', 32 + HIDDEN, HIDDEN, 1),
    ('motion.gru.reset', 32 + HIDDEN, HIDDEN, 1),
    ('motion.gru.candidate', 32 + HIDDEN, HIDDEN, 1),
    ('content.conv1', 3 + ACTION_CHANNELS, 8, 1),
    ('content.conv2', 8, 16, 2),
    ('content.conv3', 16, 32, 2),
    ('fusion.conv', 32 + HIDDEN, 32, 1),
    ('decoder.conv1', 32, 16, 1),
    ('decoder.conv2', 16, 8, 1),
    ('decoder.output', 8, 3, 1),
)
STRIDES = {name: stride for name, _, _, stride in LAYOUT}


@dataclass(eq=False)
class ModelParams:
    """
    :param weights: ``<layer>.w`` kernels (3, 3, Cin, Cout) and
        ``<layer>.b`` biases (Cout,), in LAYOUT order
    :param action_blind: replace every action map by 0.5
    :param init_seed: seed the weights were initialized from
    """
    weights: Dict[str, np.ndarray] = field(default_factory=dict)
    action_blind: bool = False
    init_seed: int = 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.weights[name]

    @property
    def dtype(self):
        return next(iter(self.weights.values())).dtype

    def names(self) -> List[str]:
        return list(self.weights)

    def recurrent_names(self) -> List[str]:
        return [n for n in self.weights if n.startswith(RECURRENT_PREFIX)]

    def feedforward_names(self) -> List[str]:
        return [n for n in self.weights if not n.startswith(RECURRENT_PREFIX)]

    def parameter_count(self) -> int:
        return int(sum(w.size for w in self.weights.values()))

    def copy(self) -> 'ModelParams':
        return ModelParams({n: w.copy() for n, w in self.weights.items()},
                           self.action_blind, self.init_seed)

    def astype(self, dtype) -> 'ModelParams':
        return ModelParams(
            {n: w.astype(dtype) for n, w in self.weights.items()},
            self.action_blind, self.init_seed)


register(ModelParams)


def init_params(seed: int = 0, action_blind: bool = False,
                dtype='float32') -> ModelParams:
    """
    He-style Gaussian kernels (std sqrt(2 / fan_in)) and zero biases
    """
    rng = SplitMix64(seed)
    weights = {}
    for name, c_in, c_out, _ in LAYOUT:
        std = np.sqrt(2.0 / (9 * c_in))
        weights[name + '.w'] = rng.normal_array(
            (3, 3, c_in, c_out), std=std).astype(dtype)
        weights[name + '.b'] = np.zeros(c_out, dtype=dtype)
    logger.debug("Initialized %d parameters from seed %d",
                 sum(w.size for w in weights.values()), seed)
    return ModelParams(weights, action_blind, seed)


def ablation_action_blind(params: ModelParams) -> ModelParams:
    """
    Same weights and architecture, actions replaced by constant maps
    """
    blind = params.copy()
    blind.action_blind = True
    return blind


def flow_map(x_t: np.ndarray, x_prev: np.ndarray) -> np.ndarray:
    if x_t.shape != x_prev.shape:
        raise ShapeMismatchError(
            f"flow of {x_t.shape} and {x_prev.shape} frames")
    return x_t - x_prev


def action_vector(actions) -> np.ndarray:
    """
    Twists (or (v, omega) pairs) to a (..., 2) array
    """
    if isinstance(actions, Twist):
        return np.array([actions.v, actions.omega])
    if len(actions) and isinstance(actions[0], Twist):
        return np.array([[a.v, a.omega] for a in actions])
    return np.asarray(actions, dtype=np.float64)


def normalize_actions(actions: np.ndarray, blind: bool = False
                      ) -> np.ndarray:
    """
    (..., 2) raw (v, omega) to [0, 1] per channel
    """
    actions = np.asarray(actions, dtype=np.float64)
    if blind:
        return np.full(actions.shape, BLIND_VALUE)
    v, omega = actions[..., 0], actions[..., 1]
    if not (np.all(np.isfinite(actions))
            and np.all((v >= 0.0) & (v <= V_MAX))
            and np.all(np.abs(omega) <= OMEGA_MAX)):
        raise InvalidActionError("action outside the actuation envelope")
    return np.stack([v / V_MAX, (omega + OMEGA_MAX) / (2.0 * OMEGA_MAX)],
                    axis=-1)


def action_map(action: Twist, height: int, width: int,
               blind: bool = False) -> np.ndarray:
    values = normalize_actions(action_vector(action), blind)
    return np.broadcast_to(values, (height, width, ACTION_CHANNELS)).copy()


def augment(x: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    if x.shape[:-1] != alpha.shape[:-1]:
        raise ShapeMismatchError(
            f"cannot augment {x.shape} with action map {alpha.shape}")
    return np.concatenate([x, alpha.astype(x.dtype)], axis=-1)


def _maps(actions: np.ndarray, shape, blind: bool, dtype) -> np.ndarray:
    # (N, 2) raw actions -> (N, H, W, 2)
    values = normalize_actions(actions, blind).astype(dtype)
    n, height, width = shape
    return np.broadcast_to(values[:, None, None, :],
                           (n, height, width, ACTION_CHANNELS))


def _conv(params: ModelParams, name: str, x: np.ndarray):
    return conv2d(x, params[name + '.w'], params[name + '.b'],
                  STRIDES[name])


def _accumulate(grads: Dict[str, np.ndarray], name: str, dw, db):
    grads[name + '.w'] += dw
    grads[name + '.b'] += db


def _encode(params: ModelParams, h: np.ndarray, o_hat: np.ndarray):
    m1_pre, mem1 = _conv(params, 'motion.conv1', o_hat)
    m1, _ = leaky_relu(m1_pre)
    m2_pre, mem2 = _conv(params, 'motion.conv2', m1)
    m2, _ = leaky_relu(m2_pre)
    if h.shape != m2.shape[:-1] + (HIDDEN,):
        raise ShapeMismatchError(
            f"state {h.shape} does not fit motion features {m2.shape}")
    xh = np.concatenate([m2, h], axis=-1)
    z_pre, mem_z = _conv(params, 'motion.gru.update', xh)
    r_pre, mem_r = _conv(params, 'motion.gru.reset', xh)
    z, r = sigmoid(z_pre), sigmoid(r_pre)
    n_pre, mem_n = _conv(params, 'motion.gru.candidate',
                         np.concatenate([m2, r * h], axis=-1))
    n = np.tanh(n_pre)
    h_next = z * h + (1.0 - z) * n
    memory = (h, m1_pre, mem1, m2_pre, mem2, z, mem_z, r, mem_r, n, mem_n)
    return h_next, memory


def _encode_backward(params: ModelParams, dh_next: np.ndarray, memory,
                     grads: Dict[str, np.ndarray]):
    h, m1_pre, mem1, m2_pre, mem2, z, mem_z, r, mem_r, n, mem_n = memory
    dz = dh_next * (h - n)
    dh = dh_next * z
    dn_pre = dh_next * (1.0 - z) * (1.0 - n * n)
    dxrh, dw, db = conv2d_backward(dn_pre, mem_n)
    _accumulate(grads, 'motion.gru.candidate', dw, db)
    dm2 = dxrh[..., :32]
    drh = dxrh[..., 32:]
    dh += drh * r
    dr_pre = drh * h * r * (1.0 - r)
    dxh, dw, db = conv2d_backward(dr_pre, mem_r)
    _accumulate(grads, 'motion.gru.reset', dw, db)
    dz_pre = dz * z * (1.0 - z)
    dxh_z, dw, db = conv2d_backward(dz_pre, mem_z)
    _accumulate(grads, 'motion.gru.update', dw, db)
    dxh = dxh + dxh_z
    dm2 = dm2 + dxh[..., :32]
    dh += dxh[..., 32:]
    dm1, dw, db = conv2d_backward(leaky_relu_backward(dm2, m2_pre), mem2)
    _accumulate(grads, 'motion.conv2', dw, db)
    do_hat, dw, db = conv2d_backward(leaky_relu_backward(dm1, m1_pre), mem1)
    _accumulate(grads, 'motion.conv1', dw, db)
    return dh, do_hat[..., :3]


def _decode(params: ModelParams, x_hat: np.ndarray, f: np.ndarray):
    c1_pre, mem_c1 = _conv(params, 'content.conv1', x_hat)
    c1, _ = leaky_relu(c1_pre)
    c2_pre, mem_c2 = _conv(params, 'content.conv2', c1)
    c2, _ = leaky_relu(c2_pre)
    c3_pre, mem_c3 = _conv(params, 'content.conv3', c2)
    c3, _ = leaky_relu(c3_pre)
    if f.shape[:-1] != c3.shape[:-1]:
        raise ShapeMismatchError(
            f"motion features {f.shape} do not fit content {c3.shape}")
    u_pre, mem_u = _conv(params, 'fusion.conv',
                         np.concatenate([c3, f], axis=-1))
    u, _ = leaky_relu(u_pre)
    d1_pre, mem_d1 = _conv(params, 'decoder.conv1', upsample2(u))
    d1 = leaky_relu(d1_pre)[0] + c2
    d2_pre, mem_d2 = _conv(params, 'decoder.conv2', upsample2(d1))
    d2 = leaky_relu(d2_pre)[0] + c1
    y_pre, mem_y = _conv(params, 'decoder.output', d2)
    y = np.tanh(y_pre)
    memory = (c1_pre, mem_c1, c2_pre, mem_c2, c3_pre, mem_c3, u_pre, mem_u,
              d1_pre, mem_d1, d2_pre, mem_d2, y, mem_y)
    return y, memory


def _decode_backward(params: ModelParams, dy: np.ndarray, memory,
                     grads: Dict[str, np.ndarray]):
    (c1_pre, mem_c1, c2_pre, mem_c2, c3_pre, mem_c3, u_pre, mem_u,
     d1_pre, mem_d1, d2_pre, mem_d2, y, mem_y) = memory
    dd2, dw, db = conv2d_backward(dy * (1.0 - y * y), mem_y)
    _accumulate(grads, 'decoder.output', dw, db)
    dc1 = dd2
    dup, dw, db = conv2d_backward(leaky_relu_backward(dd2, d2_pre), mem_d2)
    _accumulate(grads, 'decoder.conv2', dw, db)
    dd1 = upsample2_backward(dup)
    dc2 = dd1
    dup, dw, db = conv2d_backward(leaky_relu_backward(dd1, d1_pre), mem_d1)
    _accumulate(grads, 'decoder.conv1', dw, db)
    du = upsample2_backward(dup)
    dcat, dw, db = conv2d_backward(leaky_relu_backward(du, u_pre), mem_u)
    _accumulate(grads, 'fusion.conv', dw, db)
    dc3, df = dcat[..., :32], dcat[..., 32:]
    dx, dw, db = conv2d_backward(leaky_relu_backward(dc3, c3_pre), mem_c3)
    _accumulate(grads, 'content.conv3', dw, db)
    dc2 = dc2 + dx
    dx, dw, db = conv2d_backward(leaky_relu_backward(dc2, c2_pre), mem_c2)
    _accumulate(grads, 'content.conv2', dw, db)
    dc1 = dc1 + dx
    dx_hat, dw, db = conv2d_backward(leaky_relu_backward(dc1, c1_pre),
                                     mem_c1)
    _accumulate(grads, 'content.conv1', dw, db)
    return dx_hat[..., :3], df


def initial_state(height: int, width: int, batch: Optional[int] = None,
                  dtype='float64') -> np.ndarray:
    """
    Zero recurrent state for frames of height x width
    """
    shape = (height // 4, width // 4, HIDDEN)
    if batch is not None:
        shape = (batch,) + shape
    return np.zeros(shape, dtype=dtype)


def _batched(x: np.ndarray, ndim: int) -> Tuple[np.ndarray, bool]:
    if x.ndim == ndim - 1:
        return x[None], True
    return x, False


def motion_encode(state: np.ndarray, o_hat: np.ndarray,
                  params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    One recurrent step on an augmented flow map, returns the motion
    features and the new state (the same tensor)
    """
    o_hat, single = _batched(o_hat, 4)
    state, _ = _batched(state, 4)
    h_next, _ = _encode(params, state, o_hat)
    if single:
        h_next = h_next[0]
    return h_next, h_next


def predict_step(x_hat: np.ndarray, f: np.ndarray,
                 params: ModelParams) -> np.ndarray:
    """
    Next [0, 1] frame from an augmented [0, 1] frame and motion features
    """
    x_hat, single = _batched(x_hat, 4)
    f, _ = _batched(f, 4)
    net_in = np.concatenate(
        [2.0 * x_hat[..., :3] - 1.0, x_hat[..., 3:]], axis=-1)
    y, _ = _decode(params, net_in, f)
    frame = 0.5 * (y + 1.0)
    return frame[0] if single else frame


def predict_next(params: ModelParams, x_t: np.ndarray, x_prev: np.ndarray,
                 action: Twist, state: np.ndarray
                 ) -> Tuple[np.ndarray, np.ndarray]:
    """
    The composed one-step predictor: flow and action map, motion
    encoding and decoding in one pass. Returns (frame, state').
    """
    x_t, single = _batched(x_t, 4)
    x_prev, _ = _batched(x_prev, 4)
    state, _ = _batched(state, 4)
    if x_t.shape != x_prev.shape:
        raise ShapeMismatchError(
            f"flow of {x_t.shape} and {x_prev.shape} frames")
    n, height, width, _ = x_t.shape
    alpha = _maps(np.tile(action_vector(action), (n, 1)),
                  (n, height, width), params.action_blind, x_t.dtype)
    h, _ = _encode(params, state,
                   np.concatenate([x_t - x_prev, alpha], axis=-1))
    y, _ = _decode(params, np.concatenate([2.0 * x_t - 1.0, alpha], axis=-1),
                   h)
    frame = 0.5 * (y + 1.0)
    if single:
        return frame[0], h[0]
    return frame, h


class RolloutTape(object):
    """
    Everything the backward pass needs from one batched rollout
    """

    def __init__(self, params: ModelParams, context: int, horizon: int):
        self.params = params
        self.context = context
        self.horizon = horizon
        self.warmup: List[tuple] = []
        self.encodes: List[Optional[tuple]] = []
        self.decodes: List[tuple] = []


def _check_rollout_inputs(frames: np.ndarray, actions: np.ndarray,
                          horizon: int):
    if frames.ndim != 5 or frames.shape[-1] != 3:
        raise ShapeMismatchError(
            f"expected (N, T, H, W, 3) context frames, got {frames.shape}")
    if frames.shape[1] < 2:
        raise ShapeMismatchError("need at least 2 context frames")
    height, width = frames.shape[2:4]
    if height % 4 or width % 4:
        raise ShapeMismatchError(
            f"frame size {height}x{width} is not divisible by 4")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if actions.ndim != 3 or actions.shape[0] != frames.shape[0] \
            or actions.shape[2] != ACTION_CHANNELS:
        raise ShapeMismatchError(
            f"expected ({frames.shape[0]}, K, 2) actions, "
            f"got {actions.shape}")
    needed = frames.shape[1] + horizon - 1
    if actions.shape[1] < needed:
        raise InvalidActionError(
            f"{actions.shape[1]} actions, rollout needs {needed}")


def rollout_batch(params: ModelParams, frames: np.ndarray,
                  actions: np.ndarray, horizon: int, record: bool = False):
    """
    :param frames: (N, C, H, W, 3) context frames in [0, 1]
    :param actions: (N, K, 2) raw actions, K >= C + horizon - 1; action k
        is the command applied after frame k, action 0 is not used
    :returns: (N, horizon, H, W, 3) predictions in [-1, 1] and the
        tape (None unless record)
    """
    dtype = params.dtype
    frames = np.asarray(frames, dtype=dtype)
    actions = np.asarray(actions, dtype=np.float64)
    _check_rollout_inputs(frames, actions, horizon)
    n, context, height, width, _ = frames.shape
    shape = (n, height, width)
    tape = RolloutTape(params, context, horizon) if record else None

    def alpha(k):
        return _maps(actions[:, k], shape, params.action_blind, dtype)

    h = initial_state(height, width, n, dtype)
    for k in range(1, context):
        o_hat = np.concatenate(
            [frames[:, k] - frames[:, k - 1], alpha(k)], axis=-1)
        h, memory = _encode(params, h, o_hat)
        if record:
            tape.warmup.append(memory)

    current, previous = frames[:, -1], frames[:, -2]
    x_in = 2.0 * current - 1.0
    outputs = []
    for j in range(horizon):
        k = context - 1 + j
        if j > 0:
            o_hat = np.concatenate([current - previous, alpha(k)], axis=-1)
            h, memory = _encode(params, h, o_hat)
            if record:
                tape.encodes.append(memory)
        elif record:
            tape.encodes.append(None)
        y, memory = _decode(params, np.concatenate([x_in, alpha(k)], axis=-1),
                            h)
        if record:
            tape.decodes.append(memory)
        outputs.append(y)
        previous, current = current, 0.5 * (y + 1.0)
        x_in = y
    return np.stack(outputs, axis=1), tape


def backward(tape: RolloutTape, dpred: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Reverse-mode gradients of a scalar loss through a recorded rollout

    :param dpred: (N, horizon, H, W, 3) gradient of the loss with respect
        to the [-1, 1] predictions
    """
    params = tape.params
    grads = {name: np.zeros_like(w) for name, w in params.weights.items()}
    horizon = tape.horizon
    # gradient w.r.t. each prediction in [-1, 1] and in [0, 1]
    d_internal = [dpred[:, j].copy() for j in range(horizon)]
    d_pixel = [np.zeros_like(dpred[:, j]) for j in range(horizon)]
    dh = None
    for j in reversed(range(horizon)):
        dy = d_internal[j] + 0.5 * d_pixel[j]
        dx_in, df = _decode_backward(params, dy, tape.decodes[j], grads)
        dh = df if dh is None else dh + df
        if j > 0:
            d_internal[j - 1] += dx_in
            dh, dflow = _encode_backward(params, dh, tape.encodes[j], grads)
            d_pixel[j - 1] += dflow
            if j > 1:
                d_pixel[j - 2] -= dflow
    for memory in reversed(tape.warmup):
        dh, _ = _encode_backward(params, dh, memory, grads)
    return grads


def rollout(params: ModelParams, context_frames: Sequence[np.ndarray],
            actions: Sequence[Twist], horizon: int) -> List[np.ndarray]:
    """
    Predict horizon frames after the context frames, feeding each
    prediction back in. Returns [0, 1] frames.
    """
    frames = np.asarray(context_frames)[None]
    predicted, _ = rollout_batch(params, frames,
                                 action_vector(actions)[None], horizon)
    return [0.5 * (y + 1.0) for y in predicted[0]]


def split_window(window: np.ndarray, context: int):
    """
    (N, C + T, H, W, 3) [0, 1] frames to context frames and [-1, 1] targets
    """
    return window[:, :context], 2.0 * window[:, context:] - 1.0


def loss_and_gradients(params: ModelParams, window: np.ndarray,
                       actions: np.ndarray, cfg: TrainConfig = None):
    """
    Rollout over the first cfg.context frames of window, loss against the
    rest and gradients for every parameter
    """
    cfg = cfg or TrainConfig()
    window = np.asarray(window, dtype=params.dtype)
    context, targets = split_window(window, cfg.context)
    predicted, tape = rollout_batch(params, context, actions,
                                    targets.shape[1], record=True)
    value, dpred = loss_and_grad(predicted, targets, cfg)
    return value, backward(tape, dpred)


def loss_only(params: ModelParams, window: np.ndarray, actions: np.ndarray,
              cfg: TrainConfig = None) -> float:
    cfg = cfg or TrainConfig()
    window = np.asarray(window, dtype=params.dtype)
    context, targets = split_window(window, cfg.context)
    predicted, _ = rollout_batch(params, context, actions, targets.shape[1])
    return loss_and_grad(predicted, targets, cfg)[0].total


@dataclass
class GradientCheck:
    """
    :param entries: (parameter name, flat index, analytic, numeric,
        relative error)
    """
    entries: List[tuple] = field(default_factory=list)
    tolerance: float = 1e-3

    @property
    def max_error(self) -> float:
        return max((e[4] for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return all(e[4] <= self.tolerance for e in self.entries)

    def format(self) -> str:
        lines = [f"{'parameter':<26} {'index':>6} {'analytic':>14} "
                 f"{'numeric':>14} {'rel err':>10}"]
        for name, index, analytic, numeric, error in self.entries:
            lines.append(f"{name:<26} {index:>6} {analytic:>14.6e} "
                         f"{numeric:>14.6e} {error:>10.2e}")
        lines.append(f"max relative error {self.max_error:.3e}, "
                     f"{'passed' if self.passed else 'FAILED'}")
        return '\n'.join(lines)


def gradient_check(params: ModelParams, window: np.ndarray,
                   actions: np.ndarray, cfg: TrainConfig = None,
                   samples: int = 100, step: float = 1e-5, seed: int = 0,
                   tolerance: float = 1e-3) -> GradientCheck:
    """
    Compare analytic gradients with central differences on sampled
    parameters, cycling over every parameter block. Runs in float64.

    Relative error is |analytic - numeric| / max(1e-8, |numeric|); an
    absolute difference below 1e-9 also passes.
    """
    cfg = cfg or TrainConfig()
    params = params.astype(np.float64)
    window = np.asarray(window, dtype=np.float64)
    _, grads = loss_and_gradients(params, window, actions, cfg)
    rng = SplitMix64(seed)
    names = params.names()
    report = GradientCheck(tolerance=tolerance)
    for i in range(samples):
        name = names[i % len(names)]
        flat = params.weights[name].reshape(-1)
        index = rng.randint(0, flat.size - 1)
        original = flat[index]
        flat[index] = original + step
        plus = loss_only(params, window, actions, cfg)
        flat[index] = original - step
        minus = loss_only(params, window, actions, cfg)
        flat[index] = original
        numeric = (plus - minus) / (2.0 * step)
        analytic = float(grads[name].reshape(-1)[index])
        difference = abs(analytic - numeric)
        error = 0.0 if difference <= 1e-9 else \
            difference / max(1e-8, abs(numeric))
        report.entries.append((name, index, analytic, numeric, error))
        logger.debug("gradient check %s[%d]: analytic %.6e numeric %.6e",
                     name, index, analytic, numeric)
    return report
