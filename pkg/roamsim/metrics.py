"""
Frame quality metrics and per-horizon curves.

PSNR of identical frames is reported as ``PSNR_CAP`` with ``exact`` set,
so curves stay finite and plottable. SSIM works on the channel mean with
an 11x11 Gaussian window (sigma 1.5) over valid windows only. Standard
deviations across clips use the population form (denominator n).
"""
import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from roamsim.exceptions import MetricsError

logger = logging.getLogger("roamsim-metrics")

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
K1 = 0.01
K2 = 0.03
DYNAMIC_RANGE = 1.0

CSV_COLUMNS = ('t', 'psnr_mean', 'psnr_std', 'ssim_mean', 'ssim_std')


@dataclass(frozen=True)
class PSNRValue:
    db: float
    exact: bool = False

    def __float__(self):
        return self.db


def _check_pair(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise MetricsError(f"frame shapes differ: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray) -> PSNRValue:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNRValue(PSNR_CAP, exact=True)
    return PSNRValue(min(PSNR_CAP, 10.0 * math.log10(
        DYNAMIC_RANGE ** 2 / mse)))


def gaussian_window(size: int = SSIM_WINDOW,
                    sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def _grayscale(frame: np.ndarray) -> np.ndarray:
    frame = np.asarray(frame, dtype=np.float64)
    return frame.mean(axis=-1) if frame.ndim == 3 else frame


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    _check_pair(np.asarray(a), np.asarray(b))
    x, y = _grayscale(a), _grayscale(b)
    if min(x.shape) < SSIM_WINDOW:
        raise MetricsError(
            f"frame {x.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} "
            f"SSIM window")
    if np.array_equal(x, y):
        return 1.0
    w = gaussian_window()

    def filtered(img):
        windows = sliding_window_view(img, w.shape)
        return np.einsum('hwij,ij->hw', windows, w)

    mu_x, mu_y = filtered(x), filtered(y)
    var_x = filtered(x * x) - mu_x * mu_x
    var_y = filtered(y * y) - mu_y * mu_y
    cov = filtered(x * y) - mu_x * mu_y
    c1 = (K1 * DYNAMIC_RANGE) ** 2
    c2 = (K2 * DYNAMIC_RANGE) ** 2
    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    denominator = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
    return float(np.clip(np.mean(numerator / denominator), -1.0, 1.0))


@dataclass
class MetricCurve:
    """
    Per-timestep statistics over clips, index 0 is t = 1

    :param exact: number of clips with a capped (perfect) PSNR per t
    """
    name: str
    mean: List[float] = field(default_factory=list)
    std: List[float] = field(default_factory=list)
    median: List[float] = field(default_factory=list)
    exact: List[int] = field(default_factory=list)

    def __len__(self):
        return len(self.mean)


def _curve(name: str, values: np.ndarray, exact=None) -> MetricCurve:
    # values: (clips, horizon)
    return MetricCurve(
        name=name,
        mean=[float(v) for v in values.mean(axis=0)],
        std=[float(v) for v in values.std(axis=0)],
        median=[float(v) for v in np.median(values, axis=0)],
        exact=([int(v) for v in exact.sum(axis=0)] if exact is not None
               else [0] * values.shape[1]))


def evaluate(pred_clips: Sequence[Sequence[np.ndarray]],
             gt_clips: Sequence[Sequence[np.ndarray]]
             ) -> Dict[str, MetricCurve]:
    """
    PSNR and SSIM curves of aligned predicted and ground truth clips
    """
    if not pred_clips:
        raise MetricsError("no clips to evaluate")
    if len(pred_clips) != len(gt_clips):
        raise MetricsError(f"{len(pred_clips)} predicted clips for "
                           f"{len(gt_clips)} ground truth clips")
    horizon = len(pred_clips[0])
    if horizon == 0:
        raise MetricsError("empty clip")
    for k, (pred, gt) in enumerate(zip(pred_clips, gt_clips)):
        if len(pred) != horizon or len(gt) != horizon:
            raise MetricsError(
                f"clip {k}: {len(pred)} predicted and {len(gt)} ground "
                f"truth frames, expected {horizon}")

    psnr_values = np.zeros((len(pred_clips), horizon))
    psnr_exact = np.zeros((len(pred_clips), horizon), dtype=bool)
    ssim_values = np.zeros((len(pred_clips), horizon))
    for c, (pred, gt) in enumerate(zip(pred_clips, gt_clips)):
        for t in range(horizon):
            value = psnr(pred[t], gt[t])
            psnr_values[c, t] = value.db
            psnr_exact[c, t] = value.exact
            ssim_values[c, t] = ssim(pred[t], gt[t])
    logger.info("Evaluated %d clip(s) over %d step(s)", len(pred_clips),
                horizon)
    return {'psnr': _curve('psnr', psnr_values, psnr_exact),
            'ssim': _curve('ssim', ssim_values)}


def write_curves_csv(path, curves: Dict[str, MetricCurve]):
    psnr_curve, ssim_curve = curves['psnr'], curves['ssim']
    with open(path, 'w', newline='') as fp:
        writer = csv.writer(fp, lineterminator='\n')
        writer.writerow(CSV_COLUMNS)
        for t in range(len(psnr_curve)):
            writer.writerow([
                t + 1,
                repr(psnr_curve.mean[t]), repr(psnr_curve.std[t]),
                repr(ssim_curve.mean[t]), repr(ssim_curve.std[t])])


def format_report(curves: Dict[str, MetricCurve], clips: int) -> str:
    psnr_curve, ssim_curve = curves['psnr'], curves['ssim']
    lines = [
        f"clips: {clips}",
        f"horizon: {len(psnr_curve)}",
        f"psnr mean: {np.mean(psnr_curve.mean):.4f} dB",
        f"psnr median: {np.median(psnr_curve.median):.4f} dB",
        f"psnr exact (capped at {PSNR_CAP:g} dB): "
        f"{sum(psnr_curve.exact)}",
        f"ssim mean: {np.mean(ssim_curve.mean):.6f}",
        f"ssim median: {np.median(ssim_curve.median):.6f}",
    ]
    return '\n'.join(lines) + '\n'
