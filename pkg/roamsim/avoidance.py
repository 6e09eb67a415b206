"""
Collision-cone reactive planner.

Every finite laser return within the planning horizon is an obstacle
point. A point at distance d and bearing b is threatening when the robot's
heading lies inside its collision cone, |b| <= asin(min(1, r_safe / d)).
Without threats the robot cruises straight on. Otherwise it turns toward
the centre of the widest run of free headings within +-90 degrees, a
heading being free when it lies outside every obstacle cone, and slows
down in proportion to the clearance of the nearest threat. Equally wide
runs resolve to the left.
"""
import logging
import math

import numpy as np

from roamsim.config import PlannerConfig
from roamsim.lidar import BEAMS
from roamsim.models import Scan, Twist

logger = logging.getLogger("roamsim-avoidance")

# signed bearing in degrees of every beam index, (-180, 180]
_BEARINGS = np.where(np.arange(BEAMS) <= 180, np.arange(BEAMS),
                     np.arange(BEAMS) - BEAMS).astype(np.float64)
_HEADINGS = np.arange(-90, 91, dtype=np.float64)


def cone_half_angles(distances: np.ndarray, r_safe: float) -> np.ndarray:
    """
    Collision cone half-angle in degrees per obstacle distance
    """
    return np.degrees(np.arcsin(np.minimum(1.0, r_safe / distances)))


def free_runs(blocked: np.ndarray):
    """
    (start, stop) index pairs of maximal runs of False, inclusive
    """
    runs = []
    start = None
    for index, value in enumerate(blocked):
        if not value and start is None:
            start = index
        elif value and start is not None:
            runs.append((start, index - 1))
            start = None
    if start is not None:
        runs.append((start, len(blocked) - 1))
    return runs


def plan(scan: Scan, state: Twist, cfg: PlannerConfig = None) -> Twist:
    """
    Map a scan to a commanded twist. state is the current command,
    the cone is evaluated around the robot's heading.
    """
    cfg = cfg or PlannerConfig()
    ranges = np.asarray(scan.ranges, dtype=np.float64)
    near = np.isfinite(ranges) & (ranges <= cfg.horizon)
    distances = ranges[near]
    bearings = _BEARINGS[near]

    if distances.size == 0:
        return Twist(cfg.v_max, 0.0)

    half = cone_half_angles(distances, cfg.r_safe)
    threat = np.abs(bearings) <= half
    if not threat.any():
        return Twist(cfg.v_max, 0.0)

    d_min = float(distances[threat].min())
    scale = (d_min - cfg.stop_range) / (cfg.horizon - cfg.stop_range)
    v = cfg.v_max * min(max(scale, 0.0), 1.0)

    blocked = (np.abs(_HEADINGS[:, None] - bearings[None, :])
               <= half[None, :]).any(axis=1)
    runs = free_runs(blocked)
    if not runs:
        logger.debug("All headings blocked, d_min=%.3f", d_min)
        return Twist(0.0, cfg.omega_max)

    # widest run, ties toward the larger (left) heading
    start, stop = max(runs, key=lambda run: (run[1] - run[0], run[0]))
    escape = math.radians((_HEADINGS[start] + _HEADINGS[stop]) / 2.0)
    omega = min(max(cfg.k_turn * escape, -cfg.omega_max), cfg.omega_max)
    logger.debug(
        "Threat at %.3f m, escape %.1f deg -> v=%.4f omega=%.4f",
        d_min, math.degrees(escape), v, omega)
    return Twist(v, omega)
