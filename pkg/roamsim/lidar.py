"""
Planar laser scanner modelled after an LDS-01: 360 beams at 1 degree
resolution, 0.12 m minimum and 3.5 m maximum range. Ranges are exact
ray-segment and ray-disk intersections, computed for all beams at once.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from roamsim.config import LidarConfig
from roamsim.models import Pose2, Scan, World
from roamsim.rng import SplitMix64
from roamsim.world import agent_poses as world_agent_poses

logger = logging.getLogger("roamsim-lidar")

BEAMS = 360
RAY_EPS = 1e-12


def intersect_segments(origin: Tuple[float, float], directions: np.ndarray,
                       walls: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nearest ray parameter s (origin + s * direction) against all wall
    segments. With unit directions s is the Euclidean distance.

    :param directions: (R, 2) ray directions
    :param walls: (S, 4) segments as x1, y1, x2, y2
    :return: (R,) nearest s (inf for no hit) and (R,) wall index (-1)
    """
    rays = directions.shape[0]
    if walls.size == 0:
        return np.full(rays, np.inf), np.full(rays, -1)

    dx, dy = directions[:, 0:1], directions[:, 1:2]
    ex = (walls[:, 2] - walls[:, 0])[None, :]
    ey = (walls[:, 3] - walls[:, 1])[None, :]
    wx = (walls[:, 0] - origin[0])[None, :]
    wy = (walls[:, 1] - origin[1])[None, :]

    with np.errstate(divide='ignore', invalid='ignore'):
        denom = dx * ey - dy * ex
        s = (wx * ey - wy * ex) / denom
        u = (dy * wx - dx * wy) / denom
        valid = (denom != 0) & (s > RAY_EPS) & (u >= 0.0) & (u <= 1.0)
    s = np.where(valid, s, np.inf)
    index = np.argmin(s, axis=1)
    nearest = s[np.arange(rays), index]
    return nearest, np.where(np.isfinite(nearest), index, -1)


def intersect_disks(origin: Tuple[float, float], directions: np.ndarray,
                    centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """
    Ray parameter of the first entry into every disk

    :param directions: (R, 2)
    :param centers: (A, 2)
    :param radii: (A,)
    :return: (R, A) ray parameters, inf where a ray misses
    """
    rays = directions.shape[0]
    if centers.size == 0:
        return np.full((rays, 0), np.inf)

    fx = (origin[0] - centers[:, 0])[None, :]
    fy = (origin[1] - centers[:, 1])[None, :]
    dx, dy = directions[:, 0:1], directions[:, 1:2]
    a = dx * dx + dy * dy
    b = 2.0 * (fx * dx + fy * dy)
    c = fx * fx + fy * fy - (radii * radii)[None, :]
    disc = b * b - 4.0 * a * c
    with np.errstate(invalid='ignore'):
        s = (-b - np.sqrt(disc)) / (2.0 * a)
    valid = (disc >= 0) & (s > RAY_EPS) & (c > 0)
    return np.where(valid, s, np.inf)


def wall_array(world: World) -> np.ndarray:
    return np.asarray(world.walls, dtype=np.float64).reshape(-1, 4)


def agent_arrays(world: World, poses: Sequence[Pose2]):
    centers = np.array([[p.x, p.y] for p in poses],
                       dtype=np.float64).reshape(-1, 2)
    radii = np.array([agent.radius for agent in world.agents],
                     dtype=np.float64)
    return centers, radii


def cast_rays(world: World, x: float, y: float, angles: np.ndarray,
              poses: Optional[Sequence[Pose2]] = None) -> np.ndarray:
    """
    Unfiltered nearest-hit distance along each absolute angle
    """
    directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    nearest, _ = intersect_segments((x, y), directions, wall_array(world))
    if poses is None:
        poses = world_agent_poses(world, 0.0)
    if poses:
        centers, radii = agent_arrays(world, poses)
        hits = intersect_disks((x, y), directions, centers, radii)
        nearest = np.minimum(nearest, hits.min(axis=1))
    return nearest


def beam_angles(yaw: float) -> np.ndarray:
    return yaw + np.radians(np.arange(BEAMS, dtype=np.float64))


def scan(world: World, pose: Pose2, t: float,
         config: LidarConfig = None,
         poses: Optional[Sequence[Pose2]] = None,
         rng: Optional[SplitMix64] = None,
         stamp_ns: Optional[int] = None) -> Scan:
    """
    One sweep from pose at time t (seconds). Agents are placed with
    agent_pose_at(agent, t) unless explicit poses are given.
    """
    config = config or LidarConfig()
    if poses is None:
        poses = world_agent_poses(world, t)
    ranges = cast_rays(world, pose.x, pose.y, beam_angles(pose.yaw), poses)

    if config.noise_std > 0 and rng is not None:
        ranges = ranges + rng.normal_array(BEAMS, std=config.noise_std)

    out_of_range = (ranges < config.min_range) | (ranges > config.max_range)
    ranges = np.where(out_of_range, np.inf, ranges)
    if stamp_ns is None:
        stamp_ns = int(round(t * 1e9))
    return Scan(ranges=ranges, t=stamp_ns)


def scan_points(scan_: Scan, pose: Pose2) -> np.ndarray:
    """
    Finite returns as world-frame points, shape (N, 2)
    """
    angles = beam_angles(pose.yaw)
    finite = np.isfinite(scan_.ranges)
    r = scan_.ranges[finite]
    return np.stack([pose.x + r * np.cos(angles[finite]),
                     pose.y + r * np.sin(angles[finite])], axis=1)
