"""
Column ray-casting renderer for the ego camera.

Each image column casts one ray. Walls are floor-to-ceiling slabs with a
flat colour per wall, agents are upright billboards standing on the floor,
and the remaining pixels show the floor or ceiling colour. Rays are
parameterised as ``forward + x_cam * right`` so the ray parameter of a hit
is its z-depth along the optical axis. The right camera sits ``baseline``
to the right of the left one; depth is rendered for the left camera only.
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from roamsim.config import CameraConfig
from roamsim.lidar import (
    agent_arrays, intersect_disks, intersect_segments, wall_array)
from roamsim.models import DepthMap, Frame, Pose2, World
from roamsim.world import agent_poses as world_agent_poses

logger = logging.getLogger("roamsim-render")

WALL_COLORS = np.array([
    [0.78, 0.74, 0.66],
    [0.62, 0.70, 0.78],
    [0.72, 0.62, 0.52],
    [0.58, 0.66, 0.56],
    [0.80, 0.80, 0.72],
    [0.66, 0.60, 0.70],
])
AGENT_COLORS = np.array([
    [0.80, 0.15, 0.12],
    [0.12, 0.30, 0.75],
    [0.10, 0.55, 0.20],
    [0.85, 0.65, 0.10],
    [0.45, 0.15, 0.55],
    [0.10, 0.10, 0.12],
])
FLOOR_COLOR = np.array([0.36, 0.31, 0.26])
CEILING_COLOR = np.array([0.90, 0.90, 0.86])


def column_offsets(cam: CameraConfig) -> np.ndarray:
    """
    Normalised horizontal image coordinate of every column centre,
    positive to the right
    """
    return (np.arange(cam.width) + 0.5 - cam.width / 2.0) / cam.focal


def row_offsets(cam: CameraConfig) -> np.ndarray:
    """
    Normalised vertical image coordinate of every row centre,
    positive up
    """
    return (cam.height / 2.0 - (np.arange(cam.height) + 0.5)) / cam.focal


def column_bearings(cam: CameraConfig) -> np.ndarray:
    """
    Bearing of every column ray relative to the optical axis,
    counterclockwise positive
    """
    return np.arctan(-column_offsets(cam))


def _render_view(world: World, origin: Tuple[float, float], yaw: float,
                 poses: Sequence[Pose2], cam: CameraConfig
                 ) -> Tuple[Frame, DepthMap]:
    forward = np.array([np.cos(yaw), np.sin(yaw)])
    right = np.array([np.sin(yaw), -np.cos(yaw)])
    x_cam = column_offsets(cam)
    y_cam = row_offsets(cam)[:, None]
    directions = forward[None, :] + x_cam[:, None] * right[None, :]
    ray_length = np.sqrt(1.0 + x_cam * x_cam)

    z_wall, wall_index = intersect_segments(
        origin, directions, wall_array(world))
    too_far = z_wall * ray_length > cam.max_distance
    z_wall = np.where(too_far, np.inf, z_wall)
    wall_index = np.where(too_far, -1, wall_index)

    hc = cam.height_above_floor
    with np.errstate(divide='ignore', invalid='ignore'):
        z_floor = np.where(y_cam < 0, hc / -y_cam, np.inf)
        z_ceiling = np.where(
            y_cam > 0, (world.wall_height - hc) / y_cam, np.inf)
        wall_height_at = hc + y_cam * z_wall[None, :]
    background_depth = np.minimum(z_floor, z_ceiling)
    wall_cover = (np.isfinite(z_wall)[None, :]
                  & (wall_height_at >= 0.0)
                  & (wall_height_at <= world.wall_height))

    shape = (cam.height, cam.width)
    depth = np.where(wall_cover, z_wall[None, :],
                     np.broadcast_to(background_depth, shape))
    background = np.where((y_cam < 0)[..., None], FLOOR_COLOR, CEILING_COLOR)
    wall_rgb = WALL_COLORS[np.maximum(wall_index, 0) % len(WALL_COLORS)]
    frame = np.where(wall_cover[..., None], wall_rgb[None, :, :],
                     np.broadcast_to(background, shape + (3,)))

    if poses:
        centers, radii = agent_arrays(world, poses)
        z_agents = intersect_disks(origin, directions, centers, radii)
        for k, agent in enumerate(world.agents):
            z_agent = z_agents[:, k]
            with np.errstate(invalid='ignore'):
                height_at = hc + y_cam * z_agent[None, :]
            cover = (np.isfinite(z_agent)[None, :]
                     & (height_at >= 0.0) & (height_at <= agent.height)
                     & (z_agent[None, :] < depth))
            depth = np.where(cover, z_agent[None, :], depth)
            color = AGENT_COLORS[agent.color_id % len(AGENT_COLORS)]
            frame = np.where(cover[..., None], color, frame)

    return np.clip(frame, 0.0, 1.0), depth


def render_ego(world: World, pose: Pose2, t: float,
               cam: CameraConfig = None,
               poses: Optional[Sequence[Pose2]] = None
               ) -> Tuple[Frame, Frame, DepthMap]:
    """
    Render the stereo pair and the left z-depth map at pose and time t
    """
    cam = cam or CameraConfig()
    if poses is None:
        poses = world_agent_poses(world, t)
    left, depth = _render_view(world, (pose.x, pose.y), pose.yaw, poses, cam)
    shift = cam.baseline
    right_origin = (pose.x + shift * np.sin(pose.yaw),
                    pose.y - shift * np.cos(pose.yaw))
    right, _ = _render_view(world, right_origin, pose.yaw, poses, cam)
    return left, right, depth
