from dataclasses import replace

import numpy as np
import pytest

from roamsim.config import CameraConfig
from roamsim.lidar import scan
from roamsim.models import Pose2
from roamsim.render import (
    AGENT_COLORS, CEILING_COLOR, FLOOR_COLOR, column_bearings,
    column_offsets, render_ego, row_offsets)
from roamsim.rng import SplitMix64
from tests.utils import square_room, stand_agent


def test_column_geometry():
    cam = CameraConfig()
    offsets = column_offsets(cam)
    assert offsets.shape == (64,)
    assert offsets[0] == pytest.approx(-offsets[-1])
    # hfov of 90 degrees: edge columns look just inside +-45 degrees
    assert abs(column_bearings(cam)).max() < np.pi / 4
    assert row_offsets(cam)[0] > 0 > row_offsets(cam)[-1]


def test_fronto_parallel_wall_depth():
    cam = CameraConfig()
    left, right, depth = render_ego(square_room(half=1.0),
                                    Pose2(0, 0, 0), 0.0, cam)
    assert left.shape == right.shape == (64, 64, 3)
    assert depth.shape == (64, 64)

    y_cam = row_offsets(cam)
    wall_rows = y_cam > -0.1
    np.testing.assert_allclose(depth[wall_rows], 1.0, rtol=0, atol=1e-12)
    # one flat colour across the facing wall
    assert (left[0] == left[0, 0]).all()

    floor_rows = y_cam < -0.2
    np.testing.assert_allclose(
        depth[floor_rows],
        np.broadcast_to((0.15 / -y_cam[floor_rows])[:, None],
                        (floor_rows.sum(), 64)))
    assert (left[floor_rows] == FLOOR_COLOR).all()


def test_empty_view_shows_floor_and_ceiling():
    cam = CameraConfig()
    left, _, depth = render_ego(square_room(half=30.0),
                                Pose2(0, 0, 0.3), 0.0, cam)
    assert (left[0] == CEILING_COLOR).all()
    assert (left[-1] == FLOOR_COLOR).all()
    y_cam = row_offsets(cam)
    np.testing.assert_allclose(depth[0], (2.5 - 0.15) / y_cam[0])
    np.testing.assert_allclose(depth[-1], 0.15 / -y_cam[-1])


def test_stereo_disparity():
    cam = CameraConfig()
    world = square_room(half=30.0, agents=[stand_agent(1.0, 0.0, 0.1)])
    left, right, _ = render_ego(world, Pose2(0, 0, 0), 0.0, cam)

    def agent_column(frame):
        mask = np.all(frame == AGENT_COLORS[0], axis=-1)
        assert mask.any()
        return np.nonzero(mask)[1].mean()

    # objects shift left in the right camera by focal * baseline / z
    disparity = agent_column(left) - agent_column(right)
    assert cam.focal * cam.baseline / 0.9 == pytest.approx(2.24, abs=0.01)
    assert abs(disparity - 2.0) <= 1.0


def test_centre_column_depth_matches_lidar():
    cam = replace(CameraConfig(), width=33, height=33)
    assert column_offsets(cam)[16] == 0.0
    world = square_room(half=1.5, agents=[stand_agent(0.6, 0.4, 0.2)])
    rng = SplitMix64(12)
    checked = 0
    for _ in range(40):
        x, y = rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)
        if np.hypot(x - 0.6, y - 0.4) < 0.45:
            continue
        pose = Pose2(x, y, rng.uniform(-np.pi, np.pi))
        _, _, depth = render_ego(world, pose, 0.0, cam)
        beam = scan(world, pose, 0.0).ranges[0]
        if not np.isfinite(beam):
            continue
        assert depth[16, 16] == pytest.approx(beam, abs=1e-6)
        checked += 1
    assert checked >= 10


def test_agent_occludes_wall():
    cam = CameraConfig()
    world = square_room(half=2.0, agents=[stand_agent(1.0, 0.0, 0.2)])
    left, _, depth = render_ego(world, Pose2(0, 0, 0), 0.0, cam)
    centre = depth[32, 31:33]
    assert centre.min() == pytest.approx(0.8, abs=0.01)
    assert (left[32, 31:33] == AGENT_COLORS[0]).all()


def test_values_in_range_and_deterministic():
    world = square_room(half=1.5, agents=[stand_agent(0.5, 0.5)])
    pose = Pose2(-0.4, -0.2, 0.7)
    first = render_ego(world, pose, 1.0)
    second = render_ego(world, pose, 1.0)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)
    left, right, depth = first
    for frame in (left, right):
        assert frame.min() >= 0.0 and frame.max() <= 1.0
    assert (depth > 0).all()
