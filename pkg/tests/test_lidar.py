import math
import numpy as np
import pytest

from roamsim.config import LidarConfig
from roamsim.lidar import BEAMS, intersect_disks, scan, scan_points
from roamsim.models import Pose2
from roamsim.rng import SplitMix64
from tests.utils import square_room, stand_agent


def test_square_room_box_geometry():
    ranges = scan(square_room(), Pose2(0, 0, 0), 0.0).ranges
    assert ranges.shape == (BEAMS,)
    assert ranges[0] == pytest.approx(1.0, abs=1e-9)
    assert ranges[90] == pytest.approx(1.0, abs=1e-9)
    assert ranges[180] == pytest.approx(1.0, abs=1e-9)
    assert ranges[45] == pytest.approx(math.sqrt(2.0), abs=1e-9)


def test_agent_dead_ahead():
    world = square_room(half=3.0, agents=[stand_agent(1.0, 0.0, 0.2)])
    assert scan(world, Pose2(0, 0, 0), 0.0).ranges[0] == \
        pytest.approx(0.8, abs=1e-12)


def test_out_of_range_is_no_hit():
    world = square_room(half=5.0)
    ranges = scan(world, Pose2(0, 0, 0), 0.0).ranges
    assert np.all(np.isinf(ranges))

    config = LidarConfig(min_range=0.12, max_range=3.5)
    ranges = scan(square_room(half=0.08), Pose2(0, 0, 0), 0.0,
                  config).ranges
    assert np.all(np.isinf(ranges))


def test_finite_ranges_within_limits():
    world = square_room(half=1.7, agents=[stand_agent(0.8, 0.4)])
    ranges = scan(world, Pose2(-0.3, 0.2, 0.4), 0.0).ranges
    finite = ranges[np.isfinite(ranges)]
    assert finite.size > 0
    assert np.all((finite >= 0.12) & (finite <= 3.5))


def test_stamp():
    assert scan(square_room(), Pose2(0, 0, 0), 2.0 / 15).t == 133333333
    assert scan(square_room(), Pose2(0, 0, 0), 0.0, stamp_ns=42).t == 42


@pytest.mark.parametrize('k', [1, 17, 90, 245])
def test_yaw_rotation_shifts_beams(k):
    world = square_room(half=1.3, agents=[stand_agent(0.5, -0.6)])
    base = scan(world, Pose2(0.1, 0.2, 0.3), 0.0).ranges
    rotated = scan(world, Pose2(0.1, 0.2, 0.3 + math.radians(k)),
                   0.0).ranges
    expected = np.roll(base, -k)
    finite = np.isfinite(expected)
    assert np.array_equal(finite, np.isfinite(rotated))
    np.testing.assert_allclose(rotated[finite], expected[finite], atol=1e-9)


def _distance_to_segment(p, wall):
    a, b = np.array(wall[:2]), np.array(wall[2:])
    u = np.clip(np.dot(p - a, b - a) / np.dot(b - a, b - a), 0, 1)
    return np.linalg.norm(p - (a + u * (b - a)))


def test_returns_lie_on_obstacles():
    agent = stand_agent(0.6, 0.3, 0.25)
    world = square_room(half=1.5, agents=[agent])
    pose = Pose2(-0.2, -0.1, 1.1)
    points = scan_points(scan(world, pose, 0.0), pose)
    for p in points:
        to_wall = min(_distance_to_segment(p, w) for w in world.walls)
        to_agent = abs(math.hypot(p[0] - 0.6, p[1] - 0.3) - 0.25)
        assert min(to_wall, to_agent) <= 1e-9


def test_adding_an_obstacle_never_increases_ranges():
    rng = SplitMix64(2)
    pose = Pose2(0.0, 0.0, 0.0)
    world = square_room(half=1.8)
    before = scan(world, pose, 0.0).ranges
    for _ in range(5):
        agent = stand_agent(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2),
                            0.15)
        if math.hypot(*agent.waypoints[0]) < 0.4:
            continue
        world = square_room(half=1.8, agents=world.agents + (agent,))
        after = scan(world, pose, 0.0).ranges
        assert np.all(after <= before)
        before = after


def test_origin_inside_disk_is_ignored():
    directions = np.array([[1.0, 0.0]])
    hits = intersect_disks((0.0, 0.0), directions, np.array([[0.0, 0.0]]),
                           np.array([0.5]))
    assert np.isinf(hits[0, 0])
