import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

# Frame: (H, W, 3) float array in [0, 1]
# DepthMap: (H, W) float array of z-depths in meters, +inf for no hit
Frame = np.ndarray
DepthMap = np.ndarray

# Wall segment (x1, y1, x2, y2) in meters
Segment = Tuple[float, float, float, float]

FPS = 15
FRAME_PERIOD_NS = 66666667  # round(1e9 / 15)

AGENT_BEHAVIORS = ('walk', 'jog', 'stand', 'sit')
MOVING_BEHAVIORS = ('walk', 'jog')


def wrap_angle(angle: float) -> float:
    """
    Wrap an angle to (-pi, pi]
    """
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


@dataclass(frozen=True)
class Pose2:
    """
    Planar robot or agent configuration

    :param x: meters
    :param y: meters
    :param yaw: radians, wrapped to (-pi, pi]
    """
    x: float
    y: float
    yaw: float = 0.0


@dataclass(frozen=True)
class Twist:
    """
    Control action of a differential-drive base

    :param v: forward velocity in m/s
    :param omega: turn rate in rad/s, positive is counterclockwise
    """
    v: float = 0.0
    omega: float = 0.0


@dataclass(frozen=True)
class Agent:
    """
    Scripted human-like agent

    :param radius: collision disk radius in meters
    :param height: render height in meters
    :param behavior: one of AGENT_BEHAVIORS
    :param waypoints: (x, y) tuples; moving agents cycle through them
    :param speed: m/s along the waypoint path
    :param phase: time offset in seconds added to the query time
    :param color_id: index into the render palette
    """
    radius: float
    height: float
    behavior: str
    waypoints: Tuple[Tuple[float, float], ...]
    speed: float = 0.0
    phase: float = 0.0
    color_id: int = 0

    def __post_init__(self):
        if self.behavior not in AGENT_BEHAVIORS:
            raise ValueError(f"Unknown agent behavior: {self.behavior}")
        if not self.radius > 0:
            raise ValueError("Agent radius must be positive")
        if not self.speed >= 0:
            raise ValueError("Agent speed must be non-negative")
        if self.behavior in MOVING_BEHAVIORS:
            if len(self.waypoints) < 2:
                raise ValueError(
                    f"{self.behavior} agents need at least 2 waypoints")
        elif len(self.waypoints) != 1:
            raise ValueError(
                f"{self.behavior} agents have exactly one waypoint")

    @property
    def is_moving(self) -> bool:
        return self.behavior in MOVING_BEHAVIORS


@dataclass(frozen=True)
class World:
    """
    Static walls plus scripted agents

    :param walls: wall segments, together forming a closed boundary
    :param agents: scripted agents
    :param bounds: (xmin, ymin, xmax, ymax) in meters
    :param seed: generator seed this world was built from
    :param spawn: collision-free robot start pose
    :param wall_height: meters, used by the renderer
    """
    walls: Tuple[Segment, ...]
    agents: Tuple[Agent, ...]
    bounds: Tuple[float, float, float, float]
    seed: int
    spawn: Pose2 = Pose2(0.0, 0.0, 0.0)
    wall_height: float = 2.5

    def contains(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax


@dataclass(eq=False)
class Scan:
    """
    One planar laser sweep

    :param ranges: 360 ranges in meters, index i is the bearing of
        i degrees counterclockwise from the robot heading, inf for
        no hit
    :param t: timestamp in nanoseconds
    """
    ranges: np.ndarray
    t: int = 0


@dataclass(frozen=True)
class Odometry:
    pose: Pose2
    twist: Twist


@dataclass(frozen=True)
class ImuSample:
    """
    :param yaw_rate: rad/s
    :param accel: forward acceleration in m/s^2
    """
    yaw_rate: float
    accel: float


@dataclass(eq=False)
class SequenceRecord:
    """
    One synchronized recording, every stream has one entry per frame

    :param name: sequence directory name, e.g. seq_000
    :param timestamps: nanoseconds per frame
    :param left: left camera frames
    :param right: right camera frames
    :param depth: left camera z-depth maps
    :param scans: laser scans
    :param actions: command applied on [t_k, t_k+1)
    :param odom: pose and twist per frame
    :param imu: yaw rate and forward acceleration per frame
    :param meta: free-form key/value metadata written to meta.txt
    """
    name: str
    timestamps: List[int] = field(default_factory=list)
    left: List[Frame] = field(default_factory=list)
    right: List[Frame] = field(default_factory=list)
    depth: List[DepthMap] = field(default_factory=list)
    scans: List[Scan] = field(default_factory=list)
    actions: List[Twist] = field(default_factory=list)
    odom: List[Odometry] = field(default_factory=list)
    imu: List[ImuSample] = field(default_factory=list)
    meta: Dict[str, str] = field(default_factory=dict)

    def __len__(self):
        return len(self.timestamps)

    def stream_lengths(self) -> Dict[str, int]:
        return {
            'timestamps': len(self.timestamps),
            'left': len(self.left),
            'right': len(self.right),
            'depth': len(self.depth),
            'scans': len(self.scans),
            'actions': len(self.actions),
            'odom': len(self.odom),
            'imu': len(self.imu),
        }
