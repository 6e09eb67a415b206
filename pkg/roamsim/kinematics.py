"""
Differential-drive (unicycle) propagation under the actuation envelope
of the recording platform: v in [0, 0.1] m/s, |omega| <= 1.8 rad/s and
a forward acceleration bound of 0.2 m/s^2. Deceleration shares the
acceleration bound.
"""
import math

from roamsim.config import ACCEL_MAX, OMEGA_MAX, V_MAX
from roamsim.exceptions import InvalidActionError
from roamsim.models import Pose2, Twist, wrap_angle

STRAIGHT_EPS = 1e-6


def _require_finite(*values):
    for value in values:
        if not math.isfinite(value):
            raise InvalidActionError(f"Non-finite action value: {value}")


def clamp_action(requested: Twist, previous: Twist, dt: float) -> Twist:
    """
    Clip a requested twist into the envelope, rate limiting v
    against the previous command. omega has no rate limit.
    """
    _require_finite(requested.v, requested.omega, previous.v, dt)
    if not dt > 0:
        raise InvalidActionError("dt must be positive")

    max_dv = ACCEL_MAX * dt
    v = min(max(requested.v, previous.v - max_dv), previous.v + max_dv)
    v = min(max(v, 0.0), V_MAX)
    omega = min(max(requested.omega, -OMEGA_MAX), OMEGA_MAX)
    return Twist(v, omega)


def in_envelope(action: Twist, tolerance: float = 0.0) -> bool:
    """
    v in [0, V_MAX] and |omega| <= OMEGA_MAX, each widened by tolerance
    """
    return (-tolerance <= action.v <= V_MAX + tolerance
            and abs(action.omega) <= OMEGA_MAX + tolerance)


def step(pose: Pose2, action: Twist, dt: float) -> Pose2:
    """
    Exact constant-twist arc integration over dt
    """
    v, omega = action.v, action.omega
    if abs(omega) < STRAIGHT_EPS:
        return Pose2(
            pose.x + v * dt * math.cos(pose.yaw),
            pose.y + v * dt * math.sin(pose.yaw),
            wrap_angle(pose.yaw + omega * dt))

    yaw_next = pose.yaw + omega * dt
    radius = v / omega
    return Pose2(
        pose.x + radius * (math.sin(yaw_next) - math.sin(pose.yaw)),
        pose.y + radius * (math.cos(pose.yaw) - math.cos(yaw_next)),
        wrap_angle(yaw_next))


def rotate_pose(pose: Pose2, theta: float) -> Pose2:
    """
    Rotate a pose about the origin by theta
    """
    c, s = math.cos(theta), math.sin(theta)
    return Pose2(
        c * pose.x - s * pose.y,
        s * pose.x + c * pose.y,
        wrap_angle(pose.yaw + theta))
