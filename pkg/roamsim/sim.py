"""
15 Hz sense -> plan -> clamp -> step loop producing SequenceRecords.

Frame k is sensed at t_k = k / 15 s (timestamp k * 66,666,667 ns). Action
k is the command applied on [t_k, t_k+1); action 0 is the stationary
start. Agents run on their own clocks, which hold still while advancing
would bring a walking agent within ``yield_distance`` of the robot.
"""
import logging
import math
from typing import List, Sequence

import numpy as np

from roamsim.avoidance import plan
from roamsim.config import RunConfig
from roamsim.exceptions import SimulationAbort
from roamsim.kinematics import clamp_action, in_envelope, step
from roamsim.lidar import scan, wall_array
from roamsim.models import (
    FPS, FRAME_PERIOD_NS, ImuSample, Odometry, Pose2, SequenceRecord,
    Twist, World)
from roamsim.render import render_ego
from roamsim.rng import SplitMix64
from roamsim.world import agent_pose_at

logger = logging.getLogger("roamsim-sim")

DT = 1.0 / FPS


def wall_distance(walls: np.ndarray, x: float, y: float) -> float:
    """
    Euclidean distance from a point to the nearest wall segment
    """
    if walls.size == 0:
        return math.inf
    p1, p2 = walls[:, 0:2], walls[:, 2:4]
    edge = p2 - p1
    length2 = (edge * edge).sum(axis=1)
    rel = np.array([x, y]) - p1
    u = np.clip((rel * edge).sum(axis=1) / np.maximum(length2, 1e-300),
                0.0, 1.0)
    closest = p1 + u[:, None] * edge
    return float(np.hypot(*(np.array([x, y]) - closest).T).min())


def agent_clearances(world: World, poses: Sequence[Pose2], x: float,
                     y: float, robot_radius: float) -> List[float]:
    return [math.hypot(p.x - x, p.y - y) - agent.radius - robot_radius
            for agent, p in zip(world.agents, poses)]


def _advance_agents(world: World, clocks: List[float], robot: Pose2,
                    robot_radius: float, yield_distance: float) -> List[float]:
    advanced = []
    for agent, clock in zip(world.agents, clocks):
        if not agent.is_moving:
            advanced.append(clock + DT)
            continue
        now = agent_pose_at(agent, clock)
        proposal = agent_pose_at(agent, clock + DT)
        gap_now = math.hypot(now.x - robot.x, now.y - robot.y)
        gap_next = math.hypot(proposal.x - robot.x, proposal.y - robot.y)
        clearance = gap_next - agent.radius - robot_radius
        if clearance < yield_distance and gap_next < gap_now:
            advanced.append(clock)
        else:
            advanced.append(clock + DT)
    return advanced


def _sequence_meta(world: World, cfg: RunConfig, seed: int,
                   n_frames: int) -> dict:
    cam = cfg.camera
    return {
        'seed': str(seed),
        'world_seed': str(world.seed),
        'fps': str(FPS),
        'frames': str(n_frames),
        'camera.width': str(cam.width),
        'camera.height': str(cam.height),
        'camera.hfov': repr(cam.hfov),
        'camera.baseline': repr(cam.baseline),
        'camera.height_above_floor': repr(cam.height_above_floor),
    }


def simulate_sequence(world: World, spawn: Pose2, n_frames: int,
                      cfg: RunConfig = None, seed: int = 0,
                      name: str = 'seq_000') -> SequenceRecord:
    """
    Drive the robot through world for n_frames frames and record every
    sensor stream at identical timestamps
    """
    cfg = cfg or RunConfig()
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")

    walls = wall_array(world)
    robot_radius = cfg.sim.robot_radius
    if wall_distance(walls, spawn.x, spawn.y) < robot_radius:
        raise SimulationAbort(f"{name}: spawn {spawn} intersects a wall")

    rng = SplitMix64(seed)
    lidar_rng, imu_rng, odom_rng = rng.fork(1), rng.fork(2), rng.fork(3)

    record = SequenceRecord(
        name=name, meta=_sequence_meta(world, cfg, seed, n_frames))
    clocks = [0.0] * len(world.agents)
    pose, odom_pose = spawn, spawn
    previous = Twist(0.0, 0.0)
    min_wall = math.inf
    min_agent = math.inf

    for k in range(n_frames):
        t = k * DT
        stamp = k * FRAME_PERIOD_NS
        poses = [agent_pose_at(agent, clock)
                 for agent, clock in zip(world.agents, clocks)]

        scan_k = scan(world, pose, t, cfg.lidar, poses=poses, rng=lidar_rng,
                      stamp_ns=stamp)
        if k == 0:
            action = Twist(0.0, 0.0)
        else:
            action = clamp_action(
                plan(scan_k, previous, cfg.planner), previous, DT)
        if not in_envelope(action):
            raise SimulationAbort(
                f"{name}: action {action} at frame {k} left the envelope")
        left, right, depth = render_ego(world, pose, t, cfg.camera, poses)

        # odometry twist integrated over [t_k, t_k+1)
        odom_twist = action
        if cfg.sim.odom_noise_std > 0:
            odom_twist = Twist(
                action.v + odom_rng.normal(0.0, cfg.sim.odom_noise_std),
                action.omega + odom_rng.normal(0.0, cfg.sim.odom_noise_std))
        accel = (action.v - previous.v) * FPS
        yaw_rate = action.omega
        if cfg.sim.imu_noise_std > 0:
            accel += imu_rng.normal(0.0, cfg.sim.imu_noise_std)
            yaw_rate += imu_rng.normal(0.0, cfg.sim.imu_noise_std)

        record.timestamps.append(stamp)
        record.left.append(left)
        record.right.append(right)
        record.depth.append(depth)
        record.scans.append(scan_k)
        record.actions.append(action)
        record.odom.append(Odometry(odom_pose, odom_twist))
        record.imu.append(ImuSample(yaw_rate, accel))

        min_wall = min(min_wall,
                       wall_distance(walls, pose.x, pose.y) - robot_radius)
        clearances = agent_clearances(world, poses, pose.x, pose.y,
                                      robot_radius)
        if clearances:
            min_agent = min(min_agent, min(clearances))
        logger.debug("%s frame %d: pose=%s action=%s", name, k, pose, action)

        # advance to t_k+1
        pose = step(pose, action, DT)
        if wall_distance(walls, pose.x, pose.y) < robot_radius:
            raise SimulationAbort(
                f"{name}: robot intersects a wall at frame {k + 1}, "
                f"pose={pose}, action={action}")
        odom_pose = step(odom_pose, odom_twist, DT)
        clocks = _advance_agents(world, clocks, pose, robot_radius,
                                 cfg.sim.yield_distance)
        previous = action

    record.meta['min_wall_clearance'] = repr(min_wall)
    record.meta['min_agent_clearance'] = repr(min_agent)
    if min_agent < 0:
        logger.warning("%s: robot overlapped an agent (clearance %.3f m)",
                       name, min_agent)
    logger.info(
        "Simulated %s: %d frames, min wall clearance %.3f m, "
        "min agent clearance %.3f m", name, n_frames, min_wall, min_agent)
    return record
