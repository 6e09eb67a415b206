import pytest
import numpy as np

from dataclasses import replace
from os import environ

from roamsim.config import CameraConfig, RunConfig, TrainConfig
from roamsim.dataset import Clip
from roamsim.models import Agent, Twist, World
from roamsim.rng import SplitMix64

# Long running acceptance checks only run with ROAMSIM_SLOW_TESTS=1
SLOW_TESTS = environ.get('ROAMSIM_SLOW_TESTS', '0') == '1'


def slow(func):
    """
    Mark func as a slow acceptance check, skipped unless enabled
    """
    skip = pytest.mark.skipif(
        not SLOW_TESTS, reason="set ROAMSIM_SLOW_TESTS=1 to run")
    return pytest.mark.slow(skip(func))


def square_room(half: float = 1.0, agents=(), wall_height: float = 2.5,
                seed: int = 0) -> World:
    """
    Axis aligned empty room centered on the origin
    """
    h = half
    walls = ((-h, -h, h, -h), (h, -h, h, h), (h, h, -h, h), (-h, h, -h, -h))
    return World(walls=walls, agents=tuple(agents), bounds=(-h, -h, h, h),
                 seed=seed, wall_height=wall_height)


def stand_agent(x: float, y: float, radius: float = 0.2,
                height: float = 1.7) -> Agent:
    return Agent(radius=radius, height=height, behavior='stand',
                 waypoints=((x, y),))


def small_config(frames_size: int = 32, **train) -> RunConfig:
    """
    Default RunConfig with a small camera and a 16 px predictor
    """
    return RunConfig(
        camera=replace(CameraConfig(), width=frames_size,
                       height=frames_size),
        train=replace(TrainConfig(), resolution=16, **train)).validate()


def random_clip(length: int = 15, size: int = 16, seed: int = 0,
                name: str = 'seq_000') -> Clip:
    """
    Smooth random frames with random in-envelope actions
    """
    rng = SplitMix64(seed)
    base = rng.random_array(size * size * 3).reshape(size, size, 3)
    drift = rng.random_array(size * size * 3).reshape(size, size, 3)
    frames = np.stack([
        np.clip(0.7 * base + 0.3 * np.roll(drift, k, axis=1), 0.0, 1.0)
        for k in range(length)])
    actions = [Twist(0.1 * rng.random(), 3.6 * rng.random() - 1.8)
               for _ in range(length)]
    return Clip(sequence=name, start=0, frames=frames, actions=actions)


def random_window(batch: int, length: int, size: int, seed: int = 0):
    """
    (batch, length, size, size, 3) frames and (batch, length, 2) actions
    """
    rng = SplitMix64(seed)
    frames = rng.random_array(batch * length * size * size * 3).reshape(
        batch, length, size, size, 3)
    v = 0.1 * rng.random_array(batch * length)
    omega = 3.6 * rng.random_array(batch * length) - 1.8
    actions = np.stack([v, omega], axis=-1).reshape(batch, length, 2)
    return frames, actions
