"""
Run configuration: one dataclass per concern, and a flat ``key=value``
text format where every key is ``<section>.<field>``, e.g.::

    # slower robot, wider corridors
    planner.v_max = 0.08
    world.corridor_width = 3.0
    train.resolution = 64

Every field has a default, unknown keys are rejected.
"""
import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, get_type_hints

from roamsim.exceptions import ConfigError, WorldParamsError

logger = logging.getLogger("roamsim-config")

# Actuation envelope of the recording platform
V_MAX = 0.1
OMEGA_MAX = 1.8
ACCEL_MAX = 0.2


@dataclass(frozen=True)
class WorldParams:
    """
    :param kind: 'corridor' or 'lobby' (corridors around an open block)
    :param corridors: number of corridor legs, [1, 8]
    :param corridor_width: meters, [1.5, 4]
    :param agents: number of agents, [0, 10]
    :param moving_agents: minimum number of walking/jogging agents
    :param turn_heavy: short legs so the robot has to rotate often
    :param wall_height: meters
    """
    kind: str = 'corridor'
    corridors: int = 3
    corridor_width: float = 2.0
    agents: int = 4
    moving_agents: int = 2
    turn_heavy: bool = False
    wall_height: float = 2.5
    agent_radius: float = 0.22
    agent_height: float = 1.7

    def validate(self):
        if self.kind not in ('corridor', 'lobby'):
            raise WorldParamsError(f"Unknown world kind: {self.kind}")
        if not 1 <= self.corridors <= 8:
            raise WorldParamsError("corridors must be in [1, 8]")
        if not 1.5 <= self.corridor_width <= 4.0:
            raise WorldParamsError("corridor_width must be in [1.5, 4] m")
        if not 0 <= self.agents <= 10:
            raise WorldParamsError("agents must be in [0, 10]")
        if not 0 <= self.moving_agents <= self.agents:
            raise WorldParamsError("moving_agents must be in [0, agents]")
        if not 0 < self.agent_radius < self.corridor_width / 4:
            raise WorldParamsError("agent_radius out of range")
        if self.wall_height <= 0 or self.agent_height <= 0:
            raise WorldParamsError("heights must be positive")


@dataclass(frozen=True)
class LidarConfig:
    min_range: float = 0.12
    max_range: float = 3.5
    noise_std: float = 0.0

    def validate(self):
        if not 0 <= self.min_range < self.max_range:
            raise ConfigError("lidar needs 0 <= min_range < max_range")
        if self.noise_std < 0:
            raise ConfigError("lidar.noise_std must be >= 0")


@dataclass(frozen=True)
class PlannerConfig:
    """
    Collision-cone planner parameters

    :param r_safe: safety radius around obstacle points, meters
    :param horizon: obstacle points beyond this range are ignored
    :param k_turn: rad/s of turn rate per rad of escape bearing
    :param v_max: cruise speed, m/s
    :param stop_range: speed drops to zero at this clearance
    """
    r_safe: float = 0.3
    horizon: float = 1.5
    k_turn: float = 2.0
    v_max: float = V_MAX
    stop_range: float = 0.35
    omega_max: float = OMEGA_MAX

    def validate(self, max_range: float = 3.5, robot_radius: float = 0.105):
        if not 0 < self.stop_range < self.horizon <= max_range:
            raise ConfigError(
                "planner needs 0 < stop_range < horizon <= lidar max_range")
        if not self.r_safe > robot_radius:
            raise ConfigError("planner.r_safe must exceed the robot radius")
        if not 0 < self.v_max <= V_MAX:
            raise ConfigError(f"planner.v_max must be in (0, {V_MAX}]")
        if not 0 < self.omega_max <= OMEGA_MAX:
            raise ConfigError(
                f"planner.omega_max must be in (0, {OMEGA_MAX}]")
        if self.k_turn <= 0:
            raise ConfigError("planner.k_turn must be positive")


@dataclass(frozen=True)
class CameraConfig:
    """
    Pinhole stereo camera, defaults inspired by a Zed mini

    :param width: pixels
    :param height: pixels
    :param hfov: horizontal field of view, radians
    :param baseline: stereo baseline, meters
    :param height_above_floor: meters
    :param max_distance: render distance, meters
    """
    width: int = 64
    height: int = 64
    hfov: float = math.pi / 2
    baseline: float = 0.063
    height_above_floor: float = 0.15
    max_distance: float = 20.0

    def validate(self):
        if self.width < 8 or self.height < 8:
            raise ConfigError("camera width and height must be >= 8")
        if not 0 < self.hfov < math.pi:
            raise ConfigError("camera.hfov must be in (0, pi)")
        if self.baseline <= 0:
            raise ConfigError("camera.baseline must be positive")
        if self.height_above_floor <= 0 or self.max_distance <= 0:
            raise ConfigError("camera heights/distances must be positive")

    @property
    def focal(self) -> float:
        """
        Focal length in pixels, square pixels
        """
        return (self.width / 2.0) / math.tan(self.hfov / 2.0)


@dataclass(frozen=True)
class SimConfig:
    """
    :param robot_radius: collision disk of the robot, meters
    :param yield_distance: agents wait instead of moving closer than
        this clearance to the robot
    :param imu_noise_std: gaussian noise on both IMU channels
    :param odom_noise_std: gaussian noise on the integrated twist
    """
    robot_radius: float = 0.105
    yield_distance: float = 0.5
    imu_noise_std: float = 0.0
    odom_noise_std: float = 0.0

    def validate(self):
        if self.robot_radius <= 0 or self.yield_distance < 0:
            raise ConfigError("sim radii must be positive")
        if self.imu_noise_std < 0 or self.odom_noise_std < 0:
            raise ConfigError("sim noise levels must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    """
    Optimizer and protocol settings of the predictor

    :param alpha_rec: weight of the reconstruction term
    :param lambda_gdl: weight of the gradient difference term
    :param p: exponent of the reconstruction norm
    :param context: known frames fed before predicting
    :param train_horizon: predicted frames during training
    :param infer_horizon: predicted frames at inference
    :param resolution: square training resolution, divisible by 4
    :param dtype: 'float32' for training, 'float64' for gradient checks
    """
    lr: float = 1e-4
    batch: int = 8
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    alpha_rec: float = 1.0
    lambda_gdl: float = 1.0
    weight_decay: float = 1e-4
    p: float = 2.0
    context: int = 5
    train_horizon: int = 10
    infer_horizon: int = 20
    iterations: int = 2000
    resolution: int = 32
    dtype: str = 'float32'
    clip_len: int = 50
    clip_gap: int = 10
    checkpoint_every: int = 500

    def validate(self):
        for name in ('lr', 'batch', 'beta1', 'beta2', 'eps', 'alpha_rec',
                     'p', 'train_horizon', 'infer_horizon', 'iterations',
                     'resolution', 'clip_len'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"train.{name} must be positive")
        if self.weight_decay < 0 or self.lambda_gdl < 0 or self.clip_gap < 0:
            raise ConfigError(
                "train.weight_decay, lambda_gdl, clip_gap must be >= 0")
        if not self.beta1 < 1 or not self.beta2 < 1:
            raise ConfigError("train.beta1 and beta2 must be < 1")
        if self.context < 2:
            raise ConfigError("train.context must be >= 2")
        if self.resolution % 4:
            raise ConfigError("train.resolution must be divisible by 4")
        if self.dtype not in ('float32', 'float64'):
            raise ConfigError("train.dtype must be float32 or float64")
        if self.context + self.train_horizon > self.clip_len:
            raise ConfigError("train window does not fit in a clip")

    @property
    def window(self) -> int:
        return self.context + self.train_horizon


@dataclass(frozen=True)
class SeedConfig:
    world: int = 7
    sim: int = 0
    split: int = 0
    train: int = 0
    init: int = 0


@dataclass(frozen=True)
class RunConfig:
    world: WorldParams = field(default_factory=WorldParams)
    lidar: LidarConfig = field(default_factory=LidarConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: SeedConfig = field(default_factory=SeedConfig)

    def validate(self) -> 'RunConfig':
        try:
            self.world.validate()
        except WorldParamsError as e:
            raise ConfigError(str(e))
        self.lidar.validate()
        self.planner.validate(self.lidar.max_range, self.sim.robot_radius)
        self.camera.validate()
        self.sim.validate()
        self.train.validate()
        return self


SECTIONS = tuple(f.name for f in fields(RunConfig))

_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


def _parse_value(raw: str, kind, key: str, lineno: int):
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw, 0)
        if kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
        return raw
    except ValueError:
        raise ConfigError(
            f"line {lineno}: cannot parse {raw!r} for {key} "
            f"({kind.__name__})")


def parse_config(text: str) -> RunConfig:
    """
    Parse flat key=value text on top of the defaults
    """
    updates: Dict[str, dict] = {name: {} for name in SECTIONS}
    defaults = RunConfig()

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, raw = (part.strip() for part in line.split('=', 1))
        section, _, name = key.partition('.')
        if section not in updates:
            raise ConfigError(f"line {lineno}: unknown section in {key!r}")
        hints = get_type_hints(type(getattr(defaults, section)))
        if name not in hints:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        updates[section][name] = _parse_value(raw, hints[name], key, lineno)

    config = RunConfig(**{
        section: replace(getattr(defaults, section), **values)
        for section, values in updates.items()})
    return config.validate()


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    logger.debug("Loading run config from %s", path)
    try:
        with open(path, 'r') as fp:
            return parse_config(fp.read())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")


def dump_config(config: RunConfig) -> str:
    """
    Render a RunConfig in the flat key=value format, parse_config
    reads it back unchanged
    """
    lines = []
    for section in SECTIONS:
        part = getattr(config, section)
        for f in fields(part):
            value = getattr(part, f.name)
            if isinstance(value, bool):
                value = 'true' if value else 'false'
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{section}.{f.name} = {value}")
    return '\n'.join(lines) + '\n'
