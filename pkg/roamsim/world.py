"""
Procedural indoor worlds.

A world is carved from a grid of square cells whose side equals the
corridor width. Corridor legs are straight runs of cells, each leg turning
left or right from the end of the previous one; lobby worlds add an open
3x3 block at one junction. Walls are the boundary edges between carved and
solid cells, merged into maximal axis-aligned segments, so they always
close around the free space.
"""
import logging
import math
from typing import Dict, Iterable, List, Set, Tuple

from roamsim.config import WorldParams
from roamsim.exceptions import DatasetFormatError, WorldParamsError
from roamsim.models import (
    Agent, Pose2, Segment, World, MOVING_BEHAVIORS, AGENT_BEHAVIORS)
from roamsim.rng import SplitMix64

logger = logging.getLogger("roamsim-world")

Cell = Tuple[int, int]

SIT_HEIGHT_RATIO = 0.6
PALETTE_SIZE = 6

SPEED_RANGES = {
    'walk': (0.3, 0.8),
    'jog': (1.2, 1.8),
}

_LEFT = {(1, 0): (0, 1), (0, 1): (-1, 0), (-1, 0): (0, -1), (0, -1): (1, 0)}
_RIGHT = {value: key for key, value in _LEFT.items()}


def _carve_legs(rng: SplitMix64, params: WorldParams) -> List[List[Cell]]:
    if params.turn_heavy:
        leg_min, leg_max = 1, 2
    else:
        leg_min, leg_max = 2, 5

    position = (0, 0)
    direction = rng.choice(sorted(_LEFT))
    legs = []
    for index in range(params.corridors):
        if index > 0:
            turns = _LEFT if rng.random() < 0.5 else _RIGHT
            direction = turns[direction]
        length = rng.randint(leg_min, leg_max)
        leg = [position]
        for _ in range(length):
            position = (position[0] + direction[0],
                        position[1] + direction[1])
            leg.append(position)
        legs.append(leg)
    return legs


def _lobby_block(rng: SplitMix64, legs: List[List[Cell]]) -> List[Cell]:
    junction = legs[rng.randint(0, len(legs) - 1)][-1]
    return [(junction[0] + di, junction[1] + dj)
            for dj in (-1, 0, 1) for di in (-1, 0, 1)]


def _merge_runs(indices: Iterable[int]) -> List[Tuple[int, int]]:
    runs = []
    for index in sorted(indices):
        if runs and runs[-1][1] == index - 1:
            runs[-1] = (runs[-1][0], index)
        else:
            runs.append((index, index))
    return runs


def _extract_walls(free: Set[Cell], width: float) -> List[Segment]:
    """
    Boundary edges between free and solid cells, merged per grid line
    """
    horizontal: Dict[int, Set[int]] = {}
    vertical: Dict[int, Set[int]] = {}
    for i, j in free:
        # line index k is the grid line at (k + 0.5) * width
        if (i, j + 1) not in free:
            horizontal.setdefault(j, set()).add(i)
        if (i, j - 1) not in free:
            horizontal.setdefault(j - 1, set()).add(i)
        if (i + 1, j) not in free:
            vertical.setdefault(i, set()).add(j)
        if (i - 1, j) not in free:
            vertical.setdefault(i - 1, set()).add(j)

    walls = []
    for line in sorted(horizontal):
        y = (line + 0.5) * width
        for start, stop in _merge_runs(horizontal[line]):
            walls.append(((start - 0.5) * width, y, (stop + 0.5) * width, y))
    for line in sorted(vertical):
        x = (line + 0.5) * width
        for start, stop in _merge_runs(vertical[line]):
            walls.append((x, (start - 0.5) * width, x, (stop + 0.5) * width))
    return walls


def _cell_center(cell: Cell, width: float) -> Tuple[float, float]:
    return (cell[0] * width, cell[1] * width)


def _corridor_runs(legs: List[List[Cell]], spawn_cell: Cell):
    """
    Straight runs of leg cells that avoid the spawn cell, with the leg
    direction
    """
    runs = []
    for leg in legs:
        if len(leg) < 2:
            continue
        direction = (leg[1][0] - leg[0][0], leg[1][1] - leg[0][1])
        current = []
        for cell in leg:
            if cell == spawn_cell:
                if current:
                    runs.append((current, direction))
                current = []
            else:
                current.append(cell)
        if current:
            runs.append((current, direction))
    return runs


def _walking_waypoints(rng: SplitMix64, runs, width: float):
    cells, direction = runs[rng.randint(0, len(runs) - 1)]
    lateral = rng.uniform(-width / 4, width / 4)
    normal = (-direction[1], direction[0])
    if len(cells) == 1:
        cx, cy = _cell_center(cells[0], width)
        half = width / 4
        a = (cx - direction[0] * half, cy - direction[1] * half)
        b = (cx + direction[0] * half, cy + direction[1] * half)
    else:
        first = rng.randint(0, len(cells) - 2)
        last = rng.randint(first + 1, len(cells) - 1)
        a = _cell_center(cells[first], width)
        b = _cell_center(cells[last], width)
    offset = (normal[0] * lateral, normal[1] * lateral)
    return ((a[0] + offset[0], a[1] + offset[1]),
            (b[0] + offset[0], b[1] + offset[1]))


def _lobby_loop(rng: SplitMix64, block: List[Cell], width: float):
    corners = [block[0], block[2], block[8], block[6]]
    start = rng.randint(0, 3)
    loop = [corners[(start + k) % 4] for k in range(3)]
    jitter = width / 4
    return tuple(
        (x + rng.uniform(-jitter, jitter), y + rng.uniform(-jitter, jitter))
        for x, y in (_cell_center(cell, width) for cell in loop))


def generate_world(seed: int, params: WorldParams = None) -> World:
    """
    Build a World as a pure function of (seed, params)
    """
    params = params or WorldParams()
    params.validate()
    rng = SplitMix64(seed)
    width = params.corridor_width

    legs = _carve_legs(rng, params)
    free = {cell for leg in legs for cell in leg}
    block = []
    if params.kind == 'lobby':
        block = _lobby_block(rng, legs)
        free.update(block)

    walls = _extract_walls(free, width)
    xs = [cell[0] for cell in free]
    ys = [cell[1] for cell in free]
    bounds = ((min(xs) - 0.5) * width, (min(ys) - 0.5) * width,
              (max(xs) + 0.5) * width, (max(ys) + 0.5) * width)

    spawn_cell = (0, 0)
    first = legs[0]
    spawn = Pose2(0.0, 0.0, math.atan2(first[1][1], first[1][0]))
    runs = _corridor_runs(legs, spawn_cell)
    block_ok = bool(block) and spawn_cell not in block
    placeable = sorted(free - {spawn_cell})

    agents = []
    for index in range(params.agents):
        if index < params.moving_agents:
            behavior = rng.choice(MOVING_BEHAVIORS)
        else:
            behavior = rng.choice(AGENT_BEHAVIORS)
        if behavior in MOVING_BEHAVIORS and not (runs or block_ok):
            behavior = 'stand'
        if not placeable:
            break

        if behavior in MOVING_BEHAVIORS:
            low, high = SPEED_RANGES[behavior]
            speed = rng.uniform(low, high)
            if block_ok and (not runs or rng.random() < 0.3):
                waypoints = _lobby_loop(rng, block, width)
            else:
                waypoints = _walking_waypoints(rng, runs, width)
            perimeter = _perimeter(waypoints)
            phase = rng.uniform(0.0, perimeter / speed)
        else:
            speed, phase = 0.0, 0.0
            cx, cy = _cell_center(rng.choice(placeable), width)
            jitter = width / 4
            waypoints = ((cx + rng.uniform(-jitter, jitter),
                          cy + rng.uniform(-jitter, jitter)),)

        height = params.agent_height
        if behavior == 'sit':
            height = SIT_HEIGHT_RATIO * params.agent_height
        agents.append(Agent(
            radius=params.agent_radius, height=height, behavior=behavior,
            waypoints=waypoints, speed=speed, phase=phase,
            color_id=index % PALETTE_SIZE))

    world = World(
        walls=tuple(walls), agents=tuple(agents), bounds=bounds,
        seed=seed, spawn=spawn, wall_height=params.wall_height)
    logger.debug(
        "Generated world seed=%s: %d walls, %d agents, bounds=%s",
        seed, len(walls), len(agents), bounds)
    return world


def _perimeter(waypoints) -> float:
    total = 0.0
    count = len(waypoints)
    for k in range(count):
        (x1, y1), (x2, y2) = waypoints[k], waypoints[(k + 1) % count]
        total += math.hypot(x2 - x1, y2 - y1)
    return total


def agent_pose_at(agent: Agent, t: float) -> Pose2:
    """
    Pose of an agent at time t. Moving agents traverse their waypoints
    as a closed loop at constant speed, facing the travel direction.
    """
    x0, y0 = agent.waypoints[0]
    if not agent.is_moving or agent.speed == 0:
        return Pose2(x0, y0, 0.0)

    perimeter = _perimeter(agent.waypoints)
    if perimeter == 0:
        return Pose2(x0, y0, 0.0)

    travelled = math.fmod((t + agent.phase) * agent.speed, perimeter)
    count = len(agent.waypoints)
    for k in range(count):
        (x1, y1), (x2, y2) = agent.waypoints[k], \
            agent.waypoints[(k + 1) % count]
        length = math.hypot(x2 - x1, y2 - y1)
        if travelled <= length or k == count - 1:
            if length == 0:
                continue
            u = min(travelled / length, 1.0)
            return Pose2(x1 + u * (x2 - x1), y1 + u * (y2 - y1),
                         math.atan2(y2 - y1, x2 - x1))
        travelled -= length
    return Pose2(x0, y0, 0.0)


def agent_poses(world: World, times) -> List[Pose2]:
    """
    Pose of every agent, times is either one time for all agents or
    one (local) time per agent
    """
    if isinstance(times, (int, float)):
        times = [times] * len(world.agents)
    return [agent_pose_at(agent, t) for agent, t in zip(world.agents, times)]


def write_scene(world: World, path, agent_height: float = 1.7):
    """
    Plain-text scene file, one record per line
    """
    lines = [
        f"SEED {world.seed}",
        "BOUNDS " + ' '.join(repr(float(v)) for v in world.bounds),
        f"SPAWN {world.spawn.x!r} {world.spawn.y!r} {world.spawn.yaw!r}",
        f"WALL_HEIGHT {world.wall_height!r}",
        f"AGENT_HEIGHT {agent_height!r}",
    ]
    for wall in world.walls:
        lines.append("WALL " + ' '.join(repr(float(v)) for v in wall))
    for agent in world.agents:
        coords = ' '.join(
            f"{x!r} {y!r}" for x, y in agent.waypoints)
        lines.append(
            f"AGENT {agent.behavior} {agent.radius!r} {agent.speed!r} "
            f"{agent.phase!r} {coords}")
    with open(path, 'w') as fp:
        fp.write('\n'.join(lines) + '\n')


def read_scene(path) -> World:
    seed, bounds, spawn = 0, None, Pose2(0.0, 0.0, 0.0)
    wall_height, agent_height = 2.5, 1.7
    walls, agents = [], []

    with open(path, 'r') as fp:
        for lineno, line in enumerate(fp, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                record, values = parts[0], parts[1:]
                if record == 'SEED':
                    seed = int(values[0])
                elif record == 'BOUNDS':
                    bounds = tuple(float(v) for v in values[:4])
                elif record == 'SPAWN':
                    spawn = Pose2(*(float(v) for v in values[:3]))
                elif record == 'WALL_HEIGHT':
                    wall_height = float(values[0])
                elif record == 'AGENT_HEIGHT':
                    agent_height = float(values[0])
                elif record == 'WALL':
                    walls.append(tuple(float(v) for v in values[:4]))
                elif record == 'AGENT':
                    behavior = values[0]
                    radius, speed, phase = (float(v) for v in values[1:4])
                    coords = [float(v) for v in values[4:]]
                    waypoints = tuple(zip(coords[::2], coords[1::2]))
                    height = agent_height
                    if behavior == 'sit':
                        height = SIT_HEIGHT_RATIO * agent_height
                    agents.append(Agent(
                        radius=radius, height=height, behavior=behavior,
                        waypoints=waypoints, speed=speed, phase=phase,
                        color_id=len(agents) % PALETTE_SIZE))
                else:
                    raise ValueError(f"unknown record {record}")
            except (ValueError, IndexError, TypeError) as e:
                raise DatasetFormatError(str(e), path=path, line=lineno)

    if not walls:
        raise DatasetFormatError("scene has no walls", path=path)
    if bounds is None:
        xs = [v for wall in walls for v in (wall[0], wall[2])]
        ys = [v for wall in walls for v in (wall[1], wall[3])]
        bounds = (min(xs), min(ys), max(xs), max(ys))
    return World(walls=tuple(walls), agents=tuple(agents), bounds=bounds,
                 seed=seed, spawn=spawn, wall_height=wall_height)


def validate_world(world: World):
    """
    Check the structural invariants of a World
    """
    if not world.walls:
        raise WorldParamsError("world has no walls")
    for agent in world.agents:
        for x, y in agent.waypoints:
            if not world.contains(x, y):
                raise WorldParamsError(
                    f"agent waypoint ({x}, {y}) outside bounds")
