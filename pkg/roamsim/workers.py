"""
Concurrent dataset generation.

Each sequence (world generation, simulation, writing) is one blocking job
run in a thread pool from asyncio tasks. Sequences own their directory,
so jobs never share files. Results come back in submission order.
"""
import asyncio
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

from roamsim.config import RunConfig
from roamsim.dataset import sequence_name, sequence_summary, write_sequence
from roamsim.sim import simulate_sequence
from roamsim.world import generate_world, write_scene

logger = logging.getLogger("roamsim-workers")

THREADS_ENV = 'ROAMSIM_THREADS'


def thread_count(requested: Optional[int] = None) -> int:
    """
    Worker threads: explicit request, else ROAMSIM_THREADS, 0 = cpu count
    """
    if requested is None:
        raw = os.environ.get(THREADS_ENV, '0')
        try:
            requested = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV}={raw!r} is not an integer")
    if requested < 0:
        raise ValueError("thread count must be >= 0")
    return requested or os.cpu_count() or 1


@dataclass
class SequenceResult:
    """
    :param error: the exception that aborted this sequence, if any
    """
    name: str
    seed: int
    frames: int = 0
    min_wall_clearance: float = float('inf')
    min_agent_clearance: float = float('inf')
    error: Optional[BaseException] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def summary(self) -> str:
        if self.error is not None:
            return f"{self.name}: FAILED ({self.error})"
        return (f"{self.name}: {self.frames} frames, min wall clearance "
                f"{self.min_wall_clearance:.3f} m, min agent clearance "
                f"{self.min_agent_clearance:.3f} m")


class SequenceGenerator(object):
    """
    :param out: dataset root
    :param config: run configuration
    :param seed: sequence i uses world and simulation seed seed + i
    :param frames: frames per sequence
    :param threads: concurrent jobs, see thread_count
    :param scenes: also write scene.txt into each sequence directory
    :param force: overwrite existing sequence directories
    """

    def __init__(self, out, config: RunConfig = None, seed: int = 0,
                 frames: int = 360, threads: Optional[int] = None,
                 scenes: bool = False, force: bool = False):
        self.out = out
        self.config = config or RunConfig()
        self.seed = seed
        self.frames = frames
        self.threads = thread_count(threads)
        self.scenes = scenes
        self.force = force

    def generate_one(self, index: int) -> SequenceResult:
        seed = self.seed + index
        name = sequence_name(index)
        world = generate_world(seed, self.config.world)
        record = simulate_sequence(world, world.spawn, self.frames,
                                   self.config, seed=seed, name=name)
        write_sequence(record, self.out, force=self.force)
        if self.scenes:
            write_scene(world, os.path.join(self.out, name, 'scene.txt'),
                        agent_height=self.config.world.agent_height)
        summary = sequence_summary(record)
        return SequenceResult(
            name=name, seed=seed, frames=summary['frames'],
            min_wall_clearance=summary['min_wall_clearance'],
            min_agent_clearance=summary['min_agent_clearance'])

    async def _run_job(self, loop, executor, index: int) -> SequenceResult:
        try:
            return await loop.run_in_executor(
                executor, self.generate_one, index)
        except Exception as e:
            logger.exception(e)
            return SequenceResult(sequence_name(index), self.seed + index,
                                  error=e)

    async def run(self, count: int) -> List[SequenceResult]:
        os.makedirs(self.out, exist_ok=True)
        loop = asyncio.get_running_loop()
        logger.info("Generating %d sequence(s) of %d frames with %d "
                    "thread(s)", count, self.frames, self.threads)
        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            tasks = [asyncio.ensure_future(
                self._run_job(loop, executor, index))
                for index in range(count)]
            if tasks:
                await asyncio.wait(tasks)
        results = [task.result() for task in tasks]
        failed = [r for r in results if not r.ok]
        if failed:
            logger.error("%d of %d sequence(s) failed", len(failed), count)
        return results

    def generate(self, count: int) -> List[SequenceResult]:
        return asyncio.run(self.run(count))
