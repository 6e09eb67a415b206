"""
Training loop: seeded window sampling, rollout with prediction feedback,
loss, backward and Adam.

A checkpoint ``<ckpt>`` holds the float32 weights. Next to it
``<ckpt>.state`` holds everything needed to resume bit-exactly: the
full precision weights, Adam moments, sampler RNG state and the loss log.
"""
import csv
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from roamsim.config import RunConfig, TrainConfig
from roamsim.dataset import (
    Clip, list_sequences, load_clips, split_train_test)
from roamsim.exceptions import CheckpointFormatError, EmptyClipIndexError
from roamsim.predictor.network import (
    ModelParams, action_vector, init_params, loss_and_gradients)
from roamsim.predictor.optim import AdamState, adam_step
from roamsim.rng import SplitMix64
from roamsim.serialization.checkpoint import load_checkpoint, save_checkpoint
from roamsim.serialization.msgpack import dumpb, loadb, register

logger = logging.getLogger("roamsim-train")

LOG_COLUMNS = ('iteration', 'loss', 'mse', 'gdl')
STATE_SUFFIX = '.state'


@dataclass(eq=False)
class TrainerState:
    """
    :param loss_log: [iteration, loss, mse, gdl] rows
    :param config: TrainConfig fields the run was started with
    :param split: seed, train and test sequence names of the dataset split
    """
    iteration: int = 0
    rng_state: int = 0
    params: Optional[ModelParams] = None
    adam: Optional[AdamState] = None
    loss_log: List[list] = field(default_factory=list)
    config: Dict[str, object] = field(default_factory=dict)
    split: Dict[str, object] = field(default_factory=dict)


register(TrainerState)


def write_loss_log(path, loss_log: Sequence[Sequence[float]]):
    with open(path, 'w', newline='') as fp:
        writer = csv.writer(fp, lineterminator='\n')
        writer.writerow(LOG_COLUMNS)
        for iteration, total, mse, gdl in loss_log:
            writer.writerow([int(iteration), repr(float(total)),
                             repr(float(mse)), repr(float(gdl))])


def read_loss_log(path) -> List[list]:
    with open(path, 'r', newline='') as fp:
        reader = csv.reader(fp)
        header = next(reader)
        assert tuple(header) == LOG_COLUMNS, f"unexpected header {header}"
        return [[int(row[0])] + [float(v) for v in row[1:]]
                for row in reader]


class Trainer(object):
    """
    :param clips: training clips, each at least cfg.window frames long
    :param cfg: optimizer and protocol settings
    :param seed: sampler seed
    :param init_seed: weight initialization seed
    """

    def __init__(self, clips: Sequence[Clip], cfg: TrainConfig = None,
                 seed: int = 0, init_seed: int = 0,
                 action_blind: bool = False,
                 state: TrainerState = None):
        self.cfg = cfg or TrainConfig()
        self.clips = [c for c in clips if len(c.frames) >= self.cfg.window]
        if not self.clips:
            raise EmptyClipIndexError(
                f"no clip holds a {self.cfg.window} frame window")

        if state is None:
            state = TrainerState(
                rng_state=SplitMix64(seed).state,
                params=init_params(init_seed, action_blind, self.cfg.dtype),
                adam=AdamState(),
                config=asdict(self.cfg))
        self.state = state
        self.rng = SplitMix64(0)
        self.rng.state = state.rng_state

    @property
    def params(self) -> ModelParams:
        return self.state.params

    @property
    def iteration(self) -> int:
        return self.state.iteration

    @property
    def loss_log(self) -> List[list]:
        return self.state.loss_log

    def sample_batch(self):
        """
        (batch, window, H, W, 3) frames and (batch, window, 2) actions
        """
        window = self.cfg.window
        frames, actions = [], []
        for _ in range(self.cfg.batch):
            clip = self.clips[self.rng.randint(0, len(self.clips) - 1)]
            start = self.rng.randint(0, len(clip.frames) - window)
            frames.append(clip.frames[start:start + window])
            actions.append(action_vector(clip.actions[start:start + window]))
        return np.stack(frames), np.stack(actions)

    def step(self):
        frames, actions = self.sample_batch()
        value, grads = loss_and_gradients(self.params, frames, actions,
                                          self.cfg)
        if not math.isfinite(value.total):
            raise FloatingPointError(
                f"non-finite loss at iteration {self.iteration + 1}")
        weights, adam = adam_step(self.params.weights, grads,
                                  self.state.adam, self.cfg)
        self.state.params.weights = weights
        self.state.adam = adam
        self.state.iteration += 1
        self.state.rng_state = self.rng.state
        self.state.loss_log.append(
            [self.iteration, value.total, value.mse, value.gdl])
        logger.debug("iteration %d: loss %.6f mse %.6f gdl %.6f",
                     self.iteration, value.total, value.mse, value.gdl)
        return value

    def run(self, iterations: int = None, log_path=None,
            checkpoint_path=None) -> ModelParams:
        """
        Train until ``iterations`` updates have been applied in total,
        so a resumed run stops where the original would have
        """
        iterations = self.cfg.iterations if iterations is None \
            else iterations
        logger.info("Training from iteration %d to %d on %d clip(s)",
                    self.iteration, iterations, len(self.clips))
        while self.iteration < iterations:
            self.step()
            every = self.cfg.checkpoint_every
            if checkpoint_path and every and self.iteration % every == 0:
                self.save(checkpoint_path)
                if log_path:
                    write_loss_log(log_path, self.loss_log)
        if checkpoint_path:
            self.save(checkpoint_path)
        if log_path:
            write_loss_log(log_path, self.loss_log)
        if self.loss_log:
            logger.info("Finished at iteration %d, loss %.6f",
                        self.iteration, self.loss_log[-1][1])
        return self.params

    def save(self, path):
        params = self.params
        meta = {'action_blind': int(params.action_blind),
                'resolution': int(self.clips[0].frames.shape[1]),
                'iteration': int(self.iteration),
                'init_seed': int(params.init_seed)}
        if 'seed' in self.state.split:
            meta['split_seed'] = int(self.state.split['seed'])
        save_checkpoint(
            path,
            {n: w.astype(np.float32) for n, w in params.weights.items()},
            meta=meta)
        with open(str(path) + STATE_SUFFIX, 'wb') as fp:
            fp.write(dumpb(self.state))

    @classmethod
    def resume(cls, path, clips: Sequence[Clip],
               cfg: TrainConfig = None) -> 'Trainer':
        state_path = str(path) + STATE_SUFFIX
        try:
            with open(state_path, 'rb') as fp:
                state = loadb(fp.read())
        except OSError as e:
            raise CheckpointFormatError(
                f"cannot resume without {state_path}: {e}")
        if not isinstance(state, TrainerState):
            raise CheckpointFormatError(f"{state_path}: not a trainer state")
        logger.info("Resuming from %s at iteration %d", path,
                    state.iteration)
        return cls(clips, cfg or TrainConfig(**state.config), state=state)


def load_model(path) -> ModelParams:
    """
    Weights and action conditioning mode from a checkpoint file
    """
    weights, meta = load_checkpoint(path)
    return ModelParams(weights, action_blind=bool(meta.get('action_blind')),
                       init_seed=int(meta.get('init_seed', 0)))


def dataset_split(root, config: RunConfig) -> Tuple[List[str], List[str]]:
    """
    (train, test) sequence names. A single sequence serves as both.
    """
    names = list_sequences(root)
    if len(names) >= 2:
        return split_train_test(names, seed=config.seed.split)
    return names, names


def training_clips(root, config: RunConfig) -> List[Clip]:
    """
    Clips of the training split of the dataset at root
    """
    names, _ = dataset_split(root, config)
    cfg = config.train
    clips = load_clips(root, names, cfg.clip_len, cfg.clip_gap,
                       resolution=cfg.resolution)
    if not clips:
        raise EmptyClipIndexError(
            f"no {cfg.clip_len} frame clip in {len(names)} sequence(s) "
            f"under {root}")
    return clips


def train(root, config: RunConfig = None, action_blind: bool = False,
          iterations: int = None, log_path=None, checkpoint_path=None,
          resume=None) -> Trainer:
    """
    Train on the training split of a dataset and return the trainer,
    its params and loss_log hold the results
    """
    config = config or RunConfig()
    clips = training_clips(root, config)
    if resume:
        trainer = Trainer.resume(resume, clips, config.train)
    else:
        trainer = Trainer(clips, config.train, seed=config.seed.train,
                          init_seed=config.seed.init,
                          action_blind=action_blind)
        train_names, test_names = dataset_split(root, config)
        trainer.state.split = {'seed': config.seed.split,
                               'train': train_names, 'test': test_names}
        logger.info("Split seed %d: train %s, test %s", config.seed.split,
                    ', '.join(train_names), ', '.join(test_names))
    if checkpoint_path:
        directory = os.path.dirname(os.path.abspath(checkpoint_path))
        os.makedirs(directory, exist_ok=True)
    trainer.run(iterations, log_path=log_path,
                checkpoint_path=checkpoint_path)
    return trainer
