import os
from dataclasses import replace

import numpy as np
import pytest

from roamsim.config import CameraConfig, RunConfig, TrainConfig, WorldParams
from roamsim.dataset import load_clips, write_sequence
from roamsim.exceptions import CheckpointFormatError, EmptyClipIndexError
from roamsim.metrics import evaluate
from roamsim.models import Twist
from roamsim.predictor.network import (
    action_vector, loss_and_gradients, rollout)
from roamsim.predictor.train import (
    STATE_SUFFIX, Trainer, dataset_split, load_model, read_loss_log, train,
    write_loss_log)
from roamsim.serialization.checkpoint import load_checkpoint
from roamsim.sim import simulate_sequence
from roamsim.workers import SequenceGenerator
from roamsim.world import generate_world
from tests.utils import random_clip, slow, small_config

CONFIG = replace(TrainConfig(), batch=2, context=3, train_horizon=2,
                 clip_len=10, resolution=16, checkpoint_every=0, lr=1e-3)


@pytest.fixture(scope='module')
def clips():
    return [random_clip(length=10, seed=s, name=f"seq_{s:03d}")
            for s in range(3)]


def test_empty_clip_index():
    with pytest.raises(EmptyClipIndexError):
        Trainer([random_clip(length=4)], CONFIG)


def test_sample_batch(clips):
    frames, actions = Trainer(clips, CONFIG).sample_batch()
    assert frames.shape == (2, 5, 16, 16, 3)
    assert actions.shape == (2, 5, 2)


def test_identical_seeds_give_identical_runs(clips):
    first = Trainer(clips, CONFIG, seed=4)
    second = Trainer(clips, CONFIG, seed=4)
    first.run(3)
    second.run(3)
    assert first.loss_log == second.loss_log
    assert [row[0] for row in first.loss_log] == [1, 2, 3]
    assert all(np.isfinite(row[1]) for row in first.loss_log)
    for name in first.params.names():
        np.testing.assert_array_equal(first.params[name],
                                      second.params[name])


def test_training_changes_weights(clips):
    trainer = Trainer(clips, CONFIG)
    before = trainer.params.copy()
    trainer.step()
    assert trainer.iteration == 1
    assert not np.array_equal(before['decoder.output.b'],
                              trainer.params['decoder.output.b'])


def test_resume_is_exact(tmp_path, clips):
    straight = Trainer(clips, CONFIG, seed=1, init_seed=2)
    straight.run(4)

    path = str(tmp_path / 'model.ckpt')
    interrupted = Trainer(clips, CONFIG, seed=1, init_seed=2)
    interrupted.run(2, checkpoint_path=path)
    assert os.path.isfile(path + STATE_SUFFIX)

    resumed = Trainer.resume(path, clips)
    assert resumed.iteration == 2
    resumed.run(4)
    assert resumed.loss_log == straight.loss_log
    for name in straight.params.names():
        np.testing.assert_array_equal(resumed.params[name],
                                      straight.params[name])


def test_resume_needs_state_file(tmp_path, clips):
    with pytest.raises(CheckpointFormatError):
        Trainer.resume(tmp_path / 'missing.ckpt', clips, CONFIG)


def test_checkpoint_metadata(tmp_path, clips):
    path = tmp_path / 'blind.ckpt'
    trainer = Trainer(clips, CONFIG, init_seed=9, action_blind=True)
    trainer.run(1, checkpoint_path=path)
    _, meta = load_checkpoint(path)
    assert meta == {'action_blind': 1, 'resolution': 16,
                    'iteration': 1, 'init_seed': 9}
    assert all(isinstance(value, int) for value in meta.values())
    model = load_model(path)
    assert model.action_blind and model.init_seed == 9
    assert model.parameter_count() == trainer.params.parameter_count()


def test_large_init_seed_survives_checkpoint(tmp_path, clips):
    seed = 2 ** 53 + 1
    path = tmp_path / 'model.ckpt'
    Trainer(clips, CONFIG, init_seed=seed).run(1, checkpoint_path=path)
    assert load_model(path).init_seed == seed


def test_loss_log_csv(tmp_path):
    path = tmp_path / 'loss.csv'
    log = [[1, 0.5, 0.3, 0.2], [2, 1 / 3, 0.1, 0.2333333333333333]]
    write_loss_log(path, log)
    assert path.read_text().splitlines()[0] == 'iteration,loss,mse,gdl'
    assert read_loss_log(path) == log


def test_train_on_dataset(tmp_path):
    config = small_config(batch=2, context=3, train_horizon=2, clip_len=10,
                          checkpoint_every=0)
    data = tmp_path / 'data'
    for index in range(2):
        world = generate_world(index)
        record = simulate_sequence(world, world.spawn, 12, config,
                                   seed=index, name=f"seq_{index:03d}")
        write_sequence(record, data)
    checkpoint = tmp_path / 'out' / 'model.ckpt'
    log = tmp_path / 'loss.csv'
    trainer = train(str(data), config, iterations=2, log_path=log,
                    checkpoint_path=str(checkpoint))
    assert trainer.iteration == 2
    assert len(read_loss_log(log)) == 2
    _, meta = load_checkpoint(checkpoint)
    assert meta['iteration'] == 2.0
    assert meta['resolution'] == 16.0
    assert meta['split_seed'] == float(config.seed.split)
    split = trainer.state.split
    assert sorted(split['train'] + split['test']) == ['seq_000', 'seq_001']
    assert not set(split['train']) & set(split['test'])

    resumed = train(str(data), config, iterations=3, log_path=log,
                    checkpoint_path=str(checkpoint), resume=str(checkpoint))
    assert resumed.iteration == 3
    assert [row[0] for row in read_loss_log(log)] == [1, 2, 3]
    assert resumed.state.split == split


def test_single_clip_batch_is_duplicated():
    clip = random_clip(length=5, seed=4)
    cfg = replace(CONFIG, batch=3, clip_len=5)
    frames, actions = Trainer([clip], cfg).sample_batch()
    assert frames.shape == (3, 5, 16, 16, 3)
    for item in range(1, 3):
        np.testing.assert_array_equal(frames[item], frames[0])
        np.testing.assert_array_equal(actions[item], actions[0])


def test_loss_falls_on_a_single_clip():
    clip = random_clip(length=5, seed=11)
    trainer = Trainer([clip], replace(CONFIG, clip_len=5))
    trainer.run(20)
    assert trainer.loss_log[-1][1] < trainer.loss_log[0][1]


def gradient_norm(trainer: Trainer) -> float:
    frames = np.stack([c.frames[:trainer.cfg.window] for c in trainer.clips])
    actions = np.stack([action_vector(c.actions[:trainer.cfg.window])
                        for c in trainer.clips])
    _, grads = loss_and_gradients(trainer.params, frames, actions,
                                  trainer.cfg)
    return float(np.sqrt(sum((g.astype(np.float64) ** 2).sum()
                             for g in grads.values())))


@slow
def test_overfits_a_single_clip():
    # 32x32, batch 8 of one clip, lr 1e-4, beta1 0.5
    clip = random_clip(length=15, size=32, seed=11)
    cfg = replace(TrainConfig(), clip_len=15, checkpoint_every=0)
    assert (cfg.resolution, cfg.batch, cfg.lr, cfg.beta1) == \
        (32, 8, 1e-4, 0.5)
    trainer = Trainer([clip], cfg)
    start_norm = gradient_norm(trainer)
    trainer.run(2000)
    losses = [row[1] for row in trainer.loss_log]
    assert len(losses) == 2000
    assert min(losses) <= 0.1 * losses[0]
    assert gradient_norm(trainer) < start_norm


def test_trained_model_is_action_sensitive(clips):
    clip = clips[0]
    context = clip.frames[:CONFIG.context]
    straight = [Twist(0.1, 0.0)] * (CONFIG.context + 4)
    turning = [Twist(0.0, 1.8)] * (CONFIG.context + 4)
    for blind in (False, True):
        trainer = Trainer(clips, CONFIG, action_blind=blind)
        trainer.run(3)
        a = np.stack(rollout(trainer.params, context, straight, 4))
        b = np.stack(rollout(trainer.params, context, turning, 4))
        if blind:
            np.testing.assert_array_equal(a, b)
        else:
            assert np.abs(a - b).max() > 1e-6


ABLATION_ITERATIONS = 5000


@slow
def test_action_conditioning_beats_blind_ablation(tmp_path):
    config = RunConfig(
        world=replace(WorldParams(), turn_heavy=True),
        camera=replace(CameraConfig(), width=32, height=32),
        train=replace(TrainConfig(), iterations=ABLATION_ITERATIONS,
                      checkpoint_every=0)).validate()
    cfg = config.train
    data = tmp_path / 'data'
    results = SequenceGenerator(data, config, seed=config.seed.world,
                                frames=360).generate(25)
    assert all(r.ok for r in results)
    _, test_names = dataset_split(data, config)
    clips = load_clips(data, test_names, cfg.clip_len, cfg.clip_gap,
                       resolution=cfg.resolution)
    assert len(clips) >= 20
    horizon = cfg.infer_horizon
    truth = [list(c.frames[cfg.context:cfg.context + horizon])
             for c in clips]

    scores = {}
    for blind in (False, True):
        params = train(str(data), config, action_blind=blind).params
        predicted = [rollout(params, c.frames[:cfg.context],
                             c.actions[:cfg.context + horizon], horizon)
                     for c in clips]
        curves = evaluate(predicted, truth)
        scores[blind] = (float(np.mean(curves['ssim'].mean)),
                         float(np.mean(curves['psnr'].mean)))
    (ssim_on, psnr_on), (ssim_off, psnr_off) = scores[False], scores[True]
    assert ssim_on - ssim_off >= 0.01, scores
    assert psnr_on - psnr_off >= 0.2, scores
