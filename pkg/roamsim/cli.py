"""
roamsim command line: generate, validate, train, predict, evaluate,
config and gradcheck.

Exit codes: 0 ok, 1 validation/metric failure or simulation abort,
2 usage error.
"""
import argparse
import csv
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from roamsim import __version__
from roamsim.config import OMEGA_MAX, V_MAX, dump_config, load_config
from roamsim.dataset import load_clips, validate
from roamsim.exceptions import (
    CheckpointFormatError, ConfigError, DatasetFormatError,
    EmptyClipIndexError, MetricsError, SimulationAbort)
from roamsim.metrics import (
    evaluate, format_report, psnr, ssim, write_curves_csv)
from roamsim.predictor.network import (
    gradient_check, init_params, rollout)
from roamsim.predictor.train import dataset_split, load_model, train
from roamsim.rng import SplitMix64
from roamsim.serialization.checkpoint import load_checkpoint
from roamsim.serialization.images import montage, read_ppm, write_ppm
from roamsim.workers import SequenceGenerator

logger = logging.getLogger("roamsim-cli")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _require_dir(path):
    if not os.path.isdir(path):
        raise UsageError(f"{path} is not a directory")


def cmd_generate(args) -> int:
    config = load_config(args.config)
    seed = config.seed.world if args.seed is None else args.seed
    generator = SequenceGenerator(
        args.out, config, seed=seed, frames=args.frames,
        threads=args.threads, scenes=args.scenes, force=args.force)
    results = generator.generate(args.sequences)
    for result in results:
        print(result.summary())
    return EXIT_OK if all(r.ok for r in results) else EXIT_FAILURE


def cmd_validate(args) -> int:
    _require_dir(args.dir)
    report = validate(args.dir)
    print(report.format())
    return EXIT_OK if report.ok else EXIT_FAILURE


def cmd_train(args) -> int:
    _require_dir(args.data)
    config = load_config(args.config)
    log_path = args.log or str(args.out) + '.csv'
    trainer = train(args.data, config, action_blind=args.ablation == 'on',
                    iterations=args.iterations, log_path=log_path,
                    checkpoint_path=args.out, resume=args.resume)
    last = trainer.loss_log[-1] if trainer.loss_log else None
    print(f"checkpoint {args.out}, iteration {trainer.iteration}"
          + (f", loss {last[1]:.6f}" if last else ''))
    return EXIT_OK


def _test_clips(data, config, resolution):
    _, names = dataset_split(data, config)
    cfg = config.train
    return load_clips(data, names, cfg.clip_len, cfg.clip_gap,
                      resolution=resolution)


def cmd_predict(args) -> int:
    _require_dir(args.data)
    config = load_config(args.config)
    try:
        _, meta = load_checkpoint(args.ckpt)
    except CheckpointFormatError as e:
        raise UsageError(str(e))
    params = load_model(args.ckpt)
    resolution = int(meta.get('resolution', config.train.resolution))
    context = config.train.context
    horizon = config.train.infer_horizon if args.horizon is None \
        else args.horizon

    clips = _test_clips(args.data, config, resolution)
    if args.clip:
        wanted = set(args.clip)
        clips = [c for c in clips if c.clip_id in wanted]
        missing = wanted - {c.clip_id for c in clips}
        if missing:
            raise UsageError(f"unknown clip(s): {', '.join(sorted(missing))}")
    if not clips:
        raise EmptyClipIndexError(f"no clips under {args.data}")

    for clip in clips:
        if len(clip.frames) < context + horizon:
            raise UsageError(
                f"{clip.clip_id}: {len(clip.frames)} frames, need "
                f"{context + horizon}")
        predicted = rollout(params, clip.frames[:context],
                            clip.actions[:context + horizon], horizon)
        truth = list(clip.frames[context:context + horizon])
        pred_dir = os.path.join(args.out, 'pred', clip.clip_id)
        gt_dir = os.path.join(args.out, 'gt', clip.clip_id)
        os.makedirs(pred_dir, exist_ok=True)
        os.makedirs(gt_dir, exist_ok=True)
        with open(os.path.join(args.out, clip.clip_id + '.csv'), 'w',
                  newline='') as fp:
            writer = csv.writer(fp, lineterminator='\n')
            writer.writerow(('t', 'psnr', 'ssim'))
            for t, (frame, gt) in enumerate(zip(predicted, truth)):
                write_ppm(os.path.join(pred_dir, f"{t:06d}.ppm"), frame)
                write_ppm(os.path.join(gt_dir, f"{t:06d}.ppm"), gt)
                writer.writerow((t + 1, repr(psnr(frame, gt).db),
                                 repr(ssim(frame, gt))))
        if args.montage:
            write_ppm(os.path.join(args.out, clip.clip_id + '_montage.ppm'),
                      montage([truth, predicted]))
        print(f"{clip.clip_id}: {horizon} frames")
    return EXIT_OK


def _read_clip_dir(path) -> List[np.ndarray]:
    names = sorted(n for n in os.listdir(path) if n.endswith('.ppm'))
    return [read_ppm(os.path.join(path, n)) for n in names]


def cmd_evaluate(args) -> int:
    _require_dir(args.pred)
    _require_dir(args.gt)
    pred_ids = sorted(n for n in os.listdir(args.pred)
                      if os.path.isdir(os.path.join(args.pred, n)))
    gt_ids = sorted(n for n in os.listdir(args.gt)
                    if os.path.isdir(os.path.join(args.gt, n)))
    if pred_ids != gt_ids:
        only_pred = sorted(set(pred_ids) - set(gt_ids))
        only_gt = sorted(set(gt_ids) - set(pred_ids))
        raise MetricsError(f"clip sets differ: only predicted {only_pred}, "
                           f"only ground truth {only_gt}")
    pred = [_read_clip_dir(os.path.join(args.pred, n)) for n in pred_ids]
    gt = [_read_clip_dir(os.path.join(args.gt, n)) for n in gt_ids]
    curves = evaluate(pred, gt)
    write_curves_csv(args.report, curves)
    text = format_report(curves, len(pred))
    report_path = os.path.splitext(args.report)[0] + '.txt'
    with open(report_path, 'w') as fp:
        fp.write(text)
    print(text, end='')
    return EXIT_OK


def cmd_config(args) -> int:
    print(dump_config(load_config(args.config)), end='')
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    config = load_config(args.config)
    cfg = config.train
    rng = SplitMix64(args.seed)
    size = args.resolution
    window = rng.random_array(
        (cfg.context + args.horizon) * size * size * 3).reshape(
        1, cfg.context + args.horizon, size, size, 3)
    steps = cfg.context + args.horizon
    actions = np.stack([rng.random_array(steps) * V_MAX,
                        (2.0 * rng.random_array(steps) - 1.0) * OMEGA_MAX],
                       axis=-1)[None]
    params = init_params(config.seed.init, dtype='float64')
    report = gradient_check(params, window, actions, cfg,
                            samples=args.samples, seed=args.seed)
    print(report.format())
    return EXIT_OK if report.passed else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    formatter = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog='roamsim', formatter_class=formatter,
        description="Navigation data simulator and action-conditioned "
                    "frame predictor")
    parser.add_argument('--version', action='version',
                        version=f"%(prog)s {__version__}")
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help="-v for info, -vv for debug logging")
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    p = commands.add_parser('generate', formatter_class=formatter,
                            help="simulate sequences into a dataset")
    p.add_argument('--config', help="run config file")
    p.add_argument('--seed', type=int, default=None,
                   help="base seed, defaults to seed.world of the config")
    p.add_argument('--sequences', type=int, default=25)
    p.add_argument('--frames', type=int, default=360)
    p.add_argument('--out', required=True, help="dataset root")
    p.add_argument('--threads', type=int, default=None,
                   help="worker threads, defaults to $ROAMSIM_THREADS "
                        "(0 = cpu count)")
    p.add_argument('--scenes', action='store_true',
                   help="write scene.txt into every sequence")
    p.add_argument('--force', action='store_true',
                   help="overwrite existing sequences")
    p.set_defaults(func=cmd_generate)

    p = commands.add_parser('validate', formatter_class=formatter,
                            help="check a dataset")
    p.add_argument('dir', help="dataset root")
    p.set_defaults(func=cmd_validate)

    p = commands.add_parser('train', formatter_class=formatter,
                            help="train the predictor")
    p.add_argument('--data', required=True, help="dataset root")
    p.add_argument('--config', help="run config file")
    p.add_argument('--out', required=True, help="checkpoint path")
    p.add_argument('--ablation', choices=('on', 'off'), default='off',
                   help="train the action-blind variant")
    p.add_argument('--resume', help="checkpoint to resume from")
    p.add_argument('--iterations', type=int, default=None,
                   help="total iterations, defaults to train.iterations")
    p.add_argument('--log', help="loss CSV, defaults to <out>.csv")
    p.set_defaults(func=cmd_train)

    p = commands.add_parser('predict', formatter_class=formatter,
                            help="roll out test clips")
    p.add_argument('--ckpt', required=True)
    p.add_argument('--data', required=True, help="dataset root")
    p.add_argument('--config', help="run config file")
    p.add_argument('--clip', action='append',
                   help="clip id <sequence>_<start>, repeatable, "
                        "default all test clips")
    p.add_argument('--horizon', type=int, default=None,
                   help="predicted frames, defaults to train.infer_horizon")
    p.add_argument('--out', required=True)
    p.add_argument('--montage', action='store_true',
                   help="write a ground truth / prediction strip per clip")
    p.set_defaults(func=cmd_predict)

    p = commands.add_parser('evaluate', formatter_class=formatter,
                            help="PSNR/SSIM curves of predicted clips")
    p.add_argument('--pred', required=True)
    p.add_argument('--gt', required=True)
    p.add_argument('--report', required=True, help="output CSV")
    p.set_defaults(func=cmd_evaluate)

    p = commands.add_parser('config', formatter_class=formatter,
                            help="print the effective run config")
    p.add_argument('--dump', action='store_true',
                   help="print every key with its value")
    p.add_argument('--config', help="run config file")
    p.set_defaults(func=cmd_config)

    p = commands.add_parser('gradcheck', formatter_class=formatter,
                            help="finite difference gradient check")
    p.add_argument('--config', help="run config file")
    p.add_argument('--resolution', type=int, default=16)
    p.add_argument('--horizon', type=int, default=3)
    p.add_argument('--samples', type=int, default=100)
    p.add_argument('--seed', type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose,
                                                      logging.DEBUG)
    logging.basicConfig(
        level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, FileNotFoundError,
            EmptyClipIndexError, CheckpointFormatError) as e:
        print(f"roamsim {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SimulationAbort, MetricsError, DatasetFormatError) as e:
        print(f"roamsim {args.command}: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
