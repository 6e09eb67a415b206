"""
On-disk dataset layout::

    root/seq_NNN/
        left/000000.ppm ...     left camera frames (P6)
        right/000000.ppm ...    right camera frames (P6)
        depth/000000.depth ...  ROAMDPTH z-depth maps
        timestamps.txt          <t_ns>
        actions.txt             <t_ns> <v> <omega>   (6 decimals)
        lidar.csv               <t_ns>,<r_0>,...,<r_359>  (inf = no hit)
        odom.txt                <t_ns> <x> <y> <yaw> <v> <omega>
        imu.txt                 <t_ns> <yaw_rate> <accel>
        meta.txt                key=value

Scans, odometry and IMU values are written with full float precision,
so reading them back is lossless. Images are quantized to 8 bits and
actions to 6 decimals.
"""
import logging
import math
import os
import shutil
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from roamsim.config import ACCEL_MAX
from roamsim.exceptions import (
    DatasetFormatError, SequenceExistsError)
from roamsim.kinematics import in_envelope
from roamsim.models import (
    FPS, FRAME_PERIOD_NS, ImuSample, Odometry, Pose2, Scan, SequenceRecord,
    Twist)
from roamsim.rng import SplitMix64
from roamsim.serialization.images import (
    decode_depth, decode_ppm, encode_depth, encode_ppm, read_depth_header)

logger = logging.getLogger("roamsim-dataset")

IMAGE_STREAMS = ('left', 'right', 'depth')
TEXT_STREAMS = ('actions.txt', 'lidar.csv', 'odom.txt', 'imu.txt')
EXTENSIONS = {'left': '.ppm', 'right': '.ppm', 'depth': '.depth'}

TIMESTAMP_TOLERANCE_NS = 1
QUANTIZATION_SLACK = 2e-5
BOUNDS_EPS = 1e-9


def frame_name(index: int, stream: str) -> str:
    return f"{index:06d}{EXTENSIONS[stream]}"


def sequence_name(index: int) -> str:
    return f"seq_{index:03d}"


def _fmt(value: float) -> str:
    return repr(float(value))


def write_sequence(rec: SequenceRecord, root, force: bool = False):
    """
    Write one SequenceRecord below root/<rec.name>
    """
    lengths = set(rec.stream_lengths().values())
    assert len(lengths) == 1, f"unequal stream lengths: {rec.stream_lengths()}"

    directory = os.path.join(root, rec.name)
    if os.path.exists(directory):
        if not force:
            raise SequenceExistsError(
                f"{directory} exists, use force to overwrite")
        shutil.rmtree(directory)
    for stream in IMAGE_STREAMS:
        os.makedirs(os.path.join(directory, stream))

    for k in range(len(rec)):
        with open(os.path.join(directory, 'left',
                               frame_name(k, 'left')), 'wb') as fp:
            fp.write(encode_ppm(rec.left[k]))
        with open(os.path.join(directory, 'right',
                               frame_name(k, 'right')), 'wb') as fp:
            fp.write(encode_ppm(rec.right[k]))
        with open(os.path.join(directory, 'depth',
                               frame_name(k, 'depth')), 'wb') as fp:
            fp.write(encode_depth(rec.depth[k]))

    def write_lines(filename, lines):
        with open(os.path.join(directory, filename), 'w') as fp:
            fp.write(''.join(line + '\n' for line in lines))

    stamps = rec.timestamps
    write_lines('timestamps.txt', (str(t) for t in stamps))
    write_lines('actions.txt', (
        f"{t} {a.v:.6f} {a.omega:.6f}" for t, a in zip(stamps, rec.actions)))
    write_lines('lidar.csv', (
        ','.join([str(t)] + [_fmt(r) for r in s.ranges])
        for t, s in zip(stamps, rec.scans)))
    write_lines('odom.txt', (
        f"{t} {_fmt(o.pose.x)} {_fmt(o.pose.y)} {_fmt(o.pose.yaw)} "
        f"{_fmt(o.twist.v)} {_fmt(o.twist.omega)}"
        for t, o in zip(stamps, rec.odom)))
    write_lines('imu.txt', (
        f"{t} {_fmt(i.yaw_rate)} {_fmt(i.accel)}"
        for t, i in zip(stamps, rec.imu)))
    write_lines('meta.txt', (f"{k}={v}" for k, v in rec.meta.items()))
    logger.info("Wrote %s (%d frames) to %s", rec.name, len(rec), directory)


def _read_rows(path, columns: Optional[int], sep=None) -> List[List[str]]:
    rows = []
    try:
        with open(path, 'r') as fp:
            for lineno, line in enumerate(fp, start=1):
                parts = line.strip().split(sep)
                if columns is not None and len(parts) != columns:
                    raise DatasetFormatError(
                        f"expected {columns} fields, found {len(parts)}",
                        path=path, line=lineno)
                rows.append(parts)
    except OSError as e:
        raise DatasetFormatError(str(e), path=path)
    return rows


def _parse_rows(path, rows, parse):
    parsed = []
    for lineno, row in enumerate(rows, start=1):
        try:
            parsed.append(parse(row))
        except ValueError as e:
            raise DatasetFormatError(str(e), path=path, line=lineno)
    return parsed


def read_timestamps(directory) -> List[int]:
    path = os.path.join(directory, 'timestamps.txt')
    return _parse_rows(path, _read_rows(path, 1), lambda row: int(row[0]))


def read_actions(directory) -> List[Tuple[int, Twist]]:
    path = os.path.join(directory, 'actions.txt')
    return _parse_rows(path, _read_rows(path, 3), lambda row: (
        int(row[0]), Twist(float(row[1]), float(row[2]))))


def _read_frames(directory, stream: str, count: int, decode):
    frames = []
    for k in range(count):
        path = os.path.join(directory, stream, frame_name(k, stream))
        try:
            with open(path, 'rb') as fp:
                data = fp.read()
        except OSError as e:
            raise DatasetFormatError(str(e), path=path)
        frames.append(decode(data, path=path))
    return frames


def _check_stamps(path, expected: Sequence[int], found: Sequence[int]):
    if len(found) != len(expected):
        raise DatasetFormatError(
            f"{len(found)} rows, expected {len(expected)}", path=path)
    for lineno, (a, b) in enumerate(zip(expected, found), start=1):
        if a != b:
            raise DatasetFormatError(
                f"timestamp {b} does not match {a}", path=path, line=lineno)


def read_sequence(root, name: str) -> SequenceRecord:
    """
    Inverse of write_sequence, up to the image and action quantization
    """
    directory = os.path.join(root, name)
    stamps = read_timestamps(directory)
    count = len(stamps)
    rec = SequenceRecord(name=name, timestamps=stamps)

    actions = read_actions(directory)
    _check_stamps(os.path.join(directory, 'actions.txt'),
                  stamps, [t for t, _ in actions])
    rec.actions = [a for _, a in actions]

    path = os.path.join(directory, 'lidar.csv')
    scans = _parse_rows(path, _read_rows(path, None, sep=','), lambda row: (
        Scan(ranges=np.array([float(v) for v in row[1:]]), t=int(row[0]))))
    _check_stamps(path, stamps, [s.t for s in scans])
    for lineno, s in enumerate(scans, start=1):
        if s.ranges.shape != (360,):
            raise DatasetFormatError(
                f"expected 360 ranges, found {s.ranges.size}",
                path=path, line=lineno)
    rec.scans = scans

    path = os.path.join(directory, 'odom.txt')
    odom = _parse_rows(path, _read_rows(path, 6), lambda row: (
        int(row[0]), Odometry(
            Pose2(float(row[1]), float(row[2]), float(row[3])),
            Twist(float(row[4]), float(row[5])))))
    _check_stamps(path, stamps, [t for t, _ in odom])
    rec.odom = [o for _, o in odom]

    path = os.path.join(directory, 'imu.txt')
    imu = _parse_rows(path, _read_rows(path, 3), lambda row: (
        int(row[0]), ImuSample(float(row[1]), float(row[2]))))
    _check_stamps(path, stamps, [t for t, _ in imu])
    rec.imu = [i for _, i in imu]

    rec.left = _read_frames(directory, 'left', count, decode_ppm)
    rec.right = _read_frames(directory, 'right', count, decode_ppm)
    rec.depth = _read_frames(directory, 'depth', count, decode_depth)

    path = os.path.join(directory, 'meta.txt')
    for lineno, row in enumerate(_read_rows(path, None, sep='\n'), start=1):
        key, sep, value = row[0].partition('=')
        if not sep:
            raise DatasetFormatError("expected key=value",
                                     path=path, line=lineno)
        rec.meta[key] = value
    return rec


def list_sequences(root) -> List[str]:
    if not os.path.isdir(root):
        raise FileNotFoundError(f"dataset root {root} does not exist")
    return sorted(
        name for name in os.listdir(root)
        if os.path.isfile(os.path.join(root, name, 'timestamps.txt')))


@dataclass
class Violation:
    """
    :param sequence: sequence name
    :param kind: one of length, timestamps, sync, bounds, accel, format
    :param message: human readable detail
    """
    sequence: str
    kind: str
    message: str

    def __str__(self):
        return f"{self.sequence}: [{self.kind}] {self.message}"


@dataclass
class ValidationReport:
    sequences: List[str] = field(default_factory=list)
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def count(self, kind: str) -> int:
        return sum(1 for v in self.violations if v.kind == kind)

    def format(self) -> str:
        lines = [f"checked {len(self.sequences)} sequence(s), "
                 f"{len(self.violations)} violation(s)"]
        lines.extend(str(v) for v in self.violations)
        return '\n'.join(lines)


def _count_lines(path) -> Optional[int]:
    try:
        with open(path, 'r') as fp:
            return sum(1 for _ in fp)
    except OSError:
        return None


def _validate_sequence(root, name: str) -> List[Violation]:
    directory = os.path.join(root, name)
    violations = []

    def report(kind, message):
        violations.append(Violation(name, kind, message))

    try:
        stamps = read_timestamps(directory)
    except DatasetFormatError as e:
        report('format', str(e))
        return violations
    count = len(stamps)

    for stream in IMAGE_STREAMS:
        stream_dir = os.path.join(directory, stream)
        found = set(os.listdir(stream_dir)) if os.path.isdir(
            stream_dir) else set()
        expected = {frame_name(k, stream) for k in range(count)}
        if found != expected:
            missing = sorted(expected - found)
            extra = sorted(found - expected)
            report('length', f"{stream}: {len(found)} files for {count} "
                   f"timestamps (missing {missing[:5]}, extra {extra[:5]})")

    for filename in TEXT_STREAMS:
        lines = _count_lines(os.path.join(directory, filename))
        if lines != count:
            report('length', f"{filename}: {lines} rows for {count} "
                   f"timestamps")

    for k in range(1, count):
        delta = stamps[k] - stamps[k - 1]
        if abs(delta - FRAME_PERIOD_NS) > TIMESTAMP_TOLERANCE_NS:
            report('timestamps', f"frame {k}: step {delta} ns")

    for filename, sep in (('actions.txt', None), ('lidar.csv', ','),
                          ('odom.txt', None), ('imu.txt', None)):
        path = os.path.join(directory, filename)
        try:
            rows = _read_rows(path, None, sep=sep)
            found = [int(row[0]) for row in rows]
        except (DatasetFormatError, ValueError, IndexError) as e:
            report('format', f"{filename}: {e}")
            continue
        mismatched = [k for k, (a, b) in enumerate(zip(stamps, found))
                      if a != b]
        if mismatched:
            report('sync', f"{filename}: {len(mismatched)} timestamp(s) "
                   f"differ, first at row {mismatched[0] + 1}")

    try:
        actions = [a for _, a in read_actions(directory)]
    except DatasetFormatError as e:
        report('format', str(e))
        actions = []
    inside = []
    for k, a in enumerate(actions):
        ok = in_envelope(a, BOUNDS_EPS)
        inside.append(ok)
        if not ok:
            report('bounds', f"action {k}: v={a.v}, omega={a.omega}")
    max_dv = ACCEL_MAX / FPS + QUANTIZATION_SLACK
    for k in range(1, len(actions)):
        if not (inside[k] and inside[k - 1]):
            continue
        dv = actions[k].v - actions[k - 1].v
        if abs(dv) > max_dv:
            report('accel', f"action {k}: |dv| = {abs(dv):.6f} m/s")

    for stream in IMAGE_STREAMS:
        stream_dir = os.path.join(directory, stream)
        for k in range(count):
            path = os.path.join(stream_dir, frame_name(k, stream))
            if not os.path.isfile(path):
                continue
            with open(path, 'rb') as fp:
                head = fp.read(16)
            try:
                if stream == 'depth':
                    read_depth_header(head, path=path)
                elif head[:2] != b'P6':
                    raise DatasetFormatError(
                        f"bad PPM magic {head[:2]!r}", path=path, offset=0)
            except DatasetFormatError as e:
                report('format', str(e))
    return violations


def validate(root) -> ValidationReport:
    """
    Check every sequence below root for synchronization, actuation
    limits and file integrity
    """
    report = ValidationReport()
    for name in list_sequences(root):
        report.sequences.append(name)
        report.violations.extend(_validate_sequence(root, name))
    logger.info("Validated %s: %d sequence(s), %d violation(s)",
                root, len(report.sequences), len(report.violations))
    return report


def clip_index(seq_len: int, clip_len: int = 50, gap: int = 10) -> List[int]:
    """
    Start frames of non-overlapping clips separated by gap frames
    """
    if clip_len < 1 or gap < 0:
        raise ValueError("clip_len must be >= 1 and gap >= 0")
    return list(range(0, seq_len - clip_len + 1, clip_len + gap))


def split_train_test(sequences: Sequence, ratio=(20, 5), seed: int = 0):
    """
    Seeded shuffle followed by a proportional split, train count
    rounded down
    """
    if len(sequences) < 2:
        raise ValueError("need at least 2 sequences to split")
    shuffled = list(sequences)
    SplitMix64(seed).shuffle(shuffled)
    n_train = len(shuffled) * ratio[0] // (ratio[0] + ratio[1])
    return shuffled[:n_train], shuffled[n_train:]


def downsample(frames: np.ndarray, resolution: int) -> np.ndarray:
    """
    Block-average (..., H, W, C) frames to resolution x resolution
    """
    height, width = frames.shape[-3:-1]
    if (height, width) == (resolution, resolution):
        return frames
    if height % resolution or width % resolution:
        raise ValueError(
            f"cannot downsample {height}x{width} to {resolution}")
    fy, fx = height // resolution, width // resolution
    shape = frames.shape[:-3] + (resolution, fy, resolution, fx,
                                 frames.shape[-1])
    return frames.reshape(shape).mean(axis=(-4, -2))


@dataclass(eq=False)
class Clip:
    """
    Left frames and actions of one clip

    :param frames: (clip_len, H, W, 3) in [0, 1]
    :param actions: clip_len actions, action k applied after frame k
    """
    sequence: str
    start: int
    frames: np.ndarray
    actions: List[Twist]

    @property
    def clip_id(self) -> str:
        return f"{self.sequence}_{self.start:06d}"


def load_clips(root, names: Sequence[str], clip_len: int = 50,
               gap: int = 10, resolution: Optional[int] = None
               ) -> List[Clip]:
    """
    Cut every named sequence into clips, loading only left frames and
    actions
    """
    clips = []
    for name in names:
        directory = os.path.join(root, name)
        stamps = read_timestamps(directory)
        actions = [a for _, a in read_actions(directory)]
        if len(actions) != len(stamps):
            raise DatasetFormatError(
                f"{len(actions)} actions for {len(stamps)} frames",
                path=os.path.join(directory, 'actions.txt'))
        starts = clip_index(len(stamps), clip_len, gap)
        if not starts:
            continue
        frames = np.stack(_read_frames(directory, 'left', len(stamps),
                                       decode_ppm))
        if resolution is not None:
            frames = downsample(frames, resolution)
        for start in starts:
            clips.append(Clip(
                sequence=name, start=start,
                frames=frames[start:start + clip_len],
                actions=actions[start:start + clip_len]))
    logger.debug("Loaded %d clips from %d sequence(s)", len(clips),
                 len(names))
    return clips


def sequence_summary(rec: SequenceRecord) -> Dict[str, float]:
    return {
        'frames': len(rec),
        'min_wall_clearance': float(rec.meta.get(
            'min_wall_clearance', math.inf)),
        'min_agent_clearance': float(rec.meta.get(
            'min_agent_clearance', math.inf)),
    }
