"""
Model checkpoint container::

    b'ACPNETCK'                 magic
    u32 LE                      version
    repeated until end of file:
        u32 LE                  name length
        bytes                   name (utf-8)
        u32 LE                  rank
        u32 LE * rank           dims
        f32 LE * prod(dims)     values

Scalars describing the model (``meta.action_blind``, ``meta.resolution``,
``meta.iteration``, ``meta.init_seed``, ``meta.split_seed``) are blocks
named with a ``meta.`` prefix. A float is a rank 0 block. An unsigned
64-bit integer is a (4,) block of its 16-bit limbs, least significant
first, each exact in f32.
"""
import logging
import struct
from typing import Dict, Optional, Tuple, Union

import numpy as np

from roamsim.exceptions import CheckpointFormatError

logger = logging.getLogger("roamsim-checkpoint")

MAGIC = b'ACPNETCK'
VERSION = 1
META_PREFIX = 'meta.'
INT_LIMBS = 4
LIMB_BITS = 16

_U32 = struct.Struct('<I')

MetaValue = Union[int, float]


def encode_meta(value: MetaValue) -> np.ndarray:
    if isinstance(value, (bool, int, np.integer)):
        value = int(value)
        if not 0 <= value < 1 << (INT_LIMBS * LIMB_BITS):
            raise ValueError(f"integer meta value {value} is not a u64")
        mask = (1 << LIMB_BITS) - 1
        return np.array([(value >> (LIMB_BITS * i)) & mask
                         for i in range(INT_LIMBS)], dtype=np.float64)
    return np.array(float(value), dtype=np.float64)


def decode_meta(values: np.ndarray) -> Optional[MetaValue]:
    """
    Inverse of encode_meta, None for a block that is neither form
    """
    if values.shape == ():
        return float(values)
    if values.shape != (INT_LIMBS,):
        return None
    limbs = values.astype(np.float64)
    if np.any(limbs != np.floor(limbs)) or np.any(limbs < 0) \
            or np.any(limbs >= 1 << LIMB_BITS):
        return None
    return sum(int(limb) << (LIMB_BITS * i) for i, limb in enumerate(limbs))


def encode_checkpoint(params: Dict[str, np.ndarray],
                      meta: Dict[str, MetaValue] = None) -> bytes:
    chunks = [MAGIC, _U32.pack(VERSION)]
    blocks = list(params.items()) + [
        (META_PREFIX + key, encode_meta(value))
        for key, value in (meta or {}).items()]
    for name, array in blocks:
        encoded = name.encode('utf-8')
        array = np.asarray(array)
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_U32.pack(array.ndim))
        chunks.extend(_U32.pack(dim) for dim in array.shape)
        chunks.append(np.ascontiguousarray(array, dtype='<f4').tobytes())
    return b''.join(chunks)


def decode_checkpoint(data: bytes, path=None
                      ) -> Tuple[Dict[str, np.ndarray], Dict[str, MetaValue]]:
    """
    Parse checkpoint bytes into (params, meta). Parameters come back as
    float32 arrays in file order.
    """
    def fail(message, offset):
        raise CheckpointFormatError(f"{path}, byte {offset}: {message}")

    def read_u32(offset):
        if offset + 4 > len(data):
            fail("truncated block header", offset)
        return _U32.unpack_from(data, offset)[0], offset + 4

    if data[:len(MAGIC)] != MAGIC:
        fail(f"bad magic {data[:len(MAGIC)]!r}", 0)
    version, offset = read_u32(len(MAGIC))
    if version != VERSION:
        fail(f"unsupported version {version}", len(MAGIC))

    params, meta = {}, {}
    while offset < len(data):
        length, offset = read_u32(offset)
        if offset + length > len(data):
            fail("truncated block name", offset)
        try:
            name = data[offset:offset + length].decode('utf-8')
        except UnicodeDecodeError:
            fail("block name is not utf-8", offset)
        offset += length
        rank, offset = read_u32(offset)
        shape = []
        for _ in range(rank):
            dim, offset = read_u32(offset)
            shape.append(dim)
        size = 4 * int(np.prod(shape, dtype=np.int64))
        if offset + size > len(data):
            fail(f"truncated values of {name}", offset)
        values = np.frombuffer(data, dtype='<f4', count=size // 4,
                               offset=offset).reshape(shape)
        offset += size
        if name.startswith(META_PREFIX):
            key = name[len(META_PREFIX):]
            value = decode_meta(values)
            if key in meta or value is None:
                fail(f"bad meta block {name}", offset)
            meta[key] = value
        elif name in params:
            fail(f"duplicate block {name}", offset)
        else:
            params[name] = values.astype(np.float32)
    return params, meta


def save_checkpoint(path, params: Dict[str, np.ndarray],
                    meta: Dict[str, MetaValue] = None):
    with open(path, 'wb') as fp:
        fp.write(encode_checkpoint(params, meta))
    logger.info("Saved checkpoint %s (%d blocks)", path, len(params))


def load_checkpoint(path):
    try:
        with open(path, 'rb') as fp:
            data = fp.read()
    except OSError as e:
        raise CheckpointFormatError(f"cannot read checkpoint {path}: {e}")
    return decode_checkpoint(data, path=path)
