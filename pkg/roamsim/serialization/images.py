"""
Binary image containers.

Frames are binary PPM (P6, maxval 255), each channel stored as
round(value * 255). Depth maps are raw little-endian float32 preceded by
a 16 byte header: the magic ``ROAMDPTH``, width (u32 LE), height (u32 LE).
"""
import struct

import numpy as np

from roamsim.exceptions import DatasetFormatError

DEPTH_MAGIC = b'ROAMDPTH'
DEPTH_HEADER = struct.Struct('<8sII')


def quantize(frame: np.ndarray) -> np.ndarray:
    """
    [0, 1] floats to uint8, halves rounded up
    """
    return np.floor(np.clip(frame, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def encode_ppm(frame: np.ndarray) -> bytes:
    height, width = frame.shape[:2]
    header = b'P6\n%d %d\n255\n' % (width, height)
    return header + quantize(frame).tobytes()


def decode_ppm(data: bytes, path=None) -> np.ndarray:
    """
    Decode a P6 image to (H, W, 3) floats in [0, 1]
    """
    fields = []
    offset = 0
    while len(fields) < 4:
        # skip whitespace and comments between header fields
        while offset < len(data) and data[offset:offset + 1].isspace():
            offset += 1
        if data[offset:offset + 1] == b'#':
            while offset < len(data) and data[offset:offset + 1] != b'\n':
                offset += 1
            continue
        start = offset
        while offset < len(data) and not data[offset:offset + 1].isspace():
            offset += 1
        if start == offset:
            raise DatasetFormatError("truncated PPM header",
                                     path=path, offset=offset)
        fields.append(data[start:offset])
    offset += 1

    if fields[0] != b'P6':
        raise DatasetFormatError(f"bad PPM magic {fields[0]!r}",
                                 path=path, offset=0)
    try:
        width, height, maxval = (int(field) for field in fields[1:])
    except ValueError:
        raise DatasetFormatError("bad PPM header", path=path, offset=0)
    if maxval != 255:
        raise DatasetFormatError(f"unsupported maxval {maxval}",
                                 path=path, offset=offset)

    expected = width * height * 3
    pixels = data[offset:offset + expected]
    if len(pixels) != expected:
        raise DatasetFormatError(
            f"expected {expected} pixel bytes, found {len(pixels)}",
            path=path, offset=offset + len(pixels))
    array = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, 3)
    return array.astype(np.float64) / 255.0


def encode_depth(depth: np.ndarray) -> bytes:
    height, width = depth.shape
    return DEPTH_HEADER.pack(DEPTH_MAGIC, width, height) + \
        np.ascontiguousarray(depth, dtype='<f4').tobytes()


def read_depth_header(data: bytes, path=None):
    if len(data) < DEPTH_HEADER.size:
        raise DatasetFormatError("truncated depth header",
                                 path=path, offset=len(data))
    magic, width, height = DEPTH_HEADER.unpack_from(data)
    if magic != DEPTH_MAGIC:
        raise DatasetFormatError(f"bad depth magic {magic!r}",
                                 path=path, offset=0)
    return width, height


def decode_depth(data: bytes, path=None) -> np.ndarray:
    width, height = read_depth_header(data, path)
    expected = width * height * 4
    payload = data[DEPTH_HEADER.size:]
    if len(payload) != expected:
        raise DatasetFormatError(
            f"expected {expected} depth bytes, found {len(payload)}",
            path=path, offset=DEPTH_HEADER.size + min(len(payload), expected))
    values = np.frombuffer(payload, dtype='<f4').reshape(height, width)
    return values.astype(np.float64)


def write_ppm(path, frame: np.ndarray):
    with open(path, 'wb') as fp:
        fp.write(encode_ppm(frame))


def read_ppm(path) -> np.ndarray:
    with open(path, 'rb') as fp:
        return decode_ppm(fp.read(), path=path)


def montage(rows, gap: int = 1) -> np.ndarray:
    """
    Tile rows of equally sized frames into one image, rows stacked
    vertically with a white gap between all tiles
    """
    height, width = rows[0][0].shape[:2]
    columns = max(len(row) for row in rows)
    canvas = np.ones((len(rows) * (height + gap) - gap,
                      columns * (width + gap) - gap, 3))
    for r, row in enumerate(rows):
        for c, frame in enumerate(row):
            top, left = r * (height + gap), c * (width + gap)
            canvas[top:top + height, left:left + width] = frame
    return canvas
