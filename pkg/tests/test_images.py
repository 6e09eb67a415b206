import numpy as np
import pytest

from roamsim.exceptions import DatasetFormatError
from roamsim.serialization.images import (
    decode_depth, decode_ppm, encode_depth, encode_ppm, montage, quantize)


def test_quantize():
    values = np.array([0.0, 0.6 / 255, 1.49 / 255, 1.0, 1.2, -0.3])
    assert quantize(values).tolist() == [0, 1, 1, 255, 255, 0]


def test_ppm():
    frame = np.zeros((2, 3, 3))
    frame[0, 2] = [1.0, 0.5, 0.0]
    data = encode_ppm(frame)
    assert data.startswith(b'P6\n3 2\n255\n')
    assert len(data) == len(b'P6\n3 2\n255\n') + 18
    decoded = decode_ppm(data)
    assert decoded.shape == (2, 3, 3)
    assert decoded[0, 2].tolist() == [1.0, 128 / 255, 0.0]


def test_ppm_header_comments():
    data = b'P6\n# made by hand\n1 1\n255\n\x00\xff\x10'
    assert decode_ppm(data)[0, 0].tolist() == [0.0, 1.0, 16 / 255]


@pytest.mark.parametrize('data', [
    b'P5\n1 1\n255\n\x00',
    b'P6\n1 1\n65535\n\x00\x00\x00',
    b'P6\n2 2\n255\n\x00\x00\x00',
    b'P6\n2',
])
def test_ppm_errors(data):
    with pytest.raises(DatasetFormatError):
        decode_ppm(data, path='frame.ppm')


def test_depth():
    depth = np.array([[0.5, 1.25], [np.inf, 3.0]])
    data = encode_depth(depth)
    assert data[:16] == b'ROAMDPTH\x02\x00\x00\x00\x02\x00\x00\x00'
    np.testing.assert_array_equal(decode_depth(data), depth)


def test_depth_truncated():
    data = encode_depth(np.ones((2, 2)))
    with pytest.raises(DatasetFormatError) as e:
        decode_depth(data[:-2], path='d.depth')
    assert e.value.offset == 30
    with pytest.raises(DatasetFormatError):
        decode_depth(data[:10])


def test_montage():
    tile = np.zeros((4, 5, 3))
    canvas = montage([[tile, tile, tile], [tile]])
    assert canvas.shape == (9, 17, 3)
    assert canvas[4].min() == 1.0
    assert canvas[5:, 6:].min() == 1.0
