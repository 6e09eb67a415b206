import csv

import numpy as np
import pytest

from roamsim.exceptions import MetricsError
from roamsim.metrics import (
    CSV_COLUMNS, PSNR_CAP, evaluate, format_report, gaussian_window, psnr,
    ssim, write_curves_csv)
from roamsim.rng import SplitMix64


def noise_frame(seed, size=32):
    return SplitMix64(seed).random_array(size * size * 3).reshape(
        size, size, 3)


def test_psnr_identical_is_capped():
    frame = noise_frame(0)
    value = psnr(frame, frame.copy())
    assert value.db == PSNR_CAP
    assert value.exact
    assert float(value) == PSNR_CAP


def test_psnr_known_value():
    a = np.zeros((16, 16, 3))
    b = np.full((16, 16, 3), 0.5)
    value = psnr(a, b)
    assert value.db == pytest.approx(6.0206, abs=1e-3)
    assert not value.exact


def test_psnr_symmetric():
    a, b = noise_frame(1), noise_frame(2)
    assert psnr(a, b) == psnr(b, a)


def test_psnr_decreases_with_noise():
    rng = SplitMix64(5)
    frame = noise_frame(3)
    values = []
    for std in (0.01, 0.05, 0.1, 0.2):
        noisy = np.clip(frame + rng.normal_array(frame.shape, std), 0, 1)
        values.append(psnr(frame, noisy).db)
    assert values == sorted(values, reverse=True)


def test_psnr_shape_mismatch():
    with pytest.raises(MetricsError):
        psnr(np.zeros((16, 16, 3)), np.zeros((16, 8, 3)))


def test_gaussian_window():
    w = gaussian_window()
    assert w.shape == (11, 11)
    assert w.sum() == pytest.approx(1.0)
    assert w[5, 5] == w.max()
    np.testing.assert_allclose(w, w.T)


def test_ssim_identical():
    frame = noise_frame(4)
    assert ssim(frame, frame.copy()) == 1.0


def test_ssim_constant_frames():
    a = np.zeros((16, 16, 3))
    b = np.full((16, 16, 3), 0.5)
    c1 = 0.01 ** 2
    assert c1 / (0.25 + c1) == pytest.approx(0.00039984, abs=1e-8)
    assert ssim(a, b) == pytest.approx(0.00039984, abs=1e-6)


def test_ssim_range_and_symmetry():
    a, b = noise_frame(6), noise_frame(7)
    value = ssim(a, b)
    assert -1.0 <= value < 1.0
    assert ssim(b, a) == pytest.approx(value)
    assert ssim(a, np.clip(a + 0.02, 0, 1)) > value


def test_ssim_window_too_large():
    with pytest.raises(MetricsError):
        ssim(np.zeros((10, 10, 3)), np.ones((10, 10, 3)))


def make_clips(clips=3, horizon=4, seed=0):
    pred, gt = [], []
    for c in range(clips):
        gt.append([noise_frame(seed + 100 * c + t, 16)
                   for t in range(horizon)])
        pred.append([np.clip(f + 0.05 * (t + 1), 0, 1)
                     for t, f in enumerate(gt[-1])])
    return pred, gt


def test_evaluate_curves():
    pred, gt = make_clips()
    curves = evaluate(pred, gt)
    assert set(curves) == {'psnr', 'ssim'}
    assert len(curves['psnr']) == len(curves['ssim']) == 4
    for t in range(4):
        values = [psnr(p[t], g[t]).db for p, g in zip(pred, gt)]
        assert curves['psnr'].mean[t] == pytest.approx(np.mean(values))
        # population standard deviation
        assert curves['psnr'].std[t] == pytest.approx(np.std(values, ddof=0))
        assert curves['psnr'].exact[t] == 0
    # error grows with the offset
    assert curves['psnr'].mean[0] > curves['psnr'].mean[-1]


def test_evaluate_counts_exact_frames():
    _, gt = make_clips(clips=2, horizon=3)
    curves = evaluate(gt, [[f.copy() for f in clip] for clip in gt])
    assert curves['psnr'].mean == [PSNR_CAP] * 3
    assert curves['psnr'].exact == [2, 2, 2]
    assert curves['ssim'].mean == [1.0] * 3
    assert curves['ssim'].std == [0.0] * 3


def test_evaluate_permutation_invariant():
    pred, gt = make_clips(clips=4)
    order = [2, 0, 3, 1]
    first = evaluate(pred, gt)
    second = evaluate([pred[i] for i in order], [gt[i] for i in order])
    for name in ('psnr', 'ssim'):
        np.testing.assert_allclose(first[name].mean, second[name].mean)
        np.testing.assert_allclose(first[name].std, second[name].std)


@pytest.mark.parametrize('pred, gt', [
    ([], []),
    ([[np.zeros((16, 16, 3))]], []),
    ([[np.zeros((16, 16, 3))] * 2], [[np.zeros((16, 16, 3))]]),
    ([[]], [[]]),
])
def test_evaluate_rejects_misaligned_input(pred, gt):
    with pytest.raises(MetricsError):
        evaluate(pred, gt)


def test_write_curves_csv(tmp_path):
    pred, gt = make_clips(horizon=5)
    curves = evaluate(pred, gt)
    path = tmp_path / 'report.csv'
    write_curves_csv(path, curves)
    with open(path, newline='') as fp:
        rows = list(csv.reader(fp))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [int(row[0]) for row in rows[1:]] == [1, 2, 3, 4, 5]
    assert float(rows[1][1]) == curves['psnr'].mean[0]
    assert float(rows[5][4]) == curves['ssim'].std[4]


def test_format_report():
    pred, gt = make_clips()
    text = format_report(evaluate(pred, gt), 3)
    assert text.startswith('clips: 3\nhorizon: 4\n')
    assert 'psnr mean:' in text and 'ssim median:' in text
