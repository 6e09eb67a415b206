import os

import pytest

from roamsim.dataset import validate
from roamsim.workers import SequenceGenerator, thread_count
from tests.utils import small_config


def tree_bytes(directory):
    files = {}
    for base, _, names in os.walk(directory):
        for name in names:
            path = os.path.join(base, name)
            with open(path, 'rb') as fp:
                files[os.path.relpath(path, directory)] = fp.read()
    return files


def test_thread_count(monkeypatch):
    assert thread_count(3) == 3
    monkeypatch.setenv('ROAMSIM_THREADS', '2')
    assert thread_count() == 2
    monkeypatch.setenv('ROAMSIM_THREADS', '0')
    assert thread_count() == (os.cpu_count() or 1)
    monkeypatch.setenv('ROAMSIM_THREADS', 'many')
    with pytest.raises(ValueError):
        thread_count()
    with pytest.raises(ValueError):
        thread_count(-1)


@pytest.mark.asyncio
async def test_run_returns_results_in_order(tmp_path):
    generator = SequenceGenerator(tmp_path, small_config(), seed=3,
                                  frames=3, threads=2, scenes=True)
    results = await generator.run(3)
    assert [r.name for r in results] == ['seq_000', 'seq_001', 'seq_002']
    assert [r.seed for r in results] == [3, 4, 5]
    assert all(r.ok and r.frames == 3 for r in results)
    assert results[0].min_wall_clearance > 0
    assert 'min wall clearance' in results[0].summary()
    assert os.path.isfile(tmp_path / 'seq_001' / 'scene.txt')
    assert validate(tmp_path).ok


def test_failures_are_reported_per_sequence(tmp_path):
    config = small_config()
    SequenceGenerator(tmp_path, config, frames=2, threads=1).generate(1)
    results = SequenceGenerator(tmp_path, config, frames=2,
                                threads=2).generate(2)
    assert not results[0].ok
    assert 'FAILED' in results[0].summary()
    assert results[1].ok

    forced = SequenceGenerator(tmp_path, config, frames=2, threads=2,
                               force=True).generate(2)
    assert all(r.ok for r in forced)


def test_generation_is_deterministic(tmp_path):
    config = small_config()
    SequenceGenerator(tmp_path / 'a', config, seed=8, frames=4,
                      threads=1).generate(2)
    SequenceGenerator(tmp_path / 'b', config, seed=8, frames=4,
                      threads=2).generate(2)
    assert tree_bytes(tmp_path / 'a') == tree_bytes(tmp_path / 'b')
