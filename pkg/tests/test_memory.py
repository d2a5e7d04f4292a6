import pytest
import torch

from src.blackbox import MEMORY_PHASE
from src.data import Split
from src.memory import (
    CLASSIC,
    DECL,
    DFCL,
    GENERATED,
    RAW,
    GeneratedSource,
    MemoryBuffer,
    MemoryBufferError,
    MemoryEntry,
    RawSource,
    check_capacity,
    sample_minibatch,
    update_after_task,
)
from src.nets import GeneratorPair


def _entries(task_id, n, start=0):
    return [MemoryEntry(torch.full((1, 2, 2), float(start + i)), torch.zeros(2), task_id, GENERATED) for i in range(n)]


def test_equal_quota_with_fifo_eviction():
    buffer = MemoryBuffer(capacity=10)
    buffer.add_task(1, _entries(1, 10))
    assert buffer.per_task_counts() == {1: 10}

    buffer.add_task(2, _entries(2, 10))
    assert buffer.per_task_counts() == {1: 5, 2: 5}
    # the oldest entries of task 1 were evicted
    assert [e.image[0, 0, 0].item() for e in buffer.entries(1)] == [5.0, 6.0, 7.0, 8.0, 9.0]

    buffer.add_task(3, _entries(3, 10))
    assert buffer.per_task_counts() == {1: 3, 2: 3, 3: 3}
    assert len(buffer) <= buffer.capacity


def test_quota_is_floor_of_capacity_over_tasks():
    buffer = MemoryBuffer(capacity=5000)
    assert buffer.quota(3) == 1666


def test_small_task_keeps_what_it_has():
    buffer = MemoryBuffer(capacity=10)
    buffer.add_task(1, _entries(1, 2))
    buffer.add_task(2, _entries(2, 20))
    assert buffer.per_task_counts() == {1: 2, 2: 5}


def test_sampling():
    buffer = MemoryBuffer(capacity=20)
    buffer.add_task(1, _entries(1, 10))
    buffer.add_task(2, _entries(2, 10, start=100))
    gen = torch.Generator().manual_seed(0)
    batch = sample_minibatch(buffer, 8, gen)
    values = [e.image[0, 0, 0].item() for e in batch]
    assert len(set(values)) == 8
    assert len(sample_minibatch(buffer, 50, gen)) == 50

    with pytest.raises(MemoryBufferError):
        sample_minibatch(MemoryBuffer(5), 4, gen)


def test_invalid_capacity():
    with pytest.raises(MemoryBufferError):
        MemoryBuffer(capacity=0)


def test_raw_source_without_api_keeps_ground_truth():
    split = Split(torch.randn(12, 1, 4, 4), torch.arange(12) % 3)
    entries = RawSource(split, api=None, batch_size=5, rng=torch.Generator().manual_seed(0)).draw(7, task_id=2)
    assert len(entries) == 7
    assert all(e.logits is None and e.origin == RAW and e.task_id == 2 for e in entries)
    assert all(0 <= e.label < 3 for e in entries)


def test_raw_source_with_api_stores_logits(stream, make_apis):
    api = make_apis()[0]
    source = RawSource(stream.tasks[0].train, api, batch_size=16, rng=torch.Generator().manual_seed(0))
    entries = source.draw(20, task_id=1)
    assert all(e.logits.shape == (2,) for e in entries)
    assert api.ledger.count(MEMORY_PHASE) == 20
    assert api.ledger.training_queries == 0


def test_empty_raw_source():
    empty = Split(torch.zeros(0, 1, 4, 4), torch.zeros(0, dtype=torch.long))
    with pytest.raises(MemoryBufferError):
        RawSource(empty).draw(3, task_id=1)


def test_generated_source_fills_from_both_generators(make_apis):
    api = make_apis()[0]
    pair = GeneratorPair(16, (1, 12, 12))
    entries = GeneratedSource(pair, api, batch_size=8, rng=torch.Generator().manual_seed(0)).draw(13, task_id=1)
    assert len(entries) == 13
    assert all(e.origin == GENERATED and e.logits.shape == (2,) for e in entries)
    assert api.ledger.count(MEMORY_PHASE) >= 13
    assert api.ledger.training_queries == 0


def test_setting_must_match_source(make_apis):
    buffer = MemoryBuffer(10)
    raw = RawSource(Split(torch.randn(4, 1, 4, 4), torch.zeros(4, dtype=torch.long)))
    with pytest.raises(MemoryBufferError):
        update_after_task(buffer, DFCL, 1, raw)
    generated = GeneratedSource(GeneratorPair(16, (1, 12, 12)), make_apis()[0], 8)
    with pytest.raises(MemoryBufferError):
        update_after_task(buffer, DECL, 1, generated)
    update_after_task(buffer, CLASSIC, 1, raw)
    assert buffer.per_task_counts() == {1: 4}


def test_save_and_load(tmp_path):
    buffer = MemoryBuffer(capacity=8)
    buffer.add_task(1, _entries(1, 4))
    buffer.add_task(2, [MemoryEntry(torch.zeros(1, 2, 2), None, 2, RAW, label=1) for _ in range(3)])
    buffer.save(tmp_path / "memory.pt")
    restored = MemoryBuffer.load(tmp_path / "memory.pt")
    assert restored.capacity == 8
    assert restored.per_task_counts() == {1: 4, 2: 3}
    assert restored.entries(2)[0].label == 1 and restored.entries(2)[0].logits is None
    assert torch.equal(restored.entries(1)[3].image, buffer.entries(1)[3].image)


def test_capacity_must_cover_every_task():
    check_capacity(3, 3)
    with pytest.raises(MemoryBufferError, match="smaller than the 3 tasks"):
        check_capacity(2, 3)


def test_sampling_is_uniform_across_tasks():
    buffer = MemoryBuffer(capacity=100)
    buffer.add_task(1, _entries(1, 50))
    buffer.add_task(2, _entries(2, 50))
    gen = torch.Generator().manual_seed(0)
    draws = 10_000
    task_one = sum(sample_minibatch(buffer, 1, gen)[0].task_id == 1 for _ in range(draws))
    sigma = (draws * 0.5 * 0.5) ** 0.5
    assert abs(task_one - draws / 2) <= 3 * sigma


def test_stored_logits_reproduce_on_requery(make_apis):
    api = make_apis()[0]
    pair = GeneratorPair(16, (1, 12, 12))
    buffer = MemoryBuffer(capacity=24)
    update_after_task(buffer, DFCL, 1, GeneratedSource(pair, api, batch_size=8, rng=torch.Generator().manual_seed(0)))
    entries = buffer.entries(1)
    assert len(entries) == 24
    # same batch composition as the fill
    for start in range(0, len(entries), 8):
        chunk = entries[start:start + 8]
        again = api.query(torch.stack([e.image for e in chunk]), phase=MEMORY_PHASE)
        assert torch.equal(again, torch.stack([e.logits for e in chunk]))
