import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shift.errors import ChunkingMismatch, CorruptContainer, DeltaConflict, OutOfRange
from shift.readers import (
    Delta,
    MutableReader,
    SampleSource,
    chunk_partition,
    distribute_added_samples,
    invalidated_chunks,
)
from shift.readers import container


def _src(n, d=3, seed=0):
    rng = np.random.default_rng(seed)
    return SampleSource(rng.normal(size=(n, d)), rng.integers(0, 4, size=n))


def _rows(*vals):
    return np.array([[v, v] for v in vals], dtype=np.float32)


class TestMaterialize:
    def test_single_replacement(self):
        reader = MutableReader(SampleSource(_rows(1, 2, 3), [0, 1, 2]))
        reader = reader.with_delta(Delta.change([1], _rows(9), [7]))
        X, y = reader.materialize()
        assert X[:, 0].tolist() == [1, 9, 3]
        assert y.tolist() == [0, 7, 2]

    def test_append_without_plan(self):
        reader = MutableReader(SampleSource(_rows(1, 2), [0, 1]))
        reader = reader.with_delta(Delta.add(_rows(3, 4), [2, 3]))
        X, _ = reader.materialize()
        assert X[:, 0].tolist() == [1, 2, 3, 4]
        assert reader.n_effective == 4

    def test_later_change_wins(self):
        reader = MutableReader(SampleSource(_rows(1, 2), [0, 0]))
        reader = reader.with_delta(Delta.change([0], _rows(5), [1]))
        reader = reader.with_delta(Delta.change([0], _rows(6), [2]))
        X, y = reader.materialize()
        assert X[0, 0] == 6 and y[0] == 2

    def test_label_only_change_keeps_features(self):
        base = _src(10)
        reader = MutableReader(base).with_delta(Delta.label_change([2, 3], [3, 3]))
        X, y = reader.materialize()
        np.testing.assert_array_equal(X, base.X)
        assert y[2] == 3 and y[3] == 3

    def test_iteration_yields_pairs(self):
        reader = MutableReader(_src(5))
        pairs = list(reader)
        assert len(pairs) == 5
        assert isinstance(pairs[0][1], int)

    def test_range_checks(self):
        reader = MutableReader(_src(5))
        with pytest.raises(OutOfRange):
            reader.materialize(0, 6)
        with pytest.raises(OutOfRange):
            reader.materialize(3, 2)

    def test_out_of_range_change_index(self):
        reader = MutableReader(_src(5)).with_delta(Delta.change([5], _rows(1)[:, :1].repeat(3, 1), [0]))
        with pytest.raises(DeltaConflict):
            reader.materialize()

    def test_duplicate_change_indices(self):
        with pytest.raises(DeltaConflict):
            Delta.change([1, 1], _rows(1, 2), [0, 0])

    def test_length_mismatch(self):
        with pytest.raises(DeltaConflict):
            Delta.change([1, 2], _rows(1), [0])

    def test_change_indices_follow_preceding_deltas(self):
        reader = MutableReader(SampleSource(_rows(1, 2), [0, 0]))
        reader = reader.with_delta(Delta.add(_rows(3), [0]))
        reader = reader.with_delta(Delta.change([2], _rows(8), [0]))
        X, _ = reader.materialize()
        assert X[:, 0].tolist() == [1, 2, 8]

    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_delta_lists_compose(self, data):
        n = data.draw(st.integers(3, 30))
        base = _src(n, d=2, seed=n)
        deltas = []
        length = n
        for i in range(data.draw(st.integers(1, 4))):
            if data.draw(st.booleans()):
                idx = data.draw(st.lists(st.integers(0, length - 1), min_size=1, max_size=length, unique=True))
                deltas.append(Delta.change(idx, np.full((len(idx), 2), i, np.float32), [i] * len(idx)))
            else:
                m = data.draw(st.integers(1, 5))
                deltas.append(Delta.add(np.full((m, 2), -i, np.float32), [0] * m))
                length += m
        cut = data.draw(st.integers(0, len(deltas)))
        whole = MutableReader(base, deltas)
        first = MutableReader(base, deltas[:cut])
        X1, y1 = first.materialize()
        second = MutableReader(SampleSource(X1, y1), deltas[cut:])
        np.testing.assert_array_equal(whole.materialize()[0], second.materialize()[0])
        np.testing.assert_array_equal(whole.materialize()[1], second.materialize()[1])


class TestChunks:
    def test_even_partition(self):
        chunks = chunk_partition(MutableReader(_src(300)), 100)
        assert [c.size for c in chunks] == [100, 100, 100]

    def test_short_tail(self):
        chunks = chunk_partition(MutableReader(_src(301)), 100)
        assert [c.size for c in chunks] == [100, 100, 100, 1]

    def test_stable_hashes(self):
        a = chunk_partition(MutableReader(_src(250)), 100)
        b = chunk_partition(MutableReader(_src(250)), 100)
        assert [c.content_hash for c in a] == [c.content_hash for c in b]

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 400), st.integers(1, 120))
    def test_chunks_partition_the_reader(self, n, c):
        chunks = chunk_partition(MutableReader(_src(n, d=1)), c)
        assert len(chunks) == -(-n // c)
        assert chunks[0].start == 0 and chunks[-1].stop == n
        for a, b in zip(chunks, chunks[1:]):
            assert a.stop == b.start

    def test_single_change_invalidates_one_chunk(self):
        base = MutableReader(_src(500), chunk_size=100)
        after = base.with_delta(Delta.change([250], np.zeros((1, 3)), [0]))
        assert invalidated_chunks(base, after) == {2}

    def test_no_change(self):
        base = MutableReader(_src(500), chunk_size=100)
        assert invalidated_chunks(base, base) == set()

    def test_scattered_ten_percent(self, rng):
        base = MutableReader(_src(1000), chunk_size=100)
        idx = rng.choice(1000, size=100, replace=False)
        after = base.with_delta(Delta.change(idx, rng.normal(size=(100, 3)), np.zeros(100)))
        expected = {int(i) // 100 for i in idx}
        assert invalidated_chunks(base, after) == expected
        assert len(expected) == 10

    def test_chunk_size_mismatch(self):
        a = MutableReader(_src(100), chunk_size=10)
        with pytest.raises(ChunkingMismatch):
            invalidated_chunks(a, a.with_chunk_size(20))


class TestDistribute:
    def test_divisible(self):
        assert distribute_added_samples(4, 8, seed=0).counts == (2, 2, 2, 2)

    def test_remainder(self):
        assert sorted(distribute_added_samples(4, 6, seed=3).counts) == [1, 1, 2, 2]

    def test_empty_plan_leaves_reader(self):
        plan = distribute_added_samples(3, 0, seed=0)
        assert plan.add_count == 0

    def test_deterministic(self):
        a = distribute_added_samples(5, 13, seed=9)
        b = distribute_added_samples(5, 13, seed=9)
        assert a.to_dict() == b.to_dict()

    @settings(max_examples=80, deadline=None)
    @given(st.integers(1, 50), st.integers(0, 500), st.integers(0, 2**31))
    def test_counts_within_one(self, k, add, seed):
        plan = distribute_added_samples(k, add, seed)
        assert sum(plan.counts) == add
        assert all(abs(c - add / k) < 1 for c in plan.counts)
        assert sorted(plan.order) == list(range(add))

    def test_planned_add_grows_every_bucket(self):
        n, c = 400, 100
        reader = MutableReader(_src(n), chunk_size=c)
        plan = distribute_added_samples(4, 40, seed=1, chunk_size=c)
        grown = reader.with_delta(Delta.add(np.full((40, 3), 7.0), np.zeros(40), plan=plan))
        assert grown.bucket_sizes(c) == [110] * 4
        X, _ = grown.materialize()
        for b in range(4):
            block = X[110 * b:110 * (b + 1)]
            assert int(np.sum(block[:, 0] == 7.0)) == 10
        # original samples keep their relative order
        orig = X[X[:, 0] != 7.0]
        np.testing.assert_array_equal(orig, reader.base.X)


class TestContainer:
    def test_round_trip(self, tmp_path, rng):
        X = rng.normal(size=(7, 4)).astype(np.float32)
        y = rng.integers(0, 3, size=7)
        container.write_samples(tmp_path / "a.shfr", X, y)
        X2, y2 = container.read_samples(tmp_path / "a.shfr")
        np.testing.assert_array_equal(X, X2)
        np.testing.assert_array_equal(y, y2)

    def test_change_file(self, tmp_path):
        container.write_change(tmp_path / "c.shfr", [3, 1], np.ones((2, 2)), [1, 0])
        idx, X, y = container.read_change(tmp_path / "c.shfr")
        assert idx.tolist() == [3, 1] and X.shape == (2, 2) and y.tolist() == [1, 0]

    def test_label_only_change_file(self, tmp_path):
        container.write_change(tmp_path / "c.shfr", [0], None, [2])
        idx, X, y = container.read_change(tmp_path / "c.shfr")
        assert X is None and y.tolist() == [2]

    def test_header_layout(self):
        data = container.encode(np.zeros((2, 3)), np.array([1, 2], dtype=np.int32))
        assert data[:4] == b"SHFR"
        assert int.from_bytes(data[4:6], "little") == 1
        assert int.from_bytes(data[6:14], "little") == 2
        assert int.from_bytes(data[14:18], "little") == 3
        assert data[18] == 1
        wide = container.encode(np.zeros((2, 3)), np.array([1, 2], dtype=np.int64))
        assert wide[18] == 2

    def test_corruption_detected(self):
        data = bytearray(container.encode(np.zeros((2, 3)), np.array([1, 2])))
        data[20] ^= 0xFF
        with pytest.raises(CorruptContainer):
            container.decode(bytes(data))

    def test_truncated(self):
        with pytest.raises(CorruptContainer):
            container.decode(b"SHFR")

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 20), st.integers(1, 6), st.integers(0, 1000))
    def test_encode_decode_property(self, n, d, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, d)).astype(np.float32)
        y = rng.integers(0, 2**40, size=n)
        X2, y2, _ = container.decode(container.encode(X, y))
        if n:
            np.testing.assert_array_equal(X, X2)
        np.testing.assert_array_equal(y, y2)
