import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shift.catalog import ModelRecord
from shift.errors import DimensionMismatch, ExtractorFailure, InvalidField
from shift.extractors import ExtractorSpec, FeatureCache, extract, register_hook, unregister_hook
from shift.synthetic import train_test_blobs


def _model(knob=1.0, dim=8, seed=3, **spec):
    return ModelRecord("m", feature_dim=dim, extractor_spec=ExtractorSpec(seed=seed, quality_knob=knob, **spec))


def _oracle_1nn(train_X, train_y, test_X, test_y):
    correct = 0
    for q, label in zip(test_X.astype(np.float64), test_y):
        dists = [float(np.sum((row - q) ** 2)) for row in train_X.astype(np.float64)]
        correct += int(train_y[int(np.argmin(dists))] == label)
    return correct / len(test_y)


class TestSyntheticExtractor:
    def test_bitwise_deterministic(self, rng):
        X = rng.normal(size=(50, 8))
        a = extract(_model(0.5), X).values
        b = extract(_model(0.5), X).values
        assert a.tobytes() == b.tobytes()

    def test_shape_and_dtype(self, rng):
        fm = extract(_model(dim=5), rng.normal(size=(7, 8)), chunk_hash="abc")
        assert fm.shape == (7, 5)
        assert fm.values.dtype == np.float32
        assert fm.chunk_hash == "abc" and fm.model_id == "m"

    def test_zero_knob_is_chance(self):
        train, test = train_test_blobs(2000, 2000, dim=8, n_classes=4, seed=1)
        m = _model(0.0)
        Ftr, Fte = extract(m, train.X).values, extract(m, test.X).values
        from shift.proxies import knn_accuracy

        acc = knn_accuracy(Ftr, train.y, Fte, test.y, "euclidean")
        assert abs(acc - 0.25) <= 0.05

    def test_full_knob_separates_blobs(self):
        train, test = train_test_blobs(300, 100, dim=8, n_classes=4, seed=2, spread=0.5)
        m = _model(1.0)
        Ftr, Fte = extract(m, train.X).values, extract(m, test.X).values
        assert _oracle_1nn(Ftr, train.y, Fte, test.y) >= 0.95

    def test_knob_orders_quality(self):
        train, test = train_test_blobs(600, 300, seed=4)
        from shift.proxies import knn_accuracy

        accs = []
        for knob in (0.9, 0.5, 0.1):
            m = _model(knob)
            accs.append(knn_accuracy(extract(m, train.X).values, train.y, extract(m, test.X).values, test.y))
        assert accs[0] > accs[1] > accs[2]

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 60), st.integers(1, 59), st.floats(0, 1))
    def test_partitioned_extraction_concatenates(self, n, cut, knob):
        X = np.random.default_rng(n).normal(size=(n, 4))
        cut = min(cut, n)
        m = _model(knob, dim=6)
        whole = extract(m, X).values
        parts = np.concatenate([extract(m, X[:cut]).values, extract(m, X[cut:]).values])
        assert whole.tobytes() == parts.tobytes()

    def test_invalid_knob(self):
        with pytest.raises(InvalidField):
            ExtractorSpec(quality_knob=1.5)


class TestHooks:
    def test_hook_runs(self):
        register_hook("double_first3", lambda X: 2 * X[:, :3])
        try:
            m = ModelRecord("h", feature_dim=3, extractor_spec=ExtractorSpec("external_hook", hook="double_first3"))
            out = extract(m, np.ones((2, 5))).values
            assert out.tolist() == [[2, 2, 2], [2, 2, 2]]
        finally:
            unregister_hook("double_first3")

    def test_wrong_dimension(self):
        register_hook("wide", lambda X: np.zeros((len(X), 9)))
        try:
            m = ModelRecord("h", feature_dim=3, extractor_spec=ExtractorSpec("external_hook", hook="wide"))
            with pytest.raises(DimensionMismatch):
                extract(m, np.ones((2, 5)))
        finally:
            unregister_hook("wide")

    def test_missing_hook(self):
        m = ModelRecord("h", feature_dim=3, extractor_spec=ExtractorSpec("external_hook", hook="absent"))
        with pytest.raises(ExtractorFailure):
            extract(m, np.ones((2, 5)))

    def test_precomputed_table(self, tmp_path):
        inputs = np.arange(6, dtype=np.float32).reshape(3, 2)
        feats = inputs[:, ::-1] * 10
        np.savez(tmp_path / "t.npz", inputs=inputs, features=feats)
        m = ModelRecord("p", feature_dim=2, extractor_spec=ExtractorSpec("precomputed", table=str(tmp_path / "t.npz")))
        np.testing.assert_array_equal(extract(m, inputs[[2, 0]]).values, feats[[2, 0]])
        with pytest.raises(ExtractorFailure):
            extract(m, np.full((1, 2), 99.0))


class TestFeatureCache:
    @pytest.mark.parametrize("on_disk", [False, True])
    def test_put_get(self, tmp_path, rng, on_disk):
        cache = FeatureCache(tmp_path / "f" if on_disk else None)
        X = rng.normal(size=(4, 3)).astype(np.float32)
        assert cache.get("m", "h1") is None
        cache.put("m", "h1", X)
        assert ("m", "h1") in cache
        assert cache.get("m", "h1").tobytes() == X.tobytes()
        assert cache.get("m", "h2") is None
        assert cache.stats()["hits"] == 1 and cache.stats()["misses"] == 2

    def test_write_once(self):
        cache = FeatureCache()
        cache.put("m", "h", np.zeros((1, 1)))
        cache.put("m", "h", np.ones((1, 1)))
        assert cache.get("m", "h")[0, 0] == 0

    def test_corrupt_entry_is_a_miss(self, tmp_path):
        cache = FeatureCache(tmp_path)
        cache.put("m", "h", np.ones((2, 2)))
        path = next(tmp_path.glob("*.shfr"))
        data = bytearray(path.read_bytes())
        data[-12] ^= 0x55
        path.write_bytes(bytes(data))
        assert cache.get("m", "h") is None
        assert cache.stats()["corrupt"] == 1
        assert not path.exists()

    def test_entries_survive_reopen(self, tmp_path):
        FeatureCache(tmp_path).put("m", "h", np.full((2, 2), 3.0))
        assert FeatureCache(tmp_path).get("m", "h")[1, 1] == 3.0

    def test_lru_bound(self, tmp_path):
        one = len(np.zeros((10, 10), np.float32).tobytes()) + 64
        cache = FeatureCache(tmp_path, max_bytes=2 * one)
        for i in range(4):
            cache.put("m", f"h{i}", np.full((10, 10), i, np.float32))
        assert len(list(tmp_path.glob("*.shfr"))) <= 2
        assert ("m", "h3") in cache
        assert ("m", "h0") not in cache
