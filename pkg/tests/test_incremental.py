import numpy as np
import pytest

from conftest import corpus
from shift.catalog import Catalog, ModelRecord
from shift.engine import Engine
from shift.extractors import ExtractorSpec, register_hook
from shift.incremental import (apply_add_reader_sh, apply_deltas, check_prior, derived_reader_id,
                               incremental_execute, tail_append)
from shift.errors import StaleCache
from shift.optimizer import SHConfig
from shift.proxies import ProxyRequest
from shift.readers import Delta, MutableReader
from shift.synthetic import linear_hook, model_pool, quadratic_hook, seed_catalog, two_distribution_data

Q2 = corpus("q2")
OPTS = {"force_mode": "plain", "feature_chunk": 100}


def scattered_change(n=1000, k=100, dim=8, seed=0):
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, k, replace=False)
    return idx, rng.normal(size=(k, dim)).astype(np.float32), rng.integers(0, 4, k)


@pytest.fixture
def ten_chunk():
    cat = Catalog()
    seed_catalog(cat, M=5, n_train=1000, n_test=200)
    yield cat
    cat.close()


class TestIncrementalExecute:
    def test_matches_scratch_with_bounded_work(self, ten_chunk):
        engine = Engine(ten_chunk)
        prior = engine.execute(Q2, **OPTS)
        idx, X, y = scattered_change()
        delta = Delta.change(idx, X, y)
        inc = incremental_execute(engine, Q2, prior, {"TrainReader": delta}, **OPTS)

        fresh = Catalog()
        seed_catalog(fresh, M=5, n_train=1000, n_test=200)
        scratch = Engine(fresh).execute(Q2, bindings=apply_deltas(fresh, {"TrainReader": delta}), **OPTS)
        assert inc.ranking == scratch.ranking
        assert inc.report["views"][0]["scores"] == scratch.report["views"][0]["scores"]
        full = scratch.report["tasks"]["inference"]
        assert inc.report["tasks"]["inference"] <= 0.10 * full + 5
        assert inc.report["incremental"]["full_fallback"] is False

    def test_change_within_one_chunk(self, ten_chunk):
        engine = Engine(ten_chunk)
        prior = engine.execute(Q2, **OPTS)
        idx = np.arange(200, 300)
        _, X, y = scattered_change()
        inc = incremental_execute(engine, Q2, prior, {"TrainReader": Delta.change(idx, X, y)}, **OPTS)
        assert inc.report["tasks"]["inference"] == 5

    def test_label_only_change_skips_inference(self, ten_chunk):
        engine = Engine(ten_chunk)
        prior = engine.execute(Q2, **OPTS)
        idx, _, y = scattered_change()
        inc = incremental_execute(engine, Q2, prior, {"TrainReader": Delta.label_change(idx, y)}, **OPTS)
        assert inc.report["tasks"] == {"inference": 0, "proxy": 5, "datasim": 0}

    def test_new_model_only_runs_its_tasks(self, ten_chunk):
        engine = Engine(ten_chunk)
        engine.execute(Q2, **OPTS)
        ten_chunk.register_model(model_pool(1, prefix="new")[0])
        again = engine.execute(Q2, **OPTS)
        assert again.report["tasks"] == {"inference": 12, "proxy": 1, "datasim": 0}

    def test_same_delta_reuses_reader(self, ten_chunk):
        idx, X, y = scattered_change()
        delta = Delta.change(idx, X, y)
        a = apply_deltas(ten_chunk, {"TrainReader": delta})
        b = apply_deltas(ten_chunk, {"TrainReader": delta})
        assert a == b == {"TrainReader": derived_reader_id("TrainReader", delta)}

    def test_stale_prior_falls_back(self, ten_chunk):
        engine = Engine(ten_chunk)
        with pytest.raises(StaleCache):
            check_prior(engine, "deadbeef")
        idx, X, y = scattered_change()
        inc = incremental_execute(engine, Q2, "deadbeef", {"TrainReader": Delta.change(idx, X, y)}, **OPTS)
        assert inc.report["incremental"]["full_fallback"] is True
        assert any("stale" in w for w in inc.report["warnings"])


def two_region_engine():
    register_hook("raw_coords", linear_hook)
    register_hook("squared_coords", quadratic_hook)
    cat = Catalog()
    cat.register_model(ModelRecord("lin", 3, extractor_spec=ExtractorSpec("external_hook", hook="raw_coords")))
    cat.register_model(ModelRecord("quad", 3, extractor_spec=ExtractorSpec("external_hook", hook="squared_coords")))
    return Engine(cat)


def two_region_trial(seed):
    """Winners after distributing vs tail-appending the orange samples."""
    engine = two_region_engine()
    blue, orange, test = two_distribution_data(400, 400, 400, seed)
    req = ProxyRequest("Linear", learning_rate=0.1, epochs=20, seed=seed)
    base, test_reader = MutableReader(blue, reader_id="blue"), MutableReader(test, reader_id="test")
    first = engine.run_successive_halving(["lin", "quad"], base, test_reader, req, SHConfig(budget=8))
    C = first.state.bucket_sizes[0]
    update = apply_add_reader_sh(first.state, base, orange.X, orange.y, seed, C)
    spread = engine.run_successive_halving(["lin", "quad"], update.reader, test_reader, req,
                                           SHConfig(budget=8, chunk_size=C), bucket_sizes=update.bucket_sizes)
    tail, sizes = tail_append(base, orange.X, orange.y, C)
    appended = engine.run_successive_halving(["lin", "quad"], tail, test_reader, req,
                                             SHConfig(budget=8, chunk_size=C), bucket_sizes=sizes)
    return first, update, spread, appended


class TestAddReader:
    def test_every_bucket_grows_evenly(self):
        first, update, spread, _ = two_region_trial(7)
        before = first.state.bucket_sizes
        growth = [a - b for a, b in zip(update.bucket_sizes, before)]
        assert sum(growth) == 400
        assert max(growth) - min(growth) <= 1
        assert update.affected_rounds == [r.k for r in first.state.rounds]

    def test_distributed_and_tail_disagree(self):
        _, _, spread, appended = two_region_trial(3)
        assert spread.ranking[0] == "quad"
        assert appended.ranking[0] == "lin"

    def test_empty_addition_is_noop(self):
        first, *_ = two_region_trial(5)
        base = MutableReader(two_distribution_data(400, 0, 10, 5)[0])
        update = apply_add_reader_sh(first.state, base, np.zeros((0, 3), np.float32), np.zeros(0, np.int64), 0, 100)
        assert update.is_noop and update.bucket_sizes == first.state.bucket_sizes
