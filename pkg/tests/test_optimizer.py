import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shift.errors import BudgetTooSmall, InsufficientBudget, InvalidPool
from shift.optimizer import (
    PLAIN,
    SUCCESSIVE_HALVING,
    CostModelParams,
    SHConfig,
    calibrate_e_proxy,
    choose_plan,
    cost_with_sh,
    cost_without_sh,
    minimal_budget,
    minimal_chunk,
    pulls_per_round,
    round_sizes,
    successive_halving,
)
from shift.readers.mutable import uniform_sizes


def fixed_losses(table):
    calls = []

    def evaluate(survivors, n):
        calls.append((tuple(survivors), n))
        return {a: table[a] for a in survivors}

    return evaluate, calls


class TestBudgetAndChunk:
    @pytest.mark.parametrize("M,expected", [(100, 700), (2, 2), (4, 8), (3, 6), (128, 896)])
    def test_minimal_budget(self, M, expected):
        assert minimal_budget(M) == expected == M * math.ceil(math.log2(M))

    def test_minimal_chunk_examples(self):
        assert pulls_per_round(4, 8) == [1, 2]
        assert minimal_chunk(300, 4, 8) == 100
        assert minimal_chunk(300, 2, 2) == 300

    def test_large_pool_chunk(self):
        r = pulls_per_round(100, 700)
        C = minimal_chunk(1000, 100, 700)
        assert sum(r) * C >= 1000 > sum(r) * (C - 1)

    def test_tiny_reader_exits_early(self):
        # M=17: S = 18 pulls; N=19 gives C=2 and only 10 buckets for the 10 pulls
        # before the last round, so the schedule runs out of data one round early
        M, N = 17, 19
        B = minimal_budget(M)
        evaluate, _ = fixed_losses({f"a{i:02d}": i for i in range(M)})
        state = successive_halving(list(f"a{i:02d}" for i in range(M)), evaluate,
                                   uniform_sizes(N, minimal_chunk(N, M, B)), B)
        assert state.early_exit and state.survivor_samples == N
        assert state.winners == ["a00"]

    def test_budget_too_small(self):
        with pytest.raises(BudgetTooSmall):
            minimal_chunk(300, 4, 7)

    def test_invalid_pool(self):
        with pytest.raises(InvalidPool):
            minimal_budget(1)
        with pytest.raises(InvalidPool):
            minimal_budget(4, q=4)

    @pytest.mark.parametrize("M,q", [(10, 2), (16, 3), (7, 5), (64, 9)])
    def test_minimal_budget_top_q_by_direct_search(self, M, q):
        sizes = round_sizes(M, q)
        assert math.ceil(sizes[-1] / 2) <= q < sizes[-1]
        B = minimal_budget(M, q)
        assert min(pulls_per_round(M, B, q)) >= 1
        assert min(pulls_per_round(M, B - 1, q)) == 0

    @settings(max_examples=127, deadline=None)
    @given(st.integers(2, 128), st.integers(1, 10**5))
    def test_trace_guarantee(self, M, extra):
        B = minimal_budget(M)
        S = sum(pulls_per_round(M, B))
        # C_min is rounded up; N >= S^2 keeps C * (S - 1) < N so no round runs dry
        N = S * S + extra
        C = minimal_chunk(N, M, B)
        evaluate, calls = fixed_losses({f"a{i:03d}": i / M for i in range(M)})
        state = successive_halving([f"a{i:03d}" for i in range(M)], evaluate, uniform_sizes(N, C), B)
        assert all(rd.pulls >= 1 for rd in state.rounds)
        assert state.n_rounds == math.ceil(math.log2(M))
        assert state.survivor_samples == N
        assert state.total_pulls <= B
        assert [len(rd.survivors) for rd in state.rounds] == round_sizes(M)
        assert not state.early_exit


class TestSuccessiveHalving:
    def test_hand_trace(self):
        evaluate, calls = fixed_losses({"a": 0.4, "b": 0.1, "c": 0.3, "d": 0.2})
        state = successive_halving(["a", "b", "c", "d"], evaluate, [100, 100, 100], 8)
        assert [rd.pulls for rd in state.rounds] == [1, 2]
        assert [len(rd.survivors) for rd in state.rounds] == [4, 2]
        assert [n for _, n in calls] == [100, 300]
        assert state.ranking == ["b", "d", "c", "a"]
        assert state.winners == ["b"]

    def test_identical_models_tie_by_id(self):
        evaluate, _ = fixed_losses({"m2": 0.5, "m1": 0.5})
        state = successive_halving(["m2", "m1"], evaluate, [300], 2)
        assert state.winners == ["m1"]

    def test_early_exit_when_data_runs_out(self):
        evaluate, calls = fixed_losses({f"a{i}": i for i in range(8)})
        state = successive_halving([f"a{i}" for i in range(8)], evaluate, [10], 24)
        assert state.early_exit
        assert state.winners == ["a0"]
        assert len(calls) == 1

    def test_insufficient_budget(self):
        evaluate, _ = fixed_losses({"a": 0, "b": 1, "c": 2})
        with pytest.raises(InsufficientBudget):
            successive_halving(["a", "b", "c"], evaluate, [1, 1], 5)

    def test_top_q(self):
        table = {f"a{i:02d}": i for i in range(10)}
        evaluate, _ = fixed_losses(table)
        B = minimal_budget(10, 3)
        state = successive_halving(list(table), evaluate, uniform_sizes(1000, minimal_chunk(1000, 10, B, 3)), B, q=3)
        assert state.winners == ["a00", "a01", "a02"]

    def test_single_arm(self):
        evaluate, calls = fixed_losses({"a": 0.3})
        state = successive_halving(["a"], evaluate, [50, 50], 2)
        assert state.ranking == ["a"] and calls == [(("a",), 100)]

    def test_config_resolution(self):
        assert SHConfig().resolve(4, 300) == (8, 100)
        assert SHConfig(budget=16).resolve(4, 300) == (16, 50)
        with pytest.raises(InsufficientBudget):
            SHConfig(budget=3).resolve(4, 300)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=2, max_size=40), st.integers(1, 4), st.integers(0, 5000))
    def test_ranking_is_a_permutation(self, losses, mult, N):
        table = {f"a{i:02d}": x for i, x in enumerate(losses)}
        M = len(table)
        B = minimal_budget(M) * mult
        N = N + sum(pulls_per_round(M, B))
        evaluate, _ = fixed_losses(table)
        state = successive_halving(list(table), evaluate, uniform_sizes(N, minimal_chunk(N, M, B)), B)
        assert sorted(state.ranking) == sorted(table)
        assert state.total_pulls <= B
        # with fixed losses SH finds the exhaustive argmin
        assert state.winners == [min(table, key=lambda a: (table[a], a))]
        for prev, nxt in zip(state.rounds, state.rounds[1:]):
            assert len(nxt.survivors) == math.ceil(len(prev.survivors) / 2)


def _params(M=1, P=1, L=10.0, I=1.0, N=100, O=10, T=5.0, E=0.01):
    return CostModelParams(P, [L] * M, [I] * M, N, O, T, T, E)


class TestCostModel:
    def test_hand_evaluated(self):
        assert cost_without_sh(_params()) == pytest.approx(141.0)

    def test_linear_in_models(self):
        base = cost_without_sh(_params(M=1))
        for M in (1, 2, 4):
            assert cost_without_sh(_params(M=M)) == pytest.approx(M * base)

    def test_more_rounds_amortize(self):
        p = _params(M=16, N=50_000, O=1000, L=100, I=0.5)
        C_min = minimal_chunk(p.N, 16, minimal_budget(16))
        assert cost_with_sh(p, p.N) > cost_with_sh(p, C_min)

    def _heterogeneous(self, N):
        M = 100
        I = [0.2 + 0.05 * (i % 20) for i in range(M)]
        L = [200.0 + 20 * (i % 7) for i in range(M)]
        return CostModelParams(1, L, I, N, 1000, 1000.0, 1000.0, 0.05)

    def test_small_dataset_plain(self):
        p = self._heterogeneous(1000)
        C = minimal_chunk(p.N, p.M, minimal_budget(p.M))
        assert choose_plan(p, C) == PLAIN

    def test_large_dataset_sh(self):
        p = self._heterogeneous(50_000)
        C = minimal_chunk(p.N, p.M, minimal_budget(p.M))
        assert choose_plan(p, C) == SUCCESSIVE_HALVING

    def test_tie_is_plain(self, monkeypatch):
        import shift.optimizer.cost as cost

        monkeypatch.setattr(cost, "cost_with_sh", lambda *a, **k: 100.0)
        monkeypatch.setattr(cost, "cost_without_sh", lambda p: 100.0)
        assert cost.choose_plan(_params(M=4), 10) == PLAIN

    def test_parallelism_divides(self):
        assert cost_without_sh(_params(M=8, P=8)) == pytest.approx(cost_without_sh(_params(M=1)))

    def test_calibration_median(self):
        assert calibrate_e_proxy([(100, 1.0), (100, 2.0), (100, 50.0)]) == pytest.approx(0.02)
