import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shift.errors import DimMismatch, EmptySplit, InvalidField, UnknownScoringAlgorithm
from shift.proxies import (
    ProxyRequest,
    compute_proxy,
    knn_accuracy,
    leep_score,
    loss_and_grad,
    neighbors,
    proxy_key,
    train_linear,
)


def oracle_knn1(train_X, train_y, test_X, test_y, metric):
    """Exhaustive pairwise distances, first index wins ties."""
    A = np.asarray(train_X, dtype=np.float64)
    B = np.asarray(test_X, dtype=np.float64)
    hits = 0
    for i, q in enumerate(B):
        best, best_j = None, -1
        for j, a in enumerate(A):
            if metric == "euclidean":
                d = float(np.sum((a - q) ** 2))
            else:
                na, nq = np.linalg.norm(a), np.linalg.norm(q)
                d = -(float(a @ q) / (na * nq)) if na > 0 and nq > 0 else 0.0
            if best is None or d < best:
                best, best_j = d, j
        hits += int(train_y[best_j] == test_y[i])
    return hits / len(B)


def two_blobs(n, seed, sep=4.0, dim=2):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = rng.normal(size=(n, dim)) + sep * y[:, None] * np.eye(dim)[0]
    return X, y


class TestNearestNeighbor:
    def test_self_match(self, rng):
        X = rng.normal(size=(30, 4))
        y = rng.integers(0, 3, size=30)
        for metric in ("cosine", "euclidean"):
            assert knn_accuracy(X, y, X, y, metric) == 1.0

    @pytest.mark.parametrize("metric", ["cosine", "euclidean"])
    def test_blobs_match_oracle(self, metric):
        Xtr, ytr = two_blobs(200, 0)
        Xte, yte = two_blobs(200, 1)
        assert knn_accuracy(Xtr, ytr, Xte, yte, metric) == oracle_knn1(Xtr, ytr, Xte, yte, metric)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 40), st.integers(1, 40), st.integers(1, 5), st.integers(0, 10**6),
           st.sampled_from(["cosine", "euclidean"]))
    def test_matches_oracle_property(self, n, m, d, seed, metric):
        rng = np.random.default_rng(seed)
        # coarse grid values force exact distance ties
        Xtr = rng.integers(-2, 3, size=(n, d)).astype(np.float32)
        Xte = rng.integers(-2, 3, size=(m, d)).astype(np.float32)
        ytr = rng.integers(0, 3, size=n)
        yte = rng.integers(0, 3, size=m)
        assert knn_accuracy(Xtr, ytr, Xte, yte, metric) == oracle_knn1(Xtr, ytr, Xte, yte, metric)

    def test_ties_go_to_lowest_index(self):
        train = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        idx = neighbors(train, np.array([[1.0, 0.0]]), "euclidean", k=1)
        assert idx[0, 0] == 0

    def test_zero_norm_rows(self):
        train = np.array([[0.0, 0.0], [1.0, 0.0]])
        # zero-norm query has similarity 0 to every row, so index 0 wins the tie
        assert neighbors(train, np.array([[0.0, 0.0]]), "cosine")[0, 0] == 0
        assert neighbors(train, np.array([[2.0, 0.0]]), "cosine")[0, 0] == 1

    def test_k3_majority(self):
        train = np.array([[0.0], [0.1], [0.2], [5.0]])
        y = np.array([1, 0, 0, 1])
        assert knn_accuracy(train, y, np.array([[0.05]]), np.array([0]), "euclidean", k=3) == 1.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.floats(0.01, 100))
    def test_cosine_scale_invariant(self, seed, scale):
        rng = np.random.default_rng(seed)
        Xtr, Xte = rng.normal(size=(25, 3)), rng.normal(size=(10, 3))
        ytr, yte = rng.integers(0, 2, 25), rng.integers(0, 2, 10)
        a = knn_accuracy(Xtr, ytr, Xte, yte, "cosine")
        b = knn_accuracy(Xtr * scale, ytr, Xte * scale, yte, "cosine")
        assert a == b


class TestLinear:
    def test_separable_blobs(self):
        Xtr, ytr = two_blobs(200, 0, sep=6.0)
        Xte, yte = two_blobs(200, 1, sep=6.0)
        req = ProxyRequest("Linear", learning_rate=0.1, seed=5)
        a = compute_proxy(Xtr, ytr, Xte, yte, req)
        b = compute_proxy(Xtr, ytr, Xte, yte, req)
        assert a >= 0.95
        assert a == b

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6), st.floats(0.0, 0.5))
    def test_gradient_matches_finite_differences(self, seed, l2):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(6, 3))
        y = rng.integers(0, 4, size=6)
        W = rng.normal(size=(3, 4))
        b = rng.normal(size=4)
        _, dW, db = loss_and_grad(W, b, X, y, l2)
        h = 1e-5
        for idx in np.ndindex(W.shape):
            Wp, Wm = W.copy(), W.copy()
            Wp[idx] += h
            Wm[idx] -= h
            num = (loss_and_grad(Wp, b, X, y, l2)[0] - loss_and_grad(Wm, b, X, y, l2)[0]) / (2 * h)
            assert abs(num - dW[idx]) <= 1e-4 * max(1e-3, abs(num))
        for j in range(4):
            bp, bm = b.copy(), b.copy()
            bp[j] += h
            bm[j] -= h
            num = (loss_and_grad(W, bp, X, y, l2)[0] - loss_and_grad(W, bm, X, y, l2)[0]) / (2 * h)
            assert abs(num - db[j]) <= 1e-4 * max(1e-3, abs(num))

    def test_full_batch_loss_monotone(self):
        X, y = two_blobs(100, 3, sep=5.0)
        model = train_linear(X, y, 2, learning_rate=0.01, batch_size=100, epochs=30, seed=0)
        diffs = np.diff(model.epoch_losses)
        assert np.all(diffs <= 1e-6)


class TestLeep:
    def test_perfect_transfer_near_zero(self):
        # one-hot-like features whose argmax equals the label
        y = np.arange(40) % 4
        F = np.full((40, 4), -30.0)
        F[np.arange(40), y] = 30.0
        assert leep_score(F, y, F, y, 4) > -1e-6

    def test_nonpositive(self, rng):
        X = rng.normal(size=(50, 5))
        y = rng.integers(0, 3, 50)
        assert leep_score(X, y, X, y, 3) <= 0

    def test_unseen_label_floor(self):
        X = np.zeros((2, 2))
        score = leep_score(X, np.array([0, 0]), X[:1], np.array([1]), 2)
        assert score == pytest.approx(np.log(1e-12))


class TestRequests:
    def test_accuracy_range(self, rng):
        X = rng.normal(size=(20, 3))
        y = rng.integers(0, 2, 20)
        for method in ("CosineNN", "EuclideanNN", "Linear"):
            assert 0.0 <= compute_proxy(X, y, X[:5], y[:5], ProxyRequest(method)) <= 1.0

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            compute_proxy(np.zeros((3, 2)), [0, 1, 0], np.zeros((2, 3)), [0, 1], ProxyRequest("CosineNN"))

    def test_empty_split(self):
        with pytest.raises(EmptySplit):
            compute_proxy(np.zeros((0, 2)), [], np.zeros((2, 2)), [0, 1], ProxyRequest("CosineNN"))

    def test_invalid_hyperparams(self):
        with pytest.raises(InvalidField):
            ProxyRequest("Linear", epochs=0)
        with pytest.raises(InvalidField):
            ProxyRequest("Linear", learning_rate=0)
        with pytest.raises(UnknownScoringAlgorithm):
            ProxyRequest("HScore")

    def test_from_call_aliases(self):
        req = ProxyRequest.from_call("Linear", {"lr": 0.5, "epochs": 3.0})
        assert req.learning_rate == 0.5 and req.epochs == 3

    def test_key_changes_with_hyperparams(self):
        a = proxy_key("m", ProxyRequest("Linear", learning_rate=0.1), "tr", "te", 10)
        b = proxy_key("m", ProxyRequest("Linear", learning_rate=0.2), "tr", "te", 10)
        c = proxy_key("m", ProxyRequest("Linear", learning_rate=0.1), "tr", "te2", 10)
        assert len({a, b, c}) == 3

    def test_nn_key_ignores_linear_params(self):
        assert ProxyRequest("CosineNN", seed=1).key() == ProxyRequest("CosineNN", seed=2).key()
