"""Exact brute-force nearest-neighbor accuracy."""

from __future__ import annotations

import numpy as np

_BLOCK_ELEMENTS = 1 << 22
_REFINE_RTOL = 1e-9


def _row_norms(X: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", X, X))


def _exact_scores(q: np.ndarray, cand: np.ndarray, metric: str) -> np.ndarray:
    """Distances (lower is nearer) of one query to a few candidates, computed directly."""
    if metric == "euclidean":
        diff = cand - q
        return np.einsum("ij,ij->i", diff, diff)
    qn = np.sqrt(q @ q)
    cn = _row_norms(cand)
    denom = qn * cn
    sims = np.where(denom > 0, (cand @ q) / np.where(denom > 0, denom, 1.0), 0.0)
    return -sims


def neighbors(train_X: np.ndarray, test_X: np.ndarray, metric: str, k: int = 1) -> np.ndarray:
    """Indices of the ``k`` nearest train rows for every test row.

    Distances are screened in blocks with a matrix product and near-ties are
    re-scored by direct differences, so the result matches an exhaustive
    pairwise computation. Ties go to the lowest train index.
    """
    A = np.asarray(train_X, dtype=np.float64)
    B = np.asarray(test_X, dtype=np.float64)
    n = len(A)
    k = min(k, n)
    if metric == "cosine":
        an = _row_norms(A)
        A_unit = A / np.where(an > 0, an, 1.0)[:, None]
    else:
        a2 = np.einsum("ij,ij->i", A, A)
    block = max(1, _BLOCK_ELEMENTS // max(n, 1))
    out = np.empty((len(B), k), dtype=np.int64)
    for s in range(0, len(B), block):
        Q = B[s : s + block]
        if metric == "cosine":
            qn = _row_norms(Q)
            Q_unit = Q / np.where(qn > 0, qn, 1.0)[:, None]
            D = -(Q_unit @ A_unit.T)
        else:
            D = a2[None, :] - 2.0 * (Q @ A.T) + np.einsum("ij,ij->i", Q, Q)[:, None]
        for r in range(len(Q)):
            row = D[r]
            if k == 1:
                best = row.min()
                tol = _REFINE_RTOL * max(1.0, abs(best), float(np.abs(row).max()))
                cand = np.nonzero(row <= best + tol)[0]
                if len(cand) > 1:
                    exact = _exact_scores(Q[r], A[cand], metric)
                    cand = cand[exact == exact.min()]
                out[s + r, 0] = cand[0]
            else:
                part = np.argpartition(row, k - 1)[:k]
                kth = row[part].max()
                tol = _REFINE_RTOL * max(1.0, abs(kth), float(np.abs(row).max()))
                cand = np.nonzero(row <= kth + tol)[0]
                exact = _exact_scores(Q[r], A[cand], metric)
                order = np.lexsort((cand, exact))
                out[s + r] = cand[order[:k]]
    return out


def knn_accuracy(train_X, train_y, test_X, test_y, metric: str = "euclidean", k: int = 1) -> float:
    """Fraction of test rows whose ``k``-NN majority label matches.

    Majority ties resolve to the lowest label.
    """
    train_y = np.asarray(train_y)
    test_y = np.asarray(test_y)
    idx = neighbors(train_X, test_X, metric, k)
    if idx.shape[1] == 1:
        pred = train_y[idx[:, 0]]
    else:
        labels = train_y[idx]
        pred = np.empty(len(labels), dtype=train_y.dtype)
        for i, row in enumerate(labels):
            vals, counts = np.unique(row, return_counts=True)
            pred[i] = vals[np.argmax(counts)]
    return float(np.mean(pred == test_y))
