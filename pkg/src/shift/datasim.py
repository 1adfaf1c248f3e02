"""Dataset (task) embeddings and nearest-task ranking.

``moments_v1`` stands in for a Fisher-information task embedding: it
concatenates per-dimension means, per-dimension variances, per-class mean
offsets for a fixed class budget, and the normalized label histogram.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from shift.errors import DimMismatch, UnsupportedMethod

CLASS_BUDGET = 64
METHODS = ("moments_v1",)
METRICS = ("cosine", "asymmetric_cos")


@dataclass(frozen=True, eq=False)
class TaskEmbedding:
    reader_id: str
    method: str
    vector: np.ndarray
    created_at: float = field(default_factory=time.time)

    @property
    def dim(self) -> int:
        return len(self.vector)


def _slot(labels: np.ndarray) -> np.ndarray:
    return np.where(labels < CLASS_BUDGET, labels, CLASS_BUDGET)


def moments_v1(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    mean = X.mean(axis=0) if n else np.zeros(d)
    var = X.var(axis=0) if n else np.zeros(d)
    slots = _slot(y)
    offsets = np.zeros((CLASS_BUDGET + 1, d))
    counts = np.bincount(slots, minlength=CLASS_BUDGET + 1).astype(np.float64)
    np.add.at(offsets, slots, X)
    present = counts > 0
    offsets[present] = offsets[present] / counts[present, None] - mean
    hist = counts / max(n, 1)
    return np.concatenate([mean, var, offsets.ravel(), hist])


def embed_dataset(reader, method: str = "moments_v1", reader_id: str | None = None) -> TaskEmbedding:
    """Embed a reader (or an ``(X, y)`` pair) as a fixed-length vector."""
    if method not in METHODS:
        raise UnsupportedMethod(f"unsupported embedding method {method!r}")
    if isinstance(reader, tuple):
        X, y = reader
        rid = reader_id or ""
    else:
        X, y = reader.materialize()
        rid = reader_id or reader.reader_id
    vec = moments_v1(X, y)
    vec.setflags(write=False)
    return TaskEmbedding(rid, method, vec)


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 1.0 if na == nb else 0.0
    return float(np.dot(a, b) / (na * nb))


def distance(a: np.ndarray, b: np.ndarray, metric: str) -> float:
    """Distance from target ``a`` to candidate ``b`` (0 when identical)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimMismatch(f"embedding dims differ: {a.shape} vs {b.shape}")
    if metric == "cosine":
        return 1.0 - _cos(a, b)
    if metric == "asymmetric_cos":
        return 1.0 - _cos(a, (a + b) / 2.0)
    raise UnsupportedMethod(f"unsupported metric {metric!r}")


def rank_datasets(target: TaskEmbedding, candidates, metric: str = "asymmetric_cos", K: int | None = None):
    """Candidates ordered by ascending distance, ties by reader id.

    Returns a list of ``(reader_id, distance)`` pairs truncated to ``K``.
    """
    scored = []
    for cand in candidates:
        if cand.method != target.method:
            raise DimMismatch("embeddings were computed with different methods")
        scored.append((distance(target.vector, cand.vector, metric), cand.reader_id))
    scored.sort()
    ranked = [(rid, dist) for dist, rid in scored]
    return ranked if K is None else ranked[:K]
