"""Mutable data readers: a base sample source plus ordered change/add deltas.

Change indices always refer to positions in the reader state produced by
all preceding deltas. Deletion is not supported; build a new reader.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from shift.errors import ChunkingMismatch, DeltaConflict, OutOfRange
from shift.hashing import digest64
from shift.readers import container


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SampleSource:
    """Dense features ``X`` (float32, n x d) and integer labels ``y``.

    ``X`` may be ``None`` only for label-only change payloads.
    """

    X: np.ndarray | None
    y: np.ndarray

    def __post_init__(self):
        y = np.array(self.y, dtype=np.int64).reshape(-1)
        object.__setattr__(self, "y", _readonly(y))
        if self.X is not None:
            X = np.array(self.X, dtype=np.float32)
            if X.ndim == 1:
                X = X.reshape(-1, 1)
            if X.ndim != 2:
                raise ValueError("features must be a 2-D array")
            if len(X) != len(y):
                raise ValueError(f"{len(X)} feature rows but {len(y)} labels")
            if not np.all(np.isfinite(X)):
                raise ValueError("features must be finite")
            object.__setattr__(self, "X", _readonly(X))

    def __len__(self) -> int:
        return len(self.y)

    @property
    def dim(self) -> int:
        return 0 if self.X is None else self.X.shape[1]

    @classmethod
    def from_file(cls, path: str | Path) -> "SampleSource":
        X, y = container.read_samples(path)
        return cls(X, y)

    def to_file(self, path: str | Path) -> None:
        container.write_samples(path, self.X, self.y)

    def content_hash(self) -> str:
        return digest64(self.X, self.y)


@dataclass(frozen=True, eq=False)
class AddPlan:
    """Assignment of appended samples to existing buckets.

    Payload rows ``order[sum(counts[:b]) : sum(counts[:b+1])]`` land in bucket
    ``b``; their slots inside the grown bucket are drawn uniformly without
    replacement from a generator seeded by ``(seed, b)``.
    """

    n_buckets: int
    counts: tuple[int, ...]
    order: tuple[int, ...]
    seed: int
    chunk_size: int | None = None

    @property
    def add_count(self) -> int:
        return len(self.order)

    def rows_for_bucket(self, b: int) -> np.ndarray:
        start = sum(self.counts[:b])
        return np.asarray(self.order[start:start + self.counts[b]], dtype=np.int64)

    def positions(self, b: int, grown_size: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, b])
        return np.sort(rng.choice(grown_size, size=self.counts[b], replace=False))

    def bucket_of_payload(self) -> np.ndarray:
        out = np.empty(self.add_count, dtype=np.int64)
        for b in range(self.n_buckets):
            out[self.rows_for_bucket(b)] = b
        return out

    def to_dict(self) -> dict:
        return {
            "n_buckets": self.n_buckets,
            "counts": list(self.counts),
            "order": list(self.order),
            "seed": self.seed,
            "chunk_size": self.chunk_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AddPlan":
        return cls(d["n_buckets"], tuple(d["counts"]), tuple(d["order"]), d["seed"], d.get("chunk_size"))


@dataclass(frozen=True, eq=False)
class Delta:
    kind: str
    payload: SampleSource
    indices: np.ndarray | None = None
    plan: AddPlan | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("change", "add"):
            raise ValueError(f"unknown delta kind {self.kind!r}")
        if self.kind == "change":
            if self.indices is None:
                raise DeltaConflict("change delta needs target indices")
            idx = np.array(self.indices, dtype=np.int64).reshape(-1)
            if len(idx) != len(self.payload):
                raise DeltaConflict("change indices and payload differ in length")
            if len(np.unique(idx)) != len(idx):
                raise DeltaConflict("change indices must be unique")
            object.__setattr__(self, "indices", _readonly(idx))
        elif self.payload.X is None:
            raise DeltaConflict("add delta needs feature rows")
        if self.plan is not None and self.plan.add_count != len(self.payload):
            raise DeltaConflict("add plan does not match payload length")

    @classmethod
    def change(cls, indices, X, y, name: str = "") -> "Delta":
        return cls("change", SampleSource(X, y), indices=indices, name=name)

    @classmethod
    def label_change(cls, indices, y, name: str = "") -> "Delta":
        return cls("change", SampleSource(None, y), indices=indices, name=name)

    @classmethod
    def add(cls, X, y, plan: AddPlan | None = None, name: str = "") -> "Delta":
        return cls("add", SampleSource(X, y), plan=plan, name=name)

    def content_hash(self) -> str:
        plan = None if self.plan is None else self.plan.to_dict()
        return digest64(self.kind, self.indices, self.payload.X, self.payload.y, plan)


@dataclass(frozen=True)
class Chunk:
    reader_id: str
    ordinal: int
    start: int
    stop: int
    content_hash: str

    @property
    def size(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True, eq=False)
class FeatureChunk:
    """A cacheable unit of inference work: rows of one reader segment."""

    segment: int
    key: int
    rows: np.ndarray
    xhash: str

    @property
    def size(self) -> int:
        return len(self.rows)


def uniform_sizes(n: int, chunk_size: int) -> list[int]:
    if chunk_size < 1:
        raise ValueError("chunk size must be >= 1")
    sizes = [chunk_size] * (n // chunk_size)
    if n % chunk_size:
        sizes.append(n % chunk_size)
    return sizes


def near_equal_sizes(n: int, parts: int) -> list[int]:
    parts = max(1, parts)
    base, extra = divmod(n, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


@dataclass
class _State:
    X: np.ndarray
    y: np.ndarray
    seg: np.ndarray
    row: np.ndarray
    segments: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class MutableReader:
    base: SampleSource
    deltas: tuple = ()
    chunk_size: int | None = None
    reader_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "deltas", tuple(self.deltas))
        if self.base.X is None:
            raise ValueError("base reader needs feature rows")

    def with_delta(self, delta: Delta) -> "MutableReader":
        return MutableReader(self.base, self.deltas + (delta,), self.chunk_size, self.reader_id)

    def with_chunk_size(self, chunk_size: int | None) -> "MutableReader":
        return MutableReader(self.base, self.deltas, chunk_size, self.reader_id)

    # -- materialization -------------------------------------------------

    @cached_property
    def _state(self) -> _State:
        X, y = self.base.X, self.base.y
        seg = np.zeros(len(y), dtype=np.int64)
        row = np.arange(len(y), dtype=np.int64)
        segments = [self.base.X]
        for i, delta in enumerate(self.deltas, start=1):
            segments.append(delta.payload.X)
            n = len(y)
            if delta.kind == "change":
                idx = delta.indices
                if len(idx) and (idx.min() < 0 or idx.max() >= n):
                    raise DeltaConflict(f"change index out of range for reader of length {n}")
                y = y.copy()
                y[idx] = delta.payload.y
                if delta.payload.X is not None:
                    if delta.payload.dim != X.shape[1]:
                        raise DeltaConflict("change payload dimension differs from reader")
                    changed = np.any(
                        X[idx].view(np.uint32) != delta.payload.X.view(np.uint32), axis=1
                    )
                    X = X.copy()
                    X[idx] = delta.payload.X
                    seg = seg.copy()
                    row = row.copy()
                    seg[idx[changed]] = i
                    row[idx[changed]] = np.nonzero(changed)[0]
            else:
                if delta.payload.dim != X.shape[1]:
                    raise DeltaConflict("add payload dimension differs from reader")
                m = len(delta.payload)
                cat_X = np.concatenate([X, delta.payload.X])
                cat_y = np.concatenate([y, delta.payload.y])
                cat_seg = np.concatenate([seg, np.full(m, i, dtype=np.int64)])
                cat_row = np.concatenate([row, np.arange(m, dtype=np.int64)])
                if delta.plan is None:
                    perm = np.arange(n + m)
                else:
                    perm = self._plan_permutation(delta.plan, i - 1, n)
                X, y, seg, row = cat_X[perm], cat_y[perm], cat_seg[perm], cat_row[perm]
        return _State(_readonly(np.asarray(X)), _readonly(np.asarray(y)), seg, row, segments)

    def _plan_permutation(self, plan: AddPlan, n_prior_deltas: int, n: int) -> np.ndarray:
        if plan.chunk_size is not None:
            sizes = _layout(len(self.base), self.deltas[:n_prior_deltas], plan.chunk_size)
        else:
            sizes = near_equal_sizes(n, plan.n_buckets)
        if len(sizes) != plan.n_buckets or sum(sizes) != n:
            raise DeltaConflict(
                f"add plan expects {plan.n_buckets} buckets, reader layout has {len(sizes)}"
            )
        parts = []
        start = 0
        for b, size in enumerate(sizes):
            grown = size + plan.counts[b]
            out = np.empty(grown, dtype=np.int64)
            mask = np.zeros(grown, dtype=bool)
            mask[plan.positions(b, grown)] = True
            out[mask] = plan.rows_for_bucket(b) + n
            out[~mask] = np.arange(start, start + size)
            parts.append(out)
            start += size
        return np.concatenate(parts) if parts else np.arange(n + plan.add_count)

    @property
    def n_effective(self) -> int:
        return len(self._state.y)

    def __len__(self) -> int:
        return self.n_effective

    @property
    def dim(self) -> int:
        return self.base.dim

    def _check_range(self, start: int, stop: int | None) -> tuple[int, int]:
        n = self.n_effective
        stop = n if stop is None else stop
        if not (0 <= start <= stop <= n):
            raise OutOfRange(f"range [{start}, {stop}) outside [0, {n})")
        return start, stop

    def materialize(self, start: int = 0, stop: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        start, stop = self._check_range(start, stop)
        st = self._state
        return st.X[start:stop], st.y[start:stop]

    def __iter__(self) -> Iterator[tuple[np.ndarray, int]]:
        X, y = self.materialize()
        for i in range(len(y)):
            yield X[i], int(y[i])

    def content_hash(self, start: int = 0, stop: int | None = None) -> str:
        X, y = self.materialize(start, stop)
        return digest64(X, y)

    def labels_hash(self) -> str:
        return digest64(self._state.y)

    # -- bucket layouts and feature chunks --------------------------------

    def bucket_sizes(self, chunk_size: int) -> list[int]:
        return _layout(len(self.base), self.deltas, chunk_size)

    def _segment_keys(self, segment: int, chunk_size: int) -> np.ndarray:
        if segment == 0:
            return np.arange(len(self.base), dtype=np.int64) // chunk_size
        delta = self.deltas[segment - 1]
        if delta.kind == "add" and delta.plan is not None:
            return delta.plan.bucket_of_payload()
        return np.arange(len(delta.payload), dtype=np.int64) // chunk_size

    def feature_chunks(
        self, chunk_size: int, start: int = 0, stop: int | None = None
    ) -> list[FeatureChunk]:
        """Cacheable segment chunks whose features cover rows ``[start, stop)``."""
        start, stop = self._check_range(start, stop)
        st = self._state
        seg, row = st.seg[start:stop], st.row[start:stop]
        chunks = []
        for s in np.unique(seg):
            keys = self._segment_keys(int(s), chunk_size)
            needed = np.unique(keys[row[seg == s]])
            seg_X = st.segments[int(s)]
            for k in needed:
                rows = np.nonzero(keys == k)[0]
                chunks.append(FeatureChunk(int(s), int(k), rows, digest64(seg_X[rows])))
        return chunks

    def chunk_inputs(self, chunk: FeatureChunk) -> np.ndarray:
        return self._state.segments[chunk.segment][chunk.rows]

    def gather_features(
        self,
        chunk_size: int,
        lookup: Callable[[FeatureChunk], np.ndarray],
        start: int = 0,
        stop: int | None = None,
    ) -> np.ndarray:
        """Assemble features for materialized rows from per-chunk matrices."""
        start, stop = self._check_range(start, stop)
        st = self._state
        seg, row = st.seg[start:stop], st.row[start:stop]
        out = None
        for chunk in self.feature_chunks(chunk_size, start, stop):
            mat = lookup(chunk)
            if out is None:
                out = np.empty((stop - start, mat.shape[1]), dtype=np.float32)
            sel = np.nonzero(seg == chunk.segment)[0]
            in_chunk = np.isin(row[sel], chunk.rows)
            sel = sel[in_chunk]
            out[sel] = mat[np.searchsorted(chunk.rows, row[sel])]
        if out is None:
            out = np.empty((0, 0), dtype=np.float32)
        return out


def _layout(n0: int, deltas: Sequence[Delta], chunk_size: int) -> list[int]:
    sizes = uniform_sizes(n0, chunk_size)
    for delta in deltas:
        if delta.kind != "add":
            continue
        plan = delta.plan
        if plan is not None and plan.chunk_size == chunk_size and plan.n_buckets == len(sizes):
            sizes = [s + c for s, c in zip(sizes, plan.counts)]
        else:
            sizes = near_equal_sizes(sum(sizes) + len(delta.payload), len(sizes))
    return sizes


def chunk_partition(reader: MutableReader, chunk_size: int) -> list[Chunk]:
    """Fixed-size chunks over the materialized reader; the last may be short."""
    chunks = []
    start = 0
    for k, size in enumerate(uniform_sizes(reader.n_effective, chunk_size)):
        stop = start + size
        chunks.append(Chunk(reader.reader_id, k, start, stop, reader.content_hash(start, stop)))
        start = stop
    return chunks


def distribute_added_samples(
    n_buckets: int, add_count: int, seed: int, chunk_size: int | None = None
) -> AddPlan:
    """Spread ``add_count`` new samples uniformly over ``n_buckets`` buckets.

    Every bucket receives the floor or the ceiling of the even share; which
    buckets get the ceiling and which payload rows go where is seeded.
    """
    if n_buckets < 1:
        raise ValueError("n_buckets must be >= 1")
    if add_count < 0:
        raise ValueError("add_count must be >= 0")
    rng = np.random.default_rng(seed)
    base, extra = divmod(add_count, n_buckets)
    counts = [base] * n_buckets
    for b in rng.choice(n_buckets, size=extra, replace=False):
        counts[int(b)] += 1
    order = rng.permutation(add_count) if add_count else np.empty(0, dtype=np.int64)
    return AddPlan(n_buckets, tuple(counts), tuple(int(i) for i in order), int(seed), chunk_size)


def invalidated_chunks(before, after, chunk_size: int | None = None) -> set[int]:
    """Ordinals of chunks whose content hash differs between two reader states.

    Accepts two readers (chunked with ``chunk_size`` or their own
    ``chunk_size``) or two chunk lists produced by :func:`chunk_partition`.
    """
    if isinstance(before, MutableReader):
        c_before = chunk_size or before.chunk_size
        c_after = chunk_size or after.chunk_size
        if c_before is None or c_before != c_after:
            raise ChunkingMismatch(f"chunk sizes differ: {c_before} vs {c_after}")
        before = chunk_partition(before, c_before)
        after = chunk_partition(after, c_after)
    shared = min(len(before), len(after))
    if shared > 1 and before[0].size != after[0].size:
        raise ChunkingMismatch("chunk lists were built with different chunk sizes")
    changed = {a.ordinal for a, b in zip(before, after) if a.content_hash != b.content_hash}
    longer = after if len(after) > len(before) else before
    changed.update(c.ordinal for c in longer[shared:])
    return changed
