"""Content-addressed, write-once store of extracted feature chunks."""

from __future__ import annotations

import logging
import threading
from collections import OrderedDict
from pathlib import Path

import numpy as np

from shift.errors import CorruptContainer, CorruptEntry
from shift.hashing import digest64
from shift.readers import container

log = logging.getLogger(__name__)


class FeatureCache:
    """Maps ``(model_id, chunk_hash)`` to a float32 feature matrix.

    Entries are immutable once written. With ``root=None`` the cache lives in
    memory only. ``max_bytes`` bounds the on-disk size with LRU eviction.
    Corrupted files are reported as misses and removed.
    """

    def __init__(self, root: str | Path | None = None, max_bytes: int | None = None):
        self.root = None if root is None else Path(root)
        self.max_bytes = max_bytes
        self._lock = threading.Lock()
        self._mem: dict[str, np.ndarray] = {}
        self._sizes: OrderedDict[str, int] = OrderedDict()
        self.hits = 0
        self.misses = 0
        self.writes = 0
        self.corrupt = 0
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            files = sorted(self.root.glob("*.shfr"), key=lambda p: p.stat().st_mtime)
            for p in files:
                self._sizes[p.stem] = p.stat().st_size

    @staticmethod
    def key(model_id: str, chunk_hash: str) -> str:
        return digest64(model_id, chunk_hash)

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.shfr"

    def __contains__(self, item: tuple[str, str]) -> bool:
        k = self.key(*item)
        if self.root is None:
            return k in self._mem
        return self._path(k).exists()

    def get(self, model_id: str, chunk_hash: str) -> np.ndarray | None:
        k = self.key(model_id, chunk_hash)
        with self._lock:
            if self.root is None:
                value = self._mem.get(k)
            else:
                value = self._load(k)
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
                if k in self._sizes:
                    self._sizes.move_to_end(k)
            return value

    def _load(self, k: str) -> np.ndarray | None:
        path = self._path(k)
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            return None
        try:
            try:
                X, _, _ = container.decode(data)
            except CorruptContainer as exc:
                raise CorruptEntry(str(exc)) from exc
        except CorruptEntry as exc:
            log.warning("feature cache entry %s is corrupt (%s); treating as miss", k, exc)
            self.corrupt += 1
            path.unlink(missing_ok=True)
            self._sizes.pop(k, None)
            return None
        if X is None:
            X = np.empty((0, 0), dtype=np.float32)
        X.setflags(write=False)
        return X

    def put(self, model_id: str, chunk_hash: str, values: np.ndarray) -> None:
        k = self.key(model_id, chunk_hash)
        values = np.ascontiguousarray(values, dtype=np.float32)
        with self._lock:
            if self.root is None:
                if k not in self._mem:
                    frozen = values.copy()
                    frozen.setflags(write=False)
                    self._mem[k] = frozen
                    self.writes += 1
                return
            path = self._path(k)
            if path.exists():
                return
            data = container.encode(values, None, n=len(values))
            container._atomic_write(path, data)
            self.writes += 1
            self._sizes[k] = len(data)
            self._evict(keep=k)

    def _evict(self, keep: str) -> None:
        if self.max_bytes is None:
            return
        total = sum(self._sizes.values())
        while total > self.max_bytes and len(self._sizes) > 1:
            oldest = next(iter(self._sizes))
            if oldest == keep:
                self._sizes.move_to_end(oldest)
                continue
            total -= self._sizes.pop(oldest)
            self._path(oldest).unlink(missing_ok=True)

    def stats(self) -> dict:
        return {"hits": self.hits, "misses": self.misses, "writes": self.writes, "corrupt": self.corrupt}
