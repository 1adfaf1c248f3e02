"""Little-endian binary sample container.

Layout (all integers little-endian)::

    magic      4 bytes   b"SHFR"
    version    u16       1
    n_samples  u64
    dim        u32       0 for label-only change payloads
    label_type u8        0 = none, 1 = int32, 2 = int64
    [indices   u64 * n]  change-reader files only
    features   f32 * n * dim, row-major
    labels     int32/int64 * n (absent when label_type == 0)
    checksum   8 bytes   blake2b-64 of every preceding byte

Plain sample files and change-reader files share the header; the caller
decides which one it is reading.
"""

from __future__ import annotations

import hashlib
import os
import struct
import threading
from pathlib import Path

import numpy as np

from shift.errors import CorruptContainer

MAGIC = b"SHFR"
VERSION = 1
_HEADER = struct.Struct("<4sHQIB")
_LABEL_DTYPES = {0: None, 1: np.dtype("<i4"), 2: np.dtype("<i8")}
_CHECKSUM_SIZE = 8


def _checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=_CHECKSUM_SIZE).digest()


def encode(
    features: np.ndarray | None,
    labels: np.ndarray | None,
    indices: np.ndarray | None = None,
    *,
    n: int | None = None,
) -> bytes:
    if features is not None:
        features = np.ascontiguousarray(features, dtype="<f4")
        if features.ndim != 2:
            raise ValueError("features must be 2-D")
        n_rows, dim = features.shape
    else:
        if labels is None and n is None:
            raise ValueError("need features, labels or an explicit row count")
        n_rows = n if labels is None else len(labels)
        dim = 0
    if labels is None:
        label_type = 0
    else:
        labels = np.asarray(labels)
        label_type = 1 if labels.dtype.itemsize <= 4 else 2
        labels = np.ascontiguousarray(labels, dtype=_LABEL_DTYPES[label_type])
        if len(labels) != n_rows:
            raise ValueError("labels and features disagree on row count")
    parts = [_HEADER.pack(MAGIC, VERSION, n_rows, dim, label_type)]
    if indices is not None:
        indices = np.ascontiguousarray(indices, dtype="<u8")
        if len(indices) != n_rows:
            raise ValueError("index list length must equal payload length")
        parts.append(indices.tobytes())
    if features is not None:
        parts.append(features.tobytes())
    if labels is not None:
        parts.append(labels.tobytes())
    body = b"".join(parts)
    return body + _checksum(body)


def decode(data: bytes, *, with_indices: bool = False):
    """Return ``(features | None, labels | None, indices | None)``."""
    if len(data) < _HEADER.size + _CHECKSUM_SIZE:
        raise CorruptContainer("container truncated")
    body, trailer = data[:-_CHECKSUM_SIZE], data[-_CHECKSUM_SIZE:]
    if _checksum(body) != trailer:
        raise CorruptContainer("checksum mismatch")
    magic, version, n, dim, label_type = _HEADER.unpack_from(body, 0)
    if magic != MAGIC:
        raise CorruptContainer(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptContainer(f"unsupported container version {version}")
    if label_type not in _LABEL_DTYPES:
        raise CorruptContainer(f"unknown label type {label_type}")
    offset = _HEADER.size
    indices = None
    if with_indices:
        indices = np.frombuffer(body, dtype="<u8", count=n, offset=offset).astype(np.int64)
        offset += 8 * n
    features = None
    if dim:
        features = np.frombuffer(body, dtype="<f4", count=n * dim, offset=offset).reshape(n, dim)
        features = features.astype(np.float32)
        offset += 4 * n * dim
    labels = None
    ldt = _LABEL_DTYPES[label_type]
    if ldt is not None:
        labels = np.frombuffer(body, dtype=ldt, count=n, offset=offset).astype(np.int64)
        offset += ldt.itemsize * n
    if offset != len(body):
        raise CorruptContainer("trailing bytes before checksum")
    return features, labels, indices


def _atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def write_samples(path, features, labels) -> None:
    _atomic_write(path, encode(features, labels))


def read_samples(path):
    features, labels, _ = decode(Path(path).read_bytes())
    return features, labels


def write_change(path, indices, features, labels) -> None:
    _atomic_write(path, encode(features, labels, indices))


def read_change(path):
    """Return ``(indices, features | None, labels)``."""
    features, labels, indices = decode(Path(path).read_bytes(), with_indices=True)
    return indices, features, labels
