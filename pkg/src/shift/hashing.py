"""Stable 64-bit content digests."""

from __future__ import annotations

import hashlib
import json

import numpy as np


def digest64(*parts) -> str:
    """Hex blake2b-64 digest over bytes, strings, numbers and numpy arrays.

    Arrays contribute dtype and shape as well as their raw bytes, so two
    arrays with equal bytes but different layout never collide.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, np.ndarray):
            arr = np.ascontiguousarray(part)
            h.update(f"{arr.dtype.str}{arr.shape}".encode())
            h.update(arr.tobytes())
        elif isinstance(part, (bytes, bytearray, memoryview)):
            h.update(bytes(part))
        elif isinstance(part, str):
            h.update(part.encode("utf-8"))
        elif part is None:
            h.update(b"\x00none")
        else:
            h.update(json.dumps(part, sort_keys=True, default=str).encode())
        h.update(b"\x1f")
    return h.hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
