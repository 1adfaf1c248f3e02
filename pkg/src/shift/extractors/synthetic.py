"""Inference tasks: deterministic feature extraction for registered models."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from shift.errors import DimensionMismatch, ExtractorFailure
from shift.extractors.spec import ExtractorSpec

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK_SALT = np.uint64(0x5DEECE66D2545F49)
_U64 = (1 << 64) - 1

_hooks: dict[str, Callable[[np.ndarray], np.ndarray]] = {}
_hooks_lock = threading.Lock()


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    model_id: str
    chunk_hash: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def register_hook(name: str, fn: Callable[[np.ndarray], np.ndarray]) -> None:
    """Register a Python callable used by ``external_hook`` extractors."""
    with _hooks_lock:
        _hooks[name] = fn


def unregister_hook(name: str) -> None:
    with _hooks_lock:
        _hooks.pop(name, None)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _row_hash(X: np.ndarray) -> np.ndarray:
    bits = np.ascontiguousarray(X, dtype=np.float32).view(np.uint32).astype(np.uint64)
    h = np.full(len(X), _GOLDEN, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for j in range(bits.shape[1]):
            h = _mix(h ^ bits[:, j]) + _GOLDEN
    return h


def _unit(h: np.ndarray) -> np.ndarray:
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def _projection(seed: int, dim: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed & _U64)
    G = rng.standard_normal((dim, d))
    if dim >= d:
        A, _ = np.linalg.qr(G)
    else:
        A = G / np.sqrt(d)
    bias = rng.uniform(-0.1, 0.1, size=dim)
    return A, bias


def synthetic_features(X: np.ndarray, seed: int, quality: float, dim: int) -> np.ndarray:
    """Row-wise pure synthetic extractor.

    Rows whose model-independent hash falls below ``quality`` are mapped by a
    seeded affine map with orthonormal columns (geometry preserving); all other
    rows become pseudo-random vectors derived from the row bytes, so they carry
    no label information. Every row is computed independently of its batch.
    """
    X = np.ascontiguousarray(X, dtype=np.float32)
    n, d = X.shape
    out = np.empty((n, dim), dtype=np.float64)
    h = _row_hash(X)
    with np.errstate(over="ignore"):
        clean = _unit(_mix(h ^ _MASK_SALT)) < quality
    if clean.any():
        A, bias = _projection(seed, dim, d)
        Xc = X[clean].astype(np.float64)
        acc = np.zeros((len(Xc), dim), dtype=np.float64)
        for j in range(d):
            acc += Xc[:, j, None] * A[None, :, j]
        out[clean] = acc + bias
    noisy = ~clean
    if noisy.any():
        hn = h[noisy]
        # a constant scale: a norm-dependent one would leak class information
        scale = 3.0 * (1.0 + np.sqrt(d))
        salt = np.uint64(seed & _U64)
        with np.errstate(over="ignore"):
            base = _mix(hn ^ salt)
            for k in range(dim):
                u = _unit(_mix(base + np.uint64(k) * _GOLDEN))
                out[noisy, k] = (2.0 * u - 1.0) * scale
    return out.astype(np.float32)


_tables: dict[str, dict[bytes, np.ndarray]] = {}


def _precomputed(spec: ExtractorSpec, X: np.ndarray) -> np.ndarray:
    table = _tables.get(spec.table)
    if table is None:
        try:
            data = np.load(spec.table)
            inputs = np.ascontiguousarray(data["inputs"], dtype=np.float32)
            feats = np.asarray(data["features"], dtype=np.float32)
        except Exception as exc:
            raise ExtractorFailure(f"cannot load precomputed table {spec.table}: {exc}") from exc
        table = {inputs[i].tobytes(): feats[i] for i in range(len(inputs))}
        _tables[spec.table] = table
    X = np.ascontiguousarray(X, dtype=np.float32)
    try:
        return np.stack([table[row.tobytes()] for row in X]) if len(X) else np.empty((0, 0), np.float32)
    except KeyError as exc:
        raise ExtractorFailure("input row missing from precomputed table") from exc


def extract(model, inputs: np.ndarray, *, chunk_hash: str = "", timing_fidelity: bool = False) -> FeatureMatrix:
    """Run the inference task for one chunk of raw inputs."""
    spec: ExtractorSpec = model.extractor_spec
    if spec.kind == "synthetic_projection":
        values = synthetic_features(inputs, spec.seed, spec.quality_knob, model.feature_dim)
    elif spec.kind == "external_hook":
        fn = _hooks.get(spec.hook)
        if fn is None:
            raise ExtractorFailure(f"no hook registered under {spec.hook!r}")
        try:
            values = np.asarray(fn(np.asarray(inputs, dtype=np.float32)), dtype=np.float32)
        except Exception as exc:
            raise ExtractorFailure(f"hook {spec.hook!r} failed: {exc}") from exc
    else:
        values = _precomputed(spec, inputs)
    if len(inputs) == 0:
        values = np.empty((0, model.feature_dim), dtype=np.float32)
    if values.ndim != 2 or values.shape[0] != len(inputs) or values.shape[1] != model.feature_dim:
        raise DimensionMismatch(
            f"model {model.model_id} produced shape {values.shape}, "
            f"expected ({len(inputs)}, {model.feature_dim})"
        )
    if not np.all(np.isfinite(values)):
        raise ExtractorFailure(f"model {model.model_id} produced non-finite features")
    if timing_fidelity and spec.simulated_per_sample_latency:
        time.sleep(spec.simulated_per_sample_latency * len(inputs) / 1000.0)
    values.setflags(write=False)
    return FeatureMatrix(values, model.model_id, chunk_hash)
