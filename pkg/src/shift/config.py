"""JSON configuration with documented defaults.

The file named by ``--config`` or the ``SHIFT_CONFIG`` environment variable is
deep-merged over :data:`DEFAULTS`. Unknown keys are rejected so typos surface.
"""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

from shift.errors import InvalidField

DEFAULTS: dict = {
    "catalog": {"path": "shift-catalog"},
    "cache": {"features_path": None, "max_bytes": None, "enabled": True},
    "devices": {"accelerators": 0, "accelerator_speeds": None, "cpu_threads": None, "proxy_placement": "cpu"},
    "scheduler": {"partition_threshold": 1024, "feature_chunk": None},
    "optimizer": {"force_mode": "auto", "budget": None, "chunk_size": None},
    "cost": {"train_load_ms": 0.0, "test_load_ms": 0.0, "proxy_ms_per_sample": 0.01},
    "query": {"seed": 0, "tie_mode": "id", "timing_fidelity": False},
    "server": {"host": "127.0.0.1", "port": 8765},
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise InvalidField(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise InvalidField(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def load_config(path: str | os.PathLike | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then the config file, then ``overrides``."""
    cfg = copy.deepcopy(DEFAULTS)
    path = path or os.environ.get("SHIFT_CONFIG")
    if path:
        try:
            cfg = _merge(cfg, json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise InvalidField(f"config file {path} is not valid JSON: {exc}") from exc
    if overrides:
        cfg = _merge(cfg, overrides)
    if cfg["optimizer"]["force_mode"] not in ("auto", "plain", "sh"):
        raise InvalidField("optimizer.force_mode must be auto, plain or sh")
    if cfg["query"]["tie_mode"] not in ("id", "random"):
        raise InvalidField("query.tie_mode must be id or random")
    if cfg["devices"]["proxy_placement"] not in ("cpu", "shared"):
        raise InvalidField("devices.proxy_placement must be cpu or shared")
    return cfg
