"""Row types of the Models, DataReaders and BenchmarkResults views."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from shift.errors import InvalidField
from shift.extractors.spec import ExtractorSpec

SOURCES = ("synthetic", "exported", "external")
MODALITIES = ("Vision", "Text")
READER_KINDS = ("initial", "change", "add")


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise InvalidField(msg)


@dataclass(frozen=True)
class ModelRecord:
    """One row of the Models view.

    ``per_sample_inference_cost`` and ``load_cost`` are in milliseconds and
    feed the cost model.
    """

    model_id: str
    feature_dim: int
    per_sample_inference_cost: float = 1.0
    load_cost: float = 0.0
    source: str = "synthetic"
    input_modality: str = "Vision"
    n_params: int = 0
    upstream_accuracy: float | None = None
    extractor_spec: ExtractorSpec = field(default_factory=ExtractorSpec)

    def __post_init__(self):
        _check(isinstance(self.model_id, str) and bool(self.model_id), "model_id must be a non-empty string")
        _check(self.source in SOURCES, f"source must be one of {SOURCES}")
        _check(self.input_modality in MODALITIES, f"input_modality must be one of {MODALITIES}")
        _check(int(self.feature_dim) >= 1, "feature_dim must be >= 1")
        _check(self.per_sample_inference_cost > 0, "per_sample_inference_cost must be > 0")
        _check(self.load_cost >= 0, "load_cost must be >= 0")
        _check(self.n_params >= 0, "n_params must be >= 0")
        if self.upstream_accuracy is not None:
            _check(
                not math.isnan(self.upstream_accuracy) and 0.0 <= self.upstream_accuracy <= 1.0,
                "upstream_accuracy must lie in [0, 1]",
            )
        if isinstance(self.extractor_spec, dict):
            object.__setattr__(self, "extractor_spec", ExtractorSpec.from_dict(self.extractor_spec))

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "source": self.source,
            "input_modality": self.input_modality,
            "n_params": self.n_params,
            "upstream_accuracy": self.upstream_accuracy,
            "feature_dim": self.feature_dim,
            "per_sample_inference_cost": self.per_sample_inference_cost,
            "load_cost": self.load_cost,
            "extractor_spec": self.extractor_spec.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelRecord":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        if "model_id" not in known or "feature_dim" not in known:
            raise InvalidField("model records need model_id and feature_dim")
        known["extractor_spec"] = ExtractorSpec.from_dict(d.get("extractor_spec"))
        return cls(**known)


@dataclass(frozen=True, eq=False)
class ReaderRecord:
    """One row of the DataReaders view."""

    reader_id: str
    n_samples: int
    label_cardinality: int
    content_hash: str = ""
    modality: str = "Vision"
    reader_kind: str = "initial"
    parent_reader: str | None = None
    type_tag: str = ""
    embedding: np.ndarray | None = None

    def __post_init__(self):
        _check(isinstance(self.reader_id, str) and bool(self.reader_id), "reader_id must be a non-empty string")
        _check(self.n_samples >= 1, "n_samples must be >= 1")
        _check(self.label_cardinality >= 1, "label_cardinality must be >= 1")
        _check(self.modality in MODALITIES, f"modality must be one of {MODALITIES}")
        _check(self.reader_kind in READER_KINDS, f"reader_kind must be one of {READER_KINDS}")
        _check(
            (self.reader_kind == "initial") == (self.parent_reader is None),
            "change/add readers need a parent; initial readers must not have one",
        )

    def to_dict(self) -> dict:
        return {
            "reader_id": self.reader_id,
            "modality": self.modality,
            "n_samples": self.n_samples,
            "label_cardinality": self.label_cardinality,
            "content_hash": self.content_hash,
            "reader_kind": self.reader_kind,
            "parent_reader": self.parent_reader,
            "type_tag": self.type_tag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReaderRecord":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d and k != "embedding"}
        return cls(**known)


@dataclass(frozen=True)
class BenchmarkResult:
    model_id: str
    reader_id: str
    accuracy: float
    wall_time: float | None = None

    def __post_init__(self):
        _check(0.0 <= self.accuracy <= 1.0, "accuracy must lie in [0, 1]")
        if self.wall_time is not None:
            _check(self.wall_time >= 0, "wall_time must be >= 0")

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "reader_id": self.reader_id,
            "accuracy": self.accuracy,
            "wall_time": self.wall_time,
        }
