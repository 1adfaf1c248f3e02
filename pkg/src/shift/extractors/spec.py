from __future__ import annotations

from dataclasses import asdict, dataclass

from shift.errors import InvalidField

EXTRACTOR_KINDS = ("synthetic_projection", "precomputed", "external_hook")


@dataclass(frozen=True)
class ExtractorSpec:
    """How a registered model turns raw input rows into features.

    ``quality_knob`` only affects the synthetic kind: it is the fraction of
    inputs mapped through the informative projection; the rest are mapped to
    label-independent pseudo-random vectors.
    """

    kind: str = "synthetic_projection"
    seed: int = 0
    simulated_per_sample_latency: float = 0.0
    quality_knob: float = 1.0
    hook: str | None = None
    table: str | None = None

    def __post_init__(self):
        if self.kind not in EXTRACTOR_KINDS:
            raise InvalidField(f"unknown extractor kind {self.kind!r}")
        if not 0.0 <= self.quality_knob <= 1.0:
            raise InvalidField("quality_knob must lie in [0, 1]")
        if self.simulated_per_sample_latency < 0:
            raise InvalidField("simulated_per_sample_latency must be >= 0")
        if self.kind == "external_hook" and not self.hook:
            raise InvalidField("external_hook extractors need a hook name")
        if self.kind == "precomputed" and not self.table:
            raise InvalidField("precomputed extractors need a table path")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "ExtractorSpec":
        if not d:
            return cls()
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)
