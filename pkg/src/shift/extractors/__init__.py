from shift.extractors.cache import FeatureCache
from shift.extractors.spec import EXTRACTOR_KINDS, ExtractorSpec
from shift.extractors.synthetic import (
    FeatureMatrix,
    extract,
    register_hook,
    synthetic_features,
    unregister_hook,
)

__all__ = [
    "EXTRACTOR_KINDS",
    "ExtractorSpec",
    "FeatureCache",
    "FeatureMatrix",
    "extract",
    "register_hook",
    "synthetic_features",
    "unregister_hook",
]
