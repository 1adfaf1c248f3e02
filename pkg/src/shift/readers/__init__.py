from shift.readers.container import read_change, read_samples, write_change, write_samples
from shift.readers.mutable import (
    AddPlan,
    Chunk,
    Delta,
    FeatureChunk,
    MutableReader,
    SampleSource,
    chunk_partition,
    distribute_added_samples,
    invalidated_chunks,
    near_equal_sizes,
    uniform_sizes,
)

__all__ = [
    "AddPlan",
    "Chunk",
    "Delta",
    "FeatureChunk",
    "MutableReader",
    "SampleSource",
    "chunk_partition",
    "distribute_added_samples",
    "invalidated_chunks",
    "near_equal_sizes",
    "read_change",
    "read_samples",
    "uniform_sizes",
    "write_change",
    "write_samples",
]
