from src.memory.buffer import (
    CLASSIC,
    DECL,
    DFCL,
    GENERATED,
    RAW,
    GeneratedSource,
    MemoryBuffer,
    MemoryBufferError,
    MemoryEntry,
    RawSource,
    check_capacity,
    sample_minibatch,
    update_after_task,
)

__all__ = [
    "CLASSIC",
    "DECL",
    "DFCL",
    "GENERATED",
    "RAW",
    "GeneratedSource",
    "MemoryBuffer",
    "MemoryBufferError",
    "MemoryEntry",
    "RawSource",
    "check_capacity",
    "sample_minibatch",
    "update_after_task",
]
