"""Multimodal operator and equation learning for dynamical systems."""

from ._core import (
    CorruptRecord,
    Model,
    NonFiniteLoss,
    ProseError,
    RunConfig,
    Sample,
    SchemaMismatch,
    UnknownToken,
    decode_words,
    encode_words,
    evaluate,
    generate,
    infix,
    read_dataset,
    selftest,
    train,
    vocabulary_size,
    write_dataset,
)

__all__ = [
    "CorruptRecord",
    "Model",
    "NonFiniteLoss",
    "ProseError",
    "RunConfig",
    "Sample",
    "SchemaMismatch",
    "UnknownToken",
    "decode_words",
    "encode_words",
    "evaluate",
    "generate",
    "infix",
    "read_dataset",
    "selftest",
    "train",
    "vocabulary_size",
    "write_dataset",
]
