"""Python bindings for the structural relation network landmark detector."""

from ._srn import (
    DivergedTraining,
    InvalidInput,
    InvalidState,
    Model,
    ParseError,
    ced,
    failure_rate,
    format_pts,
    generate_synthetic,
    nme,
    parse_pts,
    partition_sizes,
    read_png,
    train,
    write_png,
)

__all__ = [
    "DivergedTraining",
    "InvalidInput",
    "InvalidState",
    "Model",
    "ParseError",
    "ced",
    "failure_rate",
    "format_pts",
    "generate_synthetic",
    "nme",
    "parse_pts",
    "partition_sizes",
    "read_png",
    "train",
    "write_png",
]
