"""Video quality regression over frozen multi-backbone features."""

from ._ptmvqa import (
    Error,
    FormatError,
    UsageError,
    ValidationError,
    dbi_report,
    evaluate,
    gen_synthetic,
    plcc,
    predict,
    read_features,
    run_cli,
    srcc,
    train,
)

__all__ = [
    "Error",
    "FormatError",
    "UsageError",
    "ValidationError",
    "dbi_report",
    "evaluate",
    "gen_synthetic",
    "plcc",
    "predict",
    "read_features",
    "run_cli",
    "srcc",
    "train",
]
