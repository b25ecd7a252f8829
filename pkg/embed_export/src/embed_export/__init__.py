"""Transformer span embeddings exported as feature tables."""

from .export import (
    POOLING_LAST,
    POOLING_LAST4,
    POOLINGS,
    DataError,
    ExportConfig,
    SpanRecord,
    export_features,
    read_span_records,
)

__all__ = [
    "POOLING_LAST",
    "POOLING_LAST4",
    "POOLINGS",
    "DataError",
    "ExportConfig",
    "SpanRecord",
    "export_features",
    "read_span_records",
]
