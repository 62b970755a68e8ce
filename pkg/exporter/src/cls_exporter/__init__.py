"""Batch exporter: test-corpus JSONL in, code-embedding JSONL out."""
from .export import (
    BACKEND_NAME,
    DEFAULT_MAX_TOKENS,
    DEFAULT_MODEL,
    DataError,
    Encoder,
    ExportReport,
    ExportRequest,
    InternalError,
    collapse_whitespace,
    export,
    read_corpus_rows,
)

__all__ = [
    "BACKEND_NAME",
    "DEFAULT_MAX_TOKENS",
    "DEFAULT_MODEL",
    "DataError",
    "Encoder",
    "ExportReport",
    "ExportRequest",
    "InternalError",
    "collapse_whitespace",
    "export",
    "read_corpus_rows",
]
