"""Streaming curation pipeline for math question-answer corpora."""

from .records import (
    Decision,
    FilterId,
    FilterVerdict,
    Method,
    ProblemRecord,
    ProvenanceLedger,
    Source,
    Status,
    append_verdict,
    make_record,
)

__all__ = [
    "Decision",
    "FilterId",
    "FilterVerdict",
    "Method",
    "ProblemRecord",
    "ProvenanceLedger",
    "Source",
    "Status",
    "append_verdict",
    "make_record",
]

__version__ = "0.1.0"
