"""Pre-game interviews to in-game performance deviation prediction."""

from .config import RunConfig
from .metrics import LAG_ORDER, METRICS, LabeledExample, MetricStore, MetricVector
from .pbp import CourtGeometry, EventKind, PlayEvent, parse_pbp
from .interviews import Interview, corpus_stats, parse_transcript, tokenize

__version__ = "0.1.0"

__all__ = [
    "CourtGeometry",
    "EventKind",
    "Interview",
    "LabeledExample",
    "LAG_ORDER",
    "METRICS",
    "MetricStore",
    "MetricVector",
    "PlayEvent",
    "RunConfig",
    "corpus_stats",
    "parse_pbp",
    "parse_transcript",
    "tokenize",
    "__version__",
]
