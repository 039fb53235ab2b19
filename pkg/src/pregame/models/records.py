"""Prediction records: the interchange format between evaluation and
interpretation.

One JSONL record per (example, model): player, unit, metric, interview id,
model id, a confidence in [0, 1] stored to six decimals, and the implied
label (confidence >= 0.5). Externally produced predictions enter the
pipeline through this same format.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..storage import DataError, read_store, write_store

_FIELDS = ("player", "unit", "metric", "interview_id", "model_id", "confidence", "predicted")


@dataclass(frozen=True)
class PredictionRecord:
    player: str
    unit: tuple
    metric: str
    interview_id: str
    model_id: str
    confidence: float
    predicted: int


def make_record(player: str, unit: tuple, metric: str, interview_id: str,
                model_id: str, confidence: float) -> PredictionRecord:
    confidence = round(float(confidence), 6)
    if not 0.0 <= confidence <= 1.0:
        raise ValueError(f"confidence out of range: {confidence}")
    return PredictionRecord(
        player=player, unit=tuple(unit), metric=metric, interview_id=interview_id,
        model_id=model_id, confidence=confidence, predicted=int(confidence >= 0.5),
    )


def write_predictions(path, records: Sequence[PredictionRecord],
                      config_hash: str = "", extra: dict | None = None) -> str:
    header = {"store": "predictions", "config_hash": config_hash, "n": len(records)}
    if extra:
        header.update(extra)
    recs = (
        {"player": r.player, "unit": list(r.unit), "metric": r.metric,
         "interview_id": r.interview_id, "model_id": r.model_id,
         "confidence": r.confidence, "predicted": r.predicted}
        for r in records
    )
    return write_store(path, header, recs)


def read_predictions(path) -> tuple[list[PredictionRecord], dict]:
    header, raw = read_store(path, expect="predictions")
    records = []
    for lineno, rec in enumerate(raw, start=2):
        missing = [f for f in _FIELDS if f not in rec]
        if missing:
            raise DataError(f"{path}:{lineno}: missing fields {missing}")
        conf = rec["confidence"]
        if not isinstance(conf, (int, float)) or not 0.0 <= conf <= 1.0:
            raise DataError(f"{path}:{lineno}: confidence out of range: {conf!r}")
        predicted = rec["predicted"]
        if predicted != int(conf >= 0.5):
            raise DataError(f"{path}:{lineno}: predicted label contradicts confidence")
        records.append(
            PredictionRecord(
                player=rec["player"], unit=tuple(rec["unit"]), metric=rec["metric"],
                interview_id=rec["interview_id"], model_id=rec["model_id"],
                confidence=float(conf), predicted=int(predicted),
            )
        )
    return records, header
