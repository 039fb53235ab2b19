"""Line-delimited record stores and content hashing.

Every artifact written by this package is a JSONL file whose first line is a
header object (``{"store": ..., "config_hash": ..., ...}``) followed by one
record object per line. Headers and records are serialized with sorted keys
and no whitespace, so a store's bytes are a pure function of its contents.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable


class ValidationError(Exception):
    """Bad configuration or arguments: the run was never viable."""


class DataError(Exception):
    """Malformed or inconsistent data encountered mid-run."""


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_store(path: str | Path, header: dict, records: Iterable[dict]) -> str:
    """Write header + records as JSONL; returns the file's sha256."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(header) + "\n")
        for rec in records:
            fh.write(canonical_json(rec) + "\n")
    return file_sha256(path)


def read_store(path: str | Path, expect: str | None = None) -> tuple[dict, list[dict]]:
    """Read a JSONL store; validates the header's ``store`` tag when asked."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: cannot read store: {exc}") from exc
    if not lines:
        raise DataError(f"{path}: empty store (missing header line)")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:1: bad header: {exc}") from exc
    if not isinstance(header, dict):
        raise DataError(f"{path}:1: header must be an object")
    if expect is not None and header.get("store") != expect:
        raise DataError(f"{path}: expected store {expect!r}, found {header.get('store')!r}")
    records = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{i}: bad record: {exc}") from exc
        if not isinstance(rec, dict):
            raise DataError(f"{path}:{i}: record must be an object")
        records.append(rec)
    return header, records
