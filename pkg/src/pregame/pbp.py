"""Play-by-play ingestion.

Source files are delimited text, one event row per line, with no header. A
column map (JSON) tells the parser where each field lives, so exports with
different column orders can be ingested without code changes:

    {
      "delimiter": ",",
      "columns": {
        "game_id": 0, "period": 1, "kind": 2, "actor": 3,
        "secondary_actor": 4, "points": 5, "shot_x": 6, "shot_y": 7,
        "attempt_value": 8,
        "home_lineup": [9, 10, 11, 12, 13],
        "away_lineup": [14, 15, 16, 17, 18]
      }
    }

``game_id``, ``period``, ``kind``, ``actor`` and the two 5-column lineups are
required; the rest are optional. Numeric cells may be wrapped in parentheses
(some exports emit coordinates as "(10.0" and "5.0)").

Parsing is conservative: a row that cannot be interpreted is rejected with a
reason and a line number, overtime rows (period >= 5) are counted and
dropped, and everything else becomes a typed ``PlayEvent``. The row counts
always reconcile: parsed + overtime + rejected == source rows.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .storage import DataError, read_store, write_store


class EventKind(str, Enum):
    SHOT = "shot"
    MISS = "miss"
    FREE_THROW_MADE = "free_throw_made"
    FREE_THROW_MISS = "free_throw_miss"
    ASSIST = "assist"
    BLOCK = "block"
    REBOUND = "rebound"
    FOUL = "foul"
    TURNOVER = "turnover"
    VIOLATION = "violation"
    TIMEOUT = "timeout"
    SUBSTITUTION = "substitution"
    JUMP_BALL = "jump_ball"
    PERIOD_BOUNDARY = "period_boundary"


# Game-flow bookkeeping rows carry no per-player performance signal.
IGNORED_KINDS = frozenset(
    {
        EventKind.TIMEOUT,
        EventKind.JUMP_BALL,
        EventKind.SUBSTITUTION,
        EventKind.PERIOD_BOUNDARY,
    }
)

ATTEMPT_KINDS = frozenset({EventKind.SHOT, EventKind.MISS})

# Kinds whose actor column must be a player id.
_ACTOR_REQUIRED = frozenset(
    {
        EventKind.SHOT,
        EventKind.MISS,
        EventKind.FREE_THROW_MADE,
        EventKind.FREE_THROW_MISS,
        EventKind.ASSIST,
        EventKind.BLOCK,
        EventKind.REBOUND,
        EventKind.FOUL,
        EventKind.TURNOVER,
        EventKind.VIOLATION,
    }
)

_KIND_ALIASES: dict[str, EventKind] = {
    "shot": EventKind.SHOT,
    "made_shot": EventKind.SHOT,
    "fgm": EventKind.SHOT,
    "miss": EventKind.MISS,
    "missed_shot": EventKind.MISS,
    "fga_miss": EventKind.MISS,
    "free_throw_made": EventKind.FREE_THROW_MADE,
    "ft_made": EventKind.FREE_THROW_MADE,
    "free_throw": EventKind.FREE_THROW_MADE,
    "free_throw_miss": EventKind.FREE_THROW_MISS,
    "ft_miss": EventKind.FREE_THROW_MISS,
    "assist": EventKind.ASSIST,
    "ast": EventKind.ASSIST,
    "block": EventKind.BLOCK,
    "blk": EventKind.BLOCK,
    "rebound": EventKind.REBOUND,
    "reb": EventKind.REBOUND,
    "foul": EventKind.FOUL,
    "personal_foul": EventKind.FOUL,
    "pf": EventKind.FOUL,
    "turnover": EventKind.TURNOVER,
    "to": EventKind.TURNOVER,
    "violation": EventKind.VIOLATION,
    "timeout": EventKind.TIMEOUT,
    "time_out": EventKind.TIMEOUT,
    "substitution": EventKind.SUBSTITUTION,
    "sub": EventKind.SUBSTITUTION,
    "jump_ball": EventKind.JUMP_BALL,
    "jumpball": EventKind.JUMP_BALL,
    "period_boundary": EventKind.PERIOD_BOUNDARY,
    "start_of_period": EventKind.PERIOD_BOUNDARY,
    "end_of_period": EventKind.PERIOD_BOUNDARY,
}


@dataclass(frozen=True)
class CourtGeometry:
    """Shot geometry in feet, basket at (basket_x, basket_y).

    A missed attempt with no explicit value is scored as a three when it is
    beyond the arc, or beyond the corner-three distance while wide enough of
    the basket to be in a corner (|x - basket_x| >= corner_lateral).
    """

    basket_x: float = 0.0
    basket_y: float = 0.0
    arc_radius: float = 23.75
    corner_radius: float = 22.0
    corner_lateral: float = 22.0


DEFAULT_GEOMETRY = CourtGeometry()


@dataclass(frozen=True)
class PlayEvent:
    game_id: str
    period: int
    kind: EventKind
    actor: str | None
    secondary_actor: str | None
    points: int
    attempt_value: int | None
    attempt_value_inferred: bool
    shot_coords: tuple[float, float] | None
    home_lineup: tuple[str, ...]
    away_lineup: tuple[str, ...]


@dataclass
class ColumnMap:
    delimiter: str
    columns: dict

    _REQUIRED = ("game_id", "period", "kind", "actor", "home_lineup", "away_lineup")
    _SCALAR = ("game_id", "period", "kind", "actor", "secondary_actor", "points",
               "shot_x", "shot_y", "attempt_value")

    def __post_init__(self):
        for name in self._REQUIRED:
            if name not in self.columns:
                raise DataError(f"column map missing required column {name!r}")
        for name in ("home_lineup", "away_lineup"):
            idxs = self.columns[name]
            if not (isinstance(idxs, (list, tuple)) and len(idxs) == 5):
                raise DataError(f"column map: {name} must list exactly 5 column indices")
        for name in self._SCALAR:
            if name in self.columns and not isinstance(self.columns[name], int):
                raise DataError(f"column map: {name} must be a single column index")

    @classmethod
    def from_file(cls, path: str | Path) -> "ColumnMap":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(delimiter=raw.get("delimiter", ","), columns=raw["columns"])

    def max_index(self) -> int:
        m = 0
        for v in self.columns.values():
            if isinstance(v, int):
                m = max(m, v)
            else:
                m = max(m, *v)
        return m


DEFAULT_COLUMN_MAP = ColumnMap(
    delimiter=",",
    columns={
        "game_id": 0,
        "period": 1,
        "kind": 2,
        "actor": 3,
        "secondary_actor": 4,
        "points": 5,
        "shot_x": 6,
        "shot_y": 7,
        "attempt_value": 8,
        "home_lineup": [9, 10, 11, 12, 13],
        "away_lineup": [14, 15, 16, 17, 18],
    },
)


@dataclass
class ParseResult:
    events: list[PlayEvent]
    n_rows: int
    n_skipped_overtime: int
    rejected: list[tuple[int, str]]  # (1-based row number, reason)

    def check_conservation(self) -> bool:
        return len(self.events) + self.n_skipped_overtime + len(self.rejected) == self.n_rows


class _RowError(Exception):
    pass


def _cell(fields: Sequence[str], idx: int | None) -> str:
    if idx is None or idx >= len(fields):
        return ""
    return fields[idx].strip()


def _numeric(cell: str) -> str:
    # Coordinate cells may keep stray parentheses from tuple-style exports.
    return cell.strip().strip("()").strip()


def _parse_int(cell: str, what: str) -> int:
    try:
        return int(_numeric(cell))
    except ValueError:
        raise _RowError(f"bad {what}: {cell!r}")


def _parse_float(cell: str, what: str) -> float:
    try:
        v = float(_numeric(cell))
    except ValueError:
        raise _RowError(f"bad {what}: {cell!r}")
    if not math.isfinite(v):
        raise _RowError(f"non-finite {what}: {cell!r}")
    return v


def shot_distance(coords: tuple[float, float], geometry: CourtGeometry = DEFAULT_GEOMETRY) -> float:
    return math.hypot(coords[0] - geometry.basket_x, coords[1] - geometry.basket_y)


def infer_attempt_value(coords: tuple[float, float],
                        geometry: CourtGeometry = DEFAULT_GEOMETRY) -> int:
    d = shot_distance(coords, geometry)
    if d >= geometry.arc_radius:
        return 3
    if d >= geometry.corner_radius and abs(coords[0] - geometry.basket_x) >= geometry.corner_lateral:
        return 3
    return 2


def on_court(event: PlayEvent, player: str) -> bool:
    return player in event.home_lineup or player in event.away_lineup


def _parse_row(fields: Sequence[str], cmap: ColumnMap, geometry: CourtGeometry) -> PlayEvent | None:
    """One row -> PlayEvent, None for overtime, _RowError for garbage."""
    cols = cmap.columns
    game_id = _cell(fields, cols["game_id"])
    if not game_id:
        raise _RowError("missing game_id")

    period = _parse_int(_cell(fields, cols["period"]), "period")
    if period < 1:
        raise _RowError(f"bad period: {period}")
    if period > 4:
        return None  # overtime

    kind_raw = _cell(fields, cols["kind"]).lower()
    kind = _KIND_ALIASES.get(kind_raw)
    if kind is None:
        raise _RowError(f"unknown event kind: {kind_raw!r}")

    actor = _cell(fields, cols["actor"]) or None
    if kind in _ACTOR_REQUIRED and actor is None:
        raise _RowError(f"{kind.value} row has no actor")
    secondary = _cell(fields, cols.get("secondary_actor")) or None

    lineups = []
    for name in ("home_lineup", "away_lineup"):
        players = tuple(_cell(fields, i) for i in cols[name])
        if any(not p for p in players):
            raise _RowError(f"incomplete {name}")
        lineups.append(players)
    home, away = lineups
    if len(set(home) | set(away)) != 10:
        raise _RowError("player listed twice across lineups")

    points_cell = _cell(fields, cols.get("points"))
    coords = None
    attempt_value = None
    inferred = False
    points = 0

    if kind in ATTEMPT_KINDS:
        x_cell = _cell(fields, cols.get("shot_x"))
        y_cell = _cell(fields, cols.get("shot_y"))
        if not x_cell or not y_cell:
            raise _RowError(f"{kind.value} row has no shot coordinates")
        coords = (_parse_float(x_cell, "shot_x"), _parse_float(y_cell, "shot_y"))
        av_cell = _cell(fields, cols.get("attempt_value"))
        if kind is EventKind.SHOT:
            points = _parse_int(points_cell, "points") if points_cell else 0
            if points not in (2, 3):
                raise _RowError(f"made shot with points={points}")
            attempt_value = points
            if av_cell and _parse_int(av_cell, "attempt_value") != points:
                raise _RowError("attempt_value disagrees with points")
        else:
            if points_cell and _parse_int(points_cell, "points") != 0:
                raise _RowError("missed shot with nonzero points")
            if av_cell:
                attempt_value = _parse_int(av_cell, "attempt_value")
                if attempt_value not in (2, 3):
                    raise _RowError(f"bad attempt_value: {attempt_value}")
            else:
                attempt_value = infer_attempt_value(coords, geometry)
                inferred = True
    elif kind is EventKind.FREE_THROW_MADE:
        points = _parse_int(points_cell, "points") if points_cell else 1
        if points != 1:
            raise _RowError(f"made free throw with points={points}")
    # Remaining kinds score nothing; their points column is ignored.

    return PlayEvent(
        game_id=game_id,
        period=period,
        kind=kind,
        actor=actor,
        secondary_actor=secondary,
        points=points,
        attempt_value=attempt_value,
        attempt_value_inferred=inferred,
        shot_coords=coords,
        home_lineup=home,
        away_lineup=away,
    )


def parse_pbp(source: Iterable[str] | str,
              column_map: ColumnMap = DEFAULT_COLUMN_MAP,
              geometry: CourtGeometry = DEFAULT_GEOMETRY) -> ParseResult:
    """Parse delimited play-by-play text into events, in input order.

    ``source`` is a whole string or an iterable of lines. Blank lines are not
    rows. Every non-blank line lands in exactly one bucket: events, overtime,
    or rejected.
    """
    if isinstance(source, str):
        source = source.splitlines()

    events: list[PlayEvent] = []
    rejected: list[tuple[int, str]] = []
    n_rows = 0
    n_overtime = 0
    for lineno, line in enumerate(source, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        n_rows += 1
        fields = line.split(column_map.delimiter)
        try:
            event = _parse_row(fields, column_map, geometry)
        except _RowError as exc:
            rejected.append((lineno, str(exc)))
            continue
        if event is None:
            n_overtime += 1
        else:
            events.append(event)

    result = ParseResult(events=events, n_rows=n_rows,
                         n_skipped_overtime=n_overtime, rejected=rejected)
    assert result.check_conservation()
    return result


def filter_relevant(events: Iterable[PlayEvent]) -> list[PlayEvent]:
    """Drop game-flow bookkeeping kinds, preserving order."""
    return [e for e in events if e.kind not in IGNORED_KINDS]


def _event_record(e: PlayEvent) -> dict:
    return {
        "game_id": e.game_id,
        "period": e.period,
        "kind": e.kind.value,
        "actor": e.actor,
        "secondary_actor": e.secondary_actor,
        "points": e.points,
        "attempt_value": e.attempt_value,
        "attempt_value_inferred": e.attempt_value_inferred,
        "shot_x": None if e.shot_coords is None else e.shot_coords[0],
        "shot_y": None if e.shot_coords is None else e.shot_coords[1],
        "home_lineup": list(e.home_lineup),
        "away_lineup": list(e.away_lineup),
    }


def write_events(path: str | Path, result: ParseResult, config_hash: str = "") -> str:
    header = {
        "store": "events",
        "config_hash": config_hash,
        "n_source_rows": result.n_rows,
        "n_skipped_overtime": result.n_skipped_overtime,
        "n_rejected": len(result.rejected),
        "rejected": [[ln, reason] for ln, reason in result.rejected],
    }
    return write_store(path, header, (_event_record(e) for e in result.events))


def read_events(path: str | Path) -> list[PlayEvent]:
    _, records = read_store(path, expect="events")
    events = []
    for rec in records:
        coords = None
        if rec["shot_x"] is not None:
            coords = (float(rec["shot_x"]), float(rec["shot_y"]))
        events.append(
            PlayEvent(
                game_id=rec["game_id"],
                period=int(rec["period"]),
                kind=EventKind(rec["kind"]),
                actor=rec["actor"],
                secondary_actor=rec["secondary_actor"],
                points=int(rec["points"]),
                attempt_value=rec["attempt_value"],
                attempt_value_inferred=bool(rec["attempt_value_inferred"]),
                shot_coords=coords,
                home_lineup=tuple(rec["home_lineup"]),
                away_lineup=tuple(rec["away_lineup"]),
            )
        )
    return events
