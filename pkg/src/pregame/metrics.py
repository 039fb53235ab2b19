"""Per-player performance metrics over game and period units.

Seven metrics are computed from a player's attributed events inside a unit
(one game, or one period of one game):

    FGR   made field goals / all field-goal attempts
    MSD2  mean distance of 2-point attempts (made and missed)
    MSD3  mean distance of 3-point attempts
    PR    turnovers / (assists + turnovers)
    SR    3-point attempts / all field-goal attempts
    PF    personal fouls committed
    PTS   points scored (field goals and free throws)

A ratio with a zero denominator, or a mean over no attempts, is 0. Each
metric is then reduced to a binary label per unit: 1 when the unit's value
is at or above the player's mean over all their units at that granularity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .pbp import (
    ATTEMPT_KINDS,
    DEFAULT_GEOMETRY,
    CourtGeometry,
    EventKind,
    PlayEvent,
    on_court,
    shot_distance,
)
from .storage import DataError, read_store, write_store

METRICS: tuple[str, ...] = ("FGR", "MSD2", "MSD3", "PR", "SR", "PF", "PTS")
LEVELS: tuple[str, ...] = ("game", "period")

#: Flat ordering of lagged labels: metric-major, lag-minor (lag 1 = previous unit).
LAG_ORDER: tuple[tuple[str, int], ...] = tuple((m, j) for m in METRICS for j in (1, 2, 3))

MODES: tuple[str, ...] = ("text", "metric", "combined")


def lag_index(metric: str, j: int) -> int:
    return LAG_ORDER.index((metric, j))


@dataclass
class PeriodBox:
    """Event tallies for one (player, unit); the raw material of the metrics."""

    player: str
    unit: tuple
    n_shot: int = 0
    n_miss: int = 0
    n_2pt_att: int = 0
    n_3pt_att: int = 0
    n_assist: int = 0
    n_turnover: int = 0
    n_pf: int = 0
    pts: int = 0
    dist_2pt: list = field(default_factory=list)
    dist_3pt: list = field(default_factory=list)

    def validate(self) -> None:
        for name in ("n_shot", "n_miss", "n_2pt_att", "n_3pt_att",
                     "n_assist", "n_turnover", "n_pf", "pts"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} negative in box {self.player}/{self.unit}")
        if self.n_shot + self.n_miss != self.n_2pt_att + self.n_3pt_att:
            raise DataError(f"attempt split mismatch in box {self.player}/{self.unit}")
        if len(self.dist_2pt) != self.n_2pt_att or len(self.dist_3pt) != self.n_3pt_att:
            raise DataError(f"distance list mismatch in box {self.player}/{self.unit}")


@dataclass(frozen=True)
class MetricVector:
    fgr: float
    msd2: float
    msd3: float
    pr: float
    sr: float
    pf: int
    pts: int

    def value(self, metric: str) -> float:
        return getattr(self, metric.lower())

    def as_dict(self) -> dict:
        return {m: self.value(m) for m in METRICS}


def _unit_key(event: PlayEvent, level: str) -> tuple:
    if level == "game":
        return (event.game_id,)
    return (event.game_id, event.period)


def aggregate(events: Iterable[PlayEvent], player: str, level: str,
              geometry: CourtGeometry = DEFAULT_GEOMETRY) -> list[PeriodBox]:
    """Tally one player's attributed events per unit.

    A unit exists once the player is on court for (or the actor of) at
    least one event in it. Only events with ``actor == player`` add to the
    tallies; appearing as the secondary actor adds nothing. Units are
    returned in log order of games, periods ascending within a game.
    """
    if level not in LEVELS:
        raise ValueError(f"unknown level: {level!r}")
    boxes: dict[tuple, PeriodBox] = {}
    game_order: dict[str, int] = {}
    for event in events:
        if event.game_id not in game_order:
            game_order[event.game_id] = len(game_order)
        if not (on_court(event, player) or event.actor == player):
            continue
        key = _unit_key(event, level)
        box = boxes.get(key)
        if box is None:
            box = boxes[key] = PeriodBox(player=player, unit=key)
        if event.actor != player:
            continue
        kind = event.kind
        if kind in ATTEMPT_KINDS:
            d = shot_distance(event.shot_coords, geometry)
            if event.attempt_value == 3:
                box.n_3pt_att += 1
                box.dist_3pt.append(d)
            else:
                box.n_2pt_att += 1
                box.dist_2pt.append(d)
            if kind is EventKind.SHOT:
                box.n_shot += 1
                box.pts += event.points
            else:
                box.n_miss += 1
        elif kind is EventKind.FREE_THROW_MADE:
            box.pts += event.points
        elif kind is EventKind.ASSIST:
            box.n_assist += 1
        elif kind is EventKind.TURNOVER:
            box.n_turnover += 1
        elif kind is EventKind.FOUL:
            box.n_pf += 1
        # free-throw misses, blocks, rebounds, violations: tracked nowhere

    ordered = sorted(boxes.values(), key=lambda b: (game_order[b.unit[0]],) + b.unit[1:])
    for box in ordered:
        box.validate()
    return ordered


def compute_metrics(box: PeriodBox) -> MetricVector:
    fga = box.n_shot + box.n_miss
    return MetricVector(
        fgr=box.n_shot / fga if fga else 0.0,
        msd2=sum(box.dist_2pt) / len(box.dist_2pt) if box.dist_2pt else 0.0,
        msd3=sum(box.dist_3pt) / len(box.dist_3pt) if box.dist_3pt else 0.0,
        pr=box.n_turnover / (box.n_assist + box.n_turnover)
        if (box.n_assist + box.n_turnover) else 0.0,
        sr=box.n_3pt_att / fga if fga else 0.0,
        pf=box.n_pf,
        pts=box.pts,
    )


def player_mean(values: Sequence[float]) -> float:
    if len(values) == 0:
        raise ValueError("mean over an empty unit series")
    return sum(values) / len(values)


def label(value: float, mean: float) -> int:
    """1 when the unit is at or above the player's mean, else 0."""
    return 1 if value >= mean else 0


@dataclass(frozen=True)
class UnitMetrics:
    player: str
    unit: tuple
    seq: int  # chronological index within the player's series
    values: dict
    labels: dict


class MetricStore:
    """Per-player unit series with values, means and labels at one level."""

    def __init__(self, level: str):
        if level not in LEVELS:
            raise ValueError(f"unknown level: {level!r}")
        self.level = level
        self._series: dict[str, list[UnitMetrics]] = {}
        self.means: dict[str, dict] = {}

    @classmethod
    def build(cls, events: Sequence[PlayEvent], players: Iterable[str], level: str,
              geometry: CourtGeometry = DEFAULT_GEOMETRY) -> "MetricStore":
        store = cls(level)
        for player in sorted(set(players)):
            boxes = aggregate(events, player, level, geometry)
            if not boxes:
                continue
            vectors = [compute_metrics(b) for b in boxes]
            means = {m: player_mean([v.value(m) for v in vectors]) for m in METRICS}
            series = [
                UnitMetrics(
                    player=player,
                    unit=box.unit,
                    seq=i,
                    values=vec.as_dict(),
                    labels={m: label(vec.value(m), means[m]) for m in METRICS},
                )
                for i, (box, vec) in enumerate(zip(boxes, vectors))
            ]
            store._series[player] = series
            store.means[player] = means
        return store

    @property
    def players(self) -> list[str]:
        return sorted(self._series)

    def series(self, player: str) -> list[UnitMetrics]:
        return self._series.get(player, [])

    def for_game(self, player: str, game_id: str) -> list[UnitMetrics]:
        return [u for u in self._series.get(player, []) if u.unit[0] == game_id]


@dataclass(frozen=True)
class LabeledExample:
    """One (interview, unit, metric) prediction target.

    ``lags`` is the flat 21-vector of the previous three units' labels in
    LAG_ORDER, absent in text-only mode; ``interview_id`` is absent in
    metric-only mode.
    """

    player: str
    unit: tuple
    metric: str
    label: int
    interview_id: str | None
    lags: tuple | None
    mode: str

    def same_metric_lags(self) -> tuple:
        if self.lags is None:
            raise ValueError("example has no lag features")
        i = lag_index(self.metric, 1)
        return self.lags[i:i + 3]


def build_examples(interviews: Sequence, store: MetricStore, mode: str,
                   k: int = 3) -> tuple[list[LabeledExample], dict]:
    """Join interviews to the metric store at its level.

    Each interview links to every unit of its (player, game): the single
    game unit, or up to four period units. Units whose player has fewer
    than ``k`` earlier units are dropped in every mode, so the three input
    modes see exactly the same prediction targets.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode: {mode!r}")
    counters = {
        "interviews": 0,
        "linked_pairs": 0,
        "dropped_no_units": 0,
        "dropped_short_history": 0,
        "examples": 0,
    }
    seen: set[tuple[str, str]] = set()
    examples: list[LabeledExample] = []
    for iv in interviews:
        counters["interviews"] += 1
        pg = (iv.player, iv.game_id)
        if pg in seen:
            raise DataError(f"multiple interviews for {pg}; merge at ingest")
        seen.add(pg)
        units = store.for_game(iv.player, iv.game_id)
        if not units:
            counters["dropped_no_units"] += 1
            continue
        series = store.series(iv.player)
        for um in units:
            counters["linked_pairs"] += 1
            if um.seq < k:
                counters["dropped_short_history"] += 1
                continue
            lags = None
            if mode != "text":
                lags = tuple(series[um.seq - j].labels[m] for m, j in LAG_ORDER)
            for m in METRICS:
                examples.append(
                    LabeledExample(
                        player=iv.player,
                        unit=um.unit,
                        metric=m,
                        label=um.labels[m],
                        interview_id=None if mode == "metric" else iv.interview_id,
                        lags=lags,
                        mode=mode,
                    )
                )
                counters["examples"] += 1
    return examples, counters


def write_metric_store(path, store: MetricStore, config_hash: str = "") -> str:
    header = {
        "store": "metrics",
        "config_hash": config_hash,
        "level": store.level,
        "means": {p: store.means[p] for p in store.players},
    }
    records = (
        {"player": u.player, "unit": list(u.unit), "seq": u.seq,
         "values": u.values, "labels": u.labels}
        for p in store.players
        for u in store.series(p)
    )
    return write_store(path, header, records)


def read_metric_store(path) -> MetricStore:
    header, records = read_store(path, expect="metrics")
    store = MetricStore(header["level"])
    store.means = {p: dict(m) for p, m in header["means"].items()}
    for rec in records:
        u = UnitMetrics(
            player=rec["player"],
            unit=tuple(rec["unit"]),
            seq=int(rec["seq"]),
            values=dict(rec["values"]),
            labels={m: int(v) for m, v in rec["labels"].items()},
        )
        store._series.setdefault(u.player, []).append(u)
    for series in store._series.values():
        series.sort(key=lambda u: u.seq)
    return store


def write_examples(path, examples: Sequence[LabeledExample], mode: str, level: str,
                   counters: dict, config_hash: str = "") -> str:
    header = {
        "store": "examples",
        "config_hash": config_hash,
        "mode": mode,
        "level": level,
        "counters": counters,
    }
    records = (
        {"player": e.player, "unit": list(e.unit), "metric": e.metric,
         "label": e.label, "interview_id": e.interview_id,
         "lags": None if e.lags is None else list(e.lags)}
        for e in examples
    )
    return write_store(path, header, records)


def read_examples(path) -> tuple[list[LabeledExample], dict]:
    header, records = read_store(path, expect="examples")
    mode = header["mode"]
    examples = [
        LabeledExample(
            player=rec["player"],
            unit=tuple(rec["unit"]),
            metric=rec["metric"],
            label=int(rec["label"]),
            interview_id=rec["interview_id"],
            lags=None if rec["lags"] is None else tuple(int(v) for v in rec["lags"]),
            mode=mode,
        )
        for rec in records
    ]
    return examples, header
