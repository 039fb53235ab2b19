"""Run configuration: one JSON file drives every pipeline stage.

All randomness flows from the named seeds here; no stage draws entropy of
its own. The configuration hash covers every semantic field (paths
resolved, output directory excluded), so artifacts produced under equal
hashes are byte-identical.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .evaluation import MODEL_IDS, ExperimentConfig
from .interviews import DEFAULT_ANSWER_PATTERN, DEFAULT_QUESTION_PREFIX
from .metrics import METRICS
from .pbp import CourtGeometry
from .storage import ValidationError, canonical_json, sha256_hex

_LEVEL_CHOICES = ("game", "period", "both")

# Fields each pipeline stage actually reads. Stage completion markers are
# keyed on the hash of their own slice, so changing an eval-only setting
# (seed, models, folds) leaves ingest and build artifacts valid.
_INGEST_FIELDS = ("events", "interviews", "pbp_schema", "question_prefix",
                  "answer_pattern", "geometry")
_BUILD_FIELDS = _INGEST_FIELDS + ("level",)
_EVAL_FIELDS = _BUILD_FIELDS + (
    "metrics", "models", "seed_split", "seed_forest", "test_fraction",
    "n_folds", "fold_fraction", "strict_folds", "include_questions",
    "min_df", "ar_link", "logreg_l2", "logreg_tol", "logreg_max_iter",
    "n_trees", "max_features", "min_leaf", "curve_source",
)
STAGE_FIELDS = {
    "ingest": _INGEST_FIELDS,
    "build": _BUILD_FIELDS,
    "eval": _EVAL_FIELDS,
    "interpret": None,  # every semantic field
}


@dataclass
class RunConfig:
    events: str = ""
    interviews: str = ""
    output_dir: str = "out"
    pbp_schema: str | None = None
    level: str = "both"
    metrics: tuple = METRICS
    models: tuple = MODEL_IDS
    seed_split: int = 212
    seed_forest: int = 7
    seed_lda: int = 13
    test_fraction: float = 0.2
    n_folds: int = 5
    fold_fraction: float = 0.2
    strict_folds: bool = False
    include_questions: bool = True
    question_prefix: str = DEFAULT_QUESTION_PREFIX
    answer_pattern: str = DEFAULT_ANSWER_PATTERN
    geometry: dict = field(default_factory=dict)
    min_df: int = 1
    ar_link: str = "linear"
    logreg_l2: float = 1.0
    logreg_tol: float = 1e-6
    logreg_max_iter: int = 500
    n_trees: int = 100
    max_features: str | int = "sqrt"
    min_leaf: int = 1
    lda_k: int | None = None
    lda_k_grid: tuple = (10, 20, 30, 40)
    lda_alpha: float | None = None
    lda_beta: float = 0.01
    lda_iters: int = 1000
    lda_burn_in: int = 200
    lda_sample_every: int = 10
    lda_fold_in_iters: int = 50
    lda_joint: bool = False
    lda_stopwords: str | None = None
    interpret_model: str = "tfidf-lr"
    interpret_level: str = "game"
    curve_source: str = "test"
    correlation: str = "pearson"

    # populated by from_file
    base_dir: str = "."

    _SKIP_IN_HASH = ("output_dir", "base_dir")

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict | None = None) -> "RunConfig":
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
        raw.setdefault("base_dir", str(path.parent))
        if overrides:
            raw.update({k: v for k, v in overrides.items() if v is not None})
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ValidationError(f"{path}: unknown config keys: {unknown}")
        cfg = cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()})
        cfg.validate()
        return cfg

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def out_path(self, name: str) -> Path:
        return Path(self.output_dir) / name

    def validate(self) -> None:
        if not self.events or not self.interviews:
            raise ValidationError("config must name both the events and interviews inputs")
        for label, rel in (("events", self.events), ("interviews", self.interviews)):
            if not self.resolve(rel).exists():
                raise ValidationError(f"{label} path does not exist: {self.resolve(rel)}")
        for label, rel in (("pbp_schema", self.pbp_schema), ("lda_stopwords", self.lda_stopwords)):
            if rel is not None and not self.resolve(rel).exists():
                raise ValidationError(f"{label} path does not exist: {self.resolve(rel)}")
        if self.level not in _LEVEL_CHOICES:
            raise ValidationError(f"level must be one of {_LEVEL_CHOICES}, got {self.level!r}")
        if self.interpret_level not in ("game", "period"):
            raise ValidationError(f"interpret_level must be game or period")
        bad_metrics = sorted(set(self.metrics) - set(METRICS))
        if bad_metrics:
            raise ValidationError(f"unknown metrics: {bad_metrics}")
        bad_models = sorted(set(self.models) - set(MODEL_IDS))
        if bad_models:
            raise ValidationError(f"unknown models: {bad_models}")
        if self.interpret_model not in MODEL_IDS:
            raise ValidationError(f"unknown interpret_model: {self.interpret_model!r}")
        if not 0.0 < self.test_fraction < 1.0 or not 0.0 < self.fold_fraction < 1.0:
            raise ValidationError("test_fraction and fold_fraction must be in (0, 1)")
        if self.n_folds < 2:
            raise ValidationError("n_folds must be at least 2")
        if self.ar_link not in ("linear", "logistic"):
            raise ValidationError(f"ar_link must be linear or logistic")
        if self.correlation not in ("pearson", "spearman"):
            raise ValidationError(f"correlation must be pearson or spearman")
        if self.curve_source not in ("test", "all"):
            raise ValidationError(f"curve_source must be test or all")
        if self.lda_k is None and not self.lda_k_grid:
            raise ValidationError("either lda_k or a non-empty lda_k_grid is required")

    def levels(self) -> tuple:
        return ("game", "period") if self.level == "both" else (self.level,)

    def court_geometry(self) -> CourtGeometry:
        return CourtGeometry(**self.geometry) if self.geometry else CourtGeometry()

    def seeds(self) -> dict:
        return {"split": self.seed_split, "forest": self.seed_forest, "lda": self.seed_lda}

    def experiment_config(self) -> ExperimentConfig:
        return ExperimentConfig(
            models=tuple(self.models), seed=self.seed_split,
            test_fraction=self.test_fraction, n_folds=self.n_folds,
            fold_fraction=self.fold_fraction, strict_folds=self.strict_folds,
            ar_link=self.ar_link, logreg_l2=self.logreg_l2,
            logreg_tol=self.logreg_tol, logreg_max_iter=self.logreg_max_iter,
            n_trees=self.n_trees, max_features=self.max_features,
            min_leaf=self.min_leaf, forest_seed=self.seed_forest,
            min_df=self.min_df, include_questions=self.include_questions,
        )

    def hash_dict(self) -> dict:
        d = asdict(self)
        for key in self._SKIP_IN_HASH:
            d.pop(key, None)
        # Hash what the stages actually read: resolved input locations.
        for key in ("events", "interviews", "pbp_schema", "lda_stopwords"):
            if d.get(key):
                d[key] = str(self.resolve(d[key]))
        d["metrics"] = list(self.metrics)
        d["models"] = list(self.models)
        d["lda_k_grid"] = list(self.lda_k_grid)
        return d

    def config_hash(self) -> str:
        return sha256_hex(canonical_json(self.hash_dict()))

    def stage_hash(self, stage: str) -> str:
        fields = STAGE_FIELDS[stage]
        d = self.hash_dict()
        if fields is not None:
            d = {k: d[k] for k in fields}
        return sha256_hex(canonical_json(d))
