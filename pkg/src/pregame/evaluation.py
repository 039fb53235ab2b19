"""Evaluation protocol.

Splits operate on whole interviews, never on individual examples: every
example of an interview lands on the same side, so period-level rows from
one interview can never straddle train and test. The 20% holdout is
stratified on the positive ratio and must land within 1/|test| of the
overall ratio, by swap repair if the first greedy pick misses. Each of the
five folds then independently samples a stratified train/dev split of the
remaining 80% (dev sets of different folds may overlap; a strict
partition mode is available instead).

Accuracies are on the 0-100 scale. Fold spread is the population standard
deviation. Per-player deltas compare a player's test accuracy with the
model's overall test accuracy on that metric.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .metrics import METRICS, LabeledExample
from .models.baselines import CommonClassModel, fit_ar, ar_design
from .models.features import BowFeaturizer, TfidfFeaturizer
from .models.forest import RandomForestModel
from .models.logistic import LogisticRegressionModel
from .models.records import PredictionRecord, make_record
from .storage import DataError

log = logging.getLogger(__name__)

MODEL_IDS = ("cc", "ar3-m", "ar3-m-star", "bow-rf", "bow-lr", "tfidf-rf", "tfidf-lr")

_TEXT_MODELS = {"bow-rf": (BowFeaturizer, "rf"), "bow-lr": (BowFeaturizer, "lr"),
                "tfidf-rf": (TfidfFeaturizer, "rf"), "tfidf-lr": (TfidfFeaturizer, "lr")}


class SplitError(Exception):
    """Stratification could not be satisfied on this data."""


def example_group(ex: LabeledExample):
    """Split granularity: the interview (one per player and game)."""
    if ex.interview_id is not None:
        return ex.interview_id
    return (ex.player, ex.unit[0])


def _collect_groups(examples, idx):
    groups: dict = {}
    for i in idx:
        groups.setdefault(example_group(examples[i]), []).append(i)
    stats = {}
    for gid, members in groups.items():
        pos = sum(examples[i].label for i in members)
        stats[gid] = (len(members), pos)
    return groups, stats


def _grouped_stratified_pick(groups, stats, fraction, rng):
    """Pick ~fraction of the groups, stratified by (size, positives).

    Returns the picked gid set with the positive-example ratio of the
    picked side within 1/|picked| of the whole, or raises SplitError.
    """
    gids = sorted(groups, key=str)
    if len(gids) < 2:
        raise SplitError("need at least two interviews to split")
    n_total = sum(stats[g][0] for g in gids)
    p_total = sum(stats[g][1] for g in gids)
    if p_total == 0 or p_total == n_total:
        raise SplitError("both label classes must be present to stratify")
    ratio = p_total / n_total

    strata: dict = {}
    for g in gids:
        strata.setdefault(stats[g], []).append(g)
    n_target = min(max(int(round(fraction * len(gids))), 1), len(gids) - 1)

    picked: list = []
    remaining: list = []
    for key in sorted(strata):
        members = strata[key]
        order = rng.permutation(len(members))
        members = [members[i] for i in order]
        take = int(fraction * len(members))
        picked.extend(members[:take])
        remaining.extend(members[take:])

    def side_counts(side):
        n = sum(stats[g][0] for g in side)
        p = sum(stats[g][1] for g in side)
        return n, p

    while len(picked) < n_target:
        n_p, p_p = side_counts(picked)
        best_j, best_dev = None, None
        for j, g in enumerate(remaining):
            n_g, p_g = stats[g]
            dev = abs((p_p + p_g) / (n_p + n_g) - ratio)
            if best_dev is None or dev < best_dev - 1e-15:
                best_j, best_dev = j, dev
        picked.append(remaining.pop(best_j))
    while len(picked) > n_target:
        n_p, p_p = side_counts(picked)
        best_j, best_dev = None, None
        for j, g in enumerate(picked):
            n_g, p_g = stats[g]
            if n_p - n_g == 0:
                continue
            dev = abs((p_p - p_g) / (n_p - n_g) - ratio)
            if best_dev is None or dev < best_dev - 1e-15:
                best_j, best_dev = j, dev
        remaining.append(picked.pop(best_j))

    # Swap repair until the deviation bound holds.
    for _ in range(10 * len(gids) + 10):
        n_p, p_p = side_counts(picked)
        if n_p == 0 or n_p == n_total:
            raise SplitError("degenerate split: one side is empty")
        excess = abs(p_p - ratio * n_p)
        if excess <= 1.0 + 1e-9:
            return set(picked)
        best = None  # (excess', i, j)
        for i, a in enumerate(picked):
            n_a, p_a = stats[a]
            for j, b in enumerate(remaining):
                n_b, p_b = stats[b]
                n_new = n_p - n_a + n_b
                if n_new == 0:
                    continue
                e_new = abs((p_p - p_a + p_b) - ratio * n_new)
                if e_new < excess - 1e-12 and (best is None or e_new < best[0]):
                    best = (e_new, i, j)
        if best is None:
            raise SplitError(
                f"cannot stratify within 1/|test|: best deviation {excess:.3f} examples")
        _, i, j = best
        picked[i], remaining[j] = remaining[j], picked[i]
    raise SplitError("stratification repair did not converge")


def stratified_holdout(examples: list, fraction: float, seed) -> tuple[list, list]:
    """Grouped stratified holdout; returns (rest indices, test indices).

    A pure function of the example identities and the seed: the on-disk
    order of records does not matter.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction out of range: {fraction}")
    idx = list(range(len(examples)))
    groups, stats = _collect_groups(examples, idx)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    picked = _grouped_stratified_pick(groups, stats, fraction, rng)
    order = {g: k for k, g in enumerate(sorted(groups, key=str))}
    test_gids = sorted(picked, key=lambda g: order[g])
    rest_gids = sorted((g for g in groups if g not in picked), key=lambda g: order[g])
    test_idx = [i for g in test_gids for i in sorted(groups[g])]
    rest_idx = [i for g in rest_gids for i in sorted(groups[g])]
    return rest_idx, test_idx


def stratified_folds(examples: list, rest_idx: list, n_folds: int, fraction: float,
                     seed, strict: bool = False) -> list:
    """Per-fold (train, dev) index pairs over the non-test examples.

    Default: each fold is an independent stratified sample, so dev sets
    may overlap across folds. ``strict=True`` deals groups into disjoint
    stratified buckets instead and uses each bucket as one fold's dev set.
    """
    groups, stats = _collect_groups(examples, rest_idx)
    order = {g: k for k, g in enumerate(sorted(groups, key=str))}

    def indices(gids):
        return [i for g in sorted(gids, key=lambda g: order[g]) for i in sorted(groups[g])]

    if strict:
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
        buckets: list[list] = [[] for _ in range(n_folds)]
        offset = 0
        strata: dict = {}
        for g in sorted(groups, key=str):
            strata.setdefault(stats[g], []).append(g)
        for key in sorted(strata):
            members = strata[key]
            perm = rng.permutation(len(members))
            for k, gi in enumerate(perm):
                buckets[(offset + k) % n_folds].append(members[gi])
            offset += len(members)
        folds = []
        for b in range(n_folds):
            dev_gids = set(buckets[b])
            train_gids = [g for g in groups if g not in dev_gids]
            folds.append((indices(train_gids), indices(dev_gids)))
        return folds

    folds = []
    for f in range(n_folds):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1, f)))
        picked = _grouped_stratified_pick(groups, stats, fraction, rng)
        train_gids = [g for g in groups if g not in picked]
        folds.append((indices(train_gids), indices(picked)))
    return folds


def accuracy(predicted, labels) -> float:
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    if predicted.shape != labels.shape or predicted.size == 0:
        raise ValueError("predicted and gold labels must align and be non-empty")
    return float(np.mean(predicted == labels) * 100.0)


def fold_stddev(accs) -> float:
    accs = np.asarray(accs, dtype=np.float64)
    if accs.size < 2:
        raise ValueError("fold spread needs at least two folds")
    return float(np.std(accs))  # population spread across folds


def per_player_delta(records: list, examples_by_key: dict) -> dict:
    """Per-player test accuracy minus overall test accuracy.

    ``examples_by_key`` maps (player, unit, metric) to the gold label.
    Players without test examples are simply absent.
    """
    if not records:
        raise ValueError("no prediction records")
    golds, preds, players = [], [], []
    for r in records:
        key = (r.player, r.unit, r.metric)
        if key not in examples_by_key:
            raise DataError(f"prediction without a gold label: {key}")
        golds.append(examples_by_key[key])
        preds.append(r.predicted)
        players.append(r.player)
    overall = accuracy(preds, golds)
    out = {}
    for player in sorted(set(players)):
        sel = [k for k, p in enumerate(players) if p == player]
        acc_p = accuracy([preds[k] for k in sel], [golds[k] for k in sel])
        out[player] = {"n": len(sel), "acc": acc_p, "delta": acc_p - overall}
    return out


@dataclass
class ExperimentConfig:
    models: tuple = MODEL_IDS
    seed: int = 212
    test_fraction: float = 0.2
    n_folds: int = 5
    fold_fraction: float = 0.2
    strict_folds: bool = False
    ar_link: str = "linear"
    logreg_l2: float = 1.0
    logreg_tol: float = 1e-6
    logreg_max_iter: int = 500
    n_trees: int = 100
    max_features: str | int = "sqrt"
    min_leaf: int = 1
    forest_seed: int = 7
    min_df: int = 1
    include_questions: bool = True


@dataclass
class EvalReport:
    level: str
    seed: int
    results: dict
    counters: dict
    predictions: dict = field(repr=False, default_factory=dict)
    predictions_rest: dict = field(repr=False, default_factory=dict)

    def to_dict(self) -> dict:
        return {"level": self.level, "seed": self.seed,
                "results": self.results, "counters": self.counters}


def _round(x: float) -> float:
    return round(float(x), 6)


def _fit_and_predict(model_id: str, examples: list, train_idx: list, eval_idx: list,
                     docs: dict, cfg: ExperimentConfig, seed: int) -> np.ndarray:
    """Train one model and return confidences for the eval indices."""
    train = [examples[i] for i in train_idx]
    eval_ = [examples[i] for i in eval_idx]
    y_train = np.array([ex.label for ex in train], dtype=np.float64)

    if model_id == "cc":
        return CommonClassModel().fit(y_train).predict_proba(len(eval_))

    if model_id in ("ar3-m", "ar3-m-star"):
        feature_set = "same" if model_id == "ar3-m" else "all"
        fit = fit_ar(train, link=cfg.ar_link, feature_set=feature_set)
        X_eval, _ = ar_design(eval_, feature_set)
        return fit.predict(X_eval)

    if model_id not in _TEXT_MODELS:
        raise ValueError(f"unknown model id: {model_id!r}")
    featurizer_cls, head = _TEXT_MODELS[model_id]

    def doc_of(ex):
        if ex.interview_id is None:
            raise DataError("text model on examples without interviews")
        if ex.interview_id not in docs:
            raise DataError(f"no transcript for interview {ex.interview_id!r}")
        return docs[ex.interview_id]

    train_ids = sorted({ex.interview_id for ex in train})
    featurizer = featurizer_cls(min_df=cfg.min_df).fit([docs[i] for i in train_ids])
    X_train = featurizer.transform([doc_of(ex) for ex in train])
    X_eval = featurizer.transform([doc_of(ex) for ex in eval_])

    if np.unique(y_train).size < 2:
        # Text heads cannot fit a one-class target; use its constant rate.
        return np.full(len(eval_), float(y_train.mean()))
    if head == "lr":
        lr = LogisticRegressionModel(l2=cfg.logreg_l2, tol=cfg.logreg_tol,
                                     max_iter=cfg.logreg_max_iter)
        return lr.fit(X_train, y_train).predict_proba(X_eval)
    rf = RandomForestModel(n_trees=cfg.n_trees, max_features=cfg.max_features,
                           min_leaf=cfg.min_leaf, seed=seed)
    return rf.fit(X_train, y_train).predict_proba(X_eval)


def _model_seed(base, metric_i: int, model_i: int, fold_i: int) -> int:
    ss = np.random.SeedSequence(entropy=base, spawn_key=(metric_i, model_i, fold_i))
    return int(ss.generate_state(1)[0])


def run_experiment(examples_by_metric: dict, docs: dict, cfg: ExperimentConfig,
                   level: str, predict_rest: bool = False) -> EvalReport:
    """Full protocol over every metric and model; returns the report.

    ``examples_by_metric`` holds combined-mode examples (lags and interview
    ids both present) per metric; ``docs`` maps interview ids to sentence
    lists. Predictions on the holdout are kept per model id;
    ``predict_rest`` additionally keeps each model's in-sample confidences
    for the non-test examples (for analyses that want every interview).
    """
    results: dict = {}
    counters: dict = {}
    predictions: dict = {m: [] for m in cfg.models}
    predictions_rest: dict = {m: [] for m in cfg.models}

    for metric_i, metric in enumerate(METRICS):
        if metric not in examples_by_metric:
            continue
        examples = sorted(
            examples_by_metric[metric],
            key=lambda ex: (str(ex.interview_id), ex.unit, ex.player),
        )
        rest_idx, test_idx = stratified_holdout(examples, cfg.test_fraction, cfg.seed)
        folds = stratified_folds(examples, rest_idx, cfg.n_folds, cfg.fold_fraction,
                                 cfg.seed, strict=cfg.strict_folds)
        gold = {(ex.player, ex.unit, ex.metric): ex.label for ex in examples}
        counters[metric] = {
            "n_examples": len(examples),
            "n_test": len(test_idx),
            "n_rest": len(rest_idx),
            "positive_share": _round(sum(ex.label for ex in examples) / len(examples)),
        }

        results[metric] = {}
        for model_i, model_id in enumerate(cfg.models):
            fold_accs = []
            for fold_i, (tr, dv) in enumerate(folds):
                conf = _fit_and_predict(model_id, examples, tr, dv, docs, cfg,
                                        _model_seed(cfg.forest_seed, metric_i, model_i, fold_i))
                pred = (np.round(conf, 6) >= 0.5).astype(int)
                fold_accs.append(accuracy(pred, [examples[i].label for i in dv]))

            conf = _fit_and_predict(model_id, examples, rest_idx, test_idx, docs, cfg,
                                    _model_seed(cfg.forest_seed, metric_i, model_i, cfg.n_folds))
            recs = [
                make_record(ex.player, ex.unit, ex.metric,
                            ex.interview_id or f"{ex.player}@{ex.unit[0]}",
                            model_id, c)
                for ex, c in zip((examples[i] for i in test_idx), conf)
            ]
            predictions[model_id].extend(recs)
            if predict_rest:
                conf_rest = _fit_and_predict(
                    model_id, examples, rest_idx, rest_idx, docs, cfg,
                    _model_seed(cfg.forest_seed, metric_i, model_i, cfg.n_folds))
                predictions_rest[model_id].extend(
                    make_record(ex.player, ex.unit, ex.metric,
                                ex.interview_id or f"{ex.player}@{ex.unit[0]}",
                                model_id, c)
                    for ex, c in zip((examples[i] for i in rest_idx), conf_rest)
                )
            test_acc = accuracy([r.predicted for r in recs],
                                [examples[i].label for i in test_idx])
            deltas = per_player_delta(recs, gold)
            absent = sorted({ex.player for ex in examples} - set(deltas))
            if absent:
                log.info("metric %s model %s: no test examples for players %s",
                         metric, model_id, absent)
            results[metric][model_id] = {
                "fold_acc": [_round(a) for a in fold_accs],
                "mean_acc": _round(np.mean(fold_accs)),
                "std_acc": _round(fold_stddev(fold_accs)),
                "test_acc": _round(test_acc),
                "delta_acc": {p: {"n": d["n"], "acc": _round(d["acc"]),
                                  "delta": _round(d["delta"])}
                              for p, d in deltas.items()},
            }

    return EvalReport(level=level, seed=cfg.seed, results=results,
                      counters=counters, predictions=predictions,
                      predictions_rest=predictions_rest)
