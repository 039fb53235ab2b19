"""Split protocol, accuracy scoring, fold spread and experiment assembly."""

import math

import numpy as np
import pytest

from pregame.storage import DataError
from pregame.evaluation import (
    ExperimentConfig,
    SplitError,
    accuracy,
    example_group,
    fold_stddev,
    per_player_delta,
    run_experiment,
    stratified_folds,
    stratified_holdout,
)
from pregame.models import make_record

from helpers import (
    ar_examples,
    make_example,
    planted_text_dataset,
    random_grouped_examples,
)


def singleton_examples(n_pos, n_neg, metric="PTS"):
    """One example per interview, labels fixed."""
    out = []
    for i in range(n_pos + n_neg):
        label = 1 if i < n_pos else 0
        out.append(make_example(f"P{i % 5}", (f"G{i}",), metric, label,
                                interview_id=f"P{i % 5}@G{i}"))
    return out


def side_label_counts(examples, idx):
    n = len(idx)
    p = sum(examples[i].label for i in idx)
    return n, p


class TestHoldout:
    def test_exact_stratification(self):
        examples = singleton_examples(40, 60)
        rest, test = stratified_holdout(examples, 0.2, seed=212)
        n, p = side_label_counts(examples, test)
        assert n == 20
        assert p == 8
        assert sorted(rest + test) == list(range(100))

    def test_determinism(self):
        examples = singleton_examples(40, 60)
        a = stratified_holdout(examples, 0.2, seed=212)
        b = stratified_holdout(examples, 0.2, seed=212)
        assert a == b

    def test_seed_changes_split(self):
        examples = singleton_examples(40, 60)
        _, t1 = stratified_holdout(examples, 0.2, seed=212)
        _, t2 = stratified_holdout(examples, 0.2, seed=213)
        assert t1 != t2

    def test_interview_grouping(self):
        rng = np.random.default_rng(50)
        examples = random_grouped_examples(rng, n_groups=30)
        rest, test = stratified_holdout(examples, 0.2, seed=212)
        rest_groups = {example_group(examples[i]) for i in rest}
        test_groups = {example_group(examples[i]) for i in test}
        assert rest_groups.isdisjoint(test_groups)

    def test_order_independence(self):
        rng = np.random.default_rng(51)
        examples = random_grouped_examples(rng, n_groups=25)
        _, test = stratified_holdout(examples, 0.2, seed=212)
        test_groups = {example_group(examples[i]) for i in test}
        perm = list(rng.permutation(len(examples)))
        shuffled = [examples[i] for i in perm]
        _, test2 = stratified_holdout(shuffled, 0.2, seed=212)
        assert {example_group(shuffled[i]) for i in test2} == test_groups

    def test_single_class_rejected(self):
        examples = singleton_examples(10, 0)
        with pytest.raises(SplitError):
            stratified_holdout(examples, 0.2, seed=212)

    def test_two_interviews_minimum(self):
        # two groups, one positive and one negative: the 1-group test
        # side deviates by |1-0.5| or |0-0.5|, within the 1-example bound
        examples = [
            make_example("P1", ("G1",), "PTS", 1, interview_id="P1@G1"),
            make_example("P2", ("G2",), "PTS", 0, interview_id="P2@G2"),
        ]
        rest, test = stratified_holdout(examples, 0.5, seed=1)
        assert len(rest) == 1 and len(test) == 1

    def test_deviation_bound_on_random_datasets(self):
        rng = np.random.default_rng(52)
        for trial in range(25):
            examples = random_grouped_examples(
                rng, n_groups=int(rng.integers(10, 60)),
                pos_rate=float(rng.uniform(0.25, 0.75)))
            ratio = sum(e.label for e in examples) / len(examples)
            try:
                rest, test = stratified_holdout(examples, 0.2, seed=trial)
            except SplitError:
                continue  # legitimately infeasible composition
            n_t, p_t = side_label_counts(examples, test)
            assert abs(p_t - ratio * n_t) <= 1.0 + 1e-9


class TestFolds:
    def test_five_dev_sets_of_ten(self):
        examples = singleton_examples(25, 25)
        rest = list(range(50))
        folds = stratified_folds(examples, rest, 5, 0.2, seed=212)
        assert len(folds) == 5
        for train, dev in folds:
            assert len(dev) == 10
            assert len(train) == 40
            assert set(train).isdisjoint(dev)
            assert sorted(train + dev) == rest

    def test_class_ratio_in_train_and_dev(self):
        examples = singleton_examples(30, 50)
        rest, _ = stratified_holdout(examples, 0.2, seed=212)
        ratio = (sum(examples[i].label for i in rest) / len(rest))
        folds = stratified_folds(examples, rest, 5, 0.2, seed=212)
        for train, dev in folds:
            for side in (train, dev):
                n, p = side_label_counts(examples, side)
                assert abs(p - ratio * n) <= 1.0 + 1e-9

    def test_determinism(self):
        examples = singleton_examples(30, 50)
        rest = list(range(80))
        a = stratified_folds(examples, rest, 5, 0.2, seed=212)
        b = stratified_folds(examples, rest, 5, 0.2, seed=212)
        assert a == b

    def test_independent_sampling_can_overlap(self):
        examples = singleton_examples(30, 50)
        rest = list(range(80))
        folds = stratified_folds(examples, rest, 5, 0.2, seed=212)
        devs = [set(dev) for _, dev in folds]
        union = set().union(*devs)
        total = sum(len(d) for d in devs)
        assert total > len(union)  # at least one overlap across folds

    def test_strict_mode_partitions(self):
        examples = singleton_examples(30, 50)
        rest = list(range(80))
        folds = stratified_folds(examples, rest, 5, 0.2, seed=212,
                                 strict=True)
        devs = [set(dev) for _, dev in folds]
        union = set()
        for d in devs:
            assert union.isdisjoint(d)
            union |= d
        assert union == set(rest)

    def test_grouping_respected(self):
        rng = np.random.default_rng(53)
        examples = random_grouped_examples(rng, n_groups=30)
        rest, _ = stratified_holdout(examples, 0.2, seed=212)
        folds = stratified_folds(examples, rest, 5, 0.2, seed=212)
        for train, dev in folds:
            tg = {example_group(examples[i]) for i in train}
            dg = {example_group(examples[i]) for i in dev}
            assert tg.isdisjoint(dg)


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy([1, 0, 1], [1, 0, 1]) == 100.0

    def test_half_correct(self):
        assert accuracy([1, 1, 0, 0], [1, 0, 0, 1]) == 50.0

    def test_four_of_seven(self):
        acc = accuracy([1, 1, 1, 1, 0, 0, 0], [1, 1, 1, 1, 1, 1, 1])
        assert acc == pytest.approx(400.0 / 7.0)
        assert round(acc, 1) == 57.1

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            accuracy([1, 0], [1, 0, 1])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            accuracy([], [])


class TestFoldStddev:
    def test_identical_accuracies(self):
        assert fold_stddev([60.0] * 5) == 0.0

    def test_two_values(self):
        assert fold_stddev([50.0, 60.0]) == 5.0

    def test_five_values_against_direct_formula(self):
        accs = [50.0, 60.0, 55.0, 70.0, 45.0]
        mean = sum(accs) / 5
        want = math.sqrt(sum((a - mean) ** 2 for a in accs) / 5)
        assert fold_stddev(accs) == pytest.approx(want, abs=1e-12)

    def test_single_fold_rejected(self):
        with pytest.raises(ValueError):
            fold_stddev([50.0])


class TestPerPlayerDelta:
    def records_for(self, spec):
        """spec: list of (player, unit suffix, predicted, gold)."""
        records, gold = [], {}
        for i, (player, pred, true) in enumerate(spec):
            unit = (f"G{i}",)
            records.append(make_record(player, unit, "PTS",
                                       f"{player}@G{i}", "cc", float(pred)))
            gold[(player, unit, "PTS")] = true
        return records, gold

    def test_single_player_identity(self):
        records, gold = self.records_for(
            [("P1", 1, 1), ("P1", 0, 1), ("P1", 1, 1)])
        table = per_player_delta(records, gold)
        assert table["P1"]["delta"] == 0.0

    def test_all_correct_player_above_half_global(self):
        records, gold = self.records_for(
            [("P1", 1, 1), ("P1", 0, 0), ("P2", 1, 0), ("P2", 0, 1)])
        table = per_player_delta(records, gold)
        assert table["P1"]["delta"] == 50.0
        assert table["P2"]["delta"] == -50.0

    def test_weighted_deltas_sum_to_zero(self):
        rng = np.random.default_rng(54)
        spec = [(f"P{int(rng.integers(0, 6))}", int(rng.integers(0, 2)),
                 int(rng.integers(0, 2))) for _ in range(200)]
        records, gold = self.records_for(spec)
        table = per_player_delta(records, gold)
        weighted = sum(d["n"] * d["delta"] for d in table.values())
        assert abs(weighted) < 1e-9 * 200

    def test_missing_gold_rejected(self):
        records, gold = self.records_for([("P1", 1, 1), ("P2", 0, 0)])
        gold.pop(("P2", ("G1",), "PTS"))
        with pytest.raises(DataError):
            per_player_delta(records, gold)


def cc_config(**kw):
    defaults = dict(models=("cc",), n_folds=3)
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestRunExperiment:
    def metric_examples(self, rng, n=80, pos_rate=0.6):
        labels = [int(rng.random() < pos_rate) for _ in range(n + 3)]
        return {"PTS": ar_examples(labels)}

    def test_common_class_identity(self):
        rng = np.random.default_rng(55)
        by_metric = self.metric_examples(rng)
        report = run_experiment(by_metric, {}, cc_config(), "game")
        res = report.results["PTS"]["cc"]
        examples = sorted(by_metric["PTS"],
                          key=lambda e: (str(e.interview_id), e.unit,
                                         e.player))
        rest, test = stratified_holdout(examples, 0.2, 212)
        share = np.mean([examples[i].label for i in rest])
        majority = 1 if share >= 0.5 else 0
        want = np.mean([examples[i].label == majority
                        for i in test]) * 100.0
        # report cells carry six decimals
        assert res["test_acc"] == pytest.approx(round(want, 6), abs=1e-9)

    def test_deterministic_rerun(self):
        rng = np.random.default_rng(56)
        docs, examples = planted_text_dataset(rng, n=60)
        doc_map = {iv.interview_id: iv.doc_sentences() for iv in docs}
        by_metric = {"PTS": examples}
        cfg = ExperimentConfig(models=("cc", "bow-lr"), n_folds=2,
                               n_trees=5)
        a = run_experiment(by_metric, doc_map, cfg, "game")
        b = run_experiment(by_metric, doc_map, cfg, "game")
        assert a.results == b.results
        assert a.predictions == b.predictions

    def test_prediction_records_cover_test_set(self):
        rng = np.random.default_rng(57)
        by_metric = self.metric_examples(rng)
        report = run_experiment(by_metric, {}, cc_config(), "game")
        n_test = report.counters["PTS"]["n_test"]
        recs = report.predictions["cc"]
        assert len(recs) == n_test
        assert all(r.model_id == "cc" for r in recs)
        assert all(0.0 <= r.confidence <= 1.0 for r in recs)
        # metric-mode examples fall back to the player@game interview key
        assert all(r.interview_id == f"{r.player}@{r.unit[0]}"
                   for r in recs)

    def test_predict_rest_covers_remaining_examples(self):
        rng = np.random.default_rng(58)
        by_metric = self.metric_examples(rng)
        report = run_experiment(by_metric, {}, cc_config(), "game",
                                predict_rest=True)
        assert len(report.predictions_rest["cc"]) == \
            report.counters["PTS"]["n_rest"]

    def test_ar_models_run_on_lagged_examples(self):
        rng = np.random.default_rng(59)
        labels = [int(rng.random() < 0.5) for _ in range(103)]
        by_metric = {"PTS": ar_examples(labels)}
        cfg = ExperimentConfig(models=("ar3-m", "ar3-m-star"), n_folds=2)
        report = run_experiment(by_metric, {}, cfg, "game")
        for model_id in cfg.models:
            res = report.results["PTS"][model_id]
            assert 0.0 <= res["test_acc"] <= 100.0
            assert len(res["fold_acc"]) == 2

    def test_text_models_match_planted_signal(self):
        rng = np.random.default_rng(60)
        docs, examples = planted_text_dataset(rng, n=120, bayes=0.95)
        doc_map = {iv.interview_id: iv.doc_sentences() for iv in docs}
        cfg = ExperimentConfig(models=("cc", "tfidf-lr"), n_folds=2)
        report = run_experiment({"PTS": examples}, doc_map, cfg, "game")
        res = report.results["PTS"]
        assert res["tfidf-lr"]["test_acc"] > res["cc"]["test_acc"]

    def test_results_layout(self):
        rng = np.random.default_rng(61)
        by_metric = self.metric_examples(rng)
        report = run_experiment(by_metric, {}, cc_config(), "game")
        res = report.results["PTS"]["cc"]
        assert set(res) == {"fold_acc", "mean_acc", "std_acc", "test_acc",
                            "delta_acc"}
        assert len(res["fold_acc"]) == 3
        assert res["mean_acc"] == pytest.approx(
            np.mean(res["fold_acc"]), abs=1e-6)
        for d in res["delta_acc"].values():
            assert set(d) == {"n", "acc", "delta"}
