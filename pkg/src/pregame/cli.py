"""Command-line pipeline: ingest -> build -> eval -> interpret -> report.

Each stage reads the stores of the previous one from the configured output
directory, writes its own artifacts plus a completion marker, and is a
no-op when rerun with an unchanged configuration (``--force`` redoes it).
Artifacts embed the configuration hash and all seeds; nothing written here
depends on wall-clock time, so equal configurations give byte-identical
output.

Exit codes: 0 success, 2 bad configuration or arguments, 3 bad data.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluation, interviews as iv_mod, metrics as met_mod, pbp, topics
from .config import RunConfig
from .evaluation import SplitError, run_experiment
from .models.records import read_predictions, write_predictions
from .storage import DataError, ValidationError, canonical_json, file_sha256


def _marker_path(cfg: RunConfig, stage: str) -> Path:
    return cfg.out_path(f"{stage}.marker.json")


def _marker_state(cfg: RunConfig, stage: str) -> str:
    """``ok``, ``stale`` (no marker, or settings changed), or ``damaged``
    (an output is gone or no longer matches its recorded hash)."""
    path = _marker_path(cfg, stage)
    if not path.exists():
        return "stale"
    try:
        with open(path, "r", encoding="utf-8") as fh:
            marker = json.load(fh)
    except (OSError, json.JSONDecodeError):
        return "stale"
    if marker.get("stage_hash") != cfg.stage_hash(stage):
        return "stale"
    for name, digest in marker.get("outputs", {}).items():
        out = cfg.out_path(name)
        if not out.exists() or file_sha256(out) != digest:
            return "damaged"
    return "ok"


def _stage_done(cfg: RunConfig, stage: str) -> bool:
    return _marker_state(cfg, stage) == "ok"


def _write_marker(cfg: RunConfig, stage: str, outputs: dict, extra: dict | None = None):
    marker = {"stage": stage, "stage_hash": cfg.stage_hash(stage),
              "config_hash": cfg.config_hash(), "outputs": outputs}
    if extra:
        marker.update(extra)
    path = _marker_path(cfg, stage)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(marker) + "\n")


def _require_stage(cfg: RunConfig, stage: str) -> None:
    state = _marker_state(cfg, stage)
    if state == "damaged":
        raise DataError(f"outputs of stage {stage!r} changed on disk after it ran; "
                        f"re-run `pregame {stage} --force`")
    if state != "ok":
        raise ValidationError(f"stage {stage!r} has not completed for this config; "
                              f"run `pregame {stage}` first")


def cmd_ingest(cfg: RunConfig, force: bool = False) -> int:
    if not force and _stage_done(cfg, "ingest"):
        print("ingest: up to date")
        return 0
    chash = cfg.config_hash()
    column_map = (pbp.ColumnMap.from_file(cfg.resolve(cfg.pbp_schema))
                  if cfg.pbp_schema else pbp.DEFAULT_COLUMN_MAP)
    with open(cfg.resolve(cfg.events), "r", encoding="utf-8") as fh:
        result = pbp.parse_pbp(fh, column_map, cfg.court_geometry())
    ev_hash = pbp.write_events(cfg.out_path("events.jsonl"), result, chash)
    print(f"events: {result.n_rows} rows -> {len(result.events)} events, "
          f"{result.n_skipped_overtime} overtime, {len(result.rejected)} rejected")
    for lineno, reason in result.rejected[:10]:
        print(f"  rejected row {lineno}: {reason}")
    if len(result.rejected) > 10:
        print(f"  ... and {len(result.rejected) - 10} more")

    parsed, counters = iv_mod.ingest_interviews(
        cfg.resolve(cfg.interviews), cfg.question_prefix, cfg.answer_pattern)
    iv_hash = iv_mod.write_interviews(cfg.out_path("interviews.jsonl"), parsed, counters, chash)
    print(f"interviews: {counters['manifest_records']} records -> "
          f"{counters['interviews']} interviews ({counters['merged_records']} merged, "
          f"{counters['unanswered_questions']} unanswered questions, "
          f"{counters['orphan_answers']} orphan answers)")

    _write_marker(cfg, "ingest",
                  {"events.jsonl": ev_hash, "interviews.jsonl": iv_hash},
                  {"counters": counters,
                   "events_rejected": len(result.rejected),
                   "events_overtime": result.n_skipped_overtime})
    return 0


def cmd_build(cfg: RunConfig, force: bool = False) -> int:
    _require_stage(cfg, "ingest")
    if not force and _stage_done(cfg, "build"):
        print("build: up to date")
        return 0
    chash = cfg.config_hash()
    events = pbp.filter_relevant(pbp.read_events(cfg.out_path("events.jsonl")))
    parsed = iv_mod.read_interviews(cfg.out_path("interviews.jsonl"))
    if not parsed:
        raise DataError("interview store is empty")
    stats = iv_mod.corpus_stats(parsed)
    print(f"corpus: {stats.n_interviews} interviews, {stats.n_players} players, "
          f"{stats.total_words} tokens")

    players = sorted({iv.player for iv in parsed})
    game_ids = {e.game_id for e in events}
    linked = sum(1 for iv in parsed if iv.game_id in game_ids)
    if linked == 0:
        print("warning: no interview links to any game in the event log")

    outputs = {}
    marker_counts = {}
    for level in cfg.levels():
        store = met_mod.MetricStore.build(events, players, level, cfg.court_geometry())
        name = f"metrics_{level}.jsonl"
        outputs[name] = met_mod.write_metric_store(cfg.out_path(name), store, chash)
        n_units = sum(len(store.series(p)) for p in store.players)
        print(f"metrics {level}: {len(store.players)} players, {n_units} units")
        for mode in met_mod.MODES:
            examples, counters = met_mod.build_examples(parsed, store, mode)
            name = f"examples_{level}_{mode}.jsonl"
            outputs[name] = met_mod.write_examples(
                cfg.out_path(name), examples, mode, level, counters, chash)
            marker_counts[f"{level}_{mode}"] = counters
            print(f"examples {level}/{mode}: {counters['examples']} examples "
                  f"({counters['linked_pairs']} linked pairs, "
                  f"{counters['dropped_no_units']} interviews without units, "
                  f"{counters['dropped_short_history']} units with short history)")

    _write_marker(cfg, "build", outputs, {"counters": marker_counts})
    return 0


def _delta_csv_rows(level: str, results: dict):
    yield "level,metric,model,player,n,acc,delta"
    for metric in sorted(results):
        for model_id in sorted(results[metric]):
            deltas = results[metric][model_id]["delta_acc"]
            for player in sorted(deltas):
                d = deltas[player]
                yield (f"{level},{metric},{model_id},{player},{d['n']},"
                       f"{d['acc']:.6f},{d['delta']:.6f}")


def cmd_eval(cfg: RunConfig, force: bool = False) -> int:
    _require_stage(cfg, "ingest")
    _require_stage(cfg, "build")
    if not force and _stage_done(cfg, "eval"):
        print("eval: up to date")
        return 0
    chash = cfg.config_hash()
    parsed = iv_mod.read_interviews(cfg.out_path("interviews.jsonl"))
    docs = {iv.interview_id: iv.doc_sentences(cfg.include_questions) for iv in parsed}
    exp_cfg = cfg.experiment_config()
    predict_rest = cfg.curve_source == "all"

    outputs = {}
    for level in cfg.levels():
        examples, _ = met_mod.read_examples(cfg.out_path(f"examples_{level}_combined.jsonl"))
        by_metric: dict = {}
        for ex in examples:
            if ex.metric in cfg.metrics:
                by_metric.setdefault(ex.metric, []).append(ex)
        if not by_metric:
            raise DataError(f"no examples at level {level!r} for the configured metrics")
        try:
            report = run_experiment(by_metric, docs, exp_cfg, level, predict_rest)
        except SplitError as exc:
            raise DataError(f"eval stage failed at level {level!r} (split): {exc}") from exc

        doc_obj = {
            "config_hash": chash,
            "seeds": cfg.seeds(),
            "stddev_kind": "population",
            "protocol": {
                "test_fraction": cfg.test_fraction, "n_folds": cfg.n_folds,
                "fold_fraction": cfg.fold_fraction, "strict_folds": cfg.strict_folds,
                "split_granularity": "interview",
            },
        }
        doc_obj.update(report.to_dict())
        name = f"report_{level}.json"
        path = cfg.out_path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(doc_obj, sort_keys=True, indent=2, allow_nan=False) + "\n")
        outputs[name] = file_sha256(path)

        name = f"delta_acc_{level}.csv"
        with open(cfg.out_path(name), "w", encoding="utf-8") as fh:
            for row in _delta_csv_rows(level, report.results):
                fh.write(row + "\n")
        outputs[name] = file_sha256(cfg.out_path(name))

        for model_id in cfg.models:
            recs = report.predictions[model_id]
            covers = "test"
            if predict_rest:
                recs = recs + report.predictions_rest[model_id]
                covers = "all"
            name = f"predictions_{level}_{model_id}.jsonl"
            outputs[name] = write_predictions(
                cfg.out_path(name), recs, chash,
                {"level": level, "covers": covers, "seeds": cfg.seeds()})

        for metric in sorted(report.results):
            cells = ", ".join(
                f"{model}={report.results[metric][model]['test_acc']:.1f}"
                for model in sorted(report.results[metric]))
            print(f"eval {level}/{metric}: {cells}")

    _write_marker(cfg, "eval", outputs)
    return 0


def _load_stopwords(cfg: RunConfig) -> frozenset:
    if not cfg.lda_stopwords:
        return frozenset()
    with open(cfg.resolve(cfg.lda_stopwords), "r", encoding="utf-8") as fh:
        return frozenset(w.strip().lower() for w in fh if w.strip())


def cmd_interpret(cfg: RunConfig, force: bool = False,
                  predictions_path: str | None = None,
                  topic_model_path: str | None = None) -> int:
    _require_stage(cfg, "ingest")
    if not force and _stage_done(cfg, "interpret"):
        print("interpret: up to date")
        return 0
    chash = cfg.config_hash()
    if predictions_path is None:
        _require_stage(cfg, "eval")
        predictions_path = str(
            cfg.out_path(f"predictions_{cfg.interpret_level}_{cfg.interpret_model}.jsonl"))
    records, _ = read_predictions(predictions_path)
    if not records:
        raise DataError(f"{predictions_path}: no prediction records")
    by_metric: dict = {}
    for r in records:
        by_metric.setdefault(r.metric, []).append(r)

    parsed = iv_mod.read_interviews(cfg.out_path("interviews.jsonl"))
    stopwords = _load_stopwords(cfg)
    tokens_by_id = {iv.interview_id: iv.flat_tokens(cfg.include_questions) for iv in parsed}
    pred_ids = sorted({r.interview_id for r in records})
    missing = [i for i in pred_ids if i not in tokens_by_id]
    if missing:
        raise DataError(f"predictions reference unknown interviews: {missing[:5]}")

    k_selection = None
    if topic_model_path is not None:
        model = topics.load_topic_model(topic_model_path)
        corpus_tokens = {t for doc in tokens_by_id.values() for t in doc}
        if not corpus_tokens & set(model.vocab):
            raise DataError("vocabulary mismatch: the topic model shares no terms "
                            "with this corpus")
        theta_by_doc = {}
        folded = topics.infer_theta(model, [tokens_by_id[i] for i in pred_ids],
                                    cfg.lda_fold_in_iters, cfg.seed_lda)
        for i, doc_id in enumerate(pred_ids):
            theta_by_doc[doc_id] = folded[i]
    else:
        if cfg.lda_joint:
            train_ids = sorted(tokens_by_id)
        else:
            train_ids = sorted(set(tokens_by_id) - set(pred_ids))
            if len(train_ids) < 2:
                raise DataError("too few held-out interviews to train topics on; "
                                "set lda_joint=true to train on all documents")
        train_docs = [tokens_by_id[i] for i in train_ids]
        k = cfg.lda_k
        if k is None:
            sel = topics.select_k(train_docs, cfg.lda_k_grid, seed=cfg.seed_lda,
                                  alpha=cfg.lda_alpha, beta=cfg.lda_beta,
                                  iters=cfg.lda_iters, burn_in=cfg.lda_burn_in,
                                  sample_every=cfg.lda_sample_every,
                                  stopwords=stopwords)
            k = sel.k_star
            k_selection = {"grid": sorted(sel.scores),
                           "scores": {str(kk): round(v, 6) for kk, v in sel.scores.items()},
                           "k_star": sel.k_star}
            print(f"select_k: {k_selection['scores']} -> k={k}")
        model = topics.train_lda(train_docs, k, alpha=cfg.lda_alpha, beta=cfg.lda_beta,
                                 iters=cfg.lda_iters, burn_in=cfg.lda_burn_in,
                                 sample_every=cfg.lda_sample_every, seed=cfg.seed_lda,
                                 doc_ids=train_ids, stopwords=stopwords,
                                 check_conservation=True)
        if model.conservation_violations:
            raise DataError(f"sampler conservation violated "
                            f"{model.conservation_violations} times")
        theta_by_doc = model.theta_by_doc()
        fold_ids = [i for i in pred_ids if i not in theta_by_doc]
        if fold_ids:
            folded = topics.infer_theta(model, [tokens_by_id[i] for i in fold_ids],
                                        cfg.lda_fold_in_iters, cfg.seed_lda)
            for i, doc_id in enumerate(fold_ids):
                theta_by_doc[doc_id] = folded[i]

    outputs = {}
    name = "topic_model.jsonl"
    outputs[name] = topics.save_topic_model(cfg.out_path(name), model, chash)

    class_rows = {}
    curves = {}
    for metric in sorted(by_metric):
        ct = topics.class_topics(by_metric[metric], theta_by_doc, model)
        curve = topics.confidence_curve(by_metric[metric], theta_by_doc, ct.positive_topic)
        class_rows[metric] = ct
        curves[metric] = curve
        print(f"interpret {metric}: topic+ {ct.positive_topic} "
              f"({' '.join(ct.positive_words[:4])} ...), topic- {ct.negative_topic}")
    corr = topics.correlations(by_metric, theta_by_doc, cfg.correlation)

    name = "class_topics.tsv"
    with open(cfg.out_path(name), "w", encoding="utf-8") as fh:
        fh.write("metric\tpositive_topic\tpositive_score\tpositive_words\t"
                 "negative_topic\tnegative_score\tnegative_words\n")
        for metric in sorted(class_rows):
            ct = class_rows[metric]
            fh.write(f"{metric}\t{ct.positive_topic}\t{ct.positive_score:.6f}\t"
                     f"{'|'.join(ct.positive_words)}\t{ct.negative_topic}\t"
                     f"{ct.negative_score:.6f}\t{'|'.join(ct.negative_words)}\n")
    outputs[name] = file_sha256(cfg.out_path(name))

    name = "confidence_curves.csv"
    with open(cfg.out_path(name), "w", encoding="utf-8") as fh:
        fh.write("metric,topic,bin,mean_confidence,count\n")
        for metric in sorted(curves):
            c = curves[metric]
            for edge, mean, count in zip(c.edges, c.means, c.counts):
                cell = "" if mean is None else f"{mean:.6f}"
                fh.write(f"{metric},{c.topic},{edge:.1f},{cell},{count}\n")
    outputs[name] = file_sha256(cfg.out_path(name))

    name = "correlations.csv"
    with open(cfg.out_path(name), "w", encoding="utf-8") as fh:
        fh.write("metric," + ",".join(f"topic_{z}" for z in range(model.k)) + "\n")
        for metric, row in zip(corr.metrics, corr.matrix):
            cells = ",".join("" if v is None else f"{v:.6f}" for v in row)
            fh.write(f"{metric},{cells}\n")
    outputs[name] = file_sha256(cfg.out_path(name))

    report = {
        "config_hash": chash,
        "seeds": cfg.seeds(),
        "predictions_file": Path(predictions_path).name,
        "k": model.k, "alpha": model.alpha, "beta": model.beta,
        "iters": model.iters, "burn_in": model.burn_in,
        "sample_every": model.sample_every,
        "n_samples": model.n_samples,
        "conservation_violations": model.conservation_violations,
        "vocab_size": len(model.vocab),
        "vocab_hash": model.vocab_hash,
        "n_train_docs": len(model.doc_ids),
        "joint_training": bool(cfg.lda_joint),
        "fold_in_iters": cfg.lda_fold_in_iters,
        "correlation_method": cfg.correlation,
        "curve_source": cfg.curve_source,
        "k_selection": k_selection,
        "class_topics": {
            m: {"positive_topic": ct.positive_topic, "negative_topic": ct.negative_topic,
                "positive_score": round(ct.positive_score, 6),
                "negative_score": round(ct.negative_score, 6),
                "positive_words": ct.positive_words, "negative_words": ct.negative_words}
            for m, ct in class_rows.items()
        },
    }
    name = "interpret_report.json"
    with open(cfg.out_path(name), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n")
    outputs[name] = file_sha256(cfg.out_path(name))

    _write_marker(cfg, "interpret", outputs)
    return 0


def cmd_report(cfg: RunConfig) -> int:
    lines = ["# Run summary", ""]
    lines.append(f"Configuration hash: `{cfg.config_hash()}`")
    lines.append(f"Seeds: split={cfg.seed_split}, forest={cfg.seed_forest}, "
                 f"lda={cfg.seed_lda}")
    lines.append("")
    found = False
    for level in cfg.levels():
        path = cfg.out_path(f"report_{level}.json")
        if not path.exists():
            continue
        found = True
        with open(path, "r", encoding="utf-8") as fh:
            rep = json.load(fh)
        results = rep["results"]
        metrics = sorted(results)
        models = sorted({m for metric in metrics for m in results[metric]})
        lines.append(f"## Accuracy, {level} level (test set, 0-100)")
        lines.append("")
        lines.append("| model | " + " | ".join(metrics) + " |")
        lines.append("|---" * (len(metrics) + 1) + "|")
        for model_id in models:
            cells = []
            for metric in metrics:
                cell = results[metric].get(model_id)
                cells.append(f"{cell['test_acc']:.1f}" if cell else "")
            lines.append(f"| {model_id} | " + " | ".join(cells) + " |")
        lines.append("")
        lines.append(f"## Fold mean and spread, {level} level")
        lines.append("")
        lines.append("| model | " + " | ".join(metrics) + " |")
        lines.append("|---" * (len(metrics) + 1) + "|")
        for model_id in models:
            cells = []
            for metric in metrics:
                cell = results[metric].get(model_id)
                cells.append(f"{cell['mean_acc']:.1f} ± {cell['std_acc']:.1f}" if cell else "")
            lines.append(f"| {model_id} | " + " | ".join(cells) + " |")
        lines.append("")
    ipath = cfg.out_path("interpret_report.json")
    if ipath.exists():
        found = True
        with open(ipath, "r", encoding="utf-8") as fh:
            irep = json.load(fh)
        lines.append(f"## Topics (k={irep['k']})")
        lines.append("")
        lines.append("| metric | positive topic | top words | negative topic |")
        lines.append("|---|---|---|---|")
        for metric in sorted(irep["class_topics"]):
            ct = irep["class_topics"][metric]
            words = " ".join(ct["positive_words"][:5])
            lines.append(f"| {metric} | {ct['positive_topic']} | {words} | "
                         f"{ct['negative_topic']} |")
        lines.append("")
    if not found:
        raise ValidationError("nothing to report: run eval (and interpret) first")
    path = cfg.out_path("summary.md")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pregame",
        description="Interview-to-performance prediction pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to the run configuration JSON")
        p.add_argument("--force", action="store_true",
                       help="redo the stage even if its marker is current")

    common(sub.add_parser("ingest", help="parse play-by-play and interviews into stores"))
    common(sub.add_parser("build", help="compute metrics, labels, and examples"))

    p_eval = sub.add_parser("eval", help="run the prediction protocol")
    common(p_eval)
    p_eval.add_argument("--level", choices=("game", "period", "both"))
    p_eval.add_argument("--metrics", nargs="+")
    p_eval.add_argument("--models", nargs="+")
    p_eval.add_argument("--seed", type=int, help="holdout/fold seed")
    p_eval.add_argument("--folds", type=int)
    p_eval.add_argument("--test-fraction", type=float)

    p_int = sub.add_parser("interpret", help="topic model and confidence analyses")
    common(p_int)
    p_int.add_argument("--predictions", help="prediction file to analyze "
                       "(default: this run's eval output)")
    p_int.add_argument("--topic-model", help="reuse a saved topic model instead of training")

    p_rep = sub.add_parser("report", help="render a human-readable summary")
    p_rep.add_argument("--config", required=True)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        overrides = {}
        if getattr(args, "level", None):
            overrides["level"] = args.level
        if getattr(args, "metrics", None):
            overrides["metrics"] = tuple(args.metrics)
        if getattr(args, "models", None):
            overrides["models"] = tuple(args.models)
        if getattr(args, "seed", None) is not None:
            overrides["seed_split"] = args.seed
        if getattr(args, "folds", None) is not None:
            overrides["n_folds"] = args.folds
        if getattr(args, "test_fraction", None) is not None:
            overrides["test_fraction"] = args.test_fraction
        cfg = RunConfig.from_file(args.config, overrides)
        if args.command == "ingest":
            return cmd_ingest(cfg, args.force)
        if args.command == "build":
            return cmd_build(cfg, args.force)
        if args.command == "eval":
            return cmd_eval(cfg, args.force)
        if args.command == "interpret":
            return cmd_interpret(cfg, args.force, args.predictions, args.topic_model)
        if args.command == "report":
            return cmd_report(cfg)
        raise ValidationError(f"unknown command {args.command!r}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, SplitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
