"""Fitted-model artifacts: one JSONL store per model.

The header carries the model id, kind, fitting config and (for text
models) a hash of the training vocabulary; records carry coefficients,
trees, or vocabulary terms. Loading reconstructs a predict-ready model.
"""
from __future__ import annotations

import numpy as np

from ..storage import DataError, read_store, sha256_hex, write_store
from .baselines import ARModelFit, CommonClassModel
from .features import BowFeaturizer, TfidfFeaturizer, Vocabulary
from .forest import RandomForestModel, _Node
from .logistic import LogisticRegressionModel


def vocabulary_hash(vocab: Vocabulary) -> str:
    return sha256_hex("\n".join(vocab.terms).encode("utf-8"))


def _node_to_dict(node: _Node) -> dict:
    if node.is_leaf:
        return {"fraction": node.fraction}
    return {
        "fraction": node.fraction,
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(rec: dict) -> _Node:
    if "feature" not in rec:
        return _Node(fraction=rec["fraction"])
    return _Node(
        fraction=rec["fraction"],
        feature=rec["feature"],
        threshold=rec["threshold"],
        left=_node_from_dict(rec["left"]),
        right=_node_from_dict(rec["right"]),
    )


def _vocab_record(vocab: Vocabulary) -> dict:
    return {
        "vocabulary": {
            "terms": vocab.terms,
            "df": [int(v) for v in vocab.df],
            "n_docs": vocab.n_docs,
        }
    }


def _vocab_from_record(rec: dict) -> Vocabulary:
    body = rec["vocabulary"]
    index = {t: i for i, t in enumerate(body["terms"])}
    return Vocabulary(index, np.asarray(body["df"], dtype=np.float64),
                      int(body["n_docs"]))


def save_model(path, model, model_id: str, featurizer=None) -> str:
    """Write one fitted model (plus its featurizer, for text models)."""
    records: list[dict] = []
    vocab_hash = None
    config: dict = {}
    if featurizer is not None:
        vocab = featurizer.vocabulary_
        if vocab is None:
            raise ValueError("featurizer is not fitted")
        vocab_hash = vocabulary_hash(vocab)
        config["features"] = "tfidf" if isinstance(featurizer, TfidfFeaturizer) else "bow"
        config["min_df"] = featurizer.min_df
        records.append(_vocab_record(vocab))

    if isinstance(model, CommonClassModel):
        kind = "cc"
        records.append({"positive_share": model.positive_share_})
    elif isinstance(model, ARModelFit):
        kind = "ar"
        config.update(link=model.link, feature_set=model.feature_set,
                      metric=model.metric)
        records.append({
            "intercept": model.intercept,
            "coefficients": [float(c) for c in model.coefficients],
            "residual_variance": model.residual_variance,
            "feature_names": list(model.feature_names),
        })
    elif isinstance(model, LogisticRegressionModel):
        kind = "logreg"
        config.update(l2=model.l2, tol=model.tol, max_iter=model.max_iter)
        records.append({"weights": [float(w) for w in model.weights_]})
    elif isinstance(model, RandomForestModel):
        kind = "forest"
        config.update(n_trees=model.n_trees, max_features=model.max_features,
                      min_leaf=model.min_leaf, max_depth=model.max_depth,
                      seed=model.seed)
        records.extend(_node_to_dict(t) for t in model.trees_)
    else:
        raise ValueError(f"cannot serialize model of type {type(model).__name__}")

    header = {
        "store": "model",
        "model_id": model_id,
        "kind": kind,
        "config": config,
        "vocab_hash": vocab_hash,
    }
    return write_store(path, header, records)


def load_model(path):
    """Read a model store; returns (model, featurizer or None, header)."""
    header, records = read_store(path, expect="model")
    records = list(records)
    config = header["config"]

    featurizer = None
    if header.get("vocab_hash"):
        if not records or "vocabulary" not in records[0]:
            raise DataError(f"{path}: vocabulary record missing")
        vocab = _vocab_from_record(records.pop(0))
        cls = TfidfFeaturizer if config["features"] == "tfidf" else BowFeaturizer
        featurizer = cls(min_df=config["min_df"])
        featurizer.vocabulary_ = vocab
        if vocabulary_hash(vocab) != header["vocab_hash"]:
            raise DataError(f"{path}: vocabulary hash mismatch")

    kind = header["kind"]
    if kind == "cc":
        model = CommonClassModel()
        model.positive_share_ = float(records[0]["positive_share"])
    elif kind == "ar":
        rec = records[0]
        model = ARModelFit(
            link=config["link"],
            feature_set=config["feature_set"],
            metric=config["metric"],
            intercept=float(rec["intercept"]),
            coefficients=np.asarray(rec["coefficients"], dtype=np.float64),
            residual_variance=float(rec["residual_variance"]),
            feature_names=list(rec["feature_names"]),
        )
    elif kind == "logreg":
        model = LogisticRegressionModel(l2=config["l2"], tol=config["tol"],
                                        max_iter=config["max_iter"])
        model.weights_ = np.asarray(records[0]["weights"], dtype=np.float64)
        model.converged_ = True
    elif kind == "forest":
        model = RandomForestModel(
            n_trees=config["n_trees"], max_features=config["max_features"],
            min_leaf=config["min_leaf"], max_depth=config["max_depth"],
            seed=config["seed"])
        model.trees_ = [_node_from_dict(r) for r in records]
    else:
        raise DataError(f"{path}: unknown model kind {kind!r}")
    return model, featurizer, header
