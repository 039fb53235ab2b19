from .baselines import (
    ARModelFit,
    CommonClassModel,
    SingularDesignError,
    ar_design,
    ar_feature_names,
    fit_ar,
    fit_linear_ar,
)
from .features import BowFeaturizer, TfidfFeaturizer, Vocabulary, extract_terms
from .forest import RandomForestModel
from .logistic import LogisticRegressionModel, loss_and_gradient, sigmoid
from .records import PredictionRecord, make_record, read_predictions, write_predictions
from .serialize import load_model, save_model, vocabulary_hash

__all__ = [
    "ARModelFit",
    "BowFeaturizer",
    "CommonClassModel",
    "LogisticRegressionModel",
    "PredictionRecord",
    "RandomForestModel",
    "SingularDesignError",
    "TfidfFeaturizer",
    "Vocabulary",
    "ar_design",
    "ar_feature_names",
    "extract_terms",
    "fit_ar",
    "fit_linear_ar",
    "load_model",
    "loss_and_gradient",
    "make_record",
    "read_predictions",
    "save_model",
    "sigmoid",
    "vocabulary_hash",
    "write_predictions",
]
