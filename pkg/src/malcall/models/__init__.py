from .base import ScoringModel, SchemaMismatchError, predict_score, sigmoid
from .linear import LinearSVM, LogisticRegressionGD, logistic_loss_grad
from .mlp import MLPClassifier, mlp_forward, mlp_loss_grad
from .persistence import ModelFormatError, deserialize_model, load_model, save_model, serialize_model
from .trees import GradientBoostedTrees, RandomForest, Tree, dump_tree, feature_usage_histogram

MODEL_KINDS = {
    "logistic": LogisticRegressionGD,
    "svm": LinearSVM,
    "mlp": MLPClassifier,
    "forest": RandomForest,
    "gbt": GradientBoostedTrees,
}
TREE_KINDS = ("forest", "gbt")


def make_model(kind: str, **params) -> ScoringModel:
    try:
        cls = MODEL_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; choose from {sorted(MODEL_KINDS)}") from None
    return cls(**params)


__all__ = [
    "MODEL_KINDS",
    "TREE_KINDS",
    "GradientBoostedTrees",
    "LinearSVM",
    "LogisticRegressionGD",
    "MLPClassifier",
    "ModelFormatError",
    "RandomForest",
    "SchemaMismatchError",
    "ScoringModel",
    "Tree",
    "deserialize_model",
    "dump_tree",
    "feature_usage_histogram",
    "load_model",
    "logistic_loss_grad",
    "make_model",
    "mlp_forward",
    "mlp_loss_grad",
    "predict_score",
    "save_model",
    "serialize_model",
    "sigmoid",
]
