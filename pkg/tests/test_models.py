import json

import numpy as np
import pytest

from malcall.features import FEATURE_NAMES, RAW_COLUMNS, FeatureSelector, Schema, encode_matrix
from malcall.metrics import auc_score
from malcall.models import (
    MODEL_KINDS,
    GradientBoostedTrees,
    LinearSVM,
    LogisticRegressionGD,
    MLPClassifier,
    RandomForest,
    make_model,
)
from malcall.models.base import SchemaMismatchError, predict_score
from malcall.models.persistence import ModelFormatError, deserialize_model, load_model, save_model, serialize_model
from malcall.models.trees import Tree, dump_tree, feature_usage_histogram

from oracles import logistic_gradient_errors, mlp_gradient_errors

FAST = {
    "logistic": {},
    "svm": {"n_iter": 300},
    "mlp": {"epochs": 20},
    "forest": {"n_trees": 20},
    "gbt": {"n_trees": 20},
}


def blobs(n=200, d=4, seed=0, shift=3.0):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    X = rng.normal(size=(n, d)) + shift * y[:, None]
    return X, y


def test_logistic_gradient_matches_finite_differences():
    assert max(logistic_gradient_errors(n_probes=5)) < 1e-5


def test_mlp_gradient_matches_finite_differences():
    assert max(mlp_gradient_errors(n_probes=5)) < 1e-4


@pytest.mark.parametrize("kind", sorted(MODEL_KINDS))
def test_separable_1d(kind):
    x = np.linspace(-1, 1, 100)
    X, y = x[:, None], (x > 0).astype(int)
    model = make_model(kind, **FAST[kind]).fit(X, y)
    held = np.array([[-0.95], [-0.5], [0.5], [0.95]])
    assert list(model.predict(held)) == [0, 0, 1, 1]


@pytest.mark.parametrize("kind", sorted(MODEL_KINDS))
def test_single_class_rejected(kind):
    with pytest.raises(ValueError, match="single class"):
        make_model(kind).fit(np.ones((5, 2)), np.zeros(5))


@pytest.mark.parametrize("kind", ["logistic", "mlp", "gbt", "forest"])
def test_probabilistic_scores_in_unit_interval(kind):
    X, y = blobs()
    s = make_model(kind, **FAST[kind]).fit(X, y).predict_score(X * 10)
    assert np.all((s >= 0) & (s <= 1))


def test_zero_weight_logistic_scores_half():
    model = LogisticRegressionGD().fit(*blobs())
    model.coef_ = np.zeros_like(model.coef_)
    model.intercept_ = 0.0
    assert np.all(model.predict_score(np.random.default_rng(1).normal(size=(10, 4))) == 0.5)


def test_logistic_score_monotone_in_positive_weights():
    X, y = blobs()
    model = LogisticRegressionGD().fit(X, y)
    j = int(np.argmax(model.coef_))
    assert model.coef_[j] > 0
    x = X[:1].copy()
    before = model.predict_score(x)[0]
    x[0, j] += 0.5
    assert model.predict_score(x)[0] > before


def test_logistic_converges_to_gradient_tolerance():
    model = LogisticRegressionGD(alpha=1e-2, tol=1e-6).fit(*blobs(shift=1.0))
    assert model.n_iter_ < model.max_iter


def test_svm_objective_decreases_from_zero():
    X, y = blobs(shift=1.0)
    model = LinearSVM().fit(X, y)
    zero = LinearSVM().fit(X, y)
    zero.coef_ = np.zeros(X.shape[1])
    zero.intercept_ = 0.0
    assert model.objective(X, y) < zero.objective(X, y)
    with pytest.raises(AttributeError):
        model.predict_proba(X)


def test_mlp_learns_xor():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, size=(400, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)
    model = MLPClassifier(hidden=20, epochs=200, learning_rate=0.2, random_state=0).fit(X, y)
    assert np.mean(model.predict(X) == y) > 0.9
    assert model.loss_curve_[-1] < model.loss_curve_[0]


def test_mlp_seeded():
    X, y = blobs()
    a = MLPClassifier(epochs=5, random_state=3).fit(X, y).predict_score(X)
    b = MLPClassifier(epochs=5, random_state=3).fit(X, y).predict_score(X)
    c = MLPClassifier(epochs=5, random_state=4).fit(X, y).predict_score(X)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_forest_score_is_mean_of_trees():
    X, y = blobs()
    model = RandomForest(n_trees=15, random_state=1).fit(X, y)
    Z = np.random.default_rng(2).normal(size=(100, 4)) * 3
    assert np.allclose(model.predict_score(Z), model.tree_scores(Z).mean(axis=0), rtol=0, atol=1e-15)


def test_forest_identical_labels_per_leaf():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    model = RandomForest(n_trees=1, bootstrap=False, max_features=None).fit(X, y)
    tree = model.trees_[0]
    leaves = [tree.value[i] for i in range(tree.n_nodes) if tree.feature[i] < 0]
    assert sorted(leaves) == [0.0, 1.0]


@pytest.mark.parametrize("kind", ["forest", "gbt"])
def test_tree_depth_and_leaf_path(kind):
    X, y = blobs(d=6)
    model = make_model(kind, **FAST[kind]).fit(X, y)
    for tree in model.trees_:
        assert tree.max_depth() <= 3
        assert len(tree.internal_nodes()) <= 7
        assert np.all(np.isfinite([tree.threshold[i] for i in tree.internal_nodes()]))
        leaves = tree.apply(X)
        assert np.all(np.asarray(tree.feature)[leaves] < 0)


def test_gbt_zero_rounds_predict_prior():
    X, y = blobs()
    model = GradientBoostedTrees(n_trees=0).fit(X, y)
    assert np.allclose(model.predict_score(X), y.mean())


def test_gbt_loss_non_increasing():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(300, 5))
    y = (rng.uniform(size=300) < 0.3).astype(int)
    model = GradientBoostedTrees(n_trees=40).fit(X, y)
    assert len(model.train_loss_) == 41
    assert np.all(np.diff(model.train_loss_) <= 1e-9)


def test_gbt_hand_computed_leaves():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    model = GradientBoostedTrees(n_trees=1, max_depth=1, learning_rate=1.0, reg_lambda=1.0, min_child_weight=0.0)
    model.fit(X, y)
    tree = model.trees_[0]
    assert tree.feature[0] == 0 and tree.threshold[0] == 1.5
    # prior 0.5: gradients p - y = +-0.5, hessians 0.25; leaf = -G / (H + lambda)
    assert tree.value[tree.left[0]] == pytest.approx(-1.0 / 1.5)
    assert tree.value[tree.right[0]] == pytest.approx(1.0 / 1.5)
    assert model.raw_score(np.array([[0.0]]))[0] == pytest.approx(-1.0 / 1.5)


def test_stump_usage_histogram():
    tree = Tree()
    root = tree.add_leaf(0.0)
    tree.split(root, 7, 0.5, tree.add_leaf(0.0), tree.add_leaf(1.0))
    model = RandomForest()
    model.trees_ = [tree]
    usage = feature_usage_histogram(model)
    assert usage.total == {7: 1}
    assert usage.by_level == {1: {7: 1}}


def test_usage_conserves_internal_nodes():
    X, y = blobs(d=6)
    model = RandomForest(n_trees=20).fit(X, y)
    usage = feature_usage_histogram(model)
    n_internal = sum(len(t.internal_nodes()) for t in model.trees_)
    assert sum(usage.total.values()) == n_internal
    assert sum(sum(c.values()) for c in usage.by_level.values()) == n_internal
    with pytest.raises(TypeError):
        feature_usage_histogram(LogisticRegressionGD().fit(X, y))


def test_dominant_feature_ranks_first():
    rng = np.random.default_rng(0)
    n = 1000
    raw = np.zeros((n, len(RAW_COLUMNS)))
    raw[:, RAW_COLUMNS.index("weekday")] = rng.integers(0, 7, n)
    raw[:, RAW_COLUMNS.index("hour")] = rng.integers(0, 24, n)
    for name in ("is_in_contact", "same_location"):
        raw[:, RAW_COLUMNS.index(name)] = rng.integers(0, 2, n)
    for name in ("caller_outs", "caller_ins", "callee_outs", "callee_ins"):
        raw[:, RAW_COLUMNS.index(name)] = rng.integers(0, 50, n)
    y = rng.integers(0, 2, n)
    raw[:, RAW_COLUMNS.index("n_call")] = 1 + rng.poisson(1 + 4 * y)
    schema = Schema.for_selector(FeatureSelector.no_historic())
    X = encode_matrix(raw, schema)
    for model in (GradientBoostedTrees(n_trees=30), RandomForest(n_trees=30, max_features=None)):
        usage = feature_usage_histogram(model.fit(X, y)).named(schema.column_features())
        assert usage.total.most_common(1)[0][0] == "n_call"


def test_dump_tree():
    X, y = blobs(d=3)
    model = GradientBoostedTrees(n_trees=2).fit(X, y)
    text = dump_tree(model, 0, feature_names=["alpha", "beta", "gamma"])
    assert text.count("leaf value=") <= 8
    assert text.count("else") <= 7
    assert any(n in text for n in ("alpha", "beta", "gamma"))
    with pytest.raises(TypeError):
        dump_tree(LogisticRegressionGD().fit(X, y))


@pytest.mark.parametrize("kind", sorted(MODEL_KINDS))
def test_serialization_round_trip(kind, tmp_path):
    X, y = blobs()
    model = make_model(kind, **FAST[kind]).fit(X, y, schema="abc")
    path = tmp_path / f"{kind}.json"
    save_model(model, path)
    restored = load_model(path)
    assert type(restored) is type(model)
    assert restored.schema_fingerprint_ == "abc"
    assert np.array_equal(model.predict_score(X), restored.predict_score(X))
    assert serialize_model(restored) == serialize_model(model)


def test_corrupt_payloads():
    model = LogisticRegressionGD().fit(*blobs())
    blob = serialize_model(model)
    with pytest.raises(ModelFormatError):
        deserialize_model(blob[: len(blob) // 2])
    payload = json.loads(blob)
    payload["version"] = 99
    with pytest.raises(ModelFormatError, match="version"):
        deserialize_model(json.dumps(payload).encode())
    payload["version"] = 1
    del payload["state"]["coef"]
    with pytest.raises(ModelFormatError):
        deserialize_model(json.dumps(payload).encode())


def test_schema_mismatch():
    X, y = blobs()
    schema = Schema.for_selector(FeatureSelector.basic())
    model = LogisticRegressionGD().fit(X, y, schema=schema)
    with pytest.raises(SchemaMismatchError):
        model.predict_score(X[:, :3])
    other = Schema.for_selector(FeatureSelector.all())
    with pytest.raises(SchemaMismatchError):
        predict_score(model, X, schema=other)
    assert len(predict_score(model, X, schema=schema)) == len(X)


@pytest.mark.parametrize("kind", sorted(MODEL_KINDS))
def test_auc_rank_invariance(kind):
    X, y = blobs(shift=1.0)
    s = make_model(kind, **FAST[kind]).fit(X, y).predict_score(X)
    assert auc_score(s, y) == auc_score(2 * s + 1, y)


def test_sklearn_params_api():
    model = GradientBoostedTrees(n_trees=5)
    assert model.get_params()["n_trees"] == 5
    model.set_params(learning_rate=0.3)
    assert model.learning_rate == 0.3
    with pytest.raises(ValueError):
        make_model("knn")
    assert len(FEATURE_NAMES) == 29
