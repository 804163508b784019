import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from malcall.metrics import (
    EvalConfig,
    MetricError,
    afp,
    auc_score,
    evaluate_scores,
    fp_at,
    fp_values,
    mr_at,
    mr_curve,
    pass_rate,
    reduction_rate,
    roc_curve,
    tau_of_p,
)

from oracles import pairwise_auc


def test_auc_four_points():
    assert auc_score([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_auc_all_ties_is_half():
    assert auc_score([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


def test_auc_perfect_and_reversed():
    assert auc_score([1, 2, 3, 4], [0, 0, 1, 1]) == 1.0
    assert auc_score([4, 3, 2, 1], [0, 0, 1, 1]) == 0.0


def test_auc_needs_both_classes():
    with pytest.raises(MetricError):
        auc_score([0.1, 0.2], [1, 1])
    with pytest.raises(MetricError):
        auc_score([0.1, 0.2], [0, 1, 1])


def test_auc_matches_pairwise_on_random_sets():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = rng.integers(2, 60)
        y = rng.integers(0, 2, n)
        y[:2] = (0, 1)
        s = rng.integers(0, 8, n) / 8.0
        assert auc_score(s, y) == pairwise_auc(s, y)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=40))
def test_auc_pairwise_property(points):
    scores = [p[0] for p in points]
    labels = [int(p[1]) for p in points]
    if len(set(labels)) < 2:
        return
    assert auc_score(scores, labels) == pairwise_auc(scores, labels)


def test_roc_curve_endpoints():
    curve = roc_curve([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
    assert math.isinf(curve.thresholds[0])
    assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
    assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)
    assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)
    # trapezoid area equals the rank statistic
    assert np.trapezoid(curve.tpr, curve.fpr) == pytest.approx(0.75)


def test_tau_examples():
    assert tau_of_p([0.1, 0.2, 0.3], 1.0) == math.inf
    assert tau_of_p([0.1, 0.5, 0.7, 0.9], 0.75) == 0.9
    assert tau_of_p([0.1, 0.5, 0.7, 0.9], 0.0) == 0.1
    with pytest.raises(MetricError):
        tau_of_p([0.1], 1.5)
    with pytest.raises(MetricError):
        tau_of_p([], 0.5)


def test_tau_reaches_pass_rate():
    rng = np.random.default_rng(1)
    s = rng.integers(0, 20, 500) / 20
    for p in (0.5, 0.9, 0.99):
        tau = tau_of_p(s, p)
        assert pass_rate(s, tau) >= p
        smaller = s[s < tau]
        if smaller.size:
            assert pass_rate(s, smaller.max()) < p


def test_fp_always_and_never_fire():
    scores = [0.2, 0.4, 0.6]
    assert fp_at(scores, 0.0, 10) == 1
    assert fp_at(scores, math.inf, 10) == 11
    assert fp_at(scores, 0.5, 10) == 3
    assert fp_at([0.1] * 5 + [0.9], 0.5, 3) == 4
    with pytest.raises(MetricError):
        fp_at([], 0.5, 10)
    with pytest.raises(MetricError):
        fp_at([0.1], 0.5, 0)


def test_afp_and_mr():
    seqs = [[0.9], [0.1, 0.9], [0.1, 0.1, 0.1]]
    assert list(fp_values(seqs, 0.5, 2)) == [1, 2, 3]
    assert afp(seqs, 0.5, 2) == 2.0
    assert mr_at(seqs, 0.5, 1) == pytest.approx(1 / 3)
    assert mr_at(seqs, 0.5, 2) == pytest.approx(2 / 3)
    curve = mr_curve(seqs, 0.5, 5)
    assert curve[:2] == [pytest.approx(1 / 3), pytest.approx(2 / 3)]
    assert np.all(np.diff(curve) >= 0)
    with pytest.raises(MetricError):
        afp([], 0.5, 10)


def test_reduction_rate():
    assert reduction_rate(3.90, 30) == pytest.approx(0.9033, abs=5e-5)
    assert reduction_rate(11, 10) == 0.0
    assert reduction_rate(1, 10) == 1.0
    with pytest.raises(MetricError):
        reduction_rate(0.5, 10)
    with pytest.raises(MetricError):
        reduction_rate(12, 10)


def test_eval_config_validation():
    with pytest.raises(MetricError):
        EvalConfig(p=0)
    with pytest.raises(MetricError):
        EvalConfig(Ms=(0,))
    cfg = EvalConfig(Ms=(5,), p=0.9)
    assert EvalConfig.from_dict(cfg.to_dict()) == cfg


def test_evaluate_scores_report():
    rng = np.random.default_rng(0)
    benign = rng.uniform(0, 0.5, 200)
    seqs = [rng.uniform(0.3, 1.0, 12) for _ in range(10)]
    report = evaluate_scores(
        np.r_[benign[:50], [s[0] for s in seqs]], [0] * 50 + [1] * 10, benign, seqs, EvalConfig(Ms=(10,), p=0.99)
    )
    d = report.to_dict()
    assert set(d["afp"]) == {"10"}
    assert 1 <= d["afp"]["10"] <= 11
    assert d["baseline_afp"]["10"] == 11
    assert d["reduction"]["10"] == pytest.approx(1 - (d["afp"]["10"] - 1) / 10)
    assert len(d["mr"]) == 30
    never = evaluate_scores([0, 1], [0, 1], [0.1, 0.2], [[0.0]], EvalConfig(p=1.0))
    assert never.to_dict()["tau"] == "inf"
    assert never.afp[10] == 11
