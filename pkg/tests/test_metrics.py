import itertools
import math

import numpy as np
import pytest

from tablegraft.dto.metrics import MetricSet
from tablegraft.errors import DegenerateInputWarning
from tablegraft.metrics import compute_metrics, primary_metric, summarize, summarize_metrics


def pairwise_auc(scores, labels):
    positives = [s for s, y in zip(scores, labels) if y == 1]
    negatives = [s for s, y in zip(scores, labels) if y == 0]
    wins = sum(
        1.0 if p > n else 0.5 if p == n else 0.0
        for p, n in itertools.product(positives, negatives)
    )
    return wins / (len(positives) * len(negatives))


def test_perfect_ranking():
    probabilities = [[0.9, 0.1], [0.2, 0.8], [0.6, 0.4], [0.3, 0.7]]

    metrics = compute_metrics(probabilities, [0, 1, 0, 1], "classification", class_count=2)

    assert metrics.auc_roc == pytest.approx(1.0)
    assert metrics.accuracy == pytest.approx(1.0)
    assert metrics.f1 == pytest.approx(1.0)
    assert metrics.average_precision == pytest.approx(1.0)
    assert metrics.count == 4


def test_regression_errors():
    metrics = compute_metrics([3.0, 5.0], [1.0, 5.0], "regression")

    assert metrics.mae == pytest.approx(1.0)
    assert metrics.mse == pytest.approx(2.0)
    assert metrics.auc_roc is None
    assert metrics.values() == {"mae": pytest.approx(1.0), "mse": pytest.approx(2.0)}


@pytest.mark.parametrize("seed", range(5))
def test_auc_matches_pairwise_count(seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, size=60)
    labels[:2] = [0, 1]
    scores = np.round(rng.random(60), 1)

    metrics = compute_metrics(scores, labels.tolist(), "classification")

    assert metrics.auc_roc == pytest.approx(pairwise_auc(scores, labels))


def test_random_scores_have_chance_auc():
    rng = np.random.default_rng(11)
    labels = rng.integers(0, 2, size=10_000)

    metrics = compute_metrics(rng.random(10_000), labels.tolist(), "classification")

    assert metrics.auc_roc == pytest.approx(0.5, abs=0.02)


def test_single_class_has_no_auc():
    with pytest.warns(DegenerateInputWarning):
        metrics = compute_metrics([[0.4, 0.6], [0.7, 0.3]], [1, 1], "classification")

    assert metrics.auc_roc is None
    assert metrics.average_precision is None
    assert metrics.accuracy == pytest.approx(0.5)


def test_multiclass_macro_f1():
    truth = [0, 0, 1, 1, 2, 2]
    predicted = [0, 0, 1, 2, 2, 2]
    probabilities = np.eye(3)[predicted] * 0.8 + 0.2 / 3

    metrics = compute_metrics(probabilities, truth, "classification", class_count=3)

    assert metrics.f1 == pytest.approx((1.0 + 2 / 3 + 0.8) / 3)
    assert metrics.accuracy == pytest.approx(5 / 6)
    assert 0.0 <= metrics.auc_roc <= 1.0


def test_input_validation():
    with pytest.raises(ValueError):
        compute_metrics([0.1, 0.2], [0], "classification")
    with pytest.raises(ValueError):
        compute_metrics([], [], "regression")
    with pytest.raises(ValueError):
        compute_metrics([[0.5, 0.5]], [0], "classification", class_count=3)


def test_summarize_uses_population_stddev():
    summary = summarize([1.0, 2.0, None, 3.0])

    assert summary.mean == pytest.approx(2.0)
    assert summary.stddev == pytest.approx(math.sqrt(2 / 3))
    assert summary.runs == 3
    assert summarize([None]).mean is None


def test_summarize_metrics():
    runs = [
        MetricSet(task="regression", count=2, mae=1.0, mse=2.0),
        MetricSet(task="regression", count=2, mae=3.0, mse=4.0),
    ]

    summary = summarize_metrics(runs)

    assert set(summary) == {"mae", "mse"}
    assert summary["mae"].mean == pytest.approx(2.0)
    assert summary["mse"].stddev == pytest.approx(1.0)


def test_primary_metric():
    assert primary_metric("classification") == "auc_roc"
    assert primary_metric("regression") == "mse"


@pytest.mark.parametrize("seed", range(5))
def test_squared_mae_bounded_by_mse(seed):
    rng = np.random.default_rng(seed)
    labels = rng.normal(size=40)

    metrics = compute_metrics(labels + rng.normal(size=40), labels.tolist(), "regression")

    assert metrics.mae**2 <= metrics.mse + 1e-12
