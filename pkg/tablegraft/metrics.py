from __future__ import annotations

import logging
import warnings
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from sklearn.metrics import (
    accuracy_score,
    average_precision_score,
    f1_score,
    mean_absolute_error,
    mean_squared_error,
    roc_auc_score,
)

from tablegraft.dto.metrics import MetricSet, MetricSummary
from tablegraft.errors import DegenerateInputWarning
from tablegraft.types import TaskType


logger = logging.getLogger(__name__)

ArrayLike = Union[Sequence[float], Sequence[Sequence[float]], np.ndarray]


def primary_metric(task: TaskType) -> str:
    return "auc_roc" if task == "classification" else "mse"


def _unit(value: float) -> float:
    return float(min(max(value, 0.0), 1.0))


def _probabilities(predictions: ArrayLike, class_count: Optional[int]) -> np.ndarray:
    scores = np.asarray(predictions, dtype=np.float64)
    if scores.ndim == 1:
        scores = np.stack([1.0 - scores, scores], axis=1)
    if class_count is not None and scores.shape[1] != class_count:
        raise ValueError(f"expected {class_count} class probabilities, got {scores.shape[1]}")
    return scores


def _ranking_metrics(labels: np.ndarray, scores: np.ndarray) -> Dict[str, Optional[float]]:
    """
    AUC-ROC and average precision. Binary tasks score the positive class; multiclass
    tasks macro-average one-vs-rest over the classes present in `labels`.
    """
    present = np.unique(labels)
    if len(present) < 2:
        warnings.warn(
            f"labels contain a single class ({present.tolist()}); AUC-ROC is undefined",
            DegenerateInputWarning,
        )
        return {"auc_roc": None, "average_precision": None}

    if scores.shape[1] == 2:
        positive = scores[:, 1]
        truth = (labels == 1).astype(int)
        return {
            "auc_roc": _unit(roc_auc_score(truth, positive)),
            "average_precision": _unit(average_precision_score(truth, positive)),
        }

    aucs, aps = [], []
    for cls in present:
        truth = (labels == cls).astype(int)
        aucs.append(roc_auc_score(truth, scores[:, cls]))
        aps.append(average_precision_score(truth, scores[:, cls]))
    return {"auc_roc": _unit(np.mean(aucs)), "average_precision": _unit(np.mean(aps))}


def compute_metrics(
    predictions: ArrayLike,
    labels: Sequence[Union[int, float]],
    task: TaskType,
    class_count: Optional[int] = None,
) -> MetricSet:
    """
    Evaluation metrics of one prediction set.

    :param predictions: Class probabilities (n, classes), positive-class scores (n,) for
        binary tasks, or regression values (n,).
    :type predictions: ArrayLike
    :param labels: Class indices or regression targets.
    :type labels: Sequence[Union[int, float]]
    :param task: "classification" or "regression".
    :type task: TaskType
    :param class_count: Number of classes, checked against the probability width.
    :type class_count: Optional[int]
    :return: Accuracy, AUC-ROC, F1 and average precision for classification (F1 of the
        positive class for binary tasks, macro F1 otherwise); MAE and MSE for regression.
    :rtype: MetricSet
    """
    count = len(labels)
    if count == 0:
        raise ValueError("no labels to evaluate")
    if len(predictions) != count:
        raise ValueError(f"{len(predictions)} predictions for {count} labels")

    if task == "regression":
        truth = np.asarray(labels, dtype=np.float64)
        values = np.asarray(predictions, dtype=np.float64).reshape(-1)
        return MetricSet(
            task=task,
            count=count,
            mae=float(mean_absolute_error(truth, values)),
            mse=float(mean_squared_error(truth, values)),
        )

    truth = np.asarray(labels, dtype=int)
    scores = _probabilities(predictions, class_count)
    predicted = scores.argmax(axis=1)
    if scores.shape[1] == 2:
        f1 = f1_score(truth, predicted, pos_label=1, average="binary", zero_division=0)
    else:
        f1 = f1_score(
            truth, predicted, labels=list(range(scores.shape[1])), average="macro", zero_division=0
        )

    return MetricSet(
        task=task,
        count=count,
        accuracy=_unit(accuracy_score(truth, predicted)),
        f1=_unit(f1),
        **_ranking_metrics(truth, scores),
    )


def summarize(values: Sequence[Optional[float]]) -> MetricSummary:
    """
    Mean and population standard deviation over the runs that produced a value.
    """
    present = np.asarray([v for v in values if v is not None], dtype=np.float64)
    if present.size == 0:
        return MetricSummary(runs=0)
    return MetricSummary(mean=float(present.mean()), stddev=float(present.std()), runs=present.size)


def summarize_metrics(metric_sets: Sequence[MetricSet]) -> Dict[str, MetricSummary]:
    names: List[str] = list(metric_sets[0].values()) if metric_sets else []
    return {name: summarize([m.values()[name] for m in metric_sets]) for name in names}
