"""Accuracy matrices, ACC/BWT and representation similarity."""

from src.evalkit.cka import layer_similarity_map, linear_cka
from src.evalkit.metrics import (
    AccuracyMatrix,
    acc_metric,
    bwt_metric,
    evaluate_row,
    evaluate_task,
    metrics_summary,
    split_accuracy,
)

__all__ = [
    "AccuracyMatrix",
    "acc_metric",
    "bwt_metric",
    "evaluate_row",
    "evaluate_task",
    "layer_similarity_map",
    "linear_cka",
    "metrics_summary",
    "split_accuracy",
]
