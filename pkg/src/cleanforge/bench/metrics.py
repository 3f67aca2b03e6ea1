"""Repair accuracy and cost-ratio metrics."""

from __future__ import annotations

import math
import warnings

from ..quality import QualitySpec, evaluate
from ..relation import Relation, diff, values_equal


def f1(dirty: Relation, cleaned: Relation, truth: Relation) -> tuple[float, float, float]:
    """Cell-level (precision, recall, F1) of the repairs ``dirty -> cleaned``."""
    repairs = diff(dirty, cleaned)
    needed = {d.cell: d.new for d in diff(dirty, truth)}
    correct = sum(1 for d in repairs if d.cell in needed and values_equal(d.new, needed[d.cell]))
    precision = correct / len(repairs) if repairs else 1.0
    recall = correct / len(needed) if needed else 1.0
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


class SuboptimalityWarning(UserWarning):
    pass


def suboptimality(spec: QualitySpec, truth: Relation, current_best_cost: float) -> float:
    """Ground-truth cost over best cost (1.0 when both are 0).

    A ratio above 1 means the search beat the ground truth on the proxy
    cost; it is returned unclamped with a warning.  A zero best cost
    against a positive truth cost has no finite ratio and yields NaN.
    """
    if current_best_cost < 0:
        raise ValueError("current_best_cost must be >= 0")
    truth_cost = evaluate(spec, truth).total_cost
    if current_best_cost == 0:
        if truth_cost == 0:
            return 1.0
        warnings.warn("best cost is 0 below a positive truth cost", SuboptimalityWarning)
        return math.nan
    ratio = truth_cost / current_best_cost
    if ratio > 1:
        warnings.warn(f"suboptimality {ratio:.4g} exceeds 1", SuboptimalityWarning)
    return ratio
