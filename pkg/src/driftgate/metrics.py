"""Regulatory loss, loss-minimising thresholds and ranking metrics for scored windows."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from driftgate import kernels
from driftgate.errors import ComputationError, InputError
from driftgate.scoring import ScoredWindow

# Threshold that flags nothing: every score is <= 1.
FLAG_NOTHING = float(np.nextafter(1.0, 2.0))


@dataclass(frozen=True)
class CostSpec:
    c_fn: float
    c_fp: float = 1.0

    def __post_init__(self):
        for name in ("c_fn", "c_fp"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be a positive finite number, got {v!r}")

    @property
    def ratio(self) -> float:
        return self.c_fn / self.c_fp


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ThresholdResult:
    tau: float
    loss: float
    counts: ConfusionCounts


def confusion_at(window: ScoredWindow, tau: float) -> ConfusionCounts:
    """Flag every record with score >= tau and tally against the labels."""
    flag = window.scores >= tau
    y = window.labels.astype(bool)
    tp = int(np.count_nonzero(flag & y))
    fp = int(np.count_nonzero(flag & ~y))
    fn = int(np.count_nonzero(~flag & y))
    return ConfusionCounts(tp=tp, fp=fp, tn=len(window) - tp - fp - fn, fn=fn)


def regulatory_loss(counts: ConfusionCounts, cost: CostSpec) -> float:
    return cost.c_fn * float(counts.fn) + cost.c_fp * float(counts.fp)


def loss_at(window: ScoredWindow, tau: float, cost: CostSpec) -> float:
    return regulatory_loss(confusion_at(window, tau), cost)


def _descending(window: ScoredWindow) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(-window.scores, kind="stable")
    return (
        np.ascontiguousarray(window.scores[order]),
        np.ascontiguousarray(window.labels[order], dtype=np.int8),
    )


def optimal_threshold(window: ScoredWindow, cost: CostSpec) -> ThresholdResult:
    """Lowest threshold attaining the minimum regulatory loss on ``window``.

    Candidates are the distinct scores plus :data:`FLAG_NOTHING`; the loss is
    constant between consecutive distinct scores, so this is the global minimum.
    """
    if len(window) == 0:
        raise InputError("cannot optimise a threshold on an empty window")
    s, y = _descending(window)
    end, _, tp, fp = kernels.sweep_threshold(s, y, float(cost.c_fn), float(cost.c_fp))
    tau = float(s[end - 1]) if end > 0 else FLAG_NOTHING
    pos = int(y.sum())
    counts = ConfusionCounts(tp=int(tp), fp=int(fp), tn=len(window) - pos - int(fp), fn=pos - int(tp))
    return ThresholdResult(tau=tau, loss=regulatory_loss(counts, cost), counts=counts)


def oracle_threshold(test_window: ScoredWindow, cost: CostSpec) -> ThresholdResult:
    """Infeasible benchmark: the threshold re-optimised on the test window itself."""
    return optimal_threshold(test_window, cost)


def _require_both_classes(window: ScoredWindow) -> None:
    pos = window.n_pos
    if pos == 0 or pos == len(window):
        raise ComputationError("undefined metric: window contains a single class")


def roc_auc(window: ScoredWindow) -> float:
    """P(score of a random illicit > score of a random licit), ties counting 1/2."""
    _require_both_classes(window)
    order = np.argsort(window.scores, kind="stable")
    return float(
        kernels.roc_auc_sorted(
            np.ascontiguousarray(window.scores[order]),
            np.ascontiguousarray(window.labels[order], dtype=np.int8),
        )
    )


def pr_auc(window: ScoredWindow) -> float:
    """Average precision: sum of precision times recall increment per distinct score."""
    if window.n_pos == 0:
        raise ComputationError("undefined metric: window has no positives")
    s, y = _descending(window)
    return float(kernels.average_precision_sorted(s, y))


def top_k_precision(window: ScoredWindow, k_frac: float) -> float:
    if not 0 < k_frac <= 1:
        raise InputError("k_frac must lie in (0, 1]")
    n = len(window)
    if n == 0:
        raise InputError("empty window")
    n_top = max(1, math.ceil(k_frac * n))
    order = np.argsort(-window.scores, kind="stable")[:n_top]
    return float(window.labels[order].sum()) / n_top


def score_iqr(window: ScoredWindow | np.ndarray) -> float:
    s = window.scores if isinstance(window, ScoredWindow) else np.asarray(window, dtype=np.float64)
    if s.size == 0:
        raise InputError("empty window")
    q25, q75 = np.quantile(s, [0.25, 0.75])
    return float(q75 - q25)


def safe_metric(fn, window: ScoredWindow) -> float:
    """``fn(window)``, or NaN when the metric is undefined for this window."""
    try:
        return fn(window)
    except ComputationError:
        return float("nan")
