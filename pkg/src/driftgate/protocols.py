"""Random, forward and rolling deployment protocols with oracle benchmarking,
feasible threshold recalibration and prevalence-tertile summaries."""
from __future__ import annotations

import logging
import math
from dataclasses import astuple, dataclass, field, fields
from typing import Callable, Iterator, Sequence

import numpy as np

from driftgate.dataset import Dataset
from driftgate.errors import ComputationError, InputError
from driftgate.metrics import (
    CostSpec,
    loss_at,
    optimal_threshold,
    oracle_threshold,
    pr_auc,
    roc_auc,
    safe_metric,
    score_iqr,
    top_k_precision,
)
from driftgate.scoring import FittedScorer, LogisticScorer, Scorer, ScoredWindow

log = logging.getLogger(__name__)

PROTOCOLS = ("random", "forward", "rolling")


@dataclass(frozen=True)
class ProtocolConfig:
    protocol: str = "rolling"
    train_frac: float = 0.70
    split_step: int = 34
    rolling_window: int = 10
    min_test_labeled: int = 50
    # False: test steps start right after the first step and train on whatever
    # part of the trailing window exists; True: only full trailing windows.
    require_full_window: bool = False
    cost_specs: tuple[CostSpec, ...] = (CostSpec(10.0), CostSpec(25.0))
    seed: int = 0
    top_k: float = 0.01

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise InputError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if not 0 < self.train_frac < 1:
            raise InputError("train_frac must lie in (0, 1)")
        if self.rolling_window < 1:
            raise InputError("rolling_window must be >= 1")
        if self.min_test_labeled < 1:
            raise InputError("min_test_labeled must be >= 1")
        if not self.cost_specs:
            raise InputError("at least one cost spec is required")
        if not 0 < self.top_k <= 1:
            raise InputError("top_k must lie in (0, 1]")


@dataclass(frozen=True)
class WindowResult:
    protocol: str
    test_step: int
    test_step_end: int
    cost_ratio: float
    c_fn: float
    c_fp: float
    n_train: int
    n_test: int
    pr_auc: float
    roc_auc: float
    top_k_precision: float
    tau_train: float
    tau_oracle: float
    deployed_loss: float
    oracle_loss: float
    excess_loss: float
    loss_ratio: float
    illicit_share_test: float
    illicit_share_train: float
    prevalence_change: float
    score_iqr_test: float
    score_iqr_train: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> tuple:
        return astuple(self)

    @property
    def ratio_defined(self) -> bool:
        return not math.isnan(self.loss_ratio)


_INT_FIELDS = {"test_step", "test_step_end", "n_train", "n_test"}


def window_result_from_row(row: dict) -> WindowResult:
    kw = {}
    for name in WindowResult.columns():
        v = row[name]
        if name == "protocol":
            kw[name] = str(v)
        elif name in _INT_FIELDS:
            kw[name] = int(v)
        else:
            kw[name] = float(v)
    return WindowResult(**kw)


def evaluate_window(
    train: ScoredWindow,
    test: ScoredWindow,
    cost: CostSpec,
    *,
    protocol: str,
    test_step: int,
    test_step_end: int,
    top_k: float = 0.01,
) -> WindowResult:
    """Deploy the train-optimal threshold on ``test`` and benchmark it against the oracle.

    Works for any scorer: ``train`` and ``test`` may come from imported score files.
    """
    if len(test) == 0:
        raise InputError("empty test window")
    tau_train = optimal_threshold(train, cost)
    oracle = oracle_threshold(test, cost)
    deployed = loss_at(test, tau_train.tau, cost)
    excess = deployed - oracle.loss
    if excess < 0:
        raise ComputationError("oracle loss exceeds deployed loss; threshold search is broken")
    share_test = float(test.labels.mean())
    share_train = float(train.labels.mean())
    return WindowResult(
        protocol=protocol,
        test_step=int(test_step),
        test_step_end=int(test_step_end),
        cost_ratio=cost.ratio,
        c_fn=float(cost.c_fn),
        c_fp=float(cost.c_fp),
        n_train=len(train),
        n_test=len(test),
        pr_auc=safe_metric(pr_auc, test),
        roc_auc=safe_metric(roc_auc, test),
        top_k_precision=top_k_precision(test, top_k),
        tau_train=tau_train.tau,
        tau_oracle=oracle.tau,
        deployed_loss=deployed,
        oracle_loss=oracle.loss,
        excess_loss=excess,
        loss_ratio=deployed / oracle.loss if oracle.loss > 0 else float("nan"),
        illicit_share_test=share_test,
        illicit_share_train=share_train,
        prevalence_change=share_test - share_train,
        score_iqr_test=score_iqr(test),
        score_iqr_train=score_iqr(train),
    )


@dataclass(frozen=True, eq=False)
class FittedSplit:
    """One train/test partition with the fitted scorer and in-sample train scores."""

    test_step: int
    test_step_end: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    fitted: FittedScorer
    train: ScoredWindow
    test: ScoredWindow


def _window(ds: Dataset, idx: np.ndarray, scores: np.ndarray) -> ScoredWindow:
    return ScoredWindow(scores, ds.labels[idx], ds.time_steps[idx], ds.tx_ids[idx])


def fit_split(
    ds: Dataset, train_idx: np.ndarray, test_idx: np.ndarray, scorer: Scorer, test_step: int, test_step_end: int
) -> FittedSplit:
    # the scorer only ever sees training rows
    fitted = scorer.fit(ds.features[train_idx], ds.labels[train_idx])
    return FittedSplit(
        test_step=test_step,
        test_step_end=test_step_end,
        train_idx=train_idx,
        test_idx=test_idx,
        fitted=fitted,
        train=_window(ds, train_idx, fitted.predict(ds.features[train_idx])),
        test=_window(ds, test_idx, fitted.predict(ds.features[test_idx])),
    )


def evaluate_split(split: FittedSplit, pc: ProtocolConfig, protocol: str) -> list[WindowResult]:
    return [
        evaluate_window(
            split.train,
            split.test,
            cost,
            protocol=protocol,
            test_step=split.test_step,
            test_step_end=split.test_step_end,
            top_k=pc.top_k,
        )
        for cost in pc.cost_specs
    ]


def _check_two_classes(labels: np.ndarray, what: str) -> None:
    pos = int(labels.sum())
    if pos == 0 or pos == labels.size:
        raise InputError(f"{what} contains a single class")


# --------------------------------------------------------------------------
# random split


def stratified_split(labels: np.ndarray, train_frac: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-label shuffle; each stratum contributes round-half-up(frac * size) to train."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for lab in (0, 1):
        idx = np.flatnonzero(labels == lab)
        perm = rng.permutation(idx)
        n_tr = math.floor(train_frac * idx.size + 0.5)
        if n_tr == 0 or n_tr == idx.size:
            raise InputError(f"degenerate stratum for label {lab}: {idx.size} records")
        train.append(perm[:n_tr])
        test.append(perm[n_tr:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def random_split(ds: Dataset, pc: ProtocolConfig, scorer: Scorer) -> FittedSplit:
    _check_two_classes(ds.labels, "dataset")
    tr, te = stratified_split(ds.labels, pc.train_frac, pc.seed)
    return fit_split(ds, tr, te, scorer, int(ds.time_steps[te].min()), int(ds.time_steps[te].max()))


def run_random_split(ds: Dataset, scorer: Scorer | None = None, pc: ProtocolConfig | None = None) -> list[WindowResult]:
    pc = pc or ProtocolConfig(protocol="random")
    return evaluate_split(random_split(ds, pc, scorer or LogisticScorer()), pc, "random")


# --------------------------------------------------------------------------
# forward split


def forward_split(ds: Dataset, pc: ProtocolConfig, scorer: Scorer) -> FittedSplit:
    tr = np.flatnonzero(ds.time_steps <= pc.split_step)
    te = np.flatnonzero(ds.time_steps > pc.split_step)
    if tr.size == 0 or te.size == 0:
        raise InputError(f"split_step {pc.split_step} leaves an empty side")
    _check_two_classes(ds.labels[tr], "forward training side")
    return fit_split(ds, tr, te, scorer, int(ds.time_steps[te[0]]), int(ds.time_steps[te[-1]]))


def run_forward_split(ds: Dataset, scorer: Scorer | None = None, pc: ProtocolConfig | None = None) -> list[WindowResult]:
    pc = pc or ProtocolConfig(protocol="forward")
    return evaluate_split(forward_split(ds, pc, scorer or LogisticScorer()), pc, "forward")


# --------------------------------------------------------------------------
# rolling deployment


@dataclass
class RollingRun:
    results: list[WindowResult]
    skipped: list[tuple[int, str]] = field(default_factory=list)

    def for_ratio(self, ratio: float) -> list[WindowResult]:
        return [r for r in self.results if r.cost_ratio == ratio]

    @property
    def eligible_steps(self) -> list[int]:
        return sorted({r.test_step for r in self.results})


def rolling_test_steps(ds: Dataset, pc: ProtocolConfig) -> list[int]:
    lo, _ = ds.time_range
    first = lo + pc.rolling_window if pc.require_full_window else lo + 1
    return [int(t) for t in ds.steps if t >= first]


def rolling_splits(
    ds: Dataset,
    pc: ProtocolConfig,
    scorer: Scorer,
    on_skip: Callable[[int, str], None] | None = None,
) -> Iterator[FittedSplit]:
    """Yield one fitted split per eligible test step, in time order."""
    for t in rolling_test_steps(ds, pc):
        tr = np.flatnonzero(ds.step_mask(t - pc.rolling_window, t - 1))
        te = np.flatnonzero(ds.time_steps == t)
        reason = None
        if te.size < pc.min_test_labeled:
            reason = f"{te.size} labelled test records < {pc.min_test_labeled}"
        elif tr.size == 0:
            reason = "empty training window"
        else:
            pos = int(ds.labels[tr].sum())
            if pos == 0 or pos == tr.size:
                reason = "training window has a single class"
        if reason is not None:
            log.info("rolling step %d skipped: %s", t, reason)
            if on_skip is not None:
                on_skip(t, reason)
            continue
        assert ds.time_steps[tr].max() < t, "training data must precede the test step"
        yield fit_split(ds, tr, te, scorer, t, t)


def run_rolling(ds: Dataset, scorer: Scorer | None = None, pc: ProtocolConfig | None = None) -> RollingRun:
    pc = pc or ProtocolConfig()
    scorer = scorer or LogisticScorer()
    skipped: list[tuple[int, str]] = []
    per_cost: list[list[WindowResult]] = [[] for _ in pc.cost_specs]
    for split in rolling_splits(ds, pc, scorer, lambda t, r: skipped.append((t, r))):
        for k, res in enumerate(evaluate_split(split, pc, "rolling")):
            per_cost[k].append(res)
    results = [r for group in per_cost for r in sorted(group, key=lambda r: r.test_step)]
    if not results:
        raise ComputationError("no eligible rolling windows")
    return RollingRun(results=results, skipped=skipped)


# --------------------------------------------------------------------------
# feasible recalibration


@dataclass(frozen=True)
class RecalWindow:
    test_step: int
    cost_ratio: float
    window_len: int
    steps_used: int
    tau_deployed: float
    tau_recal: float
    deployed_loss: float
    recal_loss: float
    oracle_loss: float
    frac_gap_closed: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> tuple:
        return astuple(self)


@dataclass(frozen=True)
class RecalResult:
    window_len: int
    cost_ratio: float
    n_windows: int
    n_defined: int
    deployed_loss: float
    recal_loss: float
    oracle_loss: float
    # mean of per-window fractions over windows with deployed > oracle
    frac_gap_closed: float
    # 1 - (mean recal - mean oracle) / (mean deployed - mean oracle)
    frac_gap_closed_of_means: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> tuple:
        return astuple(self)


def frac_gap_closed(deployed: float, recal: float, oracle: float) -> float:
    if deployed > oracle:
        return 1.0 - (recal - oracle) / (deployed - oracle)
    return float("nan")


@dataclass
class RecalRun:
    summaries: list[RecalResult]
    windows: list[RecalWindow]
    rolling: RollingRun


def run_recalibration(
    ds: Dataset,
    scorer: Scorer | None = None,
    pc: ProtocolConfig | None = None,
    windows: Sequence[int] = (2, 3, 5, 7),
) -> RecalRun:
    """Hold each rolling model fixed and re-optimise its threshold on the most
    recent ``w`` training steps (fewer when the training span is shorter)."""
    pc = pc or ProtocolConfig()
    scorer = scorer or LogisticScorer()
    for w in windows:
        if not 1 <= w <= pc.rolling_window:
            raise InputError(f"recalibration window {w} outside 1..{pc.rolling_window}")
    skipped: list[tuple[int, str]] = []
    rolling: list[list[WindowResult]] = [[] for _ in pc.cost_specs]
    per: dict[tuple[int, int], list[RecalWindow]] = {}
    for split in rolling_splits(ds, pc, scorer, lambda t, r: skipped.append((t, r))):
        train_steps = split.train.time_steps
        present = np.unique(train_steps)
        for k, (cost, res) in enumerate(zip(pc.cost_specs, evaluate_split(split, pc, "rolling"))):
            rolling[k].append(res)
            for w in windows:
                used = present[-w:]
                recal_slice = split.train.select(np.isin(train_steps, used))
                tau = optimal_threshold(recal_slice, cost).tau
                recal_loss = loss_at(split.test, tau, cost)
                if recal_loss < res.oracle_loss:
                    raise ComputationError("recalibrated loss below oracle loss")
                per.setdefault((k, w), []).append(
                    RecalWindow(
                        test_step=split.test_step,
                        cost_ratio=cost.ratio,
                        window_len=int(w),
                        steps_used=int(used.size),
                        tau_deployed=res.tau_train,
                        tau_recal=tau,
                        deployed_loss=res.deployed_loss,
                        recal_loss=recal_loss,
                        oracle_loss=res.oracle_loss,
                        frac_gap_closed=frac_gap_closed(res.deployed_loss, recal_loss, res.oracle_loss),
                    )
                )
    if not per:
        raise ComputationError("no eligible rolling windows")
    summaries, all_windows = [], []
    for k, cost in enumerate(pc.cost_specs):
        for w in windows:
            rows = per[(k, w)]
            all_windows.extend(rows)
            dep = float(np.mean([r.deployed_loss for r in rows]))
            rec = float(np.mean([r.recal_loss for r in rows]))
            orc = float(np.mean([r.oracle_loss for r in rows]))
            fr = np.array([r.frac_gap_closed for r in rows])
            defined = fr[~np.isnan(fr)]
            summaries.append(
                RecalResult(
                    window_len=int(w),
                    cost_ratio=cost.ratio,
                    n_windows=len(rows),
                    n_defined=int(defined.size),
                    deployed_loss=dep,
                    recal_loss=rec,
                    oracle_loss=orc,
                    frac_gap_closed=float(defined.mean()) if defined.size else float("nan"),
                    frac_gap_closed_of_means=frac_gap_closed(dep, rec, orc),
                )
            )
    results = [r for group in rolling for r in group]
    return RecalRun(summaries=summaries, windows=all_windows, rolling=RollingRun(results, skipped))


# --------------------------------------------------------------------------
# prevalence tertiles


@dataclass(frozen=True)
class TertileRow:
    tertile: int
    n: int
    mean_illicit_share: float
    mean_tau_deploy: float
    mean_loss_ratio: float
    mean_excess_loss: float
    n_ratio_undefined: int

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> tuple:
        return astuple(self)


def tertile_sizes(n: int) -> list[int]:
    # remainder goes to the lower tertiles
    base, rem = divmod(n, 3)
    return [base + (1 if i < rem else 0) for i in range(3)]


def tertile_summary(results: Sequence[WindowResult]) -> list[TertileRow]:
    if len(results) < 3:
        raise InputError("tertile summary needs at least 3 windows")
    if len({r.cost_ratio for r in results}) > 1:
        raise InputError("tertile summary expects windows from a single cost ratio")
    ordered = sorted(results, key=lambda r: (r.illicit_share_test, r.test_step))
    out, start = [], 0
    for i, size in enumerate(tertile_sizes(len(ordered))):
        grp = ordered[start:start + size]
        start += size
        ratios = np.array([r.loss_ratio for r in grp])
        ok = ratios[~np.isnan(ratios)]
        out.append(
            TertileRow(
                tertile=i + 1,
                n=size,
                mean_illicit_share=float(np.mean([r.illicit_share_test for r in grp])),
                mean_tau_deploy=float(np.mean([r.tau_train for r in grp])),
                mean_loss_ratio=float(ok.mean()) if ok.size else float("nan"),
                mean_excess_loss=float(np.mean([r.excess_loss for r in grp])),
                n_ratio_undefined=int(ratios.size - ok.size),
            )
        )
    return out
