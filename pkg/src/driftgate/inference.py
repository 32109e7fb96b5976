"""Moving block bootstrap and Newey-West HAC regression for rolling-window outcomes."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from driftgate import kernels
from driftgate.errors import ComputationError, InputError
from driftgate.protocols import WindowResult

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BootstrapSpec:
    block_lengths: tuple[int, ...] = (3, 5, 7)
    replications: int = 5000
    seed: int = 0
    ci_level: float = 0.95

    def __post_init__(self):
        if self.replications < 1:
            raise InputError("replications must be >= 1")
        if not self.block_lengths or any(b < 1 for b in self.block_lengths):
            raise InputError("block lengths must be >= 1")
        if not 0 < self.ci_level < 1:
            raise InputError("ci_level must lie in (0, 1)")


@dataclass(frozen=True)
class BootstrapResult:
    statistic: str
    block_length: int
    point_estimate: float
    se: float
    ci_low: float
    ci_high: float
    n: int
    replications: int


def block_starts(n: int, block_len: int, replications: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform start indices of overlapping blocks, ceil(n/L) blocks per replicate."""
    n_blocks = -(-n // block_len)
    return rng.integers(0, n - block_len + 1, size=(replications, n_blocks), dtype=np.int64)


def bootstrap_replicates(series: np.ndarray, block_len: int, replications: int, seed: int) -> np.ndarray:
    x = np.ascontiguousarray(series, dtype=np.float64)
    rng = np.random.default_rng([seed, block_len])
    return kernels.block_means(x, block_starts(x.size, block_len, replications, rng), block_len)


def moving_block_bootstrap(
    series: Sequence[float],
    spec: BootstrapSpec | None = None,
    statistic: str = "mean",
    name: str = "mean",
) -> list[BootstrapResult]:
    """Percentile intervals for the mean of a serially dependent series, one per block length."""
    spec = spec or BootstrapSpec()
    if statistic != "mean":
        raise InputError(f"unsupported statistic {statistic!r}")
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InputError("bootstrap needs a non-empty 1-D series")
    if not np.all(np.isfinite(x)):
        raise InputError("bootstrap series contains non-finite values")
    alpha = 1.0 - spec.ci_level
    out = []
    for L in spec.block_lengths:
        if L > x.size:
            raise InputError(f"block length {L} exceeds series length {x.size}")
        reps = bootstrap_replicates(x, L, spec.replications, spec.seed)
        if np.ptp(x) == 0:
            se, lo, hi = 0.0, float(x[0]), float(x[0])
        elif np.ptp(reps) == 0:
            se, lo, hi = 0.0, float(reps[0]), float(reps[0])
        else:
            se = float(np.std(reps, ddof=1))
            lo, hi = (float(v) for v in np.quantile(reps, [alpha / 2, 1 - alpha / 2]))
        out.append(
            BootstrapResult(
                statistic=name,
                block_length=int(L),
                point_estimate=float(np.mean(x)),
                se=se,
                ci_low=lo,
                ci_high=hi,
                n=int(x.size),
                replications=spec.replications,
            )
        )
    return out


# --------------------------------------------------------------------------
# HAC regression


@dataclass(frozen=True)
class HacOlsResult:
    names: tuple[str, ...]
    coef: np.ndarray
    hac_se: np.ndarray
    t_stat: np.ndarray
    p_value: np.ndarray
    r_squared: float
    n_obs: int
    lags: int
    residuals: np.ndarray = field(repr=False)
    excluded: dict = field(default_factory=dict)
    iqr_source: str = ""

    def rows(self) -> list[tuple[str, float, float, float, float]]:
        return [
            (nm, float(c), float(s), float(t), float(p))
            for nm, c, s, t, p in zip(self.names, self.coef, self.hac_se, self.t_stat, self.p_value)
        ]

    def __getitem__(self, name: str) -> dict:
        i = self.names.index(name)
        return {
            "coef": float(self.coef[i]),
            "hac_se": float(self.hac_se[i]),
            "t": float(self.t_stat[i]),
            "p": float(self.p_value[i]),
        }


def newey_west_cov(X: np.ndarray, resid: np.ndarray, lags: int) -> np.ndarray:
    """Sandwich covariance with Bartlett weights 1 - j/(lags+1); no small-sample scaling."""
    n = X.shape[0]
    xe = X * resid[:, None]
    S = xe.T @ xe
    for j in range(1, lags + 1):
        w = 1.0 - j / (lags + 1.0)
        G = xe[j:].T @ xe[: n - j]
        S += w * (G + G.T)
    bread = np.linalg.inv(X.T @ X)
    return bread @ S @ bread


def hac_ols(y: np.ndarray, X: np.ndarray, lags: int, names: Sequence[str] | None = None) -> HacOlsResult:
    """Least squares of ``y`` on ``X`` (include the constant yourself) with HAC inference."""
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    n, k = X.shape
    if lags < 0:
        raise InputError("lags must be >= 0")
    if np.linalg.matrix_rank(X) < k:
        raise ComputationError("rank-deficient design matrix")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    V = newey_west_cov(X, resid, lags)
    se = np.sqrt(np.diag(V))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    p = 2.0 * stats.t.sf(np.abs(t), df=n - k)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 0.0
    return HacOlsResult(
        names=tuple(names) if names is not None else tuple(f"x{i}" for i in range(k)),
        coef=beta,
        hac_se=se,
        t_stat=t,
        p_value=p,
        r_squared=r2,
        n_obs=n,
        lags=lags,
        residuals=resid,
    )


def standardize(v: np.ndarray) -> np.ndarray:
    sd = v.std()
    if sd == 0:
        raise ComputationError("regressor has zero variance")
    return (v - v.mean()) / sd


MECHANISM_TERMS = ("const", "log_illicit_prevalence", "log_score_iqr", "prevalence_change")


def mechanism_ols(results: Sequence[WindowResult], iqr_source: str = "test", lags: int = 4) -> HacOlsResult:
    """Regress log(deployed/oracle) on standardised log prevalence, log score IQR
    and prevalence change, windows in time order."""
    if iqr_source not in ("test", "train"):
        raise InputError("iqr_source must be 'test' or 'train'")
    if len({r.cost_ratio for r in results}) > 1:
        raise InputError("mechanism regression expects windows from a single cost ratio")
    excluded = {"undefined_ratio": 0, "zero_loss_ratio": 0, "zero_prevalence": 0, "zero_iqr": 0}
    keep = []
    for r in sorted(results, key=lambda r: r.test_step):
        iqr = r.score_iqr_test if iqr_source == "test" else r.score_iqr_train
        if not (r.ratio_defined and math.isfinite(r.loss_ratio)):
            excluded["undefined_ratio"] += 1
        elif r.loss_ratio <= 0:
            excluded["zero_loss_ratio"] += 1
        elif r.illicit_share_test <= 0:
            excluded["zero_prevalence"] += 1
        elif iqr <= 0:
            excluded["zero_iqr"] += 1
        else:
            keep.append((r, iqr))
    if any(excluded.values()):
        log.info("mechanism regression exclusions: %s", excluded)
    k = len(MECHANISM_TERMS)
    if len(keep) < lags + k + 2:
        raise InputError(f"mechanism regression needs >= {lags + k + 2} usable windows, got {len(keep)}")
    y = np.log([r.loss_ratio for r, _ in keep])
    X = np.column_stack(
        [
            np.ones(len(keep)),
            standardize(np.log([r.illicit_share_test for r, _ in keep])),
            standardize(np.log([iqr for _, iqr in keep])),
            standardize(np.array([r.prevalence_change for r, _ in keep])),
        ]
    )
    res = hac_ols(y, X, lags, MECHANISM_TERMS)
    return HacOlsResult(**{**res.__dict__, "excluded": excluded, "iqr_source": iqr_source})
