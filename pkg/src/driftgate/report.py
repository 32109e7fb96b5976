"""Aggregate tables built from per-window results."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from driftgate.inference import BootstrapSpec, HacOlsResult, moving_block_bootstrap
from driftgate.protocols import RecalWindow, WindowResult, tertile_summary


def by_ratio(results: Sequence[WindowResult]) -> dict[float, list[WindowResult]]:
    out: dict[float, list[WindowResult]] = {}
    for r in results:
        out.setdefault(r.cost_ratio, []).append(r)
    return {k: sorted(v, key=lambda r: r.test_step) for k, v in out.items()}


def _nanmean(values) -> tuple[float, int]:
    a = np.asarray(values, dtype=np.float64)
    ok = a[~np.isnan(a)]
    return (float(ok.mean()) if ok.size else float("nan")), int(a.size - ok.size)


def deployment_gap(results: Sequence[WindowResult]) -> dict:
    """Means of deployed/oracle/excess loss, ratio of means and mean window ratio."""
    dep = float(np.mean([r.deployed_loss for r in results]))
    orc = float(np.mean([r.oracle_loss for r in results]))
    window_ratio, undefined = _nanmean([r.loss_ratio for r in results])
    return {
        "n_windows": len(results),
        "mean_deployed": dep,
        "mean_oracle": orc,
        "ratio_of_means": dep / orc if orc > 0 else float("nan"),
        "mean_window_ratio": window_ratio,
        "n_ratio_undefined": undefined,
        "mean_excess": float(np.mean([r.excess_loss for r in results])),
    }


GAP_COLUMNS = [
    "cost_ratio",
    "n_windows",
    "mean_deployed",
    "mean_oracle",
    "ratio_of_means",
    "mean_window_ratio",
    "n_ratio_undefined",
    "mean_excess",
]


def gap_table(results: Sequence[WindowResult]) -> list[dict]:
    return [{"cost_ratio": k, **deployment_gap(v)} for k, v in by_ratio(results).items()]


ROLLING_COLUMNS = [
    "cost_ratio",
    "windows",
    "mean_pr_auc",
    "mean_roc_auc",
    "mean_illicit_share",
    "mean_tau_train",
    "mean_loss_ratio",
    "mean_excess",
]


def rolling_table(results: Sequence[WindowResult]) -> list[dict]:
    rows = []
    for k, v in by_ratio(results).items():
        rows.append(
            {
                "cost_ratio": k,
                "windows": len(v),
                "mean_pr_auc": _nanmean([r.pr_auc for r in v])[0],
                "mean_roc_auc": _nanmean([r.roc_auc for r in v])[0],
                "mean_illicit_share": float(np.mean([r.illicit_share_test for r in v])),
                "mean_tau_train": float(np.mean([r.tau_train for r in v])),
                "mean_loss_ratio": _nanmean([r.loss_ratio for r in v])[0],
                "mean_excess": float(np.mean([r.excess_loss for r in v])),
            }
        )
    return rows


SPLIT_COLUMNS = ["protocol", "cost_ratio", "pr_auc", "roc_auc", "tau_train", "test_loss", "top_k_precision"]


def split_table(results: Sequence[WindowResult]) -> list[dict]:
    return [
        {
            "protocol": r.protocol,
            "cost_ratio": r.cost_ratio,
            "pr_auc": r.pr_auc,
            "roc_auc": r.roc_auc,
            "tau_train": r.tau_train,
            "test_loss": r.deployed_loss,
            "top_k_precision": r.top_k_precision,
        }
        for r in results
    ]


BOOTSTRAP_COLUMNS = [
    "cost_ratio",
    "statistic",
    "block_length",
    "point_estimate",
    "se",
    "ci_low",
    "ci_high",
    "n",
    "replications",
    "mean_loss_ratio",
]


def bootstrap_table(results: Sequence[WindowResult], spec: BootstrapSpec) -> list[dict]:
    """Block bootstrap of mean excess loss and mean loss ratio, per cost ratio."""
    rows = []
    for k, v in by_ratio(results).items():
        mean_ratio, _ = _nanmean([r.loss_ratio for r in v])
        excess = np.array([r.excess_loss for r in v])
        ratios = np.array([r.loss_ratio for r in v])
        ratios = ratios[~np.isnan(ratios)]
        series = [("excess_loss", excess)]
        if ratios.size >= max(spec.block_lengths):
            series.append(("loss_ratio", ratios))
        for name, x in series:
            for b in moving_block_bootstrap(x, spec, name=name):
                rows.append(
                    {
                        "cost_ratio": k,
                        "statistic": name,
                        "block_length": b.block_length,
                        "point_estimate": b.point_estimate,
                        "se": b.se,
                        "ci_low": b.ci_low,
                        "ci_high": b.ci_high,
                        "n": b.n,
                        "replications": b.replications,
                        "mean_loss_ratio": mean_ratio,
                    }
                )
    return rows


MECHANISM_COLUMNS = [
    "cost_ratio",
    "iqr_source",
    "variable",
    "coef",
    "hac_se",
    "t",
    "p",
    "r_squared",
    "n_obs",
    "lags",
    "n_excluded",
]


def mechanism_rows(cost_ratio: float, res: HacOlsResult) -> list[dict]:
    return [
        {
            "cost_ratio": cost_ratio,
            "iqr_source": res.iqr_source,
            "variable": name,
            "coef": coef,
            "hac_se": se,
            "t": t,
            "p": p,
            "r_squared": res.r_squared,
            "n_obs": res.n_obs,
            "lags": res.lags,
            "n_excluded": int(sum(res.excluded.values())),
        }
        for name, coef, se, t, p in res.rows()
    ]


TERTILE_COLUMNS = [
    "cost_ratio",
    "tertile",
    "n",
    "mean_illicit_share",
    "mean_tau_deploy",
    "mean_loss_ratio",
    "mean_excess_loss",
    "n_ratio_undefined",
]


def tertile_table(results: Sequence[WindowResult]) -> list[dict]:
    rows = []
    for k, v in by_ratio(results).items():
        if len(v) < 3:
            continue
        for t in tertile_summary(v):
            rows.append({"cost_ratio": k, **dict(zip(t.columns(), t.row()))})
    return rows


RECAL_COLUMNS = [
    "cost_ratio",
    "window_len",
    "n_windows",
    "n_defined",
    "deployed_loss",
    "recal_loss",
    "oracle_loss",
    "frac_gap_closed",
    "ci_low",
    "ci_high",
    "frac_gap_closed_of_means",
]


def recal_table(windows: Sequence[RecalWindow], spec: BootstrapSpec, block_length: int) -> list[dict]:
    """Per (cost ratio, window length): means, mean fraction closed and its block-bootstrap CI."""
    groups: dict[tuple[float, int], list[RecalWindow]] = {}
    for w in windows:
        groups.setdefault((w.cost_ratio, w.window_len), []).append(w)
    rows = []
    for (ratio, wl), grp in groups.items():
        grp = sorted(grp, key=lambda w: w.test_step)
        dep = float(np.mean([w.deployed_loss for w in grp]))
        rec = float(np.mean([w.recal_loss for w in grp]))
        orc = float(np.mean([w.oracle_loss for w in grp]))
        fr = np.array([w.frac_gap_closed for w in grp])
        fr = fr[~np.isnan(fr)]
        lo = hi = float("nan")
        if fr.size >= block_length:
            b = moving_block_bootstrap(
                fr,
                BootstrapSpec((block_length,), spec.replications, spec.seed, spec.ci_level),
                name="frac_gap_closed",
            )[0]
            lo, hi = b.ci_low, b.ci_high
        rows.append(
            {
                "cost_ratio": ratio,
                "window_len": wl,
                "n_windows": len(grp),
                "n_defined": int(fr.size),
                "deployed_loss": dep,
                "recal_loss": rec,
                "oracle_loss": orc,
                "frac_gap_closed": float(fr.mean()) if fr.size else float("nan"),
                "ci_low": lo,
                "ci_high": hi,
                "frac_gap_closed_of_means": (1.0 - (rec - orc) / (dep - orc)) if dep > orc else float("nan"),
            }
        )
    return rows


def format_table(title: str, columns: Sequence[str], rows: Sequence[dict]) -> str:
    def cell(v):
        if isinstance(v, float):
            return f"{v:.3f}" if abs(v) < 1000 else f"{v:,.1f}"
        return str(v)

    body = [[cell(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) if body else len(c) for i, c in enumerate(columns)]
    lines = [title, "  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)
