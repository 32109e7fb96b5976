"""Training-moment standardisation, L2-penalised logistic scorer, and score files."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
import pandas as pd
from scipy.special import expit

from driftgate.csvio import skip_rows, write_csv
from driftgate.errors import InputError

STD_FLOOR = 1e-8
_P_LO = np.nextafter(0.0, 1.0)
_P_HI = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.means.shape[0]:
            raise InputError(
                f"feature dimension mismatch: got {X.shape[-1]}, expected {self.means.shape[0]}"
            )
        return (X - self.means) / self.stds


def fit_standardizer(train_features: np.ndarray, floor: float = STD_FLOOR) -> Standardizer:
    """Per-column mean and population std of the training rows (std floored)."""
    X = np.asarray(train_features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InputError("standardizer needs a non-empty 2-D training matrix")
    if X.shape[0] < 2:
        raise InputError("standardizer needs at least two training rows")
    raw = X.std(axis=0)
    # below the floor a column is constant: centre on its first value so it maps to exact zeros
    means = np.where(raw < floor, X[0], X.mean(axis=0))
    return Standardizer(means=means, stds=np.maximum(raw, floor))


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-6
    max_iter: int = 500
    # "mean": lam/2*|w|^2 added to the mean NLL; "total": added to the summed NLL
    l2_scale: str = "mean"


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    intercept: float
    l2_strength: float
    converged: bool
    iterations: int
    grad_norm: float = float("nan")
    objective_trace: tuple[float, ...] = field(default=(), repr=False)


def _effective_lam(lam: float, n: int, opts: SolverOptions) -> float:
    if opts.l2_scale == "mean":
        return lam
    if opts.l2_scale == "total":
        return lam / n
    raise InputError(f"unknown l2_scale {opts.l2_scale!r}")


def objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Mean negative log-likelihood plus ``lam/2 * |w|^2`` (intercept unpenalised)."""
    z = X @ w + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * lam * (w @ w))


def gradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    r = expit(X @ w + b) - y
    return X.T @ r / X.shape[0] + lam * w, float(r.mean())


def train_logistic(
    X: np.ndarray,
    y: np.ndarray,
    lam: float = 1.0,
    opts: SolverOptions | None = None,
) -> LogisticModel:
    """Damped Newton iteration with Armijo backtracking.

    Accepted steps never increase the objective. ``converged`` is set once the
    gradient infinity-norm falls below ``opts.tol``.
    """
    opts = opts or SolverOptions()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise InputError("X rows must match y length")
    if not np.all(np.isfinite(X)):
        raise InputError("non-finite feature values")
    if lam < 0:
        raise InputError("l2 strength must be nonnegative")
    n_pos = y.sum()
    if n_pos == 0 or n_pos == y.shape[0]:
        raise InputError("training labels contain a single class")

    n, d = X.shape
    lam_eff = _effective_lam(lam, n, opts)
    Xa = np.hstack([X, np.ones((n, 1))])
    pen = np.full(d + 1, lam_eff)
    pen[-1] = 0.0

    def f(theta):
        return objective(theta[:-1], theta[-1], X, y, lam_eff)

    theta = np.zeros(d + 1)
    fval = f(theta)
    trace = [fval]
    converged = False
    steps = 0
    while True:
        gw, gb = gradient(theta[:-1], theta[-1], X, y, lam_eff)
        g = np.append(gw, gb)
        gnorm = float(np.max(np.abs(g)))
        if gnorm < opts.tol:
            converged = True
            break
        if steps >= opts.max_iter:
            break
        p = expit(Xa @ theta)
        H = (Xa.T * (p * (1.0 - p))) @ Xa / n
        H[np.diag_indices_from(H)] += pen
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        slope = float(g @ step)
        if not np.isfinite(slope) or slope <= 0:
            step, slope = g, float(g @ g)
        t = 1.0
        while True:
            cand = theta - t * step
            fc = f(cand)
            if fc <= fval - 1e-4 * t * slope or t < 1e-12:
                break
            t *= 0.5
        if not fc <= fval:
            break  # no descent left at working precision
        theta, fval = cand, fc
        trace.append(fval)
        steps += 1

    return LogisticModel(
        weights=theta[:-1].copy(),
        intercept=float(theta[-1]),
        l2_strength=float(lam),
        converged=converged,
        iterations=steps,
        grad_norm=gnorm,
        objective_trace=tuple(trace),
    )


def predict_proba(model: LogisticModel, std: Standardizer | None, features: np.ndarray) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if std is not None:
        X = std.transform(X)
    if X.shape[1] != model.weights.shape[0]:
        raise InputError(
            f"feature dimension mismatch: got {X.shape[1]}, expected {model.weights.shape[0]}"
        )
    return np.clip(expit(X @ model.weights + model.intercept), _P_LO, _P_HI)


# --------------------------------------------------------------------------
# pluggable scorers


class FittedScorer(Protocol):
    def predict(self, X: np.ndarray) -> np.ndarray: ...


class Scorer(Protocol):
    """Anything that can be fitted on a training slice and score new rows."""

    def fit(self, X: np.ndarray, y: np.ndarray) -> FittedScorer: ...


@dataclass(frozen=True)
class FittedLogistic:
    standardizer: Standardizer
    model: LogisticModel

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict_proba(self.model, self.standardizer, X)

    def to_dict(self) -> dict:
        return model_to_dict(self.model, self.standardizer)


@dataclass(frozen=True)
class LogisticScorer:
    lam: float = 1.0
    tol: float = 1e-6
    max_iter: int = 500
    l2_scale: str = "mean"

    def fit(self, X: np.ndarray, y: np.ndarray) -> FittedLogistic:
        std = fit_standardizer(X)
        model = train_logistic(
            std.transform(X),
            y,
            self.lam,
            SolverOptions(tol=self.tol, max_iter=self.max_iter, l2_scale=self.l2_scale),
        )
        return FittedLogistic(std, model)


def model_to_dict(model: LogisticModel, std: Standardizer | None = None) -> dict:
    out = {
        "weights": model.weights.tolist(),
        "intercept": model.intercept,
        "lambda": model.l2_strength,
        "solver": {
            "method": "newton-armijo",
            "converged": model.converged,
            "iterations": model.iterations,
            "grad_norm": model.grad_norm,
        },
    }
    if std is not None:
        out["standardizer"] = {"means": std.means.tolist(), "stds": std.stds.tolist()}
    return out


def model_from_dict(d: dict) -> tuple[LogisticModel, Standardizer | None]:
    solver = d.get("solver", {})
    model = LogisticModel(
        weights=np.asarray(d["weights"], dtype=np.float64),
        intercept=float(d["intercept"]),
        l2_strength=float(d["lambda"]),
        converged=bool(solver.get("converged", False)),
        iterations=int(solver.get("iterations", 0)),
        grad_norm=float(solver.get("grad_norm") or float("nan")),
    )
    std = None
    if "standardizer" in d:
        std = Standardizer(
            means=np.asarray(d["standardizer"]["means"], dtype=np.float64),
            stds=np.asarray(d["standardizer"]["stds"], dtype=np.float64),
        )
    return model, std


def save_model(path: str | Path, model: LogisticModel, std: Standardizer | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, std), indent=2, sort_keys=True) + "\n")


def load_model(path: str | Path) -> tuple[LogisticModel, Standardizer | None]:
    return model_from_dict(json.loads(Path(path).read_text()))


# --------------------------------------------------------------------------
# scored windows


@dataclass(frozen=True, eq=False)
class ScoredWindow:
    scores: np.ndarray
    labels: np.ndarray
    time_steps: np.ndarray
    tx_ids: np.ndarray | None = None

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        y = np.asarray(self.labels)
        t = np.asarray(self.time_steps, dtype=np.int64)
        if not (s.ndim == y.ndim == t.ndim == 1) or not (s.shape == y.shape == t.shape):
            raise InputError("scores, labels and time_steps must be aligned 1-D arrays")
        if np.any(np.isnan(s)) or np.any((s < 0) | (s > 1)):
            raise InputError("scores must lie in [0, 1]")
        if np.any((y != 0) & (y != 1)):
            raise InputError("labels must be 0 or 1")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", y.astype(np.int8))
        object.__setattr__(self, "time_steps", t)
        if self.tx_ids is not None:
            ids = np.asarray(self.tx_ids, dtype=str)
            if ids.shape != s.shape:
                raise InputError("tx_ids must align with scores")
            object.__setattr__(self, "tx_ids", ids)

    def __len__(self) -> int:
        return self.scores.shape[0]

    @property
    def n_pos(self) -> int:
        return int(self.labels.sum())

    def select(self, mask: np.ndarray) -> "ScoredWindow":
        return ScoredWindow(
            self.scores[mask],
            self.labels[mask],
            self.time_steps[mask],
            None if self.tx_ids is None else self.tx_ids[mask],
        )


def export_scores(window: ScoredWindow, path: str | Path, meta: dict | None = None) -> Path:
    ids = window.tx_ids if window.tx_ids is not None else np.arange(len(window)).astype(str)
    rows = zip(ids.tolist(), window.time_steps.tolist(), window.labels.tolist(), window.scores.tolist())
    return write_csv(path, ["tx_id", "time_step", "label", "score"], rows, meta)


def import_scores(path: str | Path) -> ScoredWindow:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    df = pd.read_csv(path, skiprows=skip_rows(path), dtype={"tx_id": str}, float_precision="round_trip")
    missing = {"tx_id", "time_step", "label", "score"} - set(df.columns)
    if missing:
        raise InputError(f"{path}: missing columns {sorted(missing)}")
    line0 = skip_rows(path) + 2  # 1-based line of the first data row
    score = pd.to_numeric(df["score"], errors="coerce").to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~((score >= 0) & (score <= 1)))
    if bad.size:
        i = int(bad[0])
        raise InputError(f"{path}: row {i + line0}: score {df['score'].iloc[i]!r} outside [0, 1]")
    label = pd.to_numeric(df["label"], errors="coerce").to_numpy()
    bad = np.flatnonzero(~np.isin(label, (0, 1)))
    if bad.size:
        i = int(bad[0])
        raise InputError(f"{path}: row {i + line0}: label {df['label'].iloc[i]!r} not in {{0, 1}}")
    steps = pd.to_numeric(df["time_step"], errors="coerce").to_numpy()
    if np.any(np.isnan(steps)):
        raise InputError(f"{path}: unparseable time_step")
    return ScoredWindow(score, label.astype(np.int8), steps.astype(np.int64), df["tx_id"].to_numpy(dtype=str))
