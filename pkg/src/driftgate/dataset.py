"""Time-indexed labelled transactions: Elliptic ingestion, block summaries,
canonical caching and a seeded synthetic drift generator."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import pandas as pd

from driftgate.csvio import skip_rows, write_csv
from driftgate.errors import InputError

log = logging.getLogger(__name__)


class Label(IntEnum):
    UNKNOWN = -1
    LICIT = 0
    ILLICIT = 1


_LABEL_NAMES = {"illicit": Label.ILLICIT, "licit": Label.LICIT, "unknown": Label.UNKNOWN}


@dataclass(frozen=True)
class LabeledRecord:
    tx_id: str
    time_step: int
    label: Label
    features: np.ndarray


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Columnar, immutable collection of labelled records sorted by (time_step, tx_id).

    Build instances through :meth:`from_arrays`, which sorts, validates and
    freezes the arrays. ``labels`` holds 1 for illicit and 0 for licit.
    """

    tx_ids: np.ndarray
    time_steps: np.ndarray
    labels: np.ndarray
    features: np.ndarray

    @classmethod
    def from_arrays(cls, tx_ids, time_steps, labels, features) -> "Dataset":
        tx_ids = np.asarray(tx_ids, dtype=str)
        time_steps = np.asarray(time_steps, dtype=np.int64)
        labels = np.asarray(labels)
        features = np.asarray(features, dtype=np.float64)
        n = tx_ids.shape[0]
        if features.ndim != 2 or features.shape[0] != n:
            raise InputError("features must be a 2-D array with one row per record")
        if time_steps.shape != (n,) or labels.shape != (n,):
            raise InputError("tx_ids, time_steps and labels must have equal length")
        if n and time_steps.min() < 1:
            raise InputError("time_step must be >= 1")
        if np.any((labels != 0) & (labels != 1)):
            raise InputError("labels must be 0 (licit) or 1 (illicit); drop unknowns first")
        if n and len(np.unique(tx_ids)) != n:
            raise InputError("duplicate tx_id")
        order = np.lexsort((tx_ids, time_steps))
        return cls(
            tx_ids=_frozen(tx_ids[order]),
            time_steps=_frozen(time_steps[order]),
            labels=_frozen(labels[order].astype(np.int8)),
            features=_frozen(features[order]),
        )

    def __len__(self) -> int:
        return self.tx_ids.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def time_range(self) -> tuple[int, int]:
        if len(self) == 0:
            raise InputError("empty dataset has no time range")
        return int(self.time_steps[0]), int(self.time_steps[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.unique(self.time_steps)

    def record(self, i: int) -> LabeledRecord:
        return LabeledRecord(
            tx_id=str(self.tx_ids[i]),
            time_step=int(self.time_steps[i]),
            label=Label(int(self.labels[i])),
            features=self.features[i],
        )

    def __iter__(self) -> Iterator[LabeledRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def illicit_share(self, t: int | None = None) -> float:
        lab = self.labels if t is None else self.labels[self.time_steps == t]
        if lab.size == 0:
            return float("nan")
        return float(lab.sum()) / lab.size

    def counts_by_step(self) -> dict[int, int]:
        steps, counts = np.unique(self.time_steps, return_counts=True)
        return {int(s): int(c) for s, c in zip(steps, counts)}

    def step_mask(self, lo: int, hi: int) -> np.ndarray:
        return (self.time_steps >= lo) & (self.time_steps <= hi)

    def subset(self, mask: np.ndarray) -> "Dataset":
        # slicing a sorted dataset keeps it sorted
        return Dataset(
            tx_ids=_frozen(self.tx_ids[mask]),
            time_steps=_frozen(self.time_steps[mask]),
            labels=_frozen(self.labels[mask]),
            features=_frozen(self.features[mask]),
        )


# --------------------------------------------------------------------------
# Elliptic ingestion


DEFAULT_CLASS_MAP = {"1": "illicit", "2": "licit", "unknown": "unknown"}


@dataclass(frozen=True)
class EllipticSchema:
    """Column mapping for the raw features/classes files.

    ``feature_cols=None`` takes every column that is not the id or time column.
    """

    id_col: int = 0
    time_col: int = 1
    feature_cols: tuple[int, ...] | None = None
    class_map: dict = field(default_factory=lambda: dict(DEFAULT_CLASS_MAP))
    missing_class: str = "drop"
    features_header: bool = False
    classes_header: bool = True

    KEYS = (
        "id_col",
        "time_col",
        "feature_cols",
        "class_map",
        "missing_class",
        "features_header",
        "classes_header",
    )

    @classmethod
    def from_dict(cls, d: dict | None) -> "EllipticSchema":
        d = dict(d or {})
        unknown = sorted(set(d) - set(cls.KEYS))
        if unknown:
            raise InputError(f"unknown schema keys: {unknown}")
        if d.get("feature_cols") is not None:
            d["feature_cols"] = tuple(int(c) for c in d["feature_cols"])
        schema = cls(**d)
        schema.validate()
        return schema

    def validate(self) -> None:
        if self.missing_class not in ("drop", "error"):
            raise InputError("missing_class must be 'drop' or 'error'")
        bad = {k: v for k, v in self.class_map.items() if v not in _LABEL_NAMES}
        if bad:
            raise InputError(f"class_map values must be illicit/licit/unknown, got {bad}")
        if self.id_col == self.time_col:
            raise InputError("id_col and time_col must differ")

    def to_dict(self) -> dict:
        return {
            "id_col": self.id_col,
            "time_col": self.time_col,
            "feature_cols": None if self.feature_cols is None else list(self.feature_cols),
            "class_map": dict(self.class_map),
            "missing_class": self.missing_class,
            "features_header": self.features_header,
            "classes_header": self.classes_header,
        }


def _check_field_counts(path: Path, skip: int) -> int:
    lines = path.read_bytes().splitlines()
    body = lines[skip:]
    counts = np.fromiter((ln.count(b",") for ln in body), dtype=np.int64, count=len(body))
    nonblank = np.fromiter((bool(ln.strip()) for ln in body), dtype=bool, count=len(body))
    if not nonblank.any():
        raise InputError(f"{path}: no data rows")
    expected = counts[nonblank][0]
    bad = np.flatnonzero(nonblank & (counts != expected))
    if bad.size:
        row = int(bad[0]) + skip + 1
        raise InputError(
            f"{path}: row {row} has {counts[bad[0]] + 1} columns, expected {expected + 1}"
        )
    return int(expected) + 1


def _numeric_column(raw: pd.Series, path: Path, col: int, skip: int) -> np.ndarray:
    vals = pd.to_numeric(raw, errors="coerce")
    bad = np.flatnonzero(vals.isna().to_numpy())
    if bad.size:
        i = int(bad[0])
        raise InputError(
            f"{path}: row {i + skip + 1}, column {col}: unparseable numeric cell {raw.iloc[i]!r}"
        )
    return vals.to_numpy(dtype=np.float64)


def ingest_elliptic(
    features_path: str | Path,
    classes_path: str | Path,
    schema: EllipticSchema | dict | None = None,
    edges_path: str | Path | None = None,
) -> Dataset:
    """Join the features and classes files on tx id and keep illicit/licit rows.

    ``edges_path`` is accepted for interface compatibility and ignored: only
    node features are used.
    """
    if not isinstance(schema, EllipticSchema):
        schema = EllipticSchema.from_dict(schema)
    features_path = Path(features_path)
    classes_path = Path(classes_path)
    for p in (features_path, classes_path):
        if not p.is_file():
            raise FileNotFoundError(f"no such file: {p}")
    if edges_path is not None:
        log.info("edge file %s ignored (node features only)", edges_path)

    fskip = 1 if schema.features_header else 0
    n_cols = _check_field_counts(features_path, fskip)
    for c in (schema.id_col, schema.time_col, *(schema.feature_cols or ())):
        if not 0 <= c < n_cols:
            raise InputError(f"schema column {c} outside the {n_cols} columns of {features_path}")
    feat_cols = schema.feature_cols
    if feat_cols is None:
        feat_cols = tuple(c for c in range(n_cols) if c not in (schema.id_col, schema.time_col))
    if not feat_cols:
        raise InputError("no feature columns")

    raw = pd.read_csv(
        features_path,
        header=None,
        skiprows=fskip,
        dtype={schema.id_col: str},
        float_precision="round_trip",
        skip_blank_lines=True,
        low_memory=False,
    )
    ids = raw[schema.id_col].astype(str).str.strip().to_numpy()
    steps = _numeric_column(raw[schema.time_col], features_path, schema.time_col, fskip)
    if np.any(steps != np.round(steps)) or np.any(steps < 1):
        i = int(np.flatnonzero((steps != np.round(steps)) | (steps < 1))[0])
        raise InputError(f"{features_path}: row {i + fskip + 1}: time step must be an integer >= 1")
    X = np.empty((len(raw), len(feat_cols)), dtype=np.float64)
    for j, c in enumerate(feat_cols):
        col = raw[c]
        if col.dtype.kind == "f" and not col.isna().any():
            X[:, j] = col.to_numpy(dtype=np.float64)
        else:
            X[:, j] = _numeric_column(col, features_path, c, fskip)

    classes = pd.read_csv(
        classes_path,
        header=None,
        skiprows=1 if schema.classes_header else 0,
        dtype=str,
        keep_default_na=False,
    )
    if classes.shape[1] < 2:
        raise InputError(f"{classes_path}: expected two columns (id, class)")
    cls_ids = classes[0].str.strip()
    cls_vals = classes[1].str.strip()
    unmapped = sorted(set(cls_vals) - set(schema.class_map))
    if unmapped:
        raise InputError(f"{classes_path}: class values not in class_map: {unmapped[:5]}")
    if cls_ids.duplicated().any():
        raise InputError(f"{classes_path}: duplicate id {cls_ids[cls_ids.duplicated()].iloc[0]!r}")
    code = {k: int(_LABEL_NAMES[v]) for k, v in schema.class_map.items()}
    lookup = dict(zip(cls_ids.to_numpy(), cls_vals.map(code).to_numpy()))

    labels = np.fromiter(
        (lookup.get(i, -2) for i in ids), dtype=np.int64, count=len(ids)
    )
    missing = labels == -2
    if missing.any():
        if schema.missing_class == "error":
            i = int(np.flatnonzero(missing)[0])
            raise InputError(f"{features_path}: id {ids[i]!r} (row {i + fskip + 1}) absent from classes file")
        log.info("%d feature rows without a class entry treated as unknown", int(missing.sum()))
    keep = (labels == Label.ILLICIT) | (labels == Label.LICIT)
    return Dataset.from_arrays(ids[keep], steps[keep].astype(np.int64), labels[keep], X[keep])


# --------------------------------------------------------------------------
# Canonical cache


def canonical_header(feature_dim: int) -> list[str]:
    return ["tx_id", "time_step", "label"] + [f"f{k}" for k in range(feature_dim)]


def write_canonical(ds: Dataset, path: str | Path, meta: dict | None = None) -> Path:
    rows = (
        [tid, int(t), int(lab), *x]
        for tid, t, lab, x in zip(
            ds.tx_ids.tolist(), ds.time_steps.tolist(), ds.labels.tolist(), ds.features.tolist()
        )
    )
    return write_csv(path, canonical_header(ds.feature_dim), rows, meta)


def read_canonical(path: str | Path) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    df = pd.read_csv(
        path, skiprows=skip_rows(path), dtype={"tx_id": str}, float_precision="round_trip"
    )
    head = list(df.columns[:3])
    if head != ["tx_id", "time_step", "label"]:
        raise InputError(f"{path}: not a canonical dataset file (header {head})")
    return Dataset.from_arrays(
        df["tx_id"].to_numpy(),
        df["time_step"].to_numpy(),
        df["label"].to_numpy(),
        df.iloc[:, 3:].to_numpy(dtype=np.float64),
    )


# --------------------------------------------------------------------------
# Block summaries


@dataclass(frozen=True)
class BlockSummary:
    lo: int
    hi: int
    count: int
    illicit: int
    illicit_share: float
    cumulative_illicit_share: float


def default_blocks(ds: Dataset, width: int = 10) -> list[tuple[int, int]]:
    lo, hi = ds.time_range
    return [(a, min(a + width - 1, hi)) for a in range(lo, hi + 1, width)]


def describe_blocks(ds: Dataset, block_edges: Sequence[tuple[int, int]]) -> list[BlockSummary]:
    if not block_edges:
        raise InputError("no blocks given")
    t_lo, t_hi = ds.time_range
    prev_hi = None
    for lo, hi in block_edges:
        if lo > hi:
            raise InputError(f"block ({lo}, {hi}) has lo > hi")
        if lo < t_lo or hi > t_hi:
            raise InputError(f"block ({lo}, {hi}) outside time range ({t_lo}, {t_hi})")
        if prev_hi is not None and lo <= prev_hi:
            raise InputError(f"block ({lo}, {hi}) overlaps or precedes the previous block")
        prev_hi = hi

    out = []
    cum_n = cum_ill = 0
    for lo, hi in block_edges:
        m = ds.step_mask(lo, hi)
        n = int(m.sum())
        ill = int(ds.labels[m].sum())
        cum_n += n
        cum_ill += ill
        out.append(
            BlockSummary(
                lo=int(lo),
                hi=int(hi),
                count=n,
                illicit=ill,
                illicit_share=ill / n if n else float("nan"),
                cumulative_illicit_share=cum_ill / cum_n if cum_n else float("nan"),
            )
        )
    return out


# --------------------------------------------------------------------------
# Synthetic drift generator


@dataclass(frozen=True)
class SynthSpec:
    """Per-period two-Gaussian mixture.

    Licit features are standard normal; illicit features are standard normal
    shifted by ``class_mean_shift[t]``, which is either a scalar per period
    (applied to every feature) or a full vector per period.
    """

    n_periods: int
    records_per_period: int
    feature_dim: int
    prevalence_schedule: tuple[float, ...]
    class_mean_shift: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.n_periods < 1 or self.records_per_period < 1:
            raise InputError("n_periods and records_per_period must be >= 1")
        if self.feature_dim < 1:
            raise InputError("feature_dim must be >= 1")
        if len(self.prevalence_schedule) != self.n_periods:
            raise InputError("prevalence_schedule length must equal n_periods")
        if any(not 0.0 <= p <= 1.0 for p in self.prevalence_schedule):
            raise InputError("prevalence_schedule entries must lie in [0, 1]")
        if len(self.class_mean_shift) != self.n_periods:
            raise InputError("class_mean_shift length must equal n_periods")
        self.shift_matrix()

    def shift_matrix(self) -> np.ndarray:
        rows = []
        for s in self.class_mean_shift:
            v = np.atleast_1d(np.asarray(s, dtype=np.float64))
            if v.shape == (1,):
                v = np.full(self.feature_dim, v[0])
            if v.shape != (self.feature_dim,):
                raise InputError("each class_mean_shift entry must be a scalar or a feature_dim vector")
            rows.append(v)
        return np.vstack(rows)

    @classmethod
    def linear(
        cls,
        n_periods: int,
        records_per_period: int,
        feature_dim: int,
        prevalence: tuple[float, float],
        shift: tuple[float, float] | float = 2.0,
        seed: int = 0,
    ) -> "SynthSpec":
        """Prevalence and scalar mean shift interpolated linearly across periods."""
        prev = np.linspace(prevalence[0], prevalence[1], n_periods)
        if isinstance(shift, (int, float)):
            shift = (float(shift), float(shift))
        sh = np.linspace(shift[0], shift[1], n_periods)
        return cls(
            n_periods=n_periods,
            records_per_period=records_per_period,
            feature_dim=feature_dim,
            prevalence_schedule=tuple(float(p) for p in prev),
            class_mean_shift=tuple(float(s) for s in sh),
            seed=seed,
        )

    def to_dict(self) -> dict:
        return {
            "n_periods": self.n_periods,
            "records_per_period": self.records_per_period,
            "feature_dim": self.feature_dim,
            "prevalence_schedule": list(self.prevalence_schedule),
            "class_mean_shift": [
                s if isinstance(s, (int, float)) else list(s) for s in self.class_mean_shift
            ],
            "seed": self.seed,
        }


def generate_synthetic(spec: SynthSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    shifts = spec.shift_matrix()
    n, d = spec.records_per_period, spec.feature_dim
    wt = len(str(spec.n_periods))
    wi = len(str(n - 1))
    ids, steps, labels, feats = [], [], [], []
    for t in range(spec.n_periods):
        y = (rng.random(n) < spec.prevalence_schedule[t]).astype(np.int8)
        x = rng.standard_normal((n, d)) + y[:, None] * shifts[t]
        ids.extend(f"syn-{t + 1:0{wt}d}-{i:0{wi}d}" for i in range(n))
        steps.append(np.full(n, t + 1, dtype=np.int64))
        labels.append(y)
        feats.append(x)
    return Dataset.from_arrays(
        np.array(ids), np.concatenate(steps), np.concatenate(labels), np.vstack(feats)
    )


def illicit_share_by_step(ds: Dataset) -> dict[int, float]:
    return {int(t): ds.illicit_share(int(t)) for t in ds.steps}


__all__ = [
    "BlockSummary",
    "Dataset",
    "EllipticSchema",
    "LabeledRecord",
    "Label",
    "SynthSpec",
    "default_blocks",
    "describe_blocks",
    "generate_synthetic",
    "illicit_share_by_step",
    "ingest_elliptic",
    "read_canonical",
    "write_canonical",
]
