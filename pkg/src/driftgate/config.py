"""Run configuration: a single JSON document, validated strictly before any work.

Schema (every section optional except ``data`` for commands that load data)::

    {
      "data": {"canonical": PATH}
            | {"features": PATH, "classes": PATH, "edges": PATH?, "schema": {...}}
            | {"synthetic": {"n_periods", "records_per_period", "feature_dim",
                             "prevalence_schedule" | "prevalence": [start, end],
                             "class_mean_shift" | "shift": [start, end] | number,
                             "seed"}},
      "blocks": [[lo, hi], ...] | null,
      "model": {"lambda", "tol", "max_iter", "l2_scale"},
      "protocol": {"train_frac", "split_step", "rolling_window", "min_test_labeled",
                   "require_full_window", "seed", "top_k"},
      "cost_ratios": [10, 25],
      "bootstrap": {"block_lengths", "replications", "seed", "ci_level"},
      "recalibration": {"windows", "ci_block_length"},
      "mechanism": {"lags"},
      "output": {"dir", "formats"}
    }

Unknown keys at any level are rejected; all problems are reported together.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
from pathlib import Path
from typing import Any

import numpy as np

from driftgate.csvio import dumps_meta
from driftgate.dataset import EllipticSchema, SynthSpec
from driftgate.errors import InputError
from driftgate.inference import BootstrapSpec
from driftgate.metrics import CostSpec
from driftgate.protocols import ProtocolConfig
from driftgate.scoring import LogisticScorer

CONFIG_ENV = "DRIFTGATE_CONFIG"

DEFAULTS: dict[str, Any] = {
    "data": None,
    "blocks": None,
    "model": {"lambda": 1.0, "tol": 1e-6, "max_iter": 500, "l2_scale": "mean"},
    "protocol": {
        "train_frac": 0.7,
        "split_step": 34,
        "rolling_window": 10,
        "min_test_labeled": 50,
        "require_full_window": False,
        "seed": 0,
        "top_k": 0.01,
    },
    "cost_ratios": [10.0, 25.0],
    "bootstrap": {"block_lengths": [3, 5, 7], "replications": 5000, "seed": 0, "ci_level": 0.95},
    "recalibration": {"windows": [2, 3, 5, 7], "ci_block_length": 5},
    "mechanism": {"lags": 4},
    "output": {"dir": "results", "formats": ["csv", "json"]},
}

_DATA_KEYS = {"canonical", "features", "classes", "edges", "schema", "synthetic"}
_SYNTH_KEYS = {
    "n_periods",
    "records_per_period",
    "feature_dim",
    "prevalence_schedule",
    "prevalence",
    "class_mean_shift",
    "shift",
    "seed",
}


class ConfigError(InputError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(problems))


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


class RunConfig:
    """Validated, fully resolved configuration."""

    def __init__(self, raw: dict | None = None):
        raw = copy.deepcopy(raw or {})
        problems: list[str] = []
        if not isinstance(raw, dict):
            raise ConfigError(["top level must be a JSON object"])
        for k in sorted(set(raw) - set(DEFAULTS)):
            problems.append(f"unknown key '{k}'")
        resolved: dict[str, Any] = {}
        for section, default in DEFAULTS.items():
            given = raw.get(section)
            if isinstance(default, dict):
                if given is None:
                    given = {}
                if not isinstance(given, dict):
                    problems.append(f"'{section}' must be an object")
                    given = {}
                for k in sorted(set(given) - set(default)):
                    problems.append(f"unknown key '{section}.{k}'")
                resolved[section] = {k: given.get(k, v) for k, v in default.items()}
            else:
                resolved[section] = given if section in raw else copy.deepcopy(default)
        self._check(resolved, problems)
        if problems:
            raise ConfigError(problems)
        self.resolved = resolved

    @staticmethod
    def _check(r: dict, problems: list[str]) -> None:
        m = r["model"]
        if not (_is_num(m["lambda"]) and m["lambda"] >= 0):
            problems.append("model.lambda must be a nonnegative number")
        if not (_is_num(m["tol"]) and m["tol"] > 0):
            problems.append("model.tol must be positive")
        if not (_is_int(m["max_iter"]) and m["max_iter"] >= 1):
            problems.append("model.max_iter must be a positive integer")
        if m["l2_scale"] not in ("mean", "total"):
            problems.append("model.l2_scale must be 'mean' or 'total'")

        p = r["protocol"]
        if not (_is_num(p["train_frac"]) and 0 < p["train_frac"] < 1):
            problems.append("protocol.train_frac must lie in (0, 1)")
        for k in ("split_step", "rolling_window", "min_test_labeled"):
            if not (_is_int(p[k]) and p[k] >= 1):
                problems.append(f"protocol.{k} must be a positive integer")
        if not isinstance(p["require_full_window"], bool):
            problems.append("protocol.require_full_window must be a boolean")
        if not _is_int(p["seed"]):
            problems.append("protocol.seed must be an integer")
        if not (_is_num(p["top_k"]) and 0 < p["top_k"] <= 1):
            problems.append("protocol.top_k must lie in (0, 1]")

        cr = r["cost_ratios"]
        if not (isinstance(cr, list) and cr and all(_is_num(c) and c > 0 for c in cr)):
            problems.append("cost_ratios must be a non-empty list of positive numbers")
        elif len(set(cr)) != len(cr):
            problems.append("cost_ratios must be distinct")

        b = r["bootstrap"]
        bl = b["block_lengths"]
        if not (isinstance(bl, list) and bl and all(_is_int(v) and v >= 1 for v in bl)):
            problems.append("bootstrap.block_lengths must be a non-empty list of positive integers")
        if not (_is_int(b["replications"]) and b["replications"] >= 1):
            problems.append("bootstrap.replications must be a positive integer")
        if not _is_int(b["seed"]):
            problems.append("bootstrap.seed must be an integer")
        if not (_is_num(b["ci_level"]) and 0 < b["ci_level"] < 1):
            problems.append("bootstrap.ci_level must lie in (0, 1)")

        rc = r["recalibration"]
        w = rc["windows"]
        if not (isinstance(w, list) and w and all(_is_int(v) and v >= 1 for v in w)):
            problems.append("recalibration.windows must be a non-empty list of positive integers")
        elif _is_int(p["rolling_window"]) and max(w) > p["rolling_window"]:
            problems.append("recalibration.windows may not exceed protocol.rolling_window")
        if not (_is_int(rc["ci_block_length"]) and rc["ci_block_length"] >= 1):
            problems.append("recalibration.ci_block_length must be a positive integer")

        if not (_is_int(r["mechanism"]["lags"]) and r["mechanism"]["lags"] >= 0):
            problems.append("mechanism.lags must be a nonnegative integer")

        o = r["output"]
        if not isinstance(o["dir"], str) or not o["dir"]:
            problems.append("output.dir must be a non-empty string")
        f = o["formats"]
        if not (isinstance(f, list) and f and set(f) <= {"csv", "json"}):
            problems.append("output.formats must be a non-empty subset of ['csv', 'json']")

        blocks = r["blocks"]
        if blocks is not None and not (
            isinstance(blocks, list)
            and all(isinstance(x, list) and len(x) == 2 and all(_is_int(v) for v in x) for x in blocks)
        ):
            problems.append("blocks must be null or a list of [lo, hi] integer pairs")

        d = r["data"]
        if d is None:
            return
        if not isinstance(d, dict):
            problems.append("data must be an object")
            return
        for k in sorted(set(d) - _DATA_KEYS):
            problems.append(f"unknown key 'data.{k}'")
        sources = [k for k in ("canonical", "features", "synthetic") if k in d]
        if len(sources) != 1:
            problems.append("data must name exactly one of 'canonical', 'features' or 'synthetic'")
        if "features" in d and "classes" not in d:
            problems.append("data.features requires data.classes")
        if "schema" in d:
            try:
                EllipticSchema.from_dict(d["schema"])
            except (InputError, TypeError) as exc:
                problems.append(f"data.schema: {exc}")
        if "synthetic" in d:
            s = d["synthetic"]
            if not isinstance(s, dict):
                problems.append("data.synthetic must be an object")
            else:
                for k in sorted(set(s) - _SYNTH_KEYS):
                    problems.append(f"unknown key 'data.synthetic.{k}'")
                try:
                    synth_spec(s)
                except (InputError, KeyError, TypeError, ValueError) as exc:
                    problems.append(f"data.synthetic: {exc}")

    # ------------------------------------------------------------------

    def override(self, *, seed: int | None = None, out: str | None = None) -> "RunConfig":
        raw = copy.deepcopy(self.resolved)
        if seed is not None:
            raw["protocol"]["seed"] = seed
            raw["bootstrap"]["seed"] = seed
            if raw["data"] and "synthetic" in raw["data"]:
                raw["data"]["synthetic"]["seed"] = seed
        if out is not None:
            raw["output"]["dir"] = out
        return RunConfig(raw)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.resolved)

    @property
    def hash(self) -> str:
        return hashlib.sha256(dumps_meta(self.resolved).encode()).hexdigest()[:16]

    def meta(self) -> dict:
        return {"config": self.to_dict(), "config_hash": self.hash}

    @property
    def out_dir(self) -> Path:
        return Path(self.resolved["output"]["dir"])

    @property
    def formats(self) -> list[str]:
        return list(self.resolved["output"]["formats"])

    @property
    def cost_specs(self) -> tuple[CostSpec, ...]:
        return tuple(CostSpec(float(c), 1.0) for c in self.resolved["cost_ratios"])

    def protocol_config(self, protocol: str = "rolling") -> ProtocolConfig:
        p = self.resolved["protocol"]
        return ProtocolConfig(
            protocol=protocol,
            train_frac=float(p["train_frac"]),
            split_step=p["split_step"],
            rolling_window=p["rolling_window"],
            min_test_labeled=p["min_test_labeled"],
            require_full_window=p["require_full_window"],
            cost_specs=self.cost_specs,
            seed=p["seed"],
            top_k=float(p["top_k"]),
        )

    def scorer(self) -> LogisticScorer:
        m = self.resolved["model"]
        return LogisticScorer(
            lam=float(m["lambda"]), tol=float(m["tol"]), max_iter=m["max_iter"], l2_scale=m["l2_scale"]
        )

    def bootstrap_spec(self, block_lengths=None) -> BootstrapSpec:
        b = self.resolved["bootstrap"]
        return BootstrapSpec(
            block_lengths=tuple(block_lengths or b["block_lengths"]),
            replications=b["replications"],
            seed=b["seed"],
            ci_level=float(b["ci_level"]),
        )


def synth_spec(s: dict) -> SynthSpec:
    """Build a SynthSpec from explicit schedules or (start, end) linear ramps."""
    n = s["n_periods"]
    if "prevalence_schedule" in s and "prevalence" in s:
        raise InputError("give either prevalence_schedule or prevalence, not both")
    if "class_mean_shift" in s and "shift" in s:
        raise InputError("give either class_mean_shift or shift, not both")
    if "prevalence_schedule" in s:
        prev = [float(v) for v in s["prevalence_schedule"]]
    else:
        a, b = s.get("prevalence", (0.1, 0.1))
        prev = np.linspace(a, b, n).tolist()
    if "class_mean_shift" in s:
        shift = [v if _is_num(v) else tuple(v) for v in s["class_mean_shift"]]
    else:
        sh = s.get("shift", 2.0)
        shift = [float(sh)] * n if _is_num(sh) else np.linspace(sh[0], sh[1], n).tolist()
    return SynthSpec(
        n_periods=n,
        records_per_period=s["records_per_period"],
        feature_dim=s["feature_dim"],
        prevalence_schedule=tuple(prev),
        class_mean_shift=tuple(shift),
        seed=s.get("seed", 0),
    )


def load_config(path: str | Path | None) -> RunConfig:
    """Read a config file; falls back to ``$DRIFTGATE_CONFIG``, then to defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    if path is None:
        return RunConfig({})
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON ({exc})"]) from exc
    return RunConfig(raw)
