"""Command-line entry point.

    driftgate ingest|synth|run <random|forward|rolling>|recalibrate|bootstrap|mechanism|report
              [--config PATH] [--out DIR] [--seed N]

Exit codes: 0 success, 1 computation error, 2 input/config error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import pandas as pd

from driftgate import kernels
from driftgate import report as rp
from driftgate.config import RunConfig, load_config, synth_spec
from driftgate.csvio import read_meta, skip_rows, write_csv, write_json
from driftgate.dataset import (
    Dataset,
    EllipticSchema,
    default_blocks,
    describe_blocks,
    generate_synthetic,
    ingest_elliptic,
    read_canonical,
    write_canonical,
)
from driftgate.errors import ComputationError, InputError
from driftgate.inference import mechanism_ols
from driftgate.protocols import (
    RecalResult,
    RecalWindow,
    WindowResult,
    forward_split,
    random_split,
    run_recalibration,
    run_rolling,
    window_result_from_row,
    evaluate_split,
)

log = logging.getLogger("driftgate")


def ratio_tag(ratio: float) -> str:
    return f"r{ratio:g}"


# --------------------------------------------------------------------------
# data loading


def load_dataset(cfg: RunConfig) -> Dataset:
    d = cfg.resolved["data"]
    if d is None:
        raise InputError("config has no 'data' section")
    if "canonical" in d:
        return read_canonical(d["canonical"])
    if "features" in d:
        return ingest_elliptic(
            d["features"], d["classes"], EllipticSchema.from_dict(d.get("schema")), d.get("edges")
        )
    return generate_synthetic(synth_spec(d["synthetic"]))


def _blocks(cfg: RunConfig, ds: Dataset) -> list[tuple[int, int]]:
    b = cfg.resolved["blocks"]
    return [tuple(x) for x in b] if b is not None else default_blocks(ds)


BLOCK_COLUMNS = ["lo", "hi", "count", "illicit", "illicit_share", "cumulative_illicit_share"]


def _write_dataset_outputs(cfg: RunConfig, ds: Dataset, kind: str) -> None:
    out = cfg.out_dir
    meta = cfg.meta()
    write_canonical(ds, out / "dataset.csv", meta)
    blocks = describe_blocks(ds, _blocks(cfg, ds))
    rows = [[getattr(b, c) for c in BLOCK_COLUMNS] for b in blocks]
    write_csv(out / "illicit_share_blocks.csv", BLOCK_COLUMNS + ["config_hash"], [r + [cfg.hash] for r in rows], meta)
    lo, hi = ds.time_range
    summary = {
        **meta,
        "source": kind,
        "records": len(ds),
        "feature_dim": ds.feature_dim,
        "time_range": [lo, hi],
        "illicit_share": ds.illicit_share(),
        "counts_by_step": {str(k): v for k, v in ds.counts_by_step().items()},
        "blocks": [dict(zip(BLOCK_COLUMNS, r)) for r in rows],
    }
    write_json(out / f"{kind}_summary.json", summary)
    print(f"{len(ds)} labelled records, {ds.feature_dim} features, steps {lo}-{hi}, "
          f"illicit share {ds.illicit_share():.3f}")
    print(rp.format_table("illicit share by time-step block", BLOCK_COLUMNS,
                          [dict(zip(BLOCK_COLUMNS, r)) for r in rows]))


def cmd_ingest(cfg: RunConfig, args) -> None:
    d = cfg.resolved["data"]
    if not d or "features" not in d:
        raise InputError("ingest needs data.features and data.classes in the config")
    _write_dataset_outputs(cfg, load_dataset(cfg), "ingest")


def cmd_synth(cfg: RunConfig, args) -> None:
    d = cfg.resolved["data"]
    if not d or "synthetic" not in d:
        raise InputError("synth needs data.synthetic in the config")
    _write_dataset_outputs(cfg, load_dataset(cfg), "synth")


# --------------------------------------------------------------------------
# protocol runs


def _write_results(cfg: RunConfig, name: str, results: list[WindowResult], extra: dict | None = None) -> None:
    out = cfg.out_dir
    meta = cfg.meta()
    if "csv" in cfg.formats:
        write_csv(out / f"results_{name}.csv", WindowResult.columns(), [r.row() for r in results], meta)
    if "json" in cfg.formats:
        payload = {
            **meta,
            "backend": kernels.BACKEND,
            "results": [dict(zip(WindowResult.columns(), r.row())) for r in results],
            **(extra or {}),
        }
        write_json(out / f"results_{name}.json", payload)


FIGURE_COLUMNS = ["step", "deployed_loss", "oracle_loss", "tau_train", "tau_oracle", "loss_ratio", "prevalence"]


def _write_figure_data(cfg: RunConfig, results: list[WindowResult]) -> None:
    for ratio, rs in rp.by_ratio(results).items():
        rows = [
            (r.test_step, r.deployed_loss, r.oracle_loss, r.tau_train, r.tau_oracle, r.loss_ratio, r.illicit_share_test)
            for r in rs
        ]
        write_csv(cfg.out_dir / f"figure_data_rolling_{ratio_tag(ratio)}.csv", FIGURE_COLUMNS, rows, cfg.meta())


def cmd_run(cfg: RunConfig, args) -> None:
    ds = load_dataset(cfg)
    protocol = args.protocol
    pc = cfg.protocol_config(protocol)
    scorer = cfg.scorer()
    if protocol == "rolling":
        run = run_rolling(ds, scorer, pc)
        _write_results(cfg, "rolling", run.results, {"skipped": [list(s) for s in run.skipped]})
        _write_figure_data(cfg, run.results)
        results = run.results
        print(f"rolling: {len(run.eligible_steps)} eligible windows, {len(run.skipped)} skipped")
        print(rp.format_table("deployment gap", rp.GAP_COLUMNS, rp.gap_table(results)))
        return
    split = (random_split if protocol == "random" else forward_split)(ds, pc, scorer)
    results = evaluate_split(split, pc, protocol)
    model = split.fitted.to_dict() if hasattr(split.fitted, "to_dict") else {}
    _write_results(cfg, protocol, results)
    if "json" in cfg.formats and model:
        write_json(cfg.out_dir / f"model_{protocol}.json", {**cfg.meta(), "model": model})
    print(rp.format_table(f"{protocol} split", rp.SPLIT_COLUMNS, rp.split_table(results)))


def cmd_recalibrate(cfg: RunConfig, args) -> None:
    ds = load_dataset(cfg)
    run = run_recalibration(ds, cfg.scorer(), cfg.protocol_config("rolling"), cfg.resolved["recalibration"]["windows"])
    meta = cfg.meta()
    out = cfg.out_dir
    if "csv" in cfg.formats:
        write_csv(out / "recalibration.csv", RecalResult.columns(), [s.row() for s in run.summaries], meta)
        write_csv(out / "recalibration_windows.csv", RecalWindow.columns(), [w.row() for w in run.windows], meta)
    if "json" in cfg.formats:
        write_json(
            out / "recalibration.json",
            {
                **meta,
                "summaries": [dict(zip(RecalResult.columns(), s.row())) for s in run.summaries],
                "windows": [dict(zip(RecalWindow.columns(), w.row())) for w in run.windows],
            },
        )
    print(rp.format_table("recalibration", RecalResult.columns(),
                          [dict(zip(RecalResult.columns(), s.row())) for s in run.summaries]))


# --------------------------------------------------------------------------
# inference on stored results


def read_results(path: Path) -> tuple[list[WindowResult], dict | None]:
    if not path.is_file():
        raise InputError(f"missing upstream results: {path}")
    df = pd.read_csv(path, skiprows=skip_rows(path), float_precision="round_trip")
    return [window_result_from_row(row) for row in df.to_dict("records")], read_meta(path)


def _upstream_hash(meta: dict | None) -> str:
    return (meta or {}).get("config_hash", "unknown")


def _rolling(cfg: RunConfig) -> tuple[list[WindowResult], str]:
    results, meta = read_results(cfg.out_dir / "results_rolling.csv")
    return results, _upstream_hash(meta)


def _emit(cfg: RunConfig, name: str, columns: list[str], rows: list[dict], title: str, quiet=False) -> None:
    meta = cfg.meta()
    cols = columns + ["config_hash"]
    if "csv" in cfg.formats:
        write_csv(cfg.out_dir / f"{name}.csv", cols, [[r.get(c) for c in cols] for r in rows], meta)
    if "json" in cfg.formats:
        write_json(cfg.out_dir / f"{name}.json", {**meta, "rows": rows})
    if not quiet:
        print(rp.format_table(title, columns, rows))


def cmd_bootstrap(cfg: RunConfig, args) -> None:
    results, up = _rolling(cfg)
    rows = [{**r, "config_hash": up} for r in rp.bootstrap_table(results, cfg.bootstrap_spec())]
    _emit(cfg, "bootstrap", rp.BOOTSTRAP_COLUMNS, rows, "moving block bootstrap")


def cmd_mechanism(cfg: RunConfig, args) -> None:
    results, up = _rolling(cfg)
    lags = cfg.resolved["mechanism"]["lags"]
    rows = []
    for ratio, rs in rp.by_ratio(results).items():
        for src in ("test", "train"):
            rows += rp.mechanism_rows(ratio, mechanism_ols(rs, src, lags))
    rows = [{**r, "config_hash": up} for r in rows]
    _emit(cfg, "mechanism", rp.MECHANISM_COLUMNS, rows, f"HAC OLS (Newey-West, {lags} lags)")


def cmd_report(cfg: RunConfig, args) -> None:
    out = cfg.out_dir
    produced = []

    def tag(rows, up):
        return [{**r, "config_hash": up} for r in rows]

    if (out / "results_rolling.csv").is_file():
        results, up = _rolling(cfg)
        _emit(cfg, "report_deployment_gap", rp.GAP_COLUMNS, tag(rp.gap_table(results), up), "deployment gap")
        _emit(cfg, "report_rolling", rp.ROLLING_COLUMNS, tag(rp.rolling_table(results), up), "rolling summary")
        _emit(cfg, "report_tertiles", rp.TERTILE_COLUMNS, tag(rp.tertile_table(results), up), "prevalence tertiles")
        produced += ["report_deployment_gap", "report_rolling", "report_tertiles"]
    static = []
    for protocol in ("random", "forward"):
        p = out / f"results_{protocol}.csv"
        if p.is_file():
            res, meta = read_results(p)
            static += tag(rp.split_table(res), _upstream_hash(meta))
    if static:
        _emit(cfg, "report_static_splits", rp.SPLIT_COLUMNS, static, "random vs forward")
        produced.append("report_static_splits")
    for src, name, cols, title in (
        ("bootstrap.csv", "report_bootstrap", rp.BOOTSTRAP_COLUMNS, "block bootstrap"),
        ("mechanism.csv", "report_mechanism", rp.MECHANISM_COLUMNS, "mechanism regression"),
    ):
        p = out / src
        if p.is_file():
            df = pd.read_csv(p, skiprows=skip_rows(p), float_precision="round_trip")
            _emit(cfg, name, cols, df.to_dict("records"), title)
            produced.append(name)
    p = out / "recalibration_windows.csv"
    if p.is_file():
        df = pd.read_csv(p, skiprows=skip_rows(p), float_precision="round_trip")
        windows = [RecalWindow(**{k: (int(v) if k in ("test_step", "window_len", "steps_used") else float(v))
                                  for k, v in row.items()}) for row in df.to_dict("records")]
        rows = rp.recal_table(windows, cfg.bootstrap_spec(), cfg.resolved["recalibration"]["ci_block_length"])
        _emit(cfg, "report_recalibration", rp.RECAL_COLUMNS, tag(rows, _upstream_hash(read_meta(p))), "recalibration")
        produced.append("report_recalibration")
    if not produced:
        raise InputError(f"missing upstream results in {out}: run `driftgate run ...` first")


COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "run": cmd_run,
    "recalibrate": cmd_recalibrate,
    "bootstrap": cmd_bootstrap,
    "mechanism": cmd_mechanism,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config (default: $DRIFTGATE_CONFIG)")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="override every seed in the config")
    parser = argparse.ArgumentParser(prog="driftgate", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "run":
            sp.add_argument("protocol", choices=["random", "forward", "rolling"])
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config).override(seed=args.seed, out=args.out)
        COMMANDS[args.command](cfg, args)
    except (InputError, FileNotFoundError) as exc:
        print(f"driftgate: error: {exc}", file=sys.stderr)
        return 2
    except (ComputationError, ArithmeticError, RuntimeError) as exc:
        print(f"driftgate: computation failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
