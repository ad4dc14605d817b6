"""Command-line interface: ``alip run|baseline|ablate|simulate|score``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AlipError
from .formulation import Enhancements
from .io import (
    BLOCKS_SCHEMA,
    ColumnMap,
    _rows,
    block_rows,
    downsample,
    emit_report,
    load_csv,
    report_dict,
    write_csv,
    write_estimates,
)
from .metrics import score
from .modelfile import dump_model, load_model, load_scenario
from .pipeline import PipelineConfig, run
from .simgen import PRESETS, preset, simulate

ABLATION_SCHEMA = "alip-ablation/1"
STAGES = ("constraints", "std", "median", "lp")


def _flags(stages) -> Enhancements:
    on = set(stages)
    return Enhancements(
        constraints="constraints" in on,
        std_correction="std" in on,
        median="median" in on,
        lp_refine="lp" in on,
    )


def _stage_list(text):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    bad = [p for p in parts if p not in STAGES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown stage(s) {', '.join(bad)}; choose from {', '.join(STAGES)}")
    return parts


def _channel(text):
    if "=" in text:
        aid, col = text.split("=", 1)
        return aid, col
    return text, text


def _header(path, delimiter):
    with Path(path).open(newline="") as fh:
        for _, fields in _rows(fh, delimiter):
            return [f.strip() for f in fields]
    return []


def _column_map(args, ids, path):
    if args.channel:
        channels = dict(args.channel)
    elif args.no_truth:
        channels = {}
    else:
        header = set(_header(path, args.delimiter))
        channels = {i: i for i in ids if i in header}
    return ColumnMap(
        timestamp=args.timestamp_col,
        aggregate=args.aggregate_col or None,
        channels=channels,
    )


def _scenario(args):
    if args.scenario:
        sc = load_scenario(args.scenario)
        if args.seed is not None or args.length is not None:
            from dataclasses import replace

            sc = replace(
                sc,
                seed=sc.seed if args.seed is None else args.seed,
                length=sc.length if args.length is None else args.length,
            )
        return sc
    return preset(
        args.preset,
        seed=0 if args.seed is None else args.seed,
        length=10_000 if args.length is None else args.length,
    )


def _inputs(args):
    """Resolve ``(model, series)`` from --model/--data or a simulated scenario."""
    if args.data:
        if not args.model:
            raise AlipError("--data needs --model")
        model = load_model(args.model)
        series = load_csv(args.data, _column_map(args, model.ids, args.data), delimiter=args.delimiter)
        if series.truth is not None and series.channels != model.ids:
            missing = [i for i in model.ids if i not in series.channels]
            print(f"note: no ground truth for {', '.join(missing)}; accuracy not scored", file=sys.stderr)
            series.truth = None
    elif args.preset or args.scenario:
        sc = _scenario(args)
        model = load_model(args.model) if args.model else sc.model
        series, _ = simulate(sc)
        if model.ids != sc.model.ids:
            raise AlipError("--model appliances do not match the scenario's")
    else:
        raise AlipError("give --data (with --model), --preset or --scenario")
    if args.factor > 1:
        series = downsample(series, args.factor, args.mode)
    if series.dropped_rows or series.clipped_rows:
        print(f"note: dropped {series.dropped_rows} rows, clipped {series.clipped_rows} negative readings", file=sys.stderr)
    return model, series


def _config(args, flags) -> PipelineConfig:
    return PipelineConfig(
        lag=args.lag,
        flags=flags,
        block_size=args.block_size,
        threads=args.threads,
        refine_anchor=args.refine_anchor,
    )


def _summary(result, out):
    print(f"{result.label}: {result.counters['samples']} samples", file=out)
    acc = result.accuracy
    if acc is not None:
        print(f"  ACC {acc.acc:.6f}", file=out)
        for i, v in zip(acc.ids, acc.ac):
            print(f"  AC {i:<12} {v:.6f}", file=out)
        for note in acc.notes:
            print(f"  note: {note}", file=out)
    counters = ", ".join(f"{k}={v}" for k, v in result.counters.items() if k != "samples")
    print(f"  corrections: {counters}", file=out)
    t = result.timing
    stages = " ".join(f"{k}={t[k]:.3f}s" for k in ("milp", "std", "median", "lp") if k in t)
    print(f"  time: {t['per_sample_ms']:.3f} ms/sample ({stages})", file=out)


def _cmd_pipeline(args, flags):
    model, series = _inputs(args)
    result = run(model, series.aggregate, _config(args, flags), truth=series.truth)
    _summary(result, sys.stdout)
    emit_report(result, args.report, args.plot_data if result.accuracy is not None else None, timing=args.timing)
    if args.plot_data and result.accuracy is None:
        print("note: no ground truth, per-block plot data not written", file=sys.stderr)
    if args.estimates:
        write_estimates(result, series.timestamps, args.estimates)
    return 0


def cmd_run(args):
    return _cmd_pipeline(args, _flags(args.stages))


def cmd_baseline(args):
    return _cmd_pipeline(args, Enhancements.none())


def cmd_ablate(args):
    model, series = _inputs(args)
    if series.truth is None:
        raise AlipError("ablate needs ground truth")
    configs = [()] + [(s,) for s in STAGES] + [STAGES]
    results = []
    for stages in configs:
        result = run(model, series.aggregate, _config(args, _flags(stages)), truth=series.truth)
        results.append(result)
        print(
            f"{result.label:<28} ACC {result.accuracy.acc:.6f}  {result.timing['per_sample_ms']:.3f} ms/sample",
            flush=True,
        )
    if args.report:
        doc = {"schema": ABLATION_SCHEMA, "runs": [report_dict(r, args.timing) for r in results]}
        Path(args.report).write_text(json.dumps(doc, indent=2) + "\n")
    if args.plot_data:
        header, _ = block_rows(results[0].accuracy)
        with Path(args.plot_data).open("w", newline="") as fh:
            fh.write(f"# schema={BLOCKS_SCHEMA}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header[:4] + [f"ACC_{r.label}" for r in results])
            blocks = [r.accuracy.blocks for r in results]
            for b, blk in enumerate(blocks[0]):
                w.writerow([b, blk.start, blk.length, int(blk.partial)] + [repr(float(bs[b].acc)) for bs in blocks])
    return 0


def cmd_simulate(args):
    sc = _scenario(args)
    series, _ = simulate(sc)
    if args.factor > 1:
        series = downsample(series, args.factor, args.mode)
    write_csv(series, args.out, delimiter=args.delimiter)
    if args.model_out:
        Path(args.model_out).write_text(dump_model(sc.model))
    print(f"{sc.name}: {len(series)} samples, seed {sc.seed} -> {args.out}")
    return 0


def cmd_score(args):
    est_header = _header(args.estimates, ",")
    ids = [c for c in est_header if c not in ("timestamp", "aggregate", "corrected") and not c.startswith("state_")]
    if not ids:
        raise AlipError(f"{args.estimates}: no appliance columns")
    est = load_csv(args.estimates, ColumnMap(channels={i: i for i in ids}))
    cmap = ColumnMap(timestamp=args.timestamp_col, aggregate=args.aggregate_col or None, channels=dict(args.channel) if args.channel else {i: i for i in ids})
    gt = load_csv(args.data, cmap, delimiter=args.delimiter)
    if args.factor > 1:
        gt = downsample(gt, args.factor, args.mode)
    if len(gt) != len(est):
        raise AlipError(f"ground truth has {len(gt)} samples, estimates have {len(est)}")
    report = score(gt.truth, est.truth, tuple(ids), args.block_size)
    print(f"ACC {report.acc:.6f}")
    for i, v in zip(report.ids, report.ac):
        print(f"AC {i:<12} {v:.6f}")
    for note in report.notes:
        print(f"note: {note}")
    if args.report:
        doc = {
            "schema": "alip-score/1",
            "appliances": list(report.ids),
            "ACC": float(report.acc),
            "AC": {i: (None if np.isnan(v) else float(v)) for i, v in zip(report.ids, report.ac)},
            "blocks": len(report.blocks),
            "notes": list(report.notes),
        }
        Path(args.report).write_text(json.dumps(doc, indent=2) + "\n")
    if args.plot_data:
        header, rows = block_rows(report)
        with Path(args.plot_data).open("w", newline="") as fh:
            fh.write(f"# schema={BLOCKS_SCHEMA}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    return 0


def _add_data_opts(p, sim=True):
    g = p.add_argument_group("input")
    g.add_argument("--model", help="household model (YAML)")
    g.add_argument("--data", help="reading series CSV")
    g.add_argument("--delimiter", default=",", help="CSV delimiter (default ',')")
    g.add_argument("--timestamp-col", default="timestamp")
    g.add_argument("--aggregate-col", default="aggregate", help="empty string: sum the channels")
    g.add_argument(
        "--channel",
        action="append",
        type=_channel,
        metavar="ID[=COLUMN]",
        help="ground-truth column for an appliance (repeatable; default: columns named like the appliances)",
    )
    g.add_argument("--no-truth", action="store_true", help="ignore ground-truth columns")
    if sim:
        g.add_argument("--preset", choices=PRESETS, help="simulate a bundled scenario instead of reading --data")
        g.add_argument("--scenario", help="simulate a scenario file instead of reading --data")
        g.add_argument("--length", type=int, help="samples to simulate")
    g.add_argument("--seed", type=int, help="simulation seed")
    g.add_argument("--factor", type=int, default=1, help="downsampling factor (default 1)")
    g.add_argument("--mode", choices=("decimate", "mean"), default="decimate")


def _add_pipeline_opts(p):
    g = p.add_argument_group("pipeline")
    g.add_argument("--lag", type=int, default=4, help="median lag L (default 4)")
    g.add_argument("--block-size", type=int, default=5040, help="samples per scoring block (default 5040)")
    g.add_argument("--threads", type=int, default=1, help="worker processes for the per-sample solves")
    g.add_argument("--refine-anchor", choices=("rating", "lower"), default="rating")
    g = p.add_argument_group("output")
    g.add_argument("--report", help="JSON report path")
    g.add_argument("--plot-data", help="per-block CSV path")
    g.add_argument("--timing", action="store_true", help="include wall-clock timing in the report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alip", description="Aided linear integer programming load disaggregation.")
    parser.add_argument("--version", action="version", version=f"alip {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline")
    _add_data_opts(p)
    _add_pipeline_opts(p)
    p.add_argument("--stages", type=_stage_list, default=list(STAGES), help="comma list of enabled stages")
    p.add_argument("--estimates", help="per-sample estimates CSV path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("baseline", help="plain IP, every enhancement off")
    _add_data_opts(p)
    _add_pipeline_opts(p)
    p.add_argument("--estimates", help="per-sample estimates CSV path")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("ablate", help="IP, each stage alone, and the full pipeline")
    _add_data_opts(p)
    _add_pipeline_opts(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("simulate", help="write a synthetic reading series")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--preset", choices=PRESETS)
    g.add_argument("--scenario")
    p.add_argument("--seed", type=int)
    p.add_argument("--length", type=int)
    p.add_argument("--factor", type=int, default=1)
    p.add_argument("--mode", choices=("decimate", "mean"), default="decimate")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--model-out", help="also write the scenario's model (YAML)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("score", help="score an estimates CSV against ground truth")
    _add_data_opts(p, sim=False)
    p.add_argument("--estimates", required=True, help="estimates CSV written by run --estimates")
    p.add_argument("--block-size", type=int, default=5040)
    p.add_argument("--report")
    p.add_argument("--plot-data")
    p.set_defaults(func=cmd_score)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "data", None) is None and args.command == "score":
        parser.error("score needs --data")
    try:
        return args.func(args)
    except (AlipError, ValueError, OSError) as exc:
        print(f"alip: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
