"""Reading-series CSV ingestion, downsampling and report emission."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import AlipError, MissingColumn, ParseError

READINGS_SCHEMA = "alip-readings/1"
REPORT_SCHEMA = "alip-report/1"
BLOCKS_SCHEMA = "alip-blocks/1"
ESTIMATES_SCHEMA = "alip-estimates/1"


@dataclass
class ReadingSeries:
    timestamps: np.ndarray
    aggregate: np.ndarray
    truth: np.ndarray | None = None
    channels: tuple[str, ...] = ()
    dropped_rows: int = 0
    clipped_rows: int = 0

    def __post_init__(self):
        self.aggregate = np.asarray(self.aggregate, dtype=float)
        if len(self.timestamps) != self.aggregate.size:
            raise ValueError("timestamps and aggregate differ in length")
        if self.truth is not None:
            self.truth = np.asarray(self.truth, dtype=float).reshape(self.aggregate.size, -1)
            if self.channels and len(self.channels) != self.truth.shape[1]:
                raise ValueError("channel names do not match ground-truth columns")

    def __len__(self):
        return self.aggregate.size


@dataclass
class ColumnMap:
    """Which CSV columns hold what. ``channels`` maps appliance id -> column."""

    timestamp: str = "timestamp"
    aggregate: str | None = "aggregate"
    channels: dict = field(default_factory=dict)


def _rows(fh, delimiter):
    """Yield ``(line_number, fields)``, skipping blank and ``#`` comment lines."""
    reader = csv.reader(fh, delimiter=delimiter)
    for fields in reader:
        if not fields or (len(fields) == 1 and not fields[0].strip()):
            continue
        if fields[0].lstrip().startswith("#"):
            continue
        yield reader.line_num, fields


def _to_float(text, line, column):
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"column {column!r}: cannot parse {text!r} as a number", line) from None


def load_csv(path, column_map: ColumnMap | dict | None = None, delimiter: str = ",") -> ReadingSeries:
    """Load a reading series.

    Rows with a non-finite aggregate or channel value are dropped and counted;
    negative aggregates are clipped to zero and counted. When the aggregate
    column is absent (or mapped to ``None``) it is the row sum of the channels.
    """
    if column_map is None:
        column_map = ColumnMap()
    elif isinstance(column_map, dict):
        column_map = ColumnMap(**column_map)
    path = Path(path)
    with path.open(newline="") as fh:
        rows = _rows(fh, delimiter)
        try:
            header_line, header = next(rows)
        except StopIteration:
            raise ParseError(f"{path}: no header row") from None
        header = [h.strip() for h in header]
        index = {h: i for i, h in enumerate(header)}

        if column_map.timestamp not in index:
            raise MissingColumn(f"{path}: timestamp column {column_map.timestamp!r} not in header")
        channels = dict(column_map.channels)
        agg_col = column_map.aggregate if column_map.aggregate in index else None
        if column_map.aggregate and agg_col is None and not channels:
            raise MissingColumn(f"{path}: aggregate column {column_map.aggregate!r} not in header")
        for name, col in channels.items():
            if col not in index:
                raise MissingColumn(f"{path}: channel {name!r} column {col!r} not in header")

        stamps, agg, truth = [], [], []
        dropped = clipped = 0
        for line, fields in rows:
            if len(fields) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(fields)}", line)
            chan = [_to_float(fields[index[c]], line, c) for c in channels.values()]
            if agg_col is not None:
                a = _to_float(fields[index[agg_col]], line, agg_col)
            else:
                a = math.fsum(chan)
            if not math.isfinite(a) or not all(math.isfinite(x) for x in chan):
                dropped += 1
                continue
            if a < 0:
                a = 0.0
                clipped += 1
            stamps.append(fields[index[column_map.timestamp]].strip())
            agg.append(a)
            truth.append(chan)

    try:
        ts = np.array([float(s) for s in stamps])
    except ValueError:
        ts = np.array(stamps, dtype=object)
    else:
        if np.any(np.diff(ts) < 0):
            raise ParseError(f"{path}: timestamps are not monotone")
    return ReadingSeries(
        timestamps=ts,
        aggregate=np.array(agg, dtype=float),
        truth=np.array(truth, dtype=float).reshape(len(agg), len(channels)) if channels else None,
        channels=tuple(channels),
        dropped_rows=dropped,
        clipped_rows=clipped,
    )


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_csv(series: ReadingSeries, path, delimiter: str = ","):
    """Write ``series`` as ``timestamp, aggregate[, channel...]`` with a schema line."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema={READINGS_SCHEMA}\n")
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["timestamp", "aggregate", *series.channels])
        for k in range(len(series)):
            row = [_fmt(series.timestamps[k]), _fmt(series.aggregate[k])]
            if series.truth is not None:
                row += [_fmt(v) for v in series.truth[k]]
            w.writerow(row)


def downsample(series: ReadingSeries, factor: int, mode: str = "decimate") -> ReadingSeries:
    """Keep every ``factor``-th sample, or average non-overlapping windows.

    In ``mean`` mode a trailing partial window is dropped and each window is
    stamped with its first timestamp.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if mode not in ("decimate", "mean"):
        raise ValueError(f"unknown downsampling mode {mode!r}")
    if factor == 1:
        return replace(series)
    if mode == "decimate":
        sel = slice(None, None, factor)
        return replace(
            series,
            timestamps=series.timestamps[sel],
            aggregate=series.aggregate[sel],
            truth=None if series.truth is None else series.truth[sel],
        )
    full = (len(series) // factor) * factor

    def pool(a):
        return a[:full].reshape(full // factor, factor, *a.shape[1:]).mean(axis=1)

    return replace(
        series,
        timestamps=series.timestamps[:full:factor],
        aggregate=pool(series.aggregate),
        truth=None if series.truth is None else pool(series.truth),
    )


def _num(x):
    x = float(x)
    return None if math.isnan(x) else x


def report_dict(result, timing: bool = False) -> dict:
    """Structured report for a pipeline result. Timing is opt-in because it
    is the only nondeterministic content."""
    cfg = result.config
    flags = cfg.flags
    out = {
        "schema": REPORT_SCHEMA,
        "label": result.label,
        "config": {
            "lag": cfg.lag,
            "block_size": cfg.block_size,
            "order": list(cfg.order),
            "constraints": flags.constraints,
            "std_correction": flags.std_correction,
            "median": flags.median,
            "lp_refine": flags.lp_refine,
            "refine_anchor": cfg.refine_anchor,
        },
        "appliances": list(result.ids),
        "counters": dict(result.counters),
    }
    acc = result.accuracy
    if acc is not None:
        out["accuracy"] = {
            "ACC": _num(acc.acc),
            "AC": {i: _num(v) for i, v in zip(acc.ids, acc.ac)},
            "blocks": len(acc.blocks),
            "notes": list(acc.notes),
        }
    if timing:
        out["timing"] = {k: float(v) for k, v in result.timing.items()}
    return out


def block_rows(report):
    """Flat per-block rows: ACC plus per-appliance AC and the error/truth masses
    needed to re-derive the totals."""
    header = ["block", "start", "length", "partial", "ACC", "err_total", "truth_total"]
    for i in report.ids:
        header += [f"AC_{i}", f"err_{i}", f"truth_{i}"]
    rows = []
    for b, blk in enumerate(report.blocks):
        row = [b, blk.start, blk.length, int(blk.partial), _fmt(blk.acc), _fmt(blk.err.sum()), _fmt(blk.mass.sum())]
        for j in range(len(report.ids)):
            row += [_fmt(blk.ac[j]), _fmt(blk.err[j]), _fmt(blk.mass[j])]
        rows.append(row)
    return header, rows


def emit_report(result, report_path=None, plot_path=None, timing: bool = False):
    """Write the JSON report and the per-block CSV. Either path may be ``None``."""
    try:
        if report_path is not None:
            text = json.dumps(report_dict(result, timing), indent=2, sort_keys=False)
            Path(report_path).write_text(text + "\n")
        if plot_path is not None:
            if result.accuracy is None:
                raise AlipError("per-block plot data needs ground truth")
            header, rows = block_rows(result.accuracy)
            with Path(plot_path).open("w", newline="") as fh:
                fh.write(f"# schema={BLOCKS_SCHEMA}\n")
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
    except OSError as exc:
        raise AlipError(f"cannot write report: {exc}") from exc


def write_estimates(result, timestamps, path):
    """Per-sample refined draws and state labels."""
    with Path(path).open("w", newline="") as fh:
        fh.write(f"# schema={ESTIMATES_SCHEMA}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "aggregate", *result.ids, *(f"state_{i}" for i in result.ids), "corrected"])
        for k in range(result.power.shape[0]):
            w.writerow(
                [_fmt(timestamps[k]), _fmt(result.readings[k])]
                + [_fmt(v) for v in result.power[k]]
                + [int(v) for v in result.labels[k]]
                + [int(result.corrected[k])]
            )


def load_estimates(path, ids):
    """Read back the draw columns written by :func:`write_estimates`."""
    series = load_csv(path, ColumnMap(channels={i: i for i in ids}))
    return series.truth
