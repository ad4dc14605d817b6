"""End-to-end ALIP disaggregation.

For every reading the constrained MILP is solved, then the estimate stream
goes through state-transition correction, lagged median correction and
finally LP refinement of the transient draws.
"""

from __future__ import annotations

import dataclasses
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AlipError, Infeasible, NoReachableState, TimestepError
from .formulation import Enhancements, StateAssignment, assignment, build
from .metrics import AccuracyReport, score
from .model import HouseholdModel
from .solver import refinement_problem, solve_bb, solve_refinement_lp

STD = "std"
MEDIAN = "median"

# bits of DisaggregationResult.corrected
CORR_STD = 1
CORR_MEDIAN = 2
CORR_REPAIR = 4
CORR_REFINED = 8


@dataclass(frozen=True)
class PipelineConfig:
    lag: int = 4
    flags: Enhancements = field(default_factory=Enhancements)
    block_size: int = 5040
    threads: int = 1
    order: tuple[str, ...] = (STD, MEDIAN)
    # where the transient fill starts: steady ratings, or the band lower bounds
    refine_anchor: str = "rating"

    def __post_init__(self):
        if self.refine_anchor not in ("rating", "lower"):
            raise ValueError("refine_anchor must be 'rating' or 'lower'")
        if self.lag < 0:
            raise ValueError("median lag must be >= 0")
        if self.block_size < 1:
            raise ValueError("block size must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if sorted(self.order) != sorted((STD, MEDIAN)):
            raise ValueError(f"order must be a permutation of {(STD, MEDIAN)}")


@dataclass
class DisaggregationResult:
    ids: tuple[str, ...]
    readings: np.ndarray
    assignments: list[StateAssignment]
    labels: np.ndarray
    power: np.ndarray
    corrected: np.ndarray
    counters: dict
    timing: dict
    config: PipelineConfig
    accuracy: AccuracyReport | None = None

    @property
    def label(self) -> str:
        return self.config.flags.label


class _Solver:
    """Memoised MILP solves for one model and flag set."""

    def __init__(self, model: HouseholdModel, flags: Enhancements):
        self.model = model
        self.flags = flags
        self.template = build(model, 0.0, flags)
        self.cache: dict = {}

    def instance(self, z: float):
        e = self.template.e.copy()
        e[0], e[1] = -z, z
        return dataclasses.replace(self.template, e=e, z=z)

    def __call__(self, z: float, domains=None) -> StateAssignment:
        key = (z, domains)
        hit = self.cache.get(key)
        if hit is None:
            hit = solve_bb(self.instance(z), self.model, domains)
            self.cache[key] = hit
        return hit


def std_correct(
    prev,
    cand: StateAssignment,
    model: HouseholdModel,
    z: float,
    flags: Enhancements | None = None,
    solve=None,
) -> StateAssignment:
    """Veto transitions the state diagrams forbid.

    Appliances whose move from ``prev`` is legal keep their candidate state;
    each offending appliance is re-solved over the states reachable from its
    previous one, keeping the cheapest residual. If that restricted program
    is infeasible the consistent appliances are freed as well (still within
    their reachable sets), then the augmentation rows are dropped.
    """
    if prev is None:
        return cand
    n = model.n
    bad = [j for j in range(n) if not model.allowed(j, prev[j], cand.labels[j])]
    if not bad:
        return cand
    reach = [model.reachable(j, prev[j]) for j in range(n)]
    for j in bad:
        if not reach[j]:
            raise NoReachableState(
                f"{model.ids[j]}: no transition out of state {model.state_name(j, prev[j])}"
            )
    if solve is None:
        solve = _Solver(model, flags if flags is not None else Enhancements())
    fixed = tuple(reach[j] if j in bad else (cand.labels[j],) for j in range(n))
    try:
        return solve(z, fixed)
    except Infeasible:
        pass
    try:
        return solve(z, tuple(reach))
    except Infeasible:
        pass
    relaxed = _Solver(model, Enhancements.none())
    return relaxed(z, tuple(reach))


def median_correct(window) -> int:
    """Finalised label for the oldest entry of ``window``.

    ``window`` is chronological: ``[s_{k-L}, ..., s_k]``. The oldest entry is
    replaced by the window's majority label; ties keep the current label if
    it is among the leaders, otherwise the smallest leading label wins.
    """
    window = list(window)
    current = window[0]
    counts = Counter(window)
    top = max(counts.values())
    leaders = sorted(lab for lab, c in counts.items() if c == top)
    return current if current in leaders else leaders[0]


def _solve_chunk(args):
    model, flags, offset, zs = args
    solve = _Solver(model, flags)
    out = []
    for k, z in enumerate(zs):
        try:
            out.append(solve(z).labels)
        except AlipError as exc:
            raise TimestepError(offset + k, exc) from exc
    return out


def _solve_all(model, z, flags, threads, solve):
    if threads <= 1 or z.size < 2 * threads:
        out = []
        for k, v in enumerate(z):
            try:
                out.append(solve(float(v)))
            except AlipError as exc:
                raise TimestepError(k, exc) from exc
        return out
    bounds = np.linspace(0, z.size, threads + 1).astype(int)
    jobs = [(model, flags, int(a), [float(v) for v in z[a:b]]) for a, b in zip(bounds[:-1], bounds[1:])]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(_solve_chunk, jobs))
    labels = [lab for part in parts for lab in part]
    return [assignment(model, lab, float(v)) for lab, v in zip(labels, z)]


def _legal(model, prev, labels):
    return all(model.allowed(j, prev[j], labels[j]) for j in range(model.n))


def run(
    model: HouseholdModel,
    readings,
    cfg: PipelineConfig | None = None,
    truth=None,
) -> DisaggregationResult:
    """Disaggregate an aggregate reading series.

    ``truth`` (``T x n`` ground-truth draws) is optional; when given, the
    result carries an :class:`AccuracyReport`.
    """
    cfg = cfg or PipelineConfig()
    flags = cfg.flags
    z = np.asarray(readings, dtype=float).ravel()
    if not np.all(np.isfinite(z)):
        raise ValueError("readings must be finite")
    if np.any(z < 0):
        raise ValueError("readings must be nonnegative")
    T, n = z.size, model.n
    solve = _Solver(model, flags)
    corrected = np.zeros(T, dtype=np.int64)
    counters = {"samples": T, "std_corrections": 0, "median_corrections": 0, "std_repairs": 0, "lp_refinements": 0}
    timing = {}

    def stage(name, fn):
        t0 = time.perf_counter()
        out = fn()
        timing[name] = time.perf_counter() - t0
        return out

    est = stage("milp", lambda: _solve_all(model, z, flags, cfg.threads, solve))

    std_done = False
    for name in cfg.order:
        if name == STD and flags.std_correction:
            est = stage("std", lambda: _std_pass(model, z, est, flags, solve, corrected, counters))
            std_done = True
        elif name == MEDIAN and flags.median:
            est = stage(
                "median",
                lambda: _median_pass(model, z, est, cfg.lag, std_done, flags, solve, corrected, counters),
            )

    power = stage("lp", lambda: _refine_pass(model, z, est, flags.lp_refine, corrected, counters, cfg.refine_anchor, cfg.threads))
    labels = np.array([a.labels for a in est], dtype=np.int64).reshape(T, n)
    total = sum(timing.values())
    timing["total"] = total
    timing["per_sample_ms"] = 1000.0 * total / T if T else 0.0

    result = DisaggregationResult(
        ids=model.ids,
        readings=z,
        assignments=est,
        labels=labels,
        power=power,
        corrected=corrected,
        counters=counters,
        timing=timing,
        config=cfg,
    )
    if truth is not None:
        result.accuracy = score(truth, power, model.ids, cfg.block_size)
    return result


def _std_pass(model, z, est, flags, solve, corrected, counters):
    out = list(est)
    for k in range(1, len(out)):
        try:
            fixed = std_correct(out[k - 1].labels, out[k], model, float(z[k]), flags, solve)
        except AlipError as exc:
            raise TimestepError(k, exc) from exc
        if fixed.labels != out[k].labels:
            counters["std_corrections"] += 1
            corrected[k] |= CORR_STD
        out[k] = fixed
    return out


def _median_pass(model, z, est, lag, std_done, flags, solve, corrected, counters):
    original = [a.labels for a in est]
    T, n = len(original), model.n
    out = []
    for t in range(T):
        window = original[t : t + lag + 1]
        labels = tuple(median_correct([w[j] for w in window]) for j in range(n))
        if labels != original[t]:
            counters["median_corrections"] += 1
            corrected[t] |= CORR_MEDIAN
            cur = assignment(model, labels, float(z[t]))
        else:
            cur = est[t]
        if std_done and out and not _legal(model, out[-1].labels, cur.labels):
            try:
                cur = std_correct(out[-1].labels, cur, model, float(z[t]), flags, solve)
            except AlipError as exc:
                raise TimestepError(t, exc) from exc
            counters["std_repairs"] += 1
            corrected[t] |= CORR_REPAIR
        out.append(cur)
    return out


def _refine_rows(model, items, anchor, offset=0):
    """Per-sample draws for ``(labels, b, z)`` items; ``None`` rows were not refined."""
    rows = []
    for k, (b, z) in enumerate(items):
        p = refinement_problem(model, b, z, anchor)
        if not p.p2:
            rows.append(None)
            continue
        try:
            y = solve_refinement_lp(p)
        except AlipError as exc:
            raise TimestepError(offset + k, exc) from exc
        rows.append([(int(model.owner[col]), float(val)) for col, val in zip(p.p2, y)])
    return rows


def _refine_chunk(args):
    return _refine_rows(*args)


def _refine_pass(model, z, est, refine, corrected, counters, anchor="rating", threads=1):
    T, n = len(est), model.n
    power = np.zeros((T, n))
    for k, a in enumerate(est):
        power[k] = a.s
    if not refine:
        return power
    items = [(a.b, float(z[k])) for k, a in enumerate(est)]
    if threads <= 1 or T < 2 * threads:
        rows = _refine_rows(model, items, anchor)
    else:
        bounds = np.linspace(0, T, threads + 1).astype(int)
        jobs = [(model, items[a:b], anchor, int(a)) for a, b in zip(bounds[:-1], bounds[1:])]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = [r for part in pool.map(_refine_chunk, jobs) for r in part]
    for k, row in enumerate(rows):
        if row is None:
            continue
        for j, val in row:
            power[k, j] = val
        counters["lp_refinements"] += 1
        corrected[k] |= CORR_REFINED
    return power
