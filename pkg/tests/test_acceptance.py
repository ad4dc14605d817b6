"""Acceptance suite: one test (and one printed PASS/FAIL line) per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from alip.cli import main as cli_main
from alip.errors import Infeasible
from alip.formulation import Enhancements, build
from alip.io import ColumnMap, load_csv
from alip.metrics import ac, acc
from alip.modelfile import load_model
from alip.pipeline import PipelineConfig, run
from alip.simgen import benchmark_suite, preset, simulate
from alip.solver import RefinementProblem, refine_oracle, refinement_objective, solve_bb, solve_exhaustive, solve_refinement_lp

from helpers import random_model, random_reading, record

pytestmark = pytest.mark.acceptance

SUITE_SEEDS = 5
SUITE_LENGTH = 10_000


def test_criterion_1_bb_equals_exhaustive():
    rng = np.random.default_rng(20170401)
    t0 = time.perf_counter()
    checked = mismatches = infeasible = 0
    while checked < 500:
        model = random_model(rng, n_max=5, l_max=3)
        z = random_reading(rng, model)
        try:
            want = solve_exhaustive(model, z)
        except Infeasible:
            infeasible += 1
            continue
        got = solve_bb(build(model, z), model)
        mismatches += not (got.delta == want.delta and np.array_equal(got.b, want.b))
        checked += 1
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60
    record(1, "branch-and-bound == exhaustive", ok,
           f"{checked} instances, {mismatches} mismatches, {infeasible} infeasible skipped, {elapsed:.1f}s (limit 60s)")
    assert ok


def test_criterion_2_lp_refinement_optimality():
    rng = np.random.default_rng(1402)
    t0 = time.perf_counter()
    worst_obj = 0.0
    exact_fail = 0
    for _ in range(1000):
        k = int(rng.integers(1, 6))
        lower = rng.integers(0, 600, k).astype(float)
        upper = lower + rng.integers(1, 500, k)
        z = float(rng.integers(-200, int(upper.sum()) + 300))
        p = RefinementProblem(z, lower, upper)
        y = solve_refinement_lp(p)
        worst_obj = max(worst_obj, abs(abs(z - y.sum()) - refinement_objective(p)))
        exact_fail += not np.array_equal(y, refine_oracle(p))
    worst_cont = 0.0
    for _ in range(1000):
        k = int(rng.integers(1, 6))
        lower = rng.uniform(0, 600, k)
        upper = lower + rng.uniform(0.5, 500, k)
        z = float(rng.uniform(-200, upper.sum() + 300))
        p = RefinementProblem(z, lower, upper)
        y = solve_refinement_lp(p)
        worst_obj = max(worst_obj, abs(abs(z - y.sum()) - refinement_objective(p)))
        worst_cont = max(worst_cont, float(np.max(np.abs(y - refine_oracle(p)))))
    elapsed = time.perf_counter() - t0
    ok = worst_obj <= 1e-9 and exact_fail == 0 and worst_cont <= 1e-9 and elapsed < 10
    record(2, "refinement LP optimal and equal to the greedy oracle", ok,
           f"objective err {worst_obj:.1e} (tol 1e-9); 1000 grid problems, {exact_fail} not bit-equal; "
           f"1000 continuous problems, max |y-oracle| {worst_cont:.1e}; {elapsed:.1f}s (limit 10s)")
    assert ok


def test_criterion_3_sanity_recovery():
    sc = preset("sanity", seed=3, length=10_000)
    series, _ = simulate(sc)
    res = run(sc.model, series.aggregate, PipelineConfig(flags=Enhancements.none()), truth=series.truth)
    ok = sc.model.n == 4 and res.accuracy.acc == 1.0
    record(3, "noise/collision/transient-free IP recovery", ok, f"n={sc.model.n}, T=10000, ACC={res.accuracy.acc!r}")
    assert ok


def test_criterion_4_enhancement_value():
    gains, names = [], []
    for sc in benchmark_suite(SUITE_SEEDS, SUITE_LENGTH):
        series, _ = simulate(sc)
        ip = run(sc.model, series.aggregate, PipelineConfig(flags=Enhancements.none()), truth=series.truth)
        alip = run(sc.model, series.aggregate, PipelineConfig(), truth=series.truth)
        gains.append(alip.accuracy.acc - ip.accuracy.acc)
        names.append(sc.name)
    gains = np.array(gains)
    per = {n: float(np.mean([g for g, m in zip(gains, names) if m == n])) for n in dict.fromkeys(names)}
    mean = float(gains.mean())
    ok = len(gains) >= 20 and mean >= 0.05
    detail = ", ".join(f"{k} {v:+.4f}" for k, v in per.items())
    record(4, "mean ACC(ALIP) - ACC(IP) >= +0.05", ok, f"{len(gains)} scenarios x {SUITE_LENGTH}, mean {mean:+.4f} ({detail})")
    assert ok


def test_criterion_5_ablation_direction():
    def gain(name, flags):
        sc = preset(name, seed=2017, length=SUITE_LENGTH)
        series, _ = simulate(sc)
        base = run(sc.model, series.aggregate, PipelineConfig(flags=Enhancements.none()), truth=series.truth)
        one = run(sc.model, series.aggregate, PipelineConfig(flags=flags), truth=series.truth)
        return base.accuracy.acc, one.accuracy.acc

    c0, c1 = gain("collision", Enhancements(True, False, False, False))
    m0, m1 = gain("chatter", Enhancements(False, False, True, False))
    ok = c1 > c0 and m1 > m0
    record(5, "constraints help collisions, median helps chatter", ok,
           f"collision IP {c0:.4f} -> +constraints {c1:.4f}; chatter IP {m0:.4f} -> +median {m1:.4f}")
    assert ok


def test_criterion_6_throughput():
    sc = preset("household", seed=11, length=5000)
    series, _ = simulate(sc)
    t0 = time.perf_counter()
    res = run(sc.model, series.aggregate)
    ms = 1000 * (time.perf_counter() - t0) / len(series)
    ok = ms < 100
    verdict = "meets 20 ms target" if ms < 20 else "above 20 ms target"
    record(6, "per-sample pipeline time", ok,
           f"n={sc.model.n}, m={sc.model.m}, {ms:.3f} ms/sample over {len(series)} samples ({verdict}; hard limit 100 ms)")
    assert ok


def test_criterion_7_metrics_fidelity():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(500):
        T, n = int(rng.integers(1, 40)), int(rng.integers(1, 6))
        gt = rng.uniform(0, 5000, (T, n)) * (rng.random((T, n)) < 0.6)
        est = rng.uniform(0, 5000, (T, n)) * (rng.random((T, n)) < 0.6)
        if not gt.any():
            continue
        num = den = 0.0
        for k in range(T):
            for i in range(n):
                num += abs(gt[k, i] - est[k, i])
                den += abs(gt[k, i])
        worst = max(worst, abs(acc(gt, est) - (1 - num / (2 * den))))
        j = int(rng.integers(0, n))
        if gt[:, j].any():
            num = sum(abs(a - b) for a, b in zip(gt[:, j], est[:, j]))
            den = sum(abs(a) for a in gt[:, j])
            worst = max(worst, abs(ac(gt[:, j], est[:, j]) - (1 - num / (2 * den))))
    # estimate mass far above truth mass
    negative = ac([50.0, 0.0, 0.0, 20.0], [0.0, 300.0, 250.0, 0.0])
    ok = worst <= 1e-12 and negative < 0
    record(7, "AC/ACC match the double-loop oracle; negative AC reproduces", ok,
           f"max deviation {worst:.1e} (tol 1e-12); overestimating AC = {negative:.3f}")
    assert ok


def test_criterion_8_cli_determinism(tmp_path):
    data, model = tmp_path / "d.csv", tmp_path / "m.yaml"
    assert cli_main(["simulate", "--preset", "household", "--seed", "8", "--length", "2000",
                     "--out", str(data), "--model-out", str(model)]) == 0
    outputs = []
    for tag, threads in (("a", 1), ("b", 1), ("c", 2), ("d", 4)):
        rep, plot = tmp_path / f"r{tag}.json", tmp_path / f"p{tag}.csv"
        assert cli_main(["run", "--model", str(model), "--data", str(data), "--seed", "8", "--block-size", "500",
                         "--threads", str(threads), "--report", str(rep), "--plot-data", str(plot)]) == 0
        outputs.append((rep.read_bytes(), plot.read_bytes()))
    ok = all(o == outputs[0] for o in outputs)
    record(8, "CLI byte-identical across runs and --threads", ok, f"{len(outputs)} runs (threads 1, 1, 2, 4), identical={ok}")
    assert ok


def test_criterion_9_dataset_ordering():
    """Optional: ``ALIP_DATASETS`` names a directory of ``<case>/model.yaml`` +
    ``<case>/data.csv`` exports whose channel columns are named like the appliances."""
    root = os.environ.get("ALIP_DATASETS")
    if not root:
        record(9, "dataset ALIP >= IP ordering", True, "SKIPPED (set ALIP_DATASETS to run; not gating)")
        pytest.skip("ALIP_DATASETS not set")
    cases = sorted(p for p in Path(root).iterdir() if (p / "model.yaml").exists() and (p / "data.csv").exists())
    rows, ok = [], bool(cases)
    for case in cases:
        model = load_model(case / "model.yaml")
        series = load_csv(case / "data.csv", ColumnMap(channels={i: i for i in model.ids}))
        ip = run(model, series.aggregate, PipelineConfig(flags=Enhancements.none()), truth=series.truth).accuracy.acc
        al = run(model, series.aggregate, PipelineConfig(), truth=series.truth).accuracy.acc
        ok &= al >= ip
        rows.append(f"{case.name} IP {ip:.3f} ALIP {al:.3f}")
    record(9, "dataset ALIP >= IP ordering", ok, "; ".join(rows) or "no cases found")
    assert ok


if __name__ == "__main__":
    import tempfile

    failed = 0
    for name, fn in sorted(globals().items()):
        if not name.startswith("test_criterion_"):
            continue
        try:
            if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as tmp:
                    fn(Path(tmp))
            else:
                fn()
        except pytest.skip.Exception:
            pass
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
