import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from alip.errors import LengthMismatch, ZeroGroundTruth
from alip.metrics import ac, acc, score


def loop_acc(gt, est):
    num = den = 0.0
    for k in range(len(gt)):
        for i in range(len(gt[k])):
            num += abs(gt[k][i] - est[k][i])
            den += abs(gt[k][i])
    return 1.0 - num / (2.0 * den)


def test_perfect_estimate():
    gt = np.array([[100.0, 5.0], [0.0, 7.0]])
    assert ac(gt[:, 0], gt[:, 0]) == 1.0
    assert acc(gt, gt) == 1.0


def test_swapped_mass_scores_zero():
    assert ac([100, 0], [0, 100]) == 0.0


def test_overestimate_goes_negative():
    assert ac([100, 0], [0, 300]) == -1.0


def test_single_appliance_acc_equals_ac():
    gt = np.array([[3.0], [4.0], [0.0]])
    est = np.array([[1.0], [4.5], [2.0]])
    assert acc(gt, est) == ac(gt[:, 0], est[:, 0])


def test_errors():
    with pytest.raises(LengthMismatch):
        ac([1, 2], [1])
    with pytest.raises(ZeroGroundTruth):
        ac([0, 0], [1, 0])
    with pytest.raises(ZeroGroundTruth):
        acc(np.zeros((2, 2)), np.ones((2, 2)))


def test_matches_double_loop_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        T, n = rng.integers(1, 30), rng.integers(1, 6)
        gt = rng.uniform(0, 1000, (T, n)) * (rng.random((T, n)) < 0.7)
        est = rng.uniform(0, 1000, (T, n)) * (rng.random((T, n)) < 0.7)
        if not gt.any():
            continue
        assert abs(acc(gt, est) - loop_acc(gt, est)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(
    arrays(np.float64, 20, elements=st.floats(0, 1e4)),
    arrays(np.float64, 20, elements=st.floats(0, 1e4)),
    st.sampled_from([0.5, 2.0, 1024.0]),
)
def test_scale_invariance(gt, est, c):
    if gt.sum() == 0:
        return
    assert ac(c * gt, c * est) == pytest.approx(ac(gt, est), abs=1e-12)


def test_acc_is_mass_weighted_combination_of_ac():
    rng = np.random.default_rng(1)
    for _ in range(50):
        gt = rng.uniform(1, 500, (40, 4))
        est = gt + rng.normal(0, 50, gt.shape)
        mass = np.abs(gt).sum(axis=0)
        per = np.array([ac(gt[:, j], est[:, j]) for j in range(4)])
        assert acc(gt, est) == pytest.approx(float((mass * per).sum() / mass.sum()), abs=1e-12)


def test_blocks_and_partial_tail():
    gt = np.ones((11, 2))
    est = np.zeros((11, 2))
    rep = score(gt, est, ("a", "b"), block_size=5)
    assert [b.length for b in rep.blocks] == [5, 5, 1]
    assert [b.partial for b in rep.blocks] == [False, False, True]
    assert all(b.acc == 0.5 for b in rep.blocks)


def test_zero_mass_appliance_noted():
    gt = np.array([[1.0, 0.0], [2.0, 0.0]])
    rep = score(gt, gt, ("a", "b"))
    assert np.isnan(rep.ac[1])
    assert rep.acc == 1.0
    assert rep.notes and "b" in rep.notes[0]


def test_block_totals_rederive_overall():
    rng = np.random.default_rng(3)
    gt = rng.uniform(0, 100, (103, 3))
    est = gt + rng.normal(0, 10, gt.shape)
    rep = score(gt, est, block_size=10)
    err = sum(b.err.sum() for b in rep.blocks)
    mass = sum(b.mass.sum() for b in rep.blocks)
    assert 1 - err / (2 * mass) == pytest.approx(rep.acc, abs=1e-12)
