"""Per-appliance (AC) and overall (ACC) disaggregation accuracy.

Both are one minus the absolute error mass over twice the ground-truth
mass, so they top out at 1 and turn negative once the estimate's error
exceeds twice what was actually drawn.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LengthMismatch, ZeroGroundTruth


def ac(gt, est) -> float:
    gt = np.asarray(gt, dtype=float)
    est = np.asarray(est, dtype=float)
    if gt.shape != est.shape:
        raise LengthMismatch(f"shape {gt.shape} vs {est.shape}")
    mass = np.abs(gt).sum()
    if mass == 0:
        raise ZeroGroundTruth("appliance never draws power; AC undefined")
    return float(1.0 - np.abs(gt - est).sum() / (2.0 * mass))


def acc(gt, est) -> float:
    gt = np.atleast_2d(np.asarray(gt, dtype=float))
    est = np.atleast_2d(np.asarray(est, dtype=float))
    if gt.shape != est.shape:
        raise LengthMismatch(f"shape {gt.shape} vs {est.shape}")
    mass = np.abs(gt).sum()
    if mass == 0:
        raise ZeroGroundTruth("no appliance draws power; ACC undefined")
    return float(1.0 - np.abs(gt - est).sum() / (2.0 * mass))


@dataclass
class BlockScore:
    start: int
    length: int
    partial: bool
    err: np.ndarray
    mass: np.ndarray

    @property
    def ac(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.mass > 0, 1.0 - self.err / (2.0 * self.mass), np.nan)

    @property
    def acc(self) -> float:
        total = self.mass.sum()
        return float(1.0 - self.err.sum() / (2.0 * total)) if total > 0 else float("nan")


@dataclass
class AccuracyReport:
    ids: tuple[str, ...]
    ac: np.ndarray
    acc: float
    blocks: list[BlockScore] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def score(gt, est, ids=None, block_size: int | None = None) -> AccuracyReport:
    """Score a ``T x n`` estimate; per-block figures use ``block_size`` rows.

    Appliances with zero ground-truth mass get ``nan`` AC and a note.
    A trailing block shorter than ``block_size`` is kept and flagged partial.
    """
    gt = np.atleast_2d(np.asarray(gt, dtype=float))
    est = np.atleast_2d(np.asarray(est, dtype=float))
    if gt.shape != est.shape:
        raise LengthMismatch(f"shape {gt.shape} vs {est.shape}")
    T, n = gt.shape
    ids = tuple(ids) if ids is not None else tuple(f"a{j}" for j in range(n))
    err = np.abs(gt - est)
    notes = []
    per = np.full(n, np.nan)
    for j in range(n):
        try:
            per[j] = ac(gt[:, j], est[:, j])
        except ZeroGroundTruth:
            notes.append(f"AC undefined for {ids[j]}: zero ground-truth mass")
    try:
        overall = acc(gt, est)
    except ZeroGroundTruth:
        overall = float("nan")
        notes.append("ACC undefined: zero ground-truth mass")

    blocks = []
    if block_size:
        if block_size < 1:
            raise ValueError("block_size must be >= 1")
        for start in range(0, T, block_size):
            stop = min(start + block_size, T)
            blocks.append(
                BlockScore(
                    start=start,
                    length=stop - start,
                    partial=stop - start < block_size,
                    err=err[start:stop].sum(axis=0),
                    mass=np.abs(gt[start:stop]).sum(axis=0),
                )
            )
    return AccuracyReport(ids=ids, ac=per, acc=overall, blocks=blocks, notes=notes)
