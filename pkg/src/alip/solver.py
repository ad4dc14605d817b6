"""Exact solvers for the disaggregation programs.

* :func:`solve_bb` -- branch-and-bound over each appliance's one-hot options.
* :func:`solve_exhaustive` -- enumeration of every joint state; ground truth.
* :func:`solve_refinement_lp` -- transient refinement LP via :mod:`alip.simplex`.
* :func:`refine_oracle` -- closed-form water fill for the same LP.

Ties in the MILP objective (within ``EPS``) are broken by the sorted tuple of
active columns, compared lexicographically; the all-OFF assignment is thus
preferred, then assignments whose lowest active column is smallest.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyProblem, Infeasible, SearchSpaceTooLarge
from .formulation import Enhancements, MilpInstance, StateAssignment, assignment, evaluate
from .model import HouseholdModel
from .simplex import OPTIMAL, simplex

EPS = 1e-9
EXHAUSTIVE_CAP = 10**7


def _domains(model: HouseholdModel, domains):
    if domains is None:
        return [tuple(range(int(l) + 1)) for l in model.sizes]
    if len(domains) != model.n:
        raise ValueError(f"need {model.n} domains, got {len(domains)}")
    return [tuple(sorted(int(x) for x in d)) for d in domains]


def _pick(cands, best):
    """Lexicographically smallest active-column tuple among near-optimal candidates."""
    return min(key for delta, key in cands if delta <= best + EPS)


def _labels_from_cols(model: HouseholdModel, cols):
    labels = [0] * model.n
    for c in cols:
        j = int(model.owner[c])
        labels[j] = c - int(model.offsets[j]) + 1
    return labels


def solve_bb(instance: MilpInstance, model: HouseholdModel, domains=None) -> StateAssignment:
    """Branch-and-bound solution of ``instance``.

    ``domains`` optionally restricts appliance ``j`` to the listed labels
    (0 = OFF); used by the state-transition correction.
    """
    z = instance.z
    v = instance.A[1, 1:]
    n = model.n
    doms = _domains(model, domains)

    # generic nonnegative rows of A beyond the two residual rows
    col_rows: dict[int, list[tuple[int, float]]] = {}
    rhs = list(instance.e[2:])
    for ri, row in enumerate(instance.A[2:, 1:]):
        for c in np.flatnonzero(row):
            if row[c] < 0:
                raise ValueError("solve_bb only handles nonnegative constraint rows")
            col_rows.setdefault(int(c), []).append((ri, float(row[c])))

    order = sorted(range(n), key=lambda j: (-model.appliances[j].max_rating, j))
    depth_of = {j: d for d, j in enumerate(order)}

    eq_cols = []
    eq_close: list[list[int]] = [[] for _ in range(n)]
    for ei, row in enumerate(instance.A_eq[:, 1:]):
        cols = np.flatnonzero(row)
        eq_cols.append({int(c): float(row[c]) for c in cols})
        last = max((depth_of[int(model.owner[c])] for c in cols), default=0)
        eq_close[last].append(ei)
    eq_rhs = list(instance.e_eq)

    options = []
    for j in order:
        q = int(model.offsets[j])
        opts = [(q + lab - 1, float(v[q + lab - 1])) for lab in doms[j] if lab]
        if 0 in doms[j]:
            opts.append((None, 0.0))
        options.append(opts)
    opt_max = [max((r for _, r in opts), default=0.0) for opts in options]
    rem_max = [0.0] * (n + 1)
    for d in range(n - 1, -1, -1):
        rem_max[d] = rem_max[d + 1] + opt_max[d]

    counts = [0.0] * len(rhs)
    eq_counts = [0.0] * len(eq_rhs)
    chosen: list[int] = []
    cands: list[tuple[float, tuple[int, ...]]] = []
    best = math.inf

    def descend(d, committed):
        nonlocal best
        if d == n:
            key = tuple(sorted(chosen))
            total = 0.0
            for c in key:
                total += float(v[c])
            delta = abs(z - total)
            if delta <= best + EPS:
                cands.append((delta, key))
                best = min(best, delta)
            return
        rest = rem_max[d + 1]
        for col, rating in options[d]:
            drawn = committed + rating
            if drawn > z:
                bound = drawn - z
            elif z > drawn + rest:
                bound = z - drawn - rest
            else:
                bound = 0.0
            if bound > best + EPS:
                continue
            touched = col_rows.get(col, ()) if col is not None else ()
            if any(counts[ri] + w > rhs[ri] + EPS for ri, w in touched):
                continue
            for ri, w in touched:
                counts[ri] += w
            eq_touched = []
            if col is not None:
                for ei, cols in enumerate(eq_cols):
                    if col in cols:
                        eq_counts[ei] += cols[col]
                        eq_touched.append(ei)
            ok = all(eq_counts[ei] <= eq_rhs[ei] + EPS for ei in eq_touched) and all(
                abs(eq_counts[ei] - eq_rhs[ei]) <= EPS for ei in eq_close[d]
            )
            if ok:
                if col is not None:
                    chosen.append(col)
                descend(d + 1, drawn)
                if col is not None:
                    chosen.pop()
            for ri, w in touched:
                counts[ri] -= w
            for ei in eq_touched:
                eq_counts[ei] -= eq_cols[ei][col]

    descend(0, 0.0)
    if not cands:
        raise Infeasible(f"no feasible assignment for z={z:g}")
    return assignment(model, _labels_from_cols(model, _pick(cands, best)), z)


def solve_exhaustive(
    model: HouseholdModel,
    z: float,
    flags: Enhancements | None = None,
    domains=None,
    cap: int = EXHAUSTIVE_CAP,
) -> StateAssignment:
    """Enumerate every joint state; same contract and tie-break as :func:`solve_bb`."""
    doms = _domains(model, domains)
    size = math.prod(len(d) for d in doms)
    if size > cap:
        raise SearchSpaceTooLarge(f"{size} joint states exceed the cap of {cap}")
    cands = []
    for labels in itertools.product(*doms):
        b = model.indicator(labels)
        delta, feasible = evaluate(model, b, z, flags)
        if feasible:
            cands.append((delta, tuple(int(c) for c in np.flatnonzero(b))))
    if not cands:
        raise Infeasible(f"no feasible assignment for z={z:g}")
    best = min(delta for delta, _ in cands)
    return assignment(model, _labels_from_cols(model, _pick(cands, best)), z)


@dataclass(frozen=True, eq=False)
class RefinementProblem:
    """Transient refinement of the states in ``p2`` with ``p1`` held at steady values.

    Among the many optimal draws the solvers return the one reached by
    starting at ``anchor`` (default: the lower bounds) and moving entries
    toward the needed total one at a time, in index order.
    """

    z_residual: float
    lower: np.ndarray
    upper: np.ndarray
    p1: tuple[int, ...] = ()
    p1_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    p2: tuple[int, ...] | None = None
    anchor: np.ndarray | None = None

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).ravel()
        upper = np.asarray(self.upper, dtype=float).ravel()
        if lower.shape != upper.shape:
            raise ValueError("lower and upper must have the same length")
        if np.any(lower > upper):
            raise ValueError("lower bounds exceed upper bounds")
        if np.any(lower == upper):
            raise ValueError("zero-width band: a non-transient state belongs in p1, not p2")
        p2 = tuple(range(lower.size)) if self.p2 is None else tuple(self.p2)
        if len(p2) != lower.size:
            raise ValueError("p2 must index every bounded variable")
        if set(self.p1) & set(p2):
            raise ValueError("p1 and p2 overlap")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "p2", p2)
        object.__setattr__(self, "p1_values", np.asarray(self.p1_values, dtype=float))
        object.__setattr__(self, "z_residual", float(self.z_residual))
        anchor = lower if self.anchor is None else np.asarray(self.anchor, dtype=float).ravel()
        if anchor.shape != lower.shape or np.any(anchor < lower) or np.any(anchor > upper):
            raise ValueError("anchor must lie inside the box")
        object.__setattr__(self, "anchor", anchor)


def refinement_problem(model: HouseholdModel, b, z: float, anchor: str = "lower") -> RefinementProblem:
    """Split the active states of ``b`` into fixed (p1) and transient (p2) sets.

    ``anchor="rating"`` starts the fill at the steady ratings instead of the
    lower bounds, so states drift off their ratings only as far as the reading
    requires.
    """
    if anchor not in ("lower", "rating"):
        raise ValueError(f"unknown anchor {anchor!r}")
    b = np.asarray(b)
    active = np.flatnonzero(b)
    transient = model.r_min < model.r_max
    p1 = tuple(int(i) for i in active if not transient[i])
    p2 = tuple(int(i) for i in active if transient[i])
    fixed = np.array([model.r[i] for i in p1])
    steady = 0.0
    for w in fixed:
        steady += float(w)
    return RefinementProblem(
        z_residual=float(z) - steady,
        lower=model.r_min[list(p2)],
        upper=model.r_max[list(p2)],
        p1=p1,
        p1_values=fixed,
        p2=p2,
        anchor=model.r[list(p2)] if anchor == "rating" else None,
    )


def refinement_program(p: RefinementProblem):
    """``(f, A, e)`` of the refinement LP over ``[delta; y]``."""
    k = p.lower.size
    h = np.concatenate([[0.0], np.ones(k)])
    u1 = np.zeros(k + 1)
    u1[0] = 1.0
    eye = np.eye(k)
    zeros = np.zeros((k, 1))
    A = np.vstack([-(h + u1), h - u1, np.hstack([zeros, -eye]), np.hstack([zeros, eye])])
    e = np.concatenate([[-p.z_residual, p.z_residual], -p.lower, p.upper])
    f = u1.copy()
    return f, A, e


def _snap(y, lower, upper):
    scale = 1e-9 * np.maximum(1.0, np.maximum(np.abs(lower), np.abs(upper)))
    y = np.where(np.abs(y - lower) <= scale, lower, y)
    y = np.where(np.abs(y - upper) <= scale, upper, y)
    return np.clip(y, lower, upper)


def solve_refinement_lp(p: RefinementProblem) -> np.ndarray:
    """Optimal transient draws ``y`` for the states in ``p.p2``.

    A first simplex solve finds the smallest residual. A second one keeps the
    residual at that optimum and minimises ``sum_i (i+1) |y_i - anchor_i|``,
    which selects the index-order fill from the anchor.
    """
    k = p.lower.size
    if k == 0:
        raise EmptyProblem("no transient states to refine")
    f, A, e = refinement_program(p)
    shift = np.concatenate([[0.0], p.lower])
    e_shifted = e - A @ shift

    first = simplex(f, A, e_shifted)
    if first.status != OPTIMAL:
        raise Infeasible(f"refinement LP {first.status}")
    delta_star = first.x[0]

    # variables [delta, y' (k), up (k), down (k)] with y' = y - lower and
    # y' - up + down = anchor - lower
    eye = np.eye(k)
    zk = np.zeros((k, k))
    wide = np.hstack([A, np.zeros((A.shape[0], 2 * k))])
    cap = np.zeros((1, 1 + 3 * k))
    cap[0, 0] = 1.0
    link = np.hstack([np.zeros((k, 1)), eye, -eye, eye])
    target = p.anchor - p.lower
    A2 = np.vstack([wide, cap, link, -link])
    e2 = np.concatenate([e_shifted, [delta_star], target, -target])
    weights = np.arange(1, k + 1, dtype=float)
    c2 = np.concatenate([[0.0], np.zeros(k), weights, weights])
    second = simplex(c2, A2, e2)
    if second.status != OPTIMAL:
        raise Infeasible(f"refinement LP {second.status}")
    return _snap(second.x[1 : k + 1] + p.lower, p.lower, p.upper)


def refine_oracle(p: RefinementProblem) -> np.ndarray:
    """Closed-form index-order fill from the anchor.

    With the default anchor (the lower bounds) this starts at ``lower`` and
    hands out ``max(0, min(z, sum(upper)) - sum(lower))`` greedily.
    """
    y = p.anchor.copy()
    need = min(max(p.z_residual, float(p.lower.sum())), float(p.upper.sum())) - float(y.sum())
    if need >= 0:
        for i in range(y.size):
            step = min(p.upper[i] - y[i], need)
            y[i] += step
            need -= step
    else:
        need = -need
        for i in range(y.size):
            step = min(y[i] - p.lower[i], need)
            y[i] -= step
            need -= step
    return y


def refinement_objective(p: RefinementProblem) -> float:
    """Closed-form optimum ``max(0, sum(lower) - z, z - sum(upper))``."""
    return max(0.0, float(p.lower.sum()) - p.z_residual, p.z_residual - float(p.upper.sum()))
