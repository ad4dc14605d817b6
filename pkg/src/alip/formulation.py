"""Per-timestep mixed-integer linear program.

Decision vector ``x = [delta; b]``: ``delta`` is the continuous absolute
residual and ``b`` the binary state indicators. The program minimises
``delta`` subject to ``-delta <= z - r.b <= delta`` plus one-hot rows and,
when constraint augmentation is on, the combination/alias rows and the
always-on equalities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch
from .model import HouseholdModel


@dataclass(frozen=True)
class Enhancements:
    """Which ALIP stages are active. All off is the plain IP baseline."""

    constraints: bool = True
    std_correction: bool = True
    median: bool = True
    lp_refine: bool = True

    @classmethod
    def none(cls) -> "Enhancements":
        return cls(False, False, False, False)

    @property
    def label(self) -> str:
        on = [k for k in ("constraints", "std_correction", "median", "lp_refine") if getattr(self, k)]
        if not on:
            return "IP"
        if len(on) == 4:
            return "ALIP"
        return "IP+" + "+".join(on)


@dataclass(frozen=True, eq=False)
class MilpInstance:
    f: np.ndarray
    A: np.ndarray
    e: np.ndarray
    A_eq: np.ndarray
    e_eq: np.ndarray
    integrality: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    z: float
    row_kinds: tuple[str, ...]

    @property
    def n_vars(self) -> int:
        return self.f.size


@dataclass(frozen=True, eq=False)
class StateAssignment:
    b: np.ndarray
    delta: float
    s: np.ndarray
    z: float
    labels: tuple[int, ...]

    def __eq__(self, other):
        if not isinstance(other, StateAssignment):
            return NotImplemented
        return (
            self.labels == other.labels
            and self.delta == other.delta
            and self.z == other.z
            and np.array_equal(self.b, other.b)
        )

    __hash__ = None


def draw_total(r, b) -> float:
    """``r . b`` summed in column order, so every caller gets identical bits."""
    total = 0.0
    for i in range(len(r)):
        if b[i]:
            total += float(r[i])
    return total


def assignment(model: HouseholdModel, labels, z: float) -> StateAssignment:
    labels = tuple(int(x) for x in labels)
    b = model.indicator(labels)
    return StateAssignment(
        b=b,
        delta=abs(z - draw_total(model.r, b)),
        s=model.steady_draws(labels),
        z=float(z),
        labels=labels,
    )


def _groups(model: HouseholdModel, flags: Enhancements | None):
    """Inequality groups (``sum <= 1``) and equality groups (``sum == 1``)."""
    onehot = [
        tuple(range(int(q), int(q + l)))
        for q, l in zip(model.offsets, model.sizes)
        if l > 1
    ]
    if flags is None or flags.constraints:
        return onehot, list(model.combo_groups), list(model.alias_groups), list(model.always_on_rows)
    return onehot, [], [], []


def build(model: HouseholdModel, z: float, flags: Enhancements | None = None) -> MilpInstance:
    """Assemble ``(f, A, e, A_eq, e_eq)`` for reading ``z``.

    ``flags=None`` means every constraint row is emitted.
    """
    m = model.m
    z = float(z)
    onehot, combos, aliases, always_on = _groups(model, flags)

    v_check = np.concatenate([[0.0], model.r])
    u1 = np.zeros(m + 1)
    u1[0] = 1.0
    rows = [-(v_check + u1), v_check - u1]
    rhs = [-z, z]
    kinds = ["residual-", "residual+"]
    for kind, groups in (("onehot", onehot), ("combo", combos), ("alias", aliases)):
        for g in groups:
            row = np.zeros(m + 1)
            row[1 + np.asarray(g)] = 1.0
            rows.append(row)
            rhs.append(1.0)
            kinds.append(kind)

    A_eq = np.zeros((len(always_on), m + 1))
    for i, g in enumerate(always_on):
        A_eq[i, 1 + np.asarray(g)] = 1.0

    f = np.zeros(m + 1)
    f[0] = 1.0
    integrality = np.ones(m + 1, dtype=bool)
    integrality[0] = False
    lower = np.zeros(m + 1)
    upper = np.ones(m + 1)
    upper[0] = np.inf
    return MilpInstance(
        f=f,
        A=np.vstack(rows),
        e=np.asarray(rhs, dtype=float),
        A_eq=A_eq,
        e_eq=np.ones(len(always_on)),
        integrality=integrality,
        lower=lower,
        upper=upper,
        z=z,
        row_kinds=tuple(kinds),
    )


def evaluate(model: HouseholdModel, b, z: float, flags: Enhancements | None = None):
    """Return ``(delta, feasible)`` for indicator vector ``b``."""
    b = np.asarray(b)
    if b.shape != (model.m,):
        raise LengthMismatch(f"expected indicator vector of length {model.m}, got shape {b.shape}")
    if not np.all((b == 0) | (b == 1)):
        return abs(float(z) - draw_total(model.r, b)), False
    delta = abs(float(z) - draw_total(model.r, b))
    onehot, combos, aliases, always_on = _groups(model, flags)
    feasible = (
        all(sum(int(b[i]) for i in g) <= 1 for g in onehot)
        and all(sum(int(b[i]) for i in g) <= 1 for g in combos)
        and all(sum(int(b[i]) for i in g) <= 1 for g in aliases)
        and all(sum(int(b[i]) for i in g) == 1 for g in always_on)
    )
    return delta, feasible


def dump(instance: MilpInstance) -> str:
    """Plain-text listing of the instance, one constraint row per line."""

    def fmt(vec):
        return " ".join(f"{x:g}" for x in vec)

    lines = [f"# MILP instance, z = {instance.z:g}, vars = [delta; b] ({instance.n_vars})"]
    lines.append(f"f: {fmt(instance.f)}")
    lines.append("A x <= e:")
    for kind, row, rhs in zip(instance.row_kinds, instance.A, instance.e):
        lines.append(f"  [{kind:>9}] {fmt(row)} <= {rhs:g}")
    if instance.A_eq.shape[0]:
        lines.append("A_eq x = e_eq:")
        for row, rhs in zip(instance.A_eq, instance.e_eq):
            lines.append(f"  [always-on] {fmt(row)} = {rhs:g}")
    lines.append("integrality: " + "".join("I" if x else "C" for x in instance.integrality))
    return "\n".join(lines) + "\n"
