"""Appliance and household modelling.

An appliance has an implicit OFF state plus ``l`` named non-OFF states, each
with a steady rating and a transient band ``[transient_min, transient_max]``.
:func:`compile_model` concatenates every state rating into one vector ``r``
and records where each appliance's one-hot slice starts (``offsets``).

Inside the engine a per-appliance state is an integer label: ``0`` is OFF and
``s`` in ``1..l`` is the ``s``-th listed state, stored at column
``offsets[j] + s - 1`` of the indicator vector.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BoundViolation,
    EmptyModel,
    ModelError,
    NoReachableState,
    NonPositiveRating,
)

OFF = "OFF"

DEFAULT_TOL = 1.0
DEFAULT_MAX_SUBSET = 3


@dataclass(frozen=True)
class StateSpec:
    label: str
    rating: float
    transient_min: float | None = None
    transient_max: float | None = None

    def __post_init__(self):
        rating = float(self.rating)
        tmin = rating if self.transient_min is None else float(self.transient_min)
        tmax = rating if self.transient_max is None else float(self.transient_max)
        object.__setattr__(self, "rating", rating)
        object.__setattr__(self, "transient_min", tmin)
        object.__setattr__(self, "transient_max", tmax)

    @property
    def transient(self) -> bool:
        return self.transient_min < self.transient_max


@dataclass(frozen=True)
class ApplianceSpec:
    """One appliance.

    ``std_edges`` holds ``(from_label, to_label)`` pairs over ``OFF`` and the
    state labels. ``None`` means every transition is allowed (except into OFF
    for always-on appliances). Self-loops are always added.
    """

    id: str
    states: tuple[StateSpec, ...]
    always_on: bool = False
    std_edges: frozenset | None = None

    def __post_init__(self):
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        labels = [s.label for s in states]
        nodes = [OFF] + labels
        if self.std_edges is None:
            edges = {(a, b) for a in nodes for b in nodes}
        else:
            edges = {(str(a), str(b)) for a, b in self.std_edges}
        edges |= {(s, s) for s in labels}
        if self.always_on:
            edges = {(a, b) for a, b in edges if b != OFF}
        else:
            edges.add((OFF, OFF))
        object.__setattr__(self, "std_edges", frozenset(edges))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.states)

    @property
    def max_rating(self) -> float:
        return max(s.rating for s in self.states)


def validate_appliance(spec: ApplianceSpec):
    if not spec.states:
        raise ModelError(f"appliance {spec.id!r} has no non-OFF states")
    labels = spec.labels
    if len(set(labels)) != len(labels):
        raise ModelError(f"appliance {spec.id!r} has duplicate state labels")
    if OFF in labels:
        raise ModelError(f"appliance {spec.id!r}: label {OFF!r} is reserved")
    for s in spec.states:
        if not np.isfinite(s.rating) or s.rating <= 0:
            raise NonPositiveRating(f"{spec.id}.{s.label}: rating must be > 0, got {s.rating}")
        if not (s.transient_min <= s.rating <= s.transient_max):
            raise BoundViolation(
                f"{spec.id}.{s.label}: need transient_min <= rating <= transient_max, "
                f"got {s.transient_min} / {s.rating} / {s.transient_max}"
            )
    nodes = set((OFF,) + labels)
    for a, b in spec.std_edges:
        if a not in nodes or b not in nodes:
            raise ModelError(f"appliance {spec.id!r}: STD edge ({a}, {b}) names an unknown state")
    if spec.always_on and not any(a == OFF for a, _ in spec.std_edges):
        raise NoReachableState(f"always-on appliance {spec.id!r} has no STD edge out of {OFF}")


@dataclass(frozen=True, eq=False)
class HouseholdModel:
    appliances: tuple[ApplianceSpec, ...]
    r: np.ndarray
    r_min: np.ndarray
    r_max: np.ndarray
    offsets: np.ndarray
    sizes: np.ndarray
    owner: np.ndarray
    combo_groups: tuple[tuple[int, ...], ...]
    alias_groups: tuple[tuple[int, ...], ...]
    always_on_rows: tuple[tuple[int, ...], ...]
    transitions: tuple[np.ndarray, ...]
    tol: float = DEFAULT_TOL
    max_subset: int = DEFAULT_MAX_SUBSET
    unit: str = "VA"
    names: tuple[str, ...] = field(default=())

    @property
    def n(self) -> int:
        return len(self.appliances)

    @property
    def m(self) -> int:
        return int(self.r.size)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.appliances)

    def column(self, j: int, label: int) -> int:
        """Indicator column of state ``label`` (>= 1) of appliance ``j``."""
        return int(self.offsets[j]) + label - 1

    def column_of(self, name: str) -> int:
        """Column for a dotted ``"APPLIANCE.state"`` reference."""
        try:
            return self.names.index(name)
        except ValueError:
            raise ModelError(f"unknown state reference {name!r}") from None

    def labels_of(self, b: Sequence[int]) -> tuple[int, ...]:
        """Per-appliance integer labels of an indicator vector (0 = OFF).

        Assumes at most one active state per appliance.
        """
        out = []
        for j in range(self.n):
            q, l = int(self.offsets[j]), int(self.sizes[j])
            lab = 0
            for s in range(l):
                if b[q + s]:
                    lab = s + 1
                    break
            out.append(lab)
        return tuple(out)

    def indicator(self, labels: Sequence[int]) -> np.ndarray:
        b = np.zeros(self.m, dtype=np.int8)
        for j, lab in enumerate(labels):
            if lab:
                b[self.column(j, lab)] = 1
        return b

    def steady_draws(self, labels: Sequence[int]) -> np.ndarray:
        """Per-appliance steady draw for the given labels (``F diag(b) r``)."""
        s = np.zeros(self.n)
        for j, lab in enumerate(labels):
            if lab:
                s[j] = self.r[self.column(j, lab)]
        return s

    def allowed(self, j: int, prev: int, nxt: int) -> bool:
        return bool(self.transitions[j][prev, nxt])

    def reachable(self, j: int, prev: int) -> tuple[int, ...]:
        return tuple(int(t) for t in np.flatnonzero(self.transitions[j][prev]))

    def state_name(self, j: int, label: int) -> str:
        if label == 0:
            return OFF
        return self.appliances[j].states[label - 1].label


def detect_combos(r, owner, tol: float = DEFAULT_TOL, max_subset: int = DEFAULT_MAX_SUBSET):
    """Find states whose rating is a 0/1 sum of other appliances' ratings.

    Returns sorted index tuples ``{target} | subset`` where the subset has
    2..``max_subset`` states, one per appliance, none from the target's
    appliance, and ``|r[target] - sum(r[subset])| <= tol``.
    """
    if max_subset < 2:
        raise ValueError("max_subset must be >= 2")
    r = np.asarray(r, dtype=float)
    owner = np.asarray(owner)
    m = r.size
    groups = set()
    for t in range(m):
        others = [i for i in range(m) if owner[i] != owner[t]]
        for size in range(2, max_subset + 1):
            for subset in itertools.combinations(others, size):
                owners = {int(owner[i]) for i in subset}
                if len(owners) != size:
                    continue
                total = 0.0
                for i in subset:
                    total += r[i]
                if abs(r[t] - total) <= tol:
                    groups.add(tuple(sorted((t,) + subset)))
    return sorted(groups)


def detect_aliases(r, r_min, r_max, owner, tol: float = DEFAULT_TOL):
    """Pairs ``(i, j)`` where state ``i`` matches a transient gap of state ``j``.

    The gap of ``j`` is ``r[j] - r_min[j]`` or ``r_max[j] - r[j]``; zero gaps
    (non-transient edges of the band) are ignored.
    """
    r = np.asarray(r, dtype=float)
    owner = np.asarray(owner)
    groups = set()
    for j in range(r.size):
        gaps = [g for g in (r[j] - r_min[j], r_max[j] - r[j]) if g > 0]
        for g in gaps:
            for i in range(r.size):
                if owner[i] != owner[j] and abs(r[i] - g) <= tol:
                    groups.add((min(i, j), max(i, j)))
    return sorted(groups)


def _transition_matrix(spec: ApplianceSpec) -> np.ndarray:
    index = {OFF: 0}
    index.update({lab: s + 1 for s, lab in enumerate(spec.labels)})
    size = len(spec.states) + 1
    mat = np.zeros((size, size), dtype=bool)
    for a, b in spec.std_edges:
        mat[index[a], index[b]] = True
    mat.setflags(write=False)
    return mat


def _resolve_groups(groups, names):
    out = set()
    for g in groups:
        idx = []
        for ref in g:
            if isinstance(ref, str):
                if ref not in names:
                    raise ModelError(f"unknown state reference {ref!r} in constraint group")
                idx.append(names.index(ref))
            else:
                idx.append(int(ref))
        if len(set(idx)) < 2:
            raise ModelError(f"constraint group {list(g)} needs at least two distinct states")
        out.add(tuple(sorted(set(idx))))
    return sorted(out)


def compile_model(
    specs: Iterable[ApplianceSpec],
    tol: float = DEFAULT_TOL,
    max_subset: int = DEFAULT_MAX_SUBSET,
    combo_groups=None,
    alias_groups=None,
    unit: str = "VA",
) -> HouseholdModel:
    """Compile appliance specs into a :class:`HouseholdModel`.

    ``combo_groups``/``alias_groups`` replace the automatic detection when
    given; entries may be column indices or ``"APPLIANCE.state"`` strings.
    """
    specs = tuple(specs)
    if not specs:
        raise EmptyModel("a household needs at least one appliance")
    if tol < 0:
        raise ValueError("tol must be >= 0")
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        raise ModelError("appliance ids must be unique")
    for spec in specs:
        validate_appliance(spec)

    sizes = np.array([len(s.states) for s in specs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    r = np.array([st.rating for s in specs for st in s.states], dtype=float)
    r_min = np.array([st.transient_min for s in specs for st in s.states], dtype=float)
    r_max = np.array([st.transient_max for s in specs for st in s.states], dtype=float)
    owner = np.repeat(np.arange(len(specs)), sizes)
    names = tuple(f"{s.id}.{st.label}" for s in specs for st in s.states)

    if combo_groups is None:
        combos = detect_combos(r, owner, tol, max_subset)
    else:
        combos = _resolve_groups(combo_groups, names)
    if alias_groups is None:
        aliases = detect_aliases(r, r_min, r_max, owner, tol)
    else:
        aliases = _resolve_groups(alias_groups, names)
    always_on = [
        tuple(range(int(offsets[j]), int(offsets[j] + sizes[j])))
        for j, s in enumerate(specs)
        if s.always_on
    ]

    for arr in (r, r_min, r_max, offsets, sizes, owner):
        arr.setflags(write=False)

    return HouseholdModel(
        appliances=specs,
        r=r,
        r_min=r_min,
        r_max=r_max,
        offsets=offsets,
        sizes=sizes,
        owner=owner,
        combo_groups=tuple(tuple(g) for g in combos),
        alias_groups=tuple(tuple(g) for g in aliases),
        always_on_rows=tuple(always_on),
        transitions=tuple(_transition_matrix(s) for s in specs),
        tol=float(tol),
        max_subset=int(max_subset),
        unit=unit,
        names=names,
    )


# alias matching the operation name used throughout the docs
compile = compile_model  # noqa: A001
