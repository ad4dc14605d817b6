"""Seeded synthetic households with known ground truth.

Each appliance performs a Markov walk over the edges of its state diagram.
Steady samples draw exactly the state rating; the first ``transient_len``
samples after entering a state start somewhere in the state's transient band
and move linearly toward the rating. The aggregate is the sum of draws plus
optional Gaussian noise, clipped at zero.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .errors import InvalidScenario
from .io import ReadingSeries
from .model import ApplianceSpec, HouseholdModel, StateSpec, compile_model


@dataclass(frozen=True, eq=False)
class SimScenario:
    model: HouseholdModel
    transition_probs: tuple
    length: int
    seed: int = 0
    transient_len: int = 0
    noise_sd: float = 0.0
    initial: tuple | None = None
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(
            self, "transition_probs", tuple(np.asarray(p, dtype=float) for p in self.transition_probs)
        )
        self.validate()

    def validate(self):
        model = self.model
        if len(self.transition_probs) != model.n:
            raise InvalidScenario(f"need {model.n} transition matrices, got {len(self.transition_probs)}")
        if self.length < 0 or self.transient_len < 0 or self.noise_sd < 0:
            raise InvalidScenario("length, transient_len and noise_sd must be nonnegative")
        for j, P in enumerate(self.transition_probs):
            size = int(model.sizes[j]) + 1
            name = model.ids[j]
            if P.shape != (size, size):
                raise InvalidScenario(f"{name}: transition matrix must be {size}x{size}, got {P.shape}")
            if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-9):
                raise InvalidScenario(f"{name}: transition rows must be nonnegative and sum to 1")
            if np.any((P > 0) & ~model.transitions[j]):
                raise InvalidScenario(f"{name}: probability mass on a transition its diagram forbids")
        if self.initial is not None:
            if len(self.initial) != model.n:
                raise InvalidScenario("initial state needs one label per appliance")
            for j, lab in enumerate(self.initial):
                if not 0 <= lab <= model.sizes[j]:
                    raise InvalidScenario(f"{model.ids[j]}: initial label {lab} out of range")
                if lab == 0 and model.appliances[j].always_on:
                    raise InvalidScenario(f"{model.ids[j]} is always on and cannot start OFF")


def sticky_transitions(model: HouseholdModel, stay=0.95):
    """Row-stochastic matrices: hold with probability ``stay``, otherwise move
    uniformly along the diagram's out-edges. ``stay`` may be a per-appliance list
    or a per-appliance list of per-state lists."""
    out = []
    for j in range(model.n):
        legal = model.transitions[j]
        size = legal.shape[0]
        s_j = stay[j] if isinstance(stay, (list, tuple)) else stay
        P = np.zeros((size, size))
        for a in range(size):
            p_stay = s_j[a] if isinstance(s_j, (list, tuple)) else s_j
            moves = [b for b in range(size) if legal[a, b] and b != a]
            if not legal[a, a]:
                p_stay = 0.0
            if not moves:
                P[a, a] = 1.0 if legal[a, a] else 0.0
                continue
            P[a, a] = p_stay
            for b in moves:
                P[a, b] = (1.0 - p_stay) / len(moves)
        out.append(P)
    return tuple(out)


def simulate(scenario: SimScenario):
    """Run ``scenario``; returns ``(ReadingSeries, states)`` where ``states`` is
    the ``T x n`` integer label matrix (0 = OFF)."""
    model = scenario.model
    T, n = scenario.length, model.n
    rng = np.random.default_rng(scenario.seed)
    if scenario.initial is not None:
        start = tuple(scenario.initial)
    else:
        start = tuple(1 if a.always_on else 0 for a in model.appliances)

    states = np.zeros((T, n), dtype=np.int64)
    power = np.zeros((T, n))
    cum = [np.cumsum(P, axis=1) for P in scenario.transition_probs]
    uniforms = rng.random((T, n))
    for j in range(n):
        cur = start[j]
        for t in range(T):
            if t:
                row = cum[j][cur]
                cur = min(bisect.bisect_right(row.tolist(), uniforms[t, j]), row.size - 1)
                while scenario.transition_probs[j][states[t - 1, j], cur] == 0:
                    cur -= 1
            states[t, j] = cur

    for j in range(n):
        spec = model.appliances[j]
        ramp_left = 0
        v0 = rating = 0.0
        for t in range(T):
            lab = int(states[t, j])
            if lab == 0:
                ramp_left = 0
                continue
            st = spec.states[lab - 1]
            entered = t == 0 or states[t - 1, j] != lab
            if entered and scenario.transient_len and st.transient:
                v0 = rng.uniform(st.transient_min, st.transient_max)
                rating = st.rating
                ramp_left = scenario.transient_len
            elif entered:
                ramp_left = 0
            if ramp_left:
                i = scenario.transient_len - ramp_left
                power[t, j] = v0 + (rating - v0) * i / scenario.transient_len
                ramp_left -= 1
            else:
                power[t, j] = st.rating

    aggregate = power.sum(axis=1)
    if scenario.noise_sd > 0:
        aggregate = aggregate + rng.normal(0.0, scenario.noise_sd, T)
    aggregate = np.clip(aggregate, 0.0, None)
    series = ReadingSeries(
        timestamps=np.arange(T, dtype=float),
        aggregate=aggregate,
        truth=power,
        channels=model.ids,
    )
    return series, states


# --------------------------------------------------------------------------
# presets


def _spec(id_, states, always_on=False, edges=None):
    return ApplianceSpec(
        id=id_,
        states=tuple(StateSpec(*s) for s in states),
        always_on=always_on,
        std_edges=None if edges is None else frozenset(edges),
    )


def sanity_model() -> HouseholdModel:
    """Four appliances whose joint draws are pairwise distinct: no collisions,
    no transients."""
    return compile_model(
        [
            _spec("LMP", [("on", 60)]),
            _spec("TV", [("standby", 15), ("on", 140)]),
            _spec("KET", [("boil", 1850)]),
            _spec("HTR", [("low", 700), ("high", 1300)]),
        ]
    )


def collision_model() -> HouseholdModel:
    # ratings 100 + 200 = 300 across three appliances, plus a large bystander
    return compile_model(
        [
            _spec("LT1", [("on", 100)]),
            _spec("LT2", [("on", 200)]),
            _spec("PMP", [("on", 300)]),
            _spec("OVN", [("bake", 1200), ("broil", 2100)]),
        ]
    )


def alias_model() -> HouseholdModel:
    # WSH start-up surge reaches 800 = 500 + LMP's 300
    wsh_edges = [("OFF", "wash"), ("wash", "spin"), ("spin", "OFF"), ("spin", "wash")]
    return compile_model(
        [
            _spec("LMP", [("on", 300)]),
            _spec("WSH", [("wash", 500, 490, 800), ("spin", 900, 850, 1150)], edges=wsh_edges),
            _spec("DRY", [("heat", 2600, 2450, 2750)]),
        ]
    )


def chatter_model() -> HouseholdModel:
    # two small loads on an always-on base; noise is comparable to their ratings
    return compile_model(
        [
            _spec("LMP", [("on", 60)]),
            _spec("FAN", [("on", 95)]),
            _spec("FRZ", [("run", 400)], always_on=True),
        ]
    )


def fridge_model() -> HouseholdModel:
    """Four appliances with 3, 4, 4 and 2 states (13 in total)."""
    frg_edges = [
        ("OFF", "OFF"), ("OFF", "s1"),
        ("s1", "s1"), ("s1", "s2"), ("s1", "OFF"),
        ("s2", "s2"), ("s2", "s3"),
        ("s3", "s3"), ("s3", "s4"), ("s3", "s1"),
        ("s4", "s4"), ("s4", "s1"),
    ]
    return compile_model(
        [
            _spec("CDE", [("tumble", 240), ("heat", 4600, 4400, 5200), ("cool", 420)]),
            _spec("FRG", [("s1", 8), ("s2", 140, 130, 480), ("s3", 165), ("s4", 410)], edges=frg_edges),
            _spec("HPE", [("fan", 320), ("stage1", 1900, 1750, 2500), ("stage2", 3300), ("defrost", 5400)]),
            _spec("B1E", [("on", 115, 100, 160), ("boost", 260)]),
        ]
    )


_MODELS = {
    "sanity": sanity_model,
    "collision": collision_model,
    "alias": alias_model,
    "chatter": chatter_model,
    "household": fridge_model,
}

# per-appliance, per-state hold probabilities (OFF first)
_STAY = {
    "sanity": [0.995, 0.995, 0.997, 0.997],
    "collision": [[0.999, 0.99], [0.999, 0.99], [0.996, 0.996], [0.999, 0.99, 0.99]],
    "alias": [[0.9995, 0.98], [0.995, 0.98, 0.98], [0.999, 0.99]],
    "chatter": [[0.995, 0.995], [0.995, 0.995], 1.0],
    "household": [[0.998, 0.995, 0.99, 0.995], [0.995, 0.995, 0.99, 0.995, 0.99], 0.997, [0.995, 0.995, 0.99]],
}

_NOISE = {"sanity": 0.0, "collision": 0.0, "alias": 0.0, "chatter": 25.0, "household": 6.0}
_TRANSIENT = {"sanity": 0, "collision": 0, "alias": 5, "chatter": 0, "household": 2}

PRESETS = tuple(_MODELS)


def preset(name: str, seed: int = 0, length: int = 10_000) -> SimScenario:
    """Bundled scenario targeting one failure mode of the plain IP.

    ``sanity``: collision/transient/noise free. ``collision``: 100 + 200 = 300.
    ``alias``: start-up surge equal to another appliance's rating.
    ``chatter``: small appliances under noise. ``household``: mixed, with a
    restricted fridge diagram.
    """
    if name not in _MODELS:
        raise InvalidScenario(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    model = _MODELS[name]()
    return SimScenario(
        model=model,
        transition_probs=sticky_transitions(model, _STAY[name]),
        length=length,
        seed=seed,
        transient_len=_TRANSIENT[name],
        noise_sd=_NOISE[name],
        name=name,
    )


def benchmark_suite(seeds_per_preset: int = 6, length: int = 10_000, base_seed: int = 2017):
    """Collision-rich suite: every non-sanity preset at several seeds."""
    out = []
    for i, name in enumerate(p for p in PRESETS if p != "sanity"):
        for s in range(seeds_per_preset):
            out.append(preset(name, seed=base_seed + 100 * i + s, length=length))
    return out
