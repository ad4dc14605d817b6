"""YAML model and scenario files.

Model file (``schema: alip-model/1``)::

    schema: alip-model/1
    unit: VA                 # opaque, carried through
    tolerance: 1.0           # collision detection tolerance
    max_subset: 3
    appliances:
      - id: FRG
        always_on: false
        states:
          - {label: s1, rating: 130, tmin: 120, tmax: 400}
        std: [[OFF, s1], [s1, OFF]]   # optional; default fully connected
    combo_groups: [[A.on, B.on, C.on]]  # optional, replaces detection
    alias_groups: []                    # optional, replaces detection

Scenario file (``schema: alip-scenario/1``) embeds a model under ``model:``
(or names one with ``model_file:``, relative to the scenario) and adds
``length``, ``seed``, ``noise_sd``, ``transient_len``, an optional
``initial`` state per appliance and ``transitions``: one row-stochastic
matrix per appliance id, rows/columns ordered OFF then the listed states.
"""

from __future__ import annotations

import re
from pathlib import Path

import yaml

from .errors import ModelError, ModelFileError
from .model import OFF, ApplianceSpec, HouseholdModel, StateSpec, compile_model, validate_appliance

MODEL_SCHEMA = "alip-model/1"
SCENARIO_SCHEMA = "alip-scenario/1"


class _Map(dict):
    line = 0
    key_lines: dict


class _Loader(yaml.SafeLoader):
    pass


# state labels such as "on"/"off" must stay strings: only true/false are booleans
_Loader.yaml_implicit_resolvers = {
    k: [(tag, rx) for tag, rx in v if tag != "tag:yaml.org,2002:bool"]
    for k, v in yaml.SafeLoader.yaml_implicit_resolvers.items()
}
_Loader.add_implicit_resolver("tag:yaml.org,2002:bool", re.compile(r"^(?:true|True|TRUE|false|False|FALSE)$"), list("tTfF"))


def _construct_map(loader, node):
    loader.flatten_mapping(node)
    out = _Map(loader.construct_mapping(node, deep=True))
    out.line = node.start_mark.line + 1
    out.key_lines = {k.value: v.start_mark.line + 1 for k, v in node.value}
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_map)


class _Doc:
    def __init__(self, source):
        self.source = source

    def fail(self, where, field, msg):
        line = where.key_lines.get(field, where.line) if isinstance(where, _Map) else getattr(where, "line", 0)
        return ModelFileError(f"{self.source}:{line}: field '{field}': {msg}")

    def get(self, where, field, kind, default=..., path=None):
        name = path or field
        if field not in where:
            if default is ...:
                raise self.fail(where, name, "required field is missing")
            return default
        value = where[field]
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise self.fail(where, name, f"expected a number, got {value!r}")
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise self.fail(where, name, f"expected an integer, got {value!r}")
            return value
        if kind is bool:
            if not isinstance(value, bool):
                raise self.fail(where, name, f"expected true/false, got {value!r}")
            return value
        if kind is str:
            if not isinstance(value, (str, int, float)) or isinstance(value, bool):
                raise self.fail(where, name, f"expected a string, got {value!r}")
            return str(value)
        if not isinstance(value, kind):
            raise self.fail(where, name, f"expected {kind.__name__}, got {type(value).__name__}")
        return value


def _parse_yaml(text, source):
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = mark.line + 1 if mark is not None else "?"
        raise ModelFileError(f"{source}:{line}: {exc.problem}") from None
    if not isinstance(data, _Map):
        raise ModelFileError(f"{source}:1: expected a mapping at top level")
    return data


def _check_schema(doc, data, expected):
    schema = doc.get(data, "schema", str, default=expected)
    if schema != expected:
        raise doc.fail(data, "schema", f"unsupported schema {schema!r}, expected {expected!r}")


def _model_from(doc: _Doc, data: _Map) -> HouseholdModel:
    _check_schema(doc, data, MODEL_SCHEMA)
    appliances = doc.get(data, "appliances", list)
    if not appliances:
        raise doc.fail(data, "appliances", "at least one appliance is required")
    specs = []
    for a_i, app in enumerate(appliances):
        where = f"appliances[{a_i}]"
        if not isinstance(app, _Map):
            raise doc.fail(data, "appliances", f"{where} must be a mapping")
        aid = doc.get(app, "id", str, path=f"{where}.id")
        states = doc.get(app, "states", list, path=f"{where}.states")
        if not states:
            raise doc.fail(app, "states", f"{aid}: at least one non-OFF state is required")
        parsed = []
        for s_i, st in enumerate(states):
            sw = f"{where}.states[{s_i}]"
            if not isinstance(st, _Map):
                raise doc.fail(app, "states", f"{sw} must be a mapping")
            rating = doc.get(st, "rating", float, path=f"{sw}.rating")
            parsed.append(
                StateSpec(
                    label=doc.get(st, "label", str, path=f"{sw}.label"),
                    rating=rating,
                    transient_min=doc.get(st, "tmin", float, default=None, path=f"{sw}.tmin"),
                    transient_max=doc.get(st, "tmax", float, default=None, path=f"{sw}.tmax"),
                )
            )
        edges = None
        if "std" in app:
            raw = doc.get(app, "std", list, path=f"{where}.std")
            edges = set()
            for pair in raw:
                if not isinstance(pair, list) or len(pair) != 2:
                    raise doc.fail(app, "std", f"{aid}: each edge must be a [from, to] pair, got {pair!r}")
                edges.add((str(pair[0]), str(pair[1])))
            edges = frozenset(edges)
        spec = ApplianceSpec(
            id=aid,
            states=tuple(parsed),
            always_on=doc.get(app, "always_on", bool, default=False, path=f"{where}.always_on"),
            std_edges=edges,
        )
        specs.append((app, where, spec))

    def groups(field):
        if field not in data:
            return None
        raw = doc.get(data, field, list)
        for g in raw:
            if not isinstance(g, list):
                raise doc.fail(data, field, f"each group must be a list of APPLIANCE.state references, got {g!r}")
        return [[str(x) for x in g] for g in raw]

    try:
        for app, where, spec in specs:
            try:
                validate_appliance(spec)
            except ModelError as exc:
                raise doc.fail(app, "states", f"{where}: {exc}") from None
        return compile_model(
            [s for _, _, s in specs],
            tol=doc.get(data, "tolerance", float, default=1.0),
            max_subset=doc.get(data, "max_subset", int, default=3),
            combo_groups=groups("combo_groups"),
            alias_groups=groups("alias_groups"),
            unit=doc.get(data, "unit", str, default="VA"),
        )
    except ModelFileError:
        raise
    except (ModelError, ValueError) as exc:
        raise ModelFileError(f"{doc.source}:{data.line}: {exc}") from None


def parse_model(text: str, source: str = "<model>") -> HouseholdModel:
    doc = _Doc(source)
    return _model_from(doc, _parse_yaml(text, source))


def load_model(path) -> HouseholdModel:
    path = Path(path)
    return parse_model(path.read_text(), str(path))


def model_to_dict(model: HouseholdModel, groups: bool = False) -> dict:
    apps = []
    for spec in model.appliances:
        states = []
        for st in spec.states:
            entry = {"label": st.label, "rating": st.rating}
            if st.transient:
                entry["tmin"] = st.transient_min
                entry["tmax"] = st.transient_max
            states.append(entry)
        order = {lab: i for i, lab in enumerate((OFF,) + spec.labels)}
        edges = sorted(spec.std_edges, key=lambda e: (order[e[0]], order[e[1]]))
        apps.append(
            {
                "id": spec.id,
                "always_on": spec.always_on,
                "states": states,
                "std": [list(e) for e in edges],
            }
        )
    out = {
        "schema": MODEL_SCHEMA,
        "unit": model.unit,
        "tolerance": model.tol,
        "max_subset": model.max_subset,
        "appliances": apps,
    }
    if groups:
        out["combo_groups"] = [[model.names[i] for i in g] for g in model.combo_groups]
        out["alias_groups"] = [[model.names[i] for i in g] for g in model.alias_groups]
    return out


def dump_model(model: HouseholdModel, groups: bool = False) -> str:
    return yaml.safe_dump(model_to_dict(model, groups), sort_keys=False, default_flow_style=None)


def parse_scenario(text: str, source: str = "<scenario>", base_dir=None):
    from .errors import InvalidScenario
    from .simgen import SimScenario

    doc = _Doc(source)
    data = _parse_yaml(text, source)
    _check_schema(doc, data, SCENARIO_SCHEMA)
    if "model" in data:
        inner = doc.get(data, "model", _Map)
        model = _model_from(doc, inner)
    else:
        ref = doc.get(data, "model_file", str)
        path = Path(base_dir or ".") / ref
        if not path.exists():
            raise doc.fail(data, "model_file", f"no such file {str(path)!r}")
        model = load_model(path)
    trans = doc.get(data, "transitions", _Map)
    mats = []
    for aid in model.ids:
        if aid not in trans:
            raise doc.fail(trans, "transitions", f"no transition matrix for appliance {aid!r}")
        mat = trans[aid]
        if not isinstance(mat, list) or not all(isinstance(r, list) for r in mat):
            raise doc.fail(trans, aid, "expected a list of rows")
        try:
            mats.append([[float(x) for x in row] for row in mat])
        except (TypeError, ValueError):
            raise doc.fail(trans, aid, "matrix entries must be numbers") from None
    initial = doc.get(data, "initial", list, default=None)
    try:
        return SimScenario(
            model=model,
            transition_probs=tuple(mats),
            length=doc.get(data, "length", int),
            seed=doc.get(data, "seed", int, default=0),
            transient_len=doc.get(data, "transient_len", int, default=0),
            noise_sd=doc.get(data, "noise_sd", float, default=0.0),
            initial=None if initial is None else tuple(int(x) for x in initial),
            name=doc.get(data, "name", str, default=Path(source).stem),
        )
    except (InvalidScenario, ValueError) as exc:
        raise ModelFileError(f"{source}:{trans.line}: field 'transitions': {exc}") from None


def load_scenario(path):
    path = Path(path)
    return parse_scenario(path.read_text(), str(path), base_dir=path.parent)


def dump_scenario(scenario) -> str:
    data = {
        "schema": SCENARIO_SCHEMA,
        "name": scenario.name,
        "length": scenario.length,
        "seed": scenario.seed,
        "noise_sd": scenario.noise_sd,
        "transient_len": scenario.transient_len,
        "model": model_to_dict(scenario.model),
        "transitions": {
            aid: [[float(x) for x in row] for row in P]
            for aid, P in zip(scenario.model.ids, scenario.transition_probs)
        },
    }
    if scenario.initial is not None:
        data["initial"] = list(scenario.initial)
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None)
