"""Scenario configuration: a versioned JSON document resolved into plants, laws and references.

Example::

    {
      "schema_version": 1,
      "trials": 30,
      "seed": 0,
      "plant": {"source": "twipr", "horizon": 100, "truth_inertia_scale": 1.4},
      "agents": [
        {"name": "C", "law": "noilc", "s": 100, "r": 0},
        {"name": "G", "law": "noilc", "s": 1e-4, "r": 0.01}
      ],
      "collectives": [["C", "G"]]
    }

Plant sources are ``appendix-a``, ``twipr`` and ``explicit`` (``P`` and
optional ``d``).  Agent laws are ``noilc`` (``s``, ``r``), ``explicit``
(``Q``, ``L``) and ``deadbeat``; on the robot an agent may carry its own
``truth_inertia_scale``.  References are ``appendix-a``, ``twipr`` or
``explicit`` (``values``) and default to the plant's own.
"""
from dataclasses import dataclass, field
import json
import math

import numpy as np

from . import two_sample
from .errors import CilcError, ConfigError
from .lifted import AgentLaw, deadbeat_law, make_lifted_plant
from .noilc import NoilcWeights, design_noilc
from .twipr import (
    NonlinearTwipr, build_closed_loop, markov_lifted_plant, params_from_dict, reference_maneuver,
)

SCHEMA_VERSION = 1

#: simulation-study agent profiles on the robot, as (s, r)
PROFILE_WEIGHTS = {
    "conservative": (100.0, 0.0),
    "balanced": (1.0, 0.05),
    "greedy": (1e-4, 0.01),
}

_TOP_KEYS = {
    "schema_version", "scenario", "trials", "seed", "plant", "agents", "reference",
    "collectives", "hold_on_no_improvement", "distributed_election", "topology",
    "sampling_budget", "grid_spacing", "description",
}


@dataclass
class Scenario:
    """A resolved configuration."""
    plant: object
    laws: list
    r: np.ndarray
    names: list
    trials: int = 30
    seed: int = 0
    truth: object = None
    collectives: list = field(default_factory=list)
    hold_on_no_improvement: bool = False
    distributed_election: bool = False
    topology: str | None = None
    sampling_budget: int = 2000
    grid_spacing: float = 1e-4
    source: str = "appendix-a"


def _get(doc, key, kind, where, default=None):
    if key not in doc:
        return default
    value = doc[key]
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ConfigError(f"{where}{key}", f"expected {kind.__name__}, got {value!r}")
    return value


def _matrix(value, where):
    try:
        m = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(where, "not a numeric array") from None
    if not np.all(np.isfinite(m)):
        raise ConfigError(where, "contains non-finite entries")
    return m


def default_document(scenario):
    """The built-in configuration of each CLI scenario."""
    if scenario == "twipr":
        return {
            "schema_version": SCHEMA_VERSION,
            "trials": 30,
            "plant": {"source": "twipr"},
            "agents": [
                {"name": "C", "law": "noilc", "profile": "conservative"},
                {"name": "B", "law": "noilc", "profile": "balanced"},
                {"name": "G", "law": "noilc", "profile": "greedy"},
            ],
            "collectives": [["C", "B"], ["C", "G"], ["B", "G"], ["C", "B", "G"]],
        }
    if scenario == "consensus":
        # no plant: the command draws a random collective sized to the topology
        return {"schema_version": SCHEMA_VERSION, "trials": 20}
    return {"schema_version": SCHEMA_VERSION, "trials": 30, "plant": {"source": "appendix-a"}}


def load_document(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be an object")
    return doc


def _resolve_plant(doc):
    entry = _get(doc, "plant", dict, "", {"source": "appendix-a"})
    source = _get(entry, "source", str, "plant.", "appendix-a")
    if source == "appendix-a":
        return source, two_sample.plant(), None, two_sample.R_MINUS_D.copy()
    if source == "explicit":
        if "P" not in entry:
            raise ConfigError("plant.P", "required for an explicit plant")
        P = _matrix(entry["P"], "plant.P")
        d = _matrix(entry["d"], "plant.d") if "d" in entry else None
        try:
            plant = make_lifted_plant(P, d)
        except CilcError as exc:
            raise ConfigError("plant.P", str(exc)) from None
        return source, plant, None, None
    if source == "twipr":
        try:
            params, poles = params_from_dict({k: v for k, v in entry.items()
                                              if k in ("schema_version", "params", "poles")})
        except TypeError as exc:
            raise ConfigError("plant.params", str(exc)) from None
        except ConfigError as exc:
            field_name = exc.field if exc.field in ("params", "poles", "schema_version") \
                else f"params.{exc.field}"
            raise ConfigError(f"plant.{field_name}", str(exc).split(": ", 1)[-1]) from None
        horizon = _get(entry, "horizon", int, "plant.", 100)
        if horizon < 1:
            raise ConfigError("plant.horizon", "must be positive")
        scale = _get(entry, "truth_inertia_scale", float, "plant.", 1.4)
        if scale <= 0:
            raise ConfigError("plant.truth_inertia_scale", "must be positive")
        try:
            loop = build_closed_loop(params, poles)
        except CilcError as exc:
            raise ConfigError("plant.poles", str(exc)) from None
        except ValueError as exc:
            raise ConfigError("plant.poles", str(exc)) from None
        plant = markov_lifted_plant(loop, horizon)
        ctx = {"params": params, "loop": loop, "horizon": horizon, "scale": scale}
        return source, plant, ctx, reference_maneuver(horizon, params.T)
    raise ConfigError("plant.source", f"unknown source {source!r}")


def _resolve_agents(doc, source, plant):
    if "agents" not in doc:
        if source == "appendix-a":
            laws = two_sample.laws()
            return laws, [law.name for law in laws], [None] * len(laws)
        raise ConfigError("agents", f"required for plant source {source!r}")
    agents = doc["agents"]
    if not isinstance(agents, list) or not agents:
        raise ConfigError("agents", "must be a non-empty list")
    laws, names, scales = [], [], []
    for k, entry in enumerate(agents):
        where = f"agents[{k}]."
        if not isinstance(entry, dict):
            raise ConfigError(f"agents[{k}]", "must be an object")
        kind = _get(entry, "law", str, where, "noilc")
        name = _get(entry, "name", str, where, f"agent {k + 1}")
        if kind == "noilc":
            if "profile" in entry:
                profile = _get(entry, "profile", str, where)
                if profile not in PROFILE_WEIGHTS:
                    raise ConfigError(f"{where}profile", f"unknown profile {profile!r}")
                s, r = PROFILE_WEIGHTS[profile]
            else:
                s = _get(entry, "s", float, where)
                r = _get(entry, "r", float, where)
                if s is None or r is None:
                    raise ConfigError(f"agents[{k}]", "noilc agents need 's' and 'r' or a 'profile'")
            try:
                law = design_noilc(plant, NoilcWeights(float(s), float(r)), id=k + 1, name=name)
            except (CilcError, ValueError) as exc:
                raise ConfigError(f"agents[{k}]", str(exc)) from None
        elif kind == "explicit":
            for key in ("Q", "L"):
                if key not in entry:
                    raise ConfigError(f"{where}{key}", "required for an explicit law")
            Q = _matrix(entry["Q"], f"{where}Q")
            L = _matrix(entry["L"], f"{where}L")
            if Q.shape != (plant.N, plant.N) or L.shape != (plant.N, plant.N):
                raise ConfigError(f"agents[{k}]", f"Q and L must be {plant.N}x{plant.N}")
            law = AgentLaw(k + 1, Q, L, name=name)
        elif kind == "deadbeat":
            law = deadbeat_law(plant, id=k + 1)
            law = AgentLaw(law.id, law.Q, law.L, name=name)
        else:
            raise ConfigError(f"{where}law", f"unknown law {kind!r}")
        scale = _get(entry, "truth_inertia_scale", float, where)
        if scale is not None and scale <= 0:
            raise ConfigError(f"{where}truth_inertia_scale", "must be positive")
        laws.append(law)
        names.append(name)
        scales.append(scale)
    if len(set(names)) != len(names):
        raise ConfigError("agents", "agent names must be unique")
    return laws, names, scales


def _resolve_reference(doc, source, plant, default):
    entry = _get(doc, "reference", dict, "", None)
    if entry is None:
        if default is None:
            raise ConfigError("reference", f"required for plant source {source!r}")
        return default
    kind = _get(entry, "source", str, "reference.", "explicit")
    if kind == "appendix-a":
        r = two_sample.R_MINUS_D.copy()
    elif kind == "twipr":
        r = reference_maneuver(plant.N, _get(entry, "T", float, "reference.", 0.02))
    elif kind == "explicit":
        if "values" not in entry:
            raise ConfigError("reference.values", "required for an explicit reference")
        r = _matrix(entry["values"], "reference.values")
    else:
        raise ConfigError("reference.source", f"unknown source {kind!r}")
    if r.shape != (plant.N,):
        raise ConfigError("reference", f"must have length {plant.N}")
    return r


def resolve(doc):
    """Turn a configuration document into a :class:`Scenario`; raises :class:`ConfigError`."""
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")
    trials = _get(doc, "trials", int, "", 30)
    if trials < 1:
        raise ConfigError("trials", "must be >= 1")
    seed = _get(doc, "seed", int, "", 0)
    budget = _get(doc, "sampling_budget", int, "", 2000)
    if budget < 1:
        raise ConfigError("sampling_budget", "must be >= 1")
    spacing = _get(doc, "grid_spacing", float, "", 1e-4)
    if spacing <= 0:
        raise ConfigError("grid_spacing", "must be positive")

    source, plant, ctx, default_r = _resolve_plant(doc)
    laws, names, scales = _resolve_agents(doc, source, plant)
    r = _resolve_reference(doc, source, plant, default_r)

    truth = None
    if ctx is not None:
        params = ctx["params"]
        truths = [NonlinearTwipr(params.scaled(params.inertia_scale * (s or ctx["scale"])),
                                 ctx["loop"].K, ctx["horizon"]) for s in scales]
        truth = truths
    elif any(s is not None for s in scales):
        raise ConfigError("agents", "truth_inertia_scale needs the twipr plant")

    collectives = []
    raw = _get(doc, "collectives", list, "", None)
    if raw is None:
        collectives = [list(names)]
    else:
        for k, group in enumerate(raw):
            if not isinstance(group, list) or not group:
                raise ConfigError(f"collectives[{k}]", "must be a non-empty list of agent names")
            for name in group:
                if name not in names:
                    raise ConfigError(f"collectives[{k}]", f"unknown agent {name!r}")
            if len(set(group)) != len(group):
                raise ConfigError(f"collectives[{k}]", "repeats an agent")
            collectives.append(list(group))

    topology = _get(doc, "topology", str, "", None)
    return Scenario(
        plant=plant, laws=laws, r=r, names=names, trials=trials, seed=seed, truth=truth,
        collectives=collectives,
        hold_on_no_improvement=_get(doc, "hold_on_no_improvement", bool, "", False),
        distributed_election=_get(doc, "distributed_election", bool, "", False),
        topology=topology, sampling_budget=budget, grid_spacing=spacing, source=source,
    )


def subset(scenario, group):
    """Laws (renumbered 1..K) and per-agent truths for the agents named in ``group``."""
    laws, truths = [], []
    for k, name in enumerate(group, 1):
        law = scenario.laws[scenario.names.index(name)]
        laws.append(AgentLaw(k, law.Q, law.L, name=law.name))
        if scenario.truth is not None:
            truths.append(scenario.truth[scenario.names.index(name)])
    return laws, (truths or None)

