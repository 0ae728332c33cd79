"""Scenario configuration: JSON loading, schema validation, object construction."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import exprcore as ex
from .constitutive import IsomorphismOptions, Response, Sampler, UniformBody
from .fields import Chart, FrameField, OneForm, ScalarField, VectorField
from .liealg import as_rep


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    text = resources.files("gstructure").joinpath("data/config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def default_demo_config() -> dict:
    text = resources.files("gstructure").joinpath("data/paper_demo.json").read_text(encoding="utf-8")
    return json.loads(text)


def config_hash(raw: dict) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class ScenarioConfig:
    raw: dict
    seed: int
    chart: Chart
    sampler: Sampler
    solver: IsomorphismOptions
    tensors: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)
    responses: dict = field(default_factory=dict)
    bodies: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def tensor(self, name):
        return self._get(self.tensors, name, "tensor")

    def field(self, name):
        return self._get(self.fields, name, "field")

    def response(self, name):
        return self._get(self.responses, name, "response")

    def body(self, name):
        return self._get(self.bodies, name, "body")

    @staticmethod
    def _get(table, name, kind):
        try:
            return table[name]
        except KeyError:
            raise ConfigError(f"unknown {kind} {name!r}") from None


def _build_field(spec: dict):
    kind = spec["type"]
    if kind == "one_form":
        return OneForm(spec["components"])
    if kind == "exact_form":
        return ScalarField(spec["potential"]).differential()
    if kind == "vector":
        return VectorField(spec["components"])
    if kind == "frame":
        cols = spec["columns"]
        return FrameField([[cols[a][i] for a in range(3)] for i in range(3)])
    raise ConfigError(f"unknown field type {kind!r}")


def _need(spec, key, where):
    if key not in spec:
        raise ConfigError(f"{where}: missing {key!r}")
    return spec[key]


def parse_config(raw: dict) -> ScenarioConfig:
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as err:
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {path}: {err.message}") from None
    try:
        return _build(raw)
    except ConfigError:
        raise
    except (ex.ExprError, ValueError, TypeError) as err:
        raise ConfigError(str(err)) from None


def _build(raw: dict) -> ScenarioConfig:
    seed = int(raw["seed"])
    ch = raw.get("chart", {})
    chart = Chart(
        tuple(ch.get("lower", (0.0, 0.0, 0.0))),
        tuple(ch.get("upper", (1.0, 1.0, 1.0))),
        tuple(ch.get("resolution", (3, 3, 3))),
    )
    sm = raw.get("sampler", {})
    sampler = Sampler(count=int(sm.get("count", 60)), seed=seed, spread=float(sm.get("spread", 0.5)))
    so = raw.get("solver", {})
    solver = IsomorphismOptions(
        tol=float(so.get("tol", 1e-6)),
        max_iter=int(so.get("max_iter", 200)),
        starts=int(so.get("starts", 8)),
        seed=int(so.get("seed", seed)),
    )
    cfg = ScenarioConfig(raw, seed, chart, sampler, solver)

    for name, spec in raw.get("tensors", {}).items():
        rep = as_rep(spec["rep"])
        value = np.asarray(spec["value"], dtype=float)
        if value.shape != rep.shape:
            raise ConfigError(f"tensor {name!r}: value shape {value.shape} does not match {rep.tag} {rep.shape}")
        cfg.tensors[name] = (value, rep)

    for name, spec in raw.get("fields", {}).items():
        kind = spec["type"]
        key = {"one_form": "components", "vector": "components", "frame": "columns", "exact_form": "potential"}[kind]
        _need(spec, key, f"field {name!r}")
        cfg.fields[name] = _build_field(spec)

    for name, spec in raw.get("responses", {}).items():
        cfg.responses[name] = Response(spec["components"], mode=spec["mode"], name=spec.get("name", name))

    for name, spec in raw.get("bodies", {}).items():
        arche = cfg.response(spec["archetype"])
        if "response" in spec:
            cfg.bodies[name] = (cfg.response(spec["response"]), arche)
        else:
            implant = spec.get("implant", [[1, 0, 0], [0, 1, 0], [0, 0, 1]])
            ub = UniformBody(arche, implant, chart)
            cfg.bodies[name] = (ub, arche)

    _check_references(cfg)
    return cfg


def _check_references(cfg: ScenarioConfig) -> None:
    raw = cfg.raw
    for item in raw.get("isotropy", []):
        cfg.tensor(item["tensor"])
    for item in raw.get("symmetry", []):
        cfg.response(item["response"])
    for item in raw.get("isomorphism", []):
        cfg.response(item["source"])
        cfg.response(item["target"])
    for item in raw.get("defects", []):
        cfg.field(item["field"])
    for item in raw.get("compare", []):
        for side in ("a", "b"):
            g = item[side]
            if g["type"] == "geometric":
                cfg.field(_need(g, "field", f"compare.{side}"))
                cfg.tensor(_need(g, "tensor", f"compare.{side}"))
            else:
                cfg.body(_need(g, "body", f"compare.{side}"))
    demo = raw.get("paper_demo")
    if demo is not None:
        cfg.field(demo.get("form", "omega"))
        cfg.response(demo.get("response", "smectic"))
        if "tensor" in demo:
            cfg.tensor(demo["tensor"])


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON: {err}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(raw)
