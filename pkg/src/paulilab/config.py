"""Scenario configuration: schema validation and object construction.

A scenario is one JSON document selecting a model, grids, an hbar ladder,
a spectral window, named observables, diagnostics with their acceptance
thresholds, and seeds.  Unknown keys are rejected everywhere; every
stochastic diagnostic requires its seed to be declared.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from paulilab import phase_flow, symbols
from paulilab.errors import ContractError
from paulilab.pauli import SIGMA
from paulilab.weyl_moyal import GridSpec

SCHEMA_VERSION = 1

_COUPLING_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["none", "constant", "sigma", "demo_vector"]},
        "axis": {"type": "integer", "minimum": 1, "maximum": 3},
        "vector": {"type": "array", "items": {"type": "number"},
                   "minItems": 3, "maxItems": 3},
        "function": {"enum": ["one", "x1", "x1_squared", "x1_cubed"]},
        "strength": {"type": "number"},
    },
}

_OBSERVABLE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "kind"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "kind": {"enum": ["sigma", "scalar", "identity"]},
        "axis": {"type": "integer", "minimum": 1, "maximum": 3},
        "function": {"enum": ["one", "x1", "x1_squared", "p1_squared"]},
    },
}

_DIAG_COMMON = {"enabled": {"type": "boolean"}}


def _diag(props):
    out = dict(_DIAG_COMMON)
    out.update(props)
    return {"type": "object", "additionalProperties": False,
            "required": ["enabled"], "properties": out}


SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "scenario", "model", "grid", "hbar",
                 "window", "observables", "diagnostics"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "scenario": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["id", "dim", "energy", "epsilon"],
            "properties": {
                "id": {"enum": ["harmonic", "quartic", "coupled_quartic"]},
                "dim": {"type": "integer", "minimum": 1, "maximum": 2},
                "energy": {"type": "number"},
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
                "alpha": {"type": "number"},
                "beta": {"type": "number"},
                "coupling": _COUPLING_SCHEMA,
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n"],
            "properties": {
                "n": {"type": "integer", "minimum": 4},
                "length": {"type": "number", "exclusiveMinimum": 0},
                "length_rule": {"enum": ["fixed", "shell_pad"]},
                "n_by_hbar": {"type": "object",
                              "additionalProperties": {"type": "integer"}},
            },
        },
        "hbar": {"type": "array", "minItems": 1,
                 "items": {"type": "number", "exclusiveMinimum": 0}},
        "window": {
            "type": "object",
            "additionalProperties": False,
            "required": ["energy", "omega"],
            "properties": {
                "energy": {"type": "number"},
                "omega": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "observables": {"type": "array", "items": _OBSERVABLE_SCHEMA},
        "diagnostics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "flow": _diag({
                    "t_final": {"type": "number"},
                    "z0": {"type": "array", "items": {"type": "number"}},
                }),
                "transport": _diag({
                    "t_final": {"type": "number"},
                    "tolerance": {"type": "number", "exclusiveMinimum": 0},
                }),
                "ergodic": _diag({
                    "observable": {"type": "string"},
                    "schedule": {"type": "array",
                                 "items": {"type": "number",
                                           "exclusiveMinimum": 0}},
                    "n_base": {"type": "integer", "minimum": 1},
                    "n_group": {"type": "integer", "minimum": 1},
                    "require_monotone": {"type": "boolean"},
                    "require_constant": {"type": "number"},
                }),
                "weyl_count": _diag({
                    "expected": {"type": "number"},
                    "tolerance": {"type": "number"},
                    "n_samples": {"type": "integer", "minimum": 1000},
                }),
                "szego": _diag({
                    "observable": {"type": "string"},
                    "target": {"type": "number"},
                    "max_ratio": {"type": "number"},
                }),
                "egorov": _diag({
                    "observable": {"type": "string"},
                    "t": {"type": "number"},
                    "min_slope": {"type": "number"},
                }),
                "s2": _diag({
                    "observable": {"type": "string"},
                    "target": {"type": "number"},
                    "require": {"enum": ["monotone", "floor"]},
                    "floor": {"type": "number"},
                    "timeavg_t": {"type": "number"},
                }),
                "counterexample": _diag({
                    "s2_floor": {"type": "number"},
                    "deviation_norm": {"type": "number"},
                    "deviation_tolerance": {"type": "number"},
                    "schedule": {"type": "array",
                                 "items": {"type": "number"}},
                    "n_base": {"type": "integer", "minimum": 1},
                    "n_group": {"type": "integer", "minimum": 1},
                }),
                "wigner": _diag({
                    "n_pairs": {"type": "integer", "minimum": 1},
                    "duality_tol": {"type": "number"},
                    "positivity_floor": {"type": "number"},
                }),
            },
        },
        "seeds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "liouville": {"type": "integer"},
                "haar": {"type": "integer"},
                "volume": {"type": "integer"},
                "wigner": {"type": "integer"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "plots": {"type": "boolean"},
                "export_operators": {"type": "boolean"},
            },
        },
    },
}

# seeds each stochastic diagnostic depends on
_STOCHASTIC_NEEDS = {
    "ergodic": ("liouville", "haar"),
    "counterexample": ("liouville", "haar"),
    "weyl_count": ("volume",),
    "wigner": ("wigner",),
}


class ConfigError(ContractError):
    """Scenario document failed validation."""


def validate_document(doc: dict) -> list[str]:
    """All schema and cross-field problems, empty when valid."""
    problems = []
    validator = jsonschema.Draft202012Validator(SCHEMA)
    for err in sorted(validator.iter_errors(doc), key=str):
        loc = "/".join(str(p) for p in err.absolute_path) or "<root>"
        problems.append(f"{loc}: {err.message}")
    if problems:
        return problems

    names = [o["name"] for o in doc.get("observables", [])]
    for name in sorted(set(n for n in names if names.count(n) > 1)):
        problems.append(f"observables: duplicate name {name!r}")

    seeds = doc.get("seeds", {})
    diags = doc.get("diagnostics", {})
    for diag, needs in _STOCHASTIC_NEEDS.items():
        if diags.get(diag, {}).get("enabled"):
            for key in needs:
                if key not in seeds:
                    problems.append(
                        f"seeds: diagnostic {diag!r} is stochastic and "
                        f"requires seed {key!r}")

    for diag, spec in diags.items():
        obs = spec.get("observable")
        if obs is not None and obs not in names:
            problems.append(f"diagnostics/{diag}: unknown observable {obs!r}")
    return problems


def load_document(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# construction of runtime objects
# ---------------------------------------------------------------------------

_SCALAR_FUNCTIONS = {
    "one": lambda p, x: np.ones(x.shape[:-1]),
    "x1": lambda p, x: x[..., 0],
    "x1_squared": lambda p, x: x[..., 0] ** 2,
    "x1_cubed": lambda p, x: x[..., 0] ** 3,
    "p1_squared": lambda p, x: p[..., 0] ** 2,
}


def _build_coupling(spec: Optional[dict], dim: int):
    if spec is None or spec["kind"] == "none":
        return None
    strength = spec.get("strength", 1.0)
    if spec["kind"] == "constant":
        vec = strength * np.asarray(spec.get("vector", [0.0, 0.0, 1.0]))
        return symbols.constant_coupling(vec, dim)
    if spec["kind"] == "sigma":
        base = _SCALAR_FUNCTIONS[spec.get("function", "one")]
        return symbols.sigma_coupling(
            lambda p, x: strength * base(p, x), spec.get("axis", 3), dim)
    if spec["kind"] == "demo_vector":
        def c(p, x):
            out = np.empty(x.shape[:-1] + (3,))
            out[..., 0] = x[..., 0]
            out[..., 1] = x[..., 1]
            out[..., 2] = 0.5 + x[..., 0] * x[..., 1]
            return strength * out

        return symbols.vector_coupling(c, dim, "demo coupling")
    raise ConfigError(f"unknown coupling kind {spec['kind']!r}")


def build_model(spec: dict) -> phase_flow.HamiltonianModel:
    coupling = _build_coupling(spec.get("coupling"), spec["dim"])
    if spec["id"] == "harmonic":
        return phase_flow.harmonic_model(
            dim=spec["dim"], energy=spec["energy"], epsilon=spec["epsilon"],
            coupling=coupling)
    if spec["id"] == "quartic":
        if spec["dim"] != 2:
            raise ConfigError("quartic model requires dim = 2")
        return phase_flow.quartic_model_2d(
            beta=spec.get("beta", 0.01), energy=spec["energy"],
            epsilon=spec["epsilon"], coupling=coupling)
    if spec["id"] == "coupled_quartic":
        if spec["dim"] != 2:
            raise ConfigError("coupled_quartic model requires dim = 2")
        return phase_flow.coupled_quartic_model_2d(
            alpha=spec.get("alpha", 8.0), energy=spec["energy"],
            epsilon=spec["epsilon"], coupling=coupling)
    raise ConfigError(f"unknown model id {spec['id']!r}")


def build_observable(spec: dict, dim: int) -> symbols.MatrixSymbol:
    if spec["kind"] == "identity":
        return symbols.constant_symbol(np.eye(2), dim, spec["name"])
    if spec["kind"] == "sigma":
        return symbols.constant_symbol(SIGMA[spec.get("axis", 3) - 1], dim,
                                       spec["name"])
    if spec["kind"] == "scalar":
        f = _SCALAR_FUNCTIONS[spec["function"]]
        return symbols.scalar_symbol(f, dim, spec["name"])
    raise ConfigError(f"unknown observable kind {spec['kind']!r}")


@dataclass(frozen=True)
class Scenario:
    """Validated configuration with constructed runtime objects."""

    doc: dict
    model: phase_flow.HamiltonianModel
    observables: dict

    @property
    def name(self) -> str:
        return self.doc["scenario"]

    @property
    def hbars(self) -> list:
        return [float(h) for h in self.doc["hbar"]]

    @property
    def seeds(self) -> dict:
        return self.doc.get("seeds", {})

    @property
    def plots_enabled(self) -> bool:
        return self.doc.get("output", {}).get("plots", True)

    def grid_for(self, hbar: float) -> GridSpec:
        g = self.doc["grid"]
        n = g.get("n_by_hbar", {}).get(repr(hbar), g["n"])
        rule = g.get("length_rule", "fixed")
        if rule == "shell_pad":
            length = float(np.sqrt(2 * max(self.model.energy_E, 0.0))
                           + 3 * np.sqrt(hbar))
        else:
            if "length" not in g:
                raise ConfigError("grid.length required with fixed rule")
            length = float(g["length"])
        return GridSpec(dim=self.model.dim, n=n, length=length, hbar=hbar)

    def observable(self, name: str) -> symbols.MatrixSymbol:
        try:
            return self.observables[name]
        except KeyError:
            raise ConfigError(f"scenario has no observable {name!r}") from None


def load_scenario(path) -> Scenario:
    doc = load_document(path)
    problems = validate_document(doc)
    if problems:
        raise ConfigError("invalid scenario: " + "; ".join(problems))
    model = build_model(doc["model"])
    observables = {o["name"]: build_observable(o, doc["model"]["dim"])
                   for o in doc["observables"]}
    return Scenario(doc=doc, model=model, observables=observables)
