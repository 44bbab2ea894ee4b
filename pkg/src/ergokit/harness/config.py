"""Experiment configuration files (JSON, schema version 1)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from ..exceptions import ValidationError

SCHEMA_VERSION = 1

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ergokit experiment configuration",
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "experiment": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "parameters": {"type": "object"},
        "output_dir": {"type": "string"},
    },
    "required": ["schema_version", "experiment", "seed"],
    "additionalProperties": False,
}

_JSON_TYPES = {bool: "boolean", int: "integer", float: "number", str: "string",
               list: "array", tuple: "array", dict: "object"}


def parameter_schema(defaults):
    """Schema admitting exactly the keys of ``defaults`` with matching types."""
    props = {}
    for key, val in defaults.items():
        kind = _JSON_TYPES[type(val)]
        props[key] = {"type": ["number"] if kind == "number" else kind}
    return {"type": "object", "properties": props, "additionalProperties": False}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    parameters: dict = field(default_factory=dict)
    output_dir: str = "ergokit-out"
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, data):
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ValidationError(f"invalid configuration: {exc.message}") from exc
        return cls(data["experiment"], int(data["seed"]), dict(data.get("parameters", {})),
                   data.get("output_dir", "ergokit-out"), data["schema_version"])

    def to_dict(self):
        return {"schema_version": self.schema_version, "experiment": self.experiment,
                "seed": self.seed, "parameters": self.parameters,
                "output_dir": self.output_dir}

    def digest(self):
        """SHA-256 of the canonical JSON form (output directory excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def load_config(path):
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(data)
