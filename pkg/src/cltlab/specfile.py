"""JSON spec files for source laws.

Example::

    {"id": "rad2", "dim": 2, "family": "product_1d", "marginal": "rademacher",
     "copies": 2, "standardize": true}
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Any, Union

import jsonschema

from .distributions import DistributionSpec, Marginal, standardize, MARGINALS, FAMILIES

_NUM_ARRAY = {"type": "array", "items": {"type": "number"}}
_MATRIX = {"type": "array", "items": _NUM_ARRAY}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["family"],
    "additionalProperties": False,
    "properties": {
        "id": {"type": "string"},
        "dim": {"type": "integer", "minimum": 1, "maximum": 16},
        "family": {"enum": list(FAMILIES)},
        "atoms": {"type": "array", "minItems": 1, "items": {"anyOf": [{"type": "number"}, _NUM_ARRAY]}},
        "weights": {**_NUM_ARRAY, "minItems": 1},
        "means": {"type": "array", "minItems": 1, "items": _NUM_ARRAY},
        "covariances": {"type": "array", "minItems": 1, "items": _MATRIX},
        "marginal": {
            "anyOf": [
                {"enum": list(MARGINALS)},
                {
                    "type": "object",
                    "required": ["name"],
                    "additionalProperties": False,
                    "properties": {
                        "name": {"enum": list(MARGINALS)},
                        "a": {"type": "number"},
                        "b": {"type": "number"},
                        "w": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    },
                },
            ]
        },
        "copies": {"type": "integer", "minimum": 1, "maximum": 16},
        "location": {"anyOf": [{"type": "number"}, _NUM_ARRAY]},
        "standardize": {"type": "boolean"},
    },
    "allOf": [
        {"if": {"properties": {"family": {"const": "discrete"}}},
         "then": {"required": ["atoms", "weights"]}},
        {"if": {"properties": {"family": {"const": "gaussian_mixture"}}},
         "then": {"required": ["means", "covariances", "weights"]}},
        {"if": {"properties": {"family": {"const": "product_1d"}}},
         "then": {"required": ["marginal"]}},
        {"if": {"properties": {"family": {"const": "point_mass"}}},
         "then": {"required": ["location"]}},
    ],
}


class SpecFileError(ValueError):
    """Spec file rejected; ``field`` is a JSON path and ``line`` a 1-based line number when known."""

    def __init__(self, source: str, message: str, field: str = "", line: int | None = None):
        self.source, self.field, self.line = source, field, line
        where = source
        if line is not None:
            where += f":{line}"
        if field:
            where += f" [{field}]"
        super().__init__(f"{where}: {message}")


def _line_of(text: str, path: list) -> int | None:
    keys = [k for k in path if isinstance(k, str)]
    if not keys:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(keys[-1]), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _path_str(path) -> str:
    out = "$"
    for k in path:
        out += f"[{k}]" if isinstance(k, int) else f".{k}"
    return out


def spec_from_dict(data: dict, source: str = "<dict>", text: str = "") -> DistributionSpec:
    """Validate ``data`` against the schema and build the spec (standardized when asked)."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        if err.validator == "required":
            missing = re.findall(r"'(\w+)' is a required property", err.message)
            path = path + missing[:1]
        raise SpecFileError(source, err.message, _path_str(path), _line_of(text, path))

    family = data["family"]
    name = data.get("id", "")
    try:
        if family == "discrete":
            spec = DistributionSpec.discrete(data["atoms"], data["weights"], name=name)
        elif family == "gaussian_mixture":
            spec = DistributionSpec.gaussian_mixture(data["means"], data["covariances"], data["weights"], name=name)
        elif family == "point_mass":
            spec = DistributionSpec.point_mass(data["location"], name=name)
        else:
            mg = data["marginal"]
            marginal = Marginal(mg) if isinstance(mg, str) else Marginal(**mg)
            spec = DistributionSpec.product(marginal, data.get("copies", data.get("dim", 1)), name=name)
    except ValueError as exc:
        raise SpecFileError(source, f"{family}: {exc}", "$", _line_of(text, ["family"])) from exc

    if "dim" in data and data["dim"] != spec.dim:
        raise SpecFileError(source, f"dim {data['dim']} disagrees with data of dimension {spec.dim}",
                            "$.dim", _line_of(text, ["dim"]))
    if data.get("standardize", False):
        spec = standardize(spec)
    return spec


def load_spec(source: Union[str, Path, dict]) -> DistributionSpec:
    """Spec from a dict, a JSON file path, or a JSON string."""
    if isinstance(source, dict):
        return spec_from_dict(source)
    text = str(source)
    label = "<string>"
    if not text.lstrip().startswith("{"):
        path = Path(text)
        try:
            text = path.read_text()
        except OSError as exc:
            raise SpecFileError(str(path), f"cannot read spec file: {exc.strerror}") from exc
        label = str(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecFileError(label, exc.msg, line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise SpecFileError(label, "top level must be a JSON object", "$")
    return spec_from_dict(data, label, text)
