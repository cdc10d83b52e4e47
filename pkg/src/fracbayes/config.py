"""JSON experiment configuration: schema validation and translation to study objects.

One document drives every CLI command::

    {"design": {...}, "prior": {...}, "ig": {...}, "sampler": {...},
     "study": {"type": "rate" | "misspec" | "none", ...},
     "simulate": {...}, "lemmas": {...},
     "output_dir": "...", "base_seed": 0, "overrides": {"sampler.iterations": 500}}

``overrides`` maps dotted paths to replacement values and is applied before
validation. Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .experiments.misspec import MisspecStudyConfig
from .experiments.rates import RateStudyConfig
from .experiments.setup import ModelSetup

SEED_ENV = "FRACBAYES_SEED"

_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_OR_NULL = {"oneOf": [_POS, {"type": "null"}]}
_POS_INT = {"type": "integer", "minimum": 1}
_INT_LIST = {"type": "array", "items": _POS_INT, "minItems": 1}
_NONNEG_INT_LIST = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_RANGE = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA = _obj(
    {
        "design": _obj(
            {"kind": {"enum": ["gaussian_iso", "unit_sphere"]}, "vartheta": _POS},
        ),
        "prior": {
            "oneOf": [
                _obj({"kind": {"const": "student"}, "tau": _POS_OR_NULL, "c1": _POS}, ["kind"]),
                _obj(
                    {
                        "kind": {"const": "spike_slab"},
                        "p": {"oneOf": [{"type": "number", "minimum": 0, "maximum": 1}, {"type": "null"}]},
                        "v0": _POS_OR_NULL,
                        "v1": _POS,
                    },
                    ["kind"],
                ),
            ]
        },
        "ig": _obj({"a": _POS, "b": _POS_OR_NULL}),
        "sampler": _obj(
            {
                "kind": {"enum": ["gibbs", "mala"]},
                "alpha": {
                    "oneOf": [
                        {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                        {"const": "log_schedule"},
                    ]
                },
                "alpha_t": {"type": "number", "exclusiveMinimum": 1},
                "iterations": _POS_INT,
                "burn_in": {"type": "integer", "minimum": 0},
                "thin": _POS_INT,
                "init": {"enum": ["zero", "truth"]},
                "step_size": _POS_OR_NULL,
                "truncation": {"enum": ["reject", "coordinate"]},
                "coordinate_moves": {"type": "boolean"},
            }
        ),
        "study": {
            "oneOf": [
                _obj({"type": {"const": "none"}}, ["type"]),
                _obj(
                    {
                        "type": {"const": "rate"},
                        "n_grid": _INT_LIST,
                        "d_grid": _INT_LIST,
                        "s_grid": _NONNEG_INT_LIST,
                        "sigma0": _POS,
                        "replications": {"type": "integer", "minimum": 3},
                        "metrics": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                        "functional_m": {"type": "integer", "minimum": 1000},
                        "max_draws": _POS_INT,
                        "renyi_order": {"oneOf": [{"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}, {"type": "null"}]},
                        "rate_constant": _POS_OR_NULL,
                        "check_monotone": {"type": "boolean"},
                        "max_d": _POS_INT,
                        "max_n": _POS_INT,
                        "assertions": _obj(
                            {
                                "slope_n": _obj(
                                    {"metric": {"type": "string"}, "range": _RANGE, "min_r_squared": {"type": "number"}},
                                    ["metric", "range"],
                                ),
                                "s_ratio": _obj({"metric": {"type": "string"}, "range": _RANGE}, ["metric", "range"]),
                            }
                        ),
                    },
                    ["type", "n_grid", "d_grid", "s_grid"],
                ),
                _obj(
                    {
                        "type": {"const": "misspec"},
                        "n_grid": _INT_LIST,
                        "d_grid": _INT_LIST,
                        "s_grid": _INT_LIST,
                        "truth_kind": {"enum": ["nonlinear", "outside_l1_ball"]},
                        "link": {"enum": ["sin", "tanh", "linear"]},
                        "l1_scale": {"type": "number", "exclusiveMinimum": 1},
                        "sigma0": _POS,
                        "replications": {"type": "integer", "minimum": 3},
                        "oracle_samples": {"type": "integer", "minimum": 1000},
                        "ridge": _POS,
                        "max_draws": _POS_INT,
                        "rate_constant": _POS_OR_NULL,
                        "k_alpha": _POS_OR_NULL,
                    },
                    ["type", "n_grid", "d_grid", "s_grid"],
                ),
            ]
        },
        "simulate": _obj(
            {
                "n": _POS_INT,
                "d": _POS_INT,
                "s_star": {"type": "integer", "minimum": 0},
                "theta0": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "sigma0": _POS,
                "metrics": {"type": "array", "items": {"type": "string"}},
                "functional_m": {"type": "integer", "minimum": 1000},
                "write_chain": {"type": "boolean"},
                "write_data": {"type": "boolean"},
            },
            ["n", "d"],
        ),
        "lemmas": _obj(
            {
                "suite": {
                    "type": "object",
                    "additionalProperties": {"type": "array", "items": {"type": "object"}},
                }
            }
        ),
        "output_dir": {"type": "string", "minLength": 1},
        "base_seed": {"type": "integer", "minimum": 0},
        "overrides": {"type": "object"},
    }
)


class ConfigError(ValueError):
    """Invalid configuration (CLI exit code 2)."""


def _path_label(error) -> str:
    return ".".join(str(p) for p in error.absolute_path) or "<root>"


def _best_error(error):
    # descend into oneOf branches to report the most specific failure
    if error.context:
        return _best_error(jsonschema.exceptions.best_match(error.context))
    return error


def apply_overrides(doc: dict) -> dict:
    doc = copy.deepcopy(doc)
    for dotted, value in (doc.pop("overrides", None) or {}).items():
        keys = dotted.split(".")
        node = doc
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted!r} does not address an object")
        node[keys[-1]] = value
    return doc


def validate(doc: dict) -> dict:
    """Apply overrides and validate against :data:`SCHEMA`; returns the resolved document."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    if "overrides" in doc and not isinstance(doc["overrides"], dict):
        raise ConfigError("overrides: must be an object of dotted paths")
    resolved = apply_overrides(doc)
    validator = jsonschema.Draft202012Validator(SCHEMA)
    error = jsonschema.exceptions.best_match(validator.iter_errors(resolved))
    if error is not None:
        error = _best_error(error)
        raise ConfigError(f"{_path_label(error)}: {error.message}")
    return resolved


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return validate(doc)


def model_setup(doc: dict) -> ModelSetup:
    """Translate the ``design``/``prior``/``ig``/``sampler`` sections."""
    design = doc.get("design", {})
    prior = dict(doc.get("prior", {"kind": "student"}))
    ig = doc.get("ig", {})
    sampler = dict(doc.get("sampler", {}))
    spec = {}
    if "kind" in design:
        spec["design_kind"] = design["kind"]
    if "vartheta" in design:
        spec["vartheta"] = design["vartheta"]
    spec["prior"] = prior.pop("kind")
    spec.update(prior)
    if "a" in ig:
        spec["ig_a"] = ig["a"]
    if "b" in ig:
        spec["ig_b"] = ig["b"]
    if "kind" in sampler:
        spec["sampler"] = sampler.pop("kind")
    spec.update(sampler)
    try:
        return ModelSetup.from_dict(spec)
    except ValueError as exc:
        raise ConfigError(f"sampler/prior settings: {exc}") from exc


def study_config(doc: dict, base_seed: int):
    """``RateStudyConfig``, ``MisspecStudyConfig`` or ``None`` for the ``study`` section."""
    study = dict(doc.get("study", {"type": "none"}))
    kind = study.pop("type")
    if kind == "none":
        return None
    cls = RateStudyConfig if kind == "rate" else MisspecStudyConfig
    try:
        return cls.from_dict({**study, "setup": model_setup(doc).to_dict(), "base_seed": base_seed})
    except ValueError as exc:
        raise ConfigError(f"study: {exc}") from exc
