"""Pipeline configuration: one committed defaults document, strict validation.

Every tunable lives in `defaults.json`; user configs override a subset.
Unknown keys are rejected and ranges enforced through a JSON schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError

MODES = ("baseline", "follow_up", "stent_analysis")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_FRAC = {"type": "number", "minimum": 0, "maximum": 1}
_INT_POS = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": list(MODES)},
        "roi": {
            "oneOf": [
                {"type": "null"},
                {"type": "array", "items": {"type": "integer", "minimum": 0},
                 "minItems": 2, "maxItems": 2},
            ]
        },
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 0},
        "preprocess": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "guidewire_jump_alines": _INT_POS,
                "guidewire_edge_window": _INT_POS,
                "guidewire_floor": _FRAC,
                "guidewire_darkness_max": _FRAC,
                "lumen_jump_px": _INT_POS,
                "lumen_sigma": {"type": "number", "minimum": 0},
                "lumen_gradient_baseline_px": {"type": "integer", "minimum": 3},
                "lumen_r_min_px": {"type": "integer", "minimum": 0},
                "lumen_min_score": _FRAC,
                "patch_depth_px": _INT_POS,
                "patch_sigma": {"type": "number", "minimum": 0},
            },
        },
        "plaque": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "provider": {"enum": ["reference", "external"]},
                "low_frac": _FRAC,
                "min_component_px": _INT_POS,
                "shadow_floor": _FRAC,
                "prob_threshold": _FRAC,
                "gate_aline_prob": _FRAC,
                "gate_threshold": _FRAC,
                "island_radius_px": {"type": "integer", "minimum": 0},
            },
        },
        "stent": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "model_path": {"oneOf": [{"type": "null"}, {"type": "string"}]},
                "model_seed": {"type": "integer", "minimum": 0},
                "peak_frac": _FRAC,
                "shadow_ratio": _FRAC,
                "search_in_px": _INT_POS,
                "search_out_px": _INT_POS,
                "shadow_window_px": _INT_POS,
                "score_threshold": _FRAC,
                "strut_thickness_um": _POS,
                "malapposition_margin_um": {"type": "number", "minimum": 0},
            },
        },
        "quant": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "angular_bins": _INT_POS,
                "score_angle_deg": {"type": "number", "minimum": 0, "maximum": 360},
                "score_length_mm": _POS,
                "score_thickness_mm": _POS,
            },
        },
        "registration": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_offset": {"oneOf": [{"type": "null"}, _INT_POS]},
                "min_overlap": _INT_POS,
            },
        },
    },
}


def load_defaults() -> dict:
    text = resources.files("octopus").joinpath("defaults.json").read_text("utf-8")
    return json.loads(text)


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = val
    return out


@dataclass(frozen=True)
class PipelineConfig:
    """Validated, merged configuration for one analysis run."""

    raw: dict = field(repr=False)

    @property
    def mode(self) -> str:
        return self.raw["mode"]

    @property
    def roi(self) -> tuple[int, int] | None:
        r = self.raw["roi"]
        return None if r is None else (int(r[0]), int(r[1]))

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def workers(self) -> int:
        return self.raw["workers"]

    def section(self, name: str) -> dict:
        return self.raw[name]

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.raw))


def load_config(source: str | Path | dict | None = None) -> PipelineConfig:
    """Merge a user config (path or dict) over the defaults and validate."""
    defaults = load_defaults()
    if source is None:
        merged = defaults
        override: dict = {}
    else:
        if isinstance(source, (str, Path)):
            try:
                override = json.loads(Path(source).read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        else:
            override = source
        merged = _deep_merge(defaults, override)
    try:
        jsonschema.validate(merged, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {exc.message}") from exc
    roi = merged.get("roi")
    if roi is not None and roi[0] > roi[1]:
        raise ConfigError("roi: start frame must be <= end frame")
    return PipelineConfig(raw=merged)
