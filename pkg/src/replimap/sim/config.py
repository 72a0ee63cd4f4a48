"""Simulator configuration: one JSON document, every default listed here.

User configs are overlaid on :data:`DEFAULTS`; unknown keys and type or range
errors raise :class:`ConfigError` carrying a JSON pointer to the offending key.
"""
from __future__ import annotations

import copy
import json
import math
from pathlib import Path

from ..errors import ConfigError, ParseError

DEFAULTS: dict = {
    "format_version": 1,
    "world": {
        "n_scenes": 5000,
        "craters_per_scene": 8.0,
        "width_px": 256,
        "height_px": 256,
        "gsd_m": 100.0,
        "diameter_km_min": 0.2,
        "diameter_km_max": 25.5,
    },
    "field": {
        "base": 0.95,
        "lat_gradient": 0.5,
        "sh_degree": 4,
        "sh_amplitude": 0.04,
        "lon_patchiness": 0.25,
        "patch_block_deg": 20.0,
        "noise_sd": 0.05,
    },
    "curve": {"q0": 0.62, "q_inf": 0.92, "tau": 280.0},
    "detector": {
        "sigma_px": 3.0,
        "lambda_fp": 0.5,
        "score_spread": 0.2,
        "fp_slots": 10,
        "run_noise_sd": 0.01,
        "iou_thresh": 0.5,
    },
    "exp1": {
        "sizes": [100, 200, 400, 800, 1200, 1600, 2000, 2400, 2800],
        "replicates": 10,
        "n_val_scenes": 2000,
    },
    "exp2": {
        "train_size": 2000,
        "replicates": 20,
        "n_val_scenes": 400,
        "low_run_noise_sd": 0.004,
        "high_run_noise_sd": 0.08,
    },
    "exp3": {"train_size": 2000, "scheme": "grid10"},
    "exp4": {
        "train_size": 2000,
        "train_strips": [[60.0, 70.0], [0.0, 10.0], [-40.0, -30.0]],
        "strip_deg": 10.0,
        "proximity_deg": 30.0,
        "weights": "lat_path",
        "n_perm": 999,
        "include_training_strip": True,
    },
    "exp5": {
        "train_size": 2000,
        "train_strips": [[100.0, 120.0], [200.0, 220.0]],
        "strip_deg": 20.0,
        "proximity_deg": 600.0,
        "weights": "lon_cycle",
        "n_perm": 999,
        "include_training_strip": True,
    },
    "report": {"detections": "first"},
}

_POSITIVE = {
    "/world/n_scenes", "/world/craters_per_scene", "/world/width_px", "/world/height_px", "/world/gsd_m",
    "/world/diameter_km_min", "/world/diameter_km_max", "/field/patch_block_deg", "/curve/tau",
    "/exp1/replicates", "/exp1/n_val_scenes", "/exp2/replicates", "/exp2/n_val_scenes",
    "/exp2/train_size", "/exp3/train_size", "/exp4/train_size", "/exp5/train_size",
    "/exp4/strip_deg", "/exp5/strip_deg", "/exp4/proximity_deg", "/exp5/proximity_deg",
    "/exp4/n_perm", "/exp5/n_perm", "/detector/fp_slots", "/detector/iou_thresh",
}
_NON_NEGATIVE = {
    "/field/lat_gradient", "/field/sh_degree", "/field/sh_amplitude", "/field/lon_patchiness",
    "/field/noise_sd", "/detector/sigma_px", "/detector/lambda_fp", "/detector/score_spread",
    "/detector/run_noise_sd", "/exp2/low_run_noise_sd", "/exp2/high_run_noise_sd",
}
_UNIT = {"/field/base", "/curve/q0", "/curve/q_inf", "/detector/iou_thresh"}
_CHOICES = {
    "/exp3/scheme": ("grid10", "grid5", "grid15", "grid20", "grid30"),
    "/exp4/weights": ("lat_path",),
    "/exp5/weights": ("lon_cycle",),
    "/report/detections": ("first", "all", "none"),
}


def _type_ok(default, value) -> bool:
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
    if isinstance(default, str):
        return isinstance(value, str)
    if isinstance(default, list):
        return isinstance(value, list)
    return isinstance(value, dict)


def _merge(default, user, pointer: str):
    if isinstance(default, dict):
        if not isinstance(user, dict):
            raise ConfigError(pointer or "/", "expected an object")
        out = copy.deepcopy(default)
        for key, val in user.items():
            sub = f"{pointer}/{key}"
            if key not in default:
                raise ConfigError(sub, "unknown key")
            out[key] = _merge(default[key], val, sub)
        return out
    if not _type_ok(default, user):
        raise ConfigError(pointer, f"expected {type(default).__name__}, got {json.dumps(user)}")
    if isinstance(default, float):
        return float(user)
    return copy.deepcopy(user)


def _check(cfg: dict):
    def get(ptr):
        node = cfg
        for part in ptr.strip("/").split("/"):
            node = node[part]
        return node

    for ptr in _POSITIVE:
        if not get(ptr) > 0:
            raise ConfigError(ptr, "must be positive")
    for ptr in _NON_NEGATIVE:
        if not get(ptr) >= 0:
            raise ConfigError(ptr, "must be non-negative")
    for ptr in _UNIT:
        if not 0 <= get(ptr) <= 1:
            raise ConfigError(ptr, "must lie in [0, 1]")
    for ptr, choices in _CHOICES.items():
        if get(ptr) not in choices:
            raise ConfigError(ptr, f"must be one of {', '.join(choices)}")
    if cfg["format_version"] != 1:
        raise ConfigError("/format_version", "unsupported format_version")
    if not cfg["curve"]["q_inf"] > cfg["curve"]["q0"]:
        raise ConfigError("/curve/q_inf", "must exceed q0")
    w = cfg["world"]
    if not w["diameter_km_min"] < w["diameter_km_max"]:
        raise ConfigError("/world/diameter_km_max", "must exceed diameter_km_min")
    if w["diameter_km_max"] * 1000.0 / w["gsd_m"] > min(w["width_px"], w["height_px"]):
        raise ConfigError("/world/diameter_km_max", "largest crater does not fit in a scene")
    if not 360.0 / cfg["field"]["patch_block_deg"] == round(360.0 / cfg["field"]["patch_block_deg"]):
        raise ConfigError("/field/patch_block_deg", "must divide 360")
    sizes = cfg["exp1"]["sizes"]
    if len(sizes) < 2 or any(isinstance(s, bool) or not isinstance(s, int) or s < 1 for s in sizes):
        raise ConfigError("/exp1/sizes", "need at least two positive integer sizes")
    if cfg["exp1"]["replicates"] < 2:
        raise ConfigError("/exp1/replicates", "need at least 2 replicates for paired t-tests")
    if cfg["exp2"]["replicates"] < 2:
        raise ConfigError("/exp2/replicates", "need at least 2 replicates")
    for k, extent in (("exp4", 180.0), ("exp5", 360.0)):
        d = cfg[k]["strip_deg"]
        if extent / d != round(extent / d):
            raise ConfigError(f"/{k}/strip_deg", f"must divide {extent:g}")
        strips = cfg[k]["train_strips"]
        if not strips:
            raise ConfigError(f"/{k}/train_strips", "need at least one training strip")
        for i, s in enumerate(strips):
            ok = (isinstance(s, list) and len(s) == 2
                  and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in s)
                  and s[0] < s[1])
            if not ok:
                raise ConfigError(f"/{k}/train_strips/{i}", "expected [lo, hi] with lo < hi")
    if cfg["field"]["sh_degree"] > 12:
        raise ConfigError("/field/sh_degree", "must be at most 12")


def resolve_config(user: dict | None = None) -> dict:
    """Defaults overlaid with ``user``, validated."""
    cfg = _merge(DEFAULTS, user or {}, "")
    _check(cfg)
    return cfg


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ParseError(f"cannot read config {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: malformed JSON ({e.msg} at line {e.lineno})") from e
    return resolve_config(doc)
