"""Run configuration: YAML loading, schema and semantic validation.

A config file is a nested key/value document; unknown keys are rejected
with their path.  Every omitted key falls back to the committed ACC
defaults, so an empty ``{scenario: acc}`` file reproduces the stock
scenario.  Prior ranges are written for the positive resistance
magnitudes and are mapped onto the (negated) parameter-matrix entries
internally.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import jsonschema
import numpy as np
import yaml

from .acc import AccParams
from .drem import min_learning_rate
from .errors import ConfigurationError
from .safety import MODES
from .simulation import SimSchedule

#: Parameter names accepted in ``estimator.estimate`` and their position
#: in the (state-row, regressor-column) parameter matrix.
PARAM_ELEMENTS = {"f0_over_m": (1, 0), "f1": (1, 1), "f2": (1, 2)}

_RANGE = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}

_NULLABLE_NUMBER = {"type": ["number", "null"]}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "scenario": {"type": "string", "enum": ["acc"]},
        "output_dir": {"type": ["string", "null"]},
        "acc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mass": {"type": "number"},
                "gravity": {"type": "number"},
                "lead_speed": {"type": "number"},
                "f0_over_m": {"type": "number"},
                "f1": {"type": "number"},
                "f2": {"type": "number"},
                "gap_init": {"type": "number"},
                "speed_init": {"type": "number"},
                "u_min": _NULLABLE_NUMBER,
                "u_max": _NULLABLE_NUMBER,
                "headway_time": {"type": "number"},
                "brake_decel": _NULLABLE_NUMBER,
            },
        },
        "estimator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gamma": {"type": "number"},
                "r": {"type": "number"},
                "beta": {"type": "number"},
                "estimate": {
                    "type": "array",
                    "items": {"type": "string", "enum": sorted(PARAM_ELEMENTS)},
                    "minItems": 1,
                    "uniqueItems": True,
                },
                "f0_over_m_range": _RANGE,
                "f1_range": _RANGE,
                "f2_range": _RANGE,
                "enforce_gamma": {"type": "boolean"},
            },
        },
        "filters": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "poles": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "gains": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            },
        },
        "barrier": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"type": "string", "enum": list(MODES)},
                "alpha": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "type": {"type": "string", "enum": ["linear", "signed_square"]},
                        "scale": {"type": "number"},
                    },
                },
                "d_bar": _NULLABLE_NUMBER,
            },
        },
        "disturbance": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d_bar": {"type": "number"},
                "v_max": {"type": "number"},
            },
        },
        "schedule": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt_sim": {"type": "number"},
                "est_hz": {"type": "number"},
                "qp_hz": {"type": "number"},
                "horizon": {"type": "number"},
                "seed": {"type": "integer"},
                "log_stride": {"type": "integer"},
            },
        },
    },
}

DEFAULTS = {
    "scenario": "acc",
    "output_dir": None,
    "acc": {
        "mass": 1600.0,
        "gravity": 9.81,
        "lead_speed": 10.0,
        "f0_over_m": 0.981,
        "f1": 0.0013,
        "f2": 0.00125,
        "gap_init": 50.0,
        "speed_init": 10.0,
        "u_min": None,
        "u_max": None,
        "headway_time": 1.8,
        "brake_decel": None,
    },
    "estimator": {
        "gamma": 2.0,
        "r": 0.5,
        "beta": 7.7,
        "estimate": ["f0_over_m"],
        "f0_over_m_range": [0.0, 1.962],
        "f1_range": [0.0, 0.002],
        "f2_range": [0.0, 0.002],
        "enforce_gamma": True,
    },
    "filters": {
        "poles": [1.0, 2.0, 3.0],
        "gains": [8.0, 8.0, 8.0],
    },
    "barrier": {
        "mode": "cor2",
        "alpha": {"type": "linear", "scale": 1.0},
        "d_bar": None,
    },
    "disturbance": {
        "d_bar": 0.0,
        "v_max": 20.0,
    },
    "schedule": {
        "dt_sim": 1.0e-4,
        "est_hz": 10000.0,
        "qp_hz": 100.0,
        "horizon": 30.0,
        "seed": 0,
        "log_stride": 20,
    },
}


@dataclass
class RunConfig:
    """Fully validated and default-filled run description."""

    scenario: str
    acc: AccParams
    gamma: float
    r: float
    beta: float
    estimate: Tuple[str, ...]
    prior_ranges: dict
    enforce_gamma: bool
    filter_poles: np.ndarray
    filter_gains: np.ndarray
    mode: str
    alpha_type: str
    alpha_scale: float
    barrier_d_bar: float
    disturbance_d_bar: float
    v_max: float
    schedule: SimSchedule
    output_dir: Optional[str]
    flat: dict = field(repr=False, default_factory=dict)


def _merge_defaults(raw: dict) -> dict:
    merged = copy.deepcopy(DEFAULTS)
    for key, value in raw.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key].update(value)
        else:
            merged[key] = value
    return merged


def flatten(tree: dict, prefix: str = "") -> dict:
    """Dotted-path view of a nested config dict (lists kept as values)."""
    out = {}
    for key, value in tree.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten(value, path + "."))
        else:
            out[path] = value
    return out


def config_from_dict(raw: dict) -> RunConfig:
    """Schema-validate, fill defaults and semantically check a config tree."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a mapping")
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(part) for part in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config key {path}: {exc.message}") from None
    cfg = _merge_defaults(raw)

    try:
        acc = AccParams(**cfg["acc"])
    except TypeError as exc:
        raise ConfigurationError(f"acc section: {exc}") from None

    est = cfg["estimator"]
    gamma, r, beta = est["gamma"], est["r"], est["beta"]
    if not 0.0 < r < 1.0:
        raise ConfigurationError(f"estimator.r must lie in (0, 1), got {r}")
    if gamma <= 0.0:
        raise ConfigurationError(f"estimator.gamma must be positive, got {gamma}")
    if beta <= 0.0:
        raise ConfigurationError(f"estimator.beta must be positive, got {beta}")
    estimate = tuple(est["estimate"])
    ranges = {}
    true_values = {"f0_over_m": acc.f0_over_m, "f1": acc.f1, "f2": acc.f2}
    for name in PARAM_ELEMENTS:
        lo, hi = est[f"{name}_range"]
        if lo > hi:
            raise ConfigurationError(f"estimator.{name}_range has lo > hi")
        ranges[name] = (float(lo), float(hi))
        if name in estimate:
            if lo == hi:
                raise ConfigurationError(
                    f"estimator.{name}_range is degenerate but {name} is estimated"
                )
            if not lo <= true_values[name] <= hi:
                raise ConfigurationError(
                    f"true value {true_values[name]} of {name} lies outside its "
                    f"prior range [{lo}, {hi}]; the error envelopes require "
                    "containment"
                )
            if est["enforce_gamma"]:
                need = min_learning_rate(hi - lo, r, beta)
                if gamma < need * (1.0 - 1e-9):
                    raise ConfigurationError(
                        f"estimator.gamma={gamma} is below the minimum "
                        f"{need:.6g} required for {name} (width {hi - lo}) at "
                        f"beta={beta}"
                    )

    filters = cfg["filters"]
    poles = np.asarray(filters["poles"], dtype=float)
    gains = np.asarray(filters["gains"], dtype=float)
    if poles.size != 3 or gains.size != 3:
        raise ConfigurationError(
            "filters.poles and filters.gains must have one entry per "
            f"regressor component (3), got {poles.size} and {gains.size}"
        )

    dist = cfg["disturbance"]
    if dist["d_bar"] < 0.0:
        raise ConfigurationError("disturbance.d_bar must be >= 0")
    if dist["v_max"] <= 0.0:
        raise ConfigurationError("disturbance.v_max must be positive")

    bar = cfg["barrier"]
    alpha_type = bar["alpha"]["type"]
    alpha_scale = bar["alpha"]["scale"]
    if alpha_scale <= 0.0:
        raise ConfigurationError("barrier.alpha.scale must be positive")
    d_bar = bar["d_bar"]
    if d_bar is None:
        # auto margin: injected disturbance plus the resistance terms left
        # out of the estimation model, evaluated at the speed cap
        d_bar = dist["d_bar"]
        if bar["mode"] == "robust":
            v_max = dist["v_max"]
            for name, coef in true_values.items():
                if name not in estimate:
                    power = {"f0_over_m": 0, "f1": 1, "f2": 2}[name]
                    d_bar += abs(coef) * v_max**power
    elif d_bar < 0.0:
        raise ConfigurationError("barrier.d_bar must be >= 0")

    try:
        schedule = SimSchedule(**cfg["schedule"])
    except TypeError as exc:
        raise ConfigurationError(f"schedule section: {exc}") from None

    resolved = copy.deepcopy(cfg)
    resolved["barrier"]["d_bar"] = d_bar
    resolved["acc"]["u_min"] = acc.u_min
    resolved["acc"]["u_max"] = acc.u_max
    resolved["acc"]["brake_decel"] = acc.brake_decel

    return RunConfig(
        scenario=cfg["scenario"],
        acc=acc,
        gamma=gamma,
        r=r,
        beta=beta,
        estimate=estimate,
        prior_ranges=ranges,
        enforce_gamma=est["enforce_gamma"],
        filter_poles=poles,
        filter_gains=gains,
        mode=bar["mode"],
        alpha_type=alpha_type,
        alpha_scale=alpha_scale,
        barrier_d_bar=float(d_bar),
        disturbance_d_bar=float(dist["d_bar"]),
        v_max=float(dist["v_max"]),
        schedule=schedule,
        output_dir=cfg["output_dir"],
        flat=flatten(resolved),
    )


def load_config(path) -> RunConfig:
    """Parse a YAML config file and validate it."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from None
    if raw is None:
        raw = {}
    return config_from_dict(raw)


def dump_schema(path) -> None:
    """Write the JSON schema used for structural validation."""
    with open(path, "w") as fh:
        json.dump(SCHEMA, fh, indent=2, sort_keys=True)
        fh.write("\n")
