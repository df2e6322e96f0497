"""Scenario files: schema-validated YAML in, canonical YAML out.

The file layout is a fixed key tree (see ``SCHEMA``): ``map``, obstacle
lists, ``robot``, ``target``, ``noise``, ``plan``, and a mandatory
``version``. Unknown keys are rejected. ``serialize_scenario`` emits the
canonical form: fixed key order, defaults filled in, derived quantities
(like the curvature limit) omitted.
"""

from __future__ import annotations

import math
from typing import Optional

import jsonschema
import numpy as np
import yaml

from .errors import DomainError, ScenarioError
from .geometry import Obstacle, RobotParams, WorldMap
from .hybrid_astar import GridSpec
from .simulate import NoiseModel, Scenario, TargetModel
from .smoothing import SmootherConfig
from .speed_opt import SpeedOptConfig
from .st_graph import DPCostConfig

SCHEMA_VERSION = 1

_POINT2 = {"type": "array", "items": {"type": "number"},
           "minItems": 2, "maxItems": 2}
_POLYGON = {"type": "array", "minItems": 3, "items": _POINT2}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "map", "robot", "target"],
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "seed": {"type": "integer", "minimum": 0},
        "map": {
            "type": "object",
            "additionalProperties": False,
            "required": ["width", "height"],
            "properties": {"width": _POSITIVE, "height": _POSITIVE,
                           "cell": _POSITIVE},
        },
        "static_obstacles": {"type": "array", "items": _POLYGON},
        "dynamic_obstacles": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["polygon", "velocity"],
                "properties": {"polygon": _POLYGON, "velocity": _POINT2},
            },
        },
        "robot": {
            "type": "object",
            "additionalProperties": False,
            "required": ["start"],
            "properties": {
                "start": {"type": "array", "items": {"type": "number"},
                          "minItems": 3, "maxItems": 3},
                "params": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "wheelbase": _POSITIVE,
                        "max_speed": _POSITIVE,
                        "max_accel": _POSITIVE,
                        "max_steer": _POSITIVE,
                        "lateral_accel_limit": _POSITIVE,
                    },
                },
            },
        },
        "target": {
            "type": "object",
            "additionalProperties": False,
            "required": ["x0"],
            "properties": {
                "x0": {"type": "array", "items": {"type": "number"},
                       "minItems": 4, "maxItems": 4},
                "dt": _POSITIVE,
                "mode": {"const": "uniform"},
                "controls": {
                    "type": "array", "minItems": 1,
                    "items": {"type": "array",
                              "items": {"type": "number"},
                              "minItems": 4, "maxItems": 4},
                },
            },
            "not": {"required": ["mode", "controls"]},
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"sigma1": _NONNEG, "sigma2": _NONNEG},
        },
        "plan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "T": _POSITIVE,
                "L": {"type": "integer", "minimum": 2},
                "degree": {"type": "integer", "minimum": 0},
                "capture_radius": _POSITIVE,
                "v0": _NONNEG,
                "a0": {"type": "number"},
                "sim_dt": _POSITIVE,
                "track": {"enum": ["playback", "pursuit"]},
                "replan_period": _POSITIVE,
                "weights": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "omega_o": _NONNEG, "omega_kappa": _NONNEG,
                        "omega_s": _NONNEG, "alpha": _POSITIVE,
                        "omega_1": _NONNEG, "omega_2": _NONNEG,
                    },
                },
            },
        },
    },
}

_DEFAULT_PARAMS = {"wheelbase": 0.5, "max_speed": 3.0, "max_accel": 2.0,
                   "max_steer": math.atan(0.5), "lateral_accel_limit": 4.0}
_DEFAULT_WEIGHTS = {"omega_o": 0.1, "omega_kappa": 0.1, "omega_s": 0.2,
                    "alpha": 0.25, "omega_1": 10.0, "omega_2": 3.0}
_DEFAULT_PLAN = {"T": 10.0, "L": 15, "degree": 2, "capture_radius": 0.3,
                 "v0": 0.0, "a0": 0.0, "sim_dt": 0.01, "track": "playback"}


def _parse_yaml(text: str, path: str) -> dict:
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as err:
        mark = err.problem_mark or err.context_mark
        where = (f" at line {mark.line + 1}, column {mark.column + 1}"
                 if mark else "")
        raise ScenarioError(
            f"{path}: parse error{where}: {err.problem or err}") from err
    except yaml.YAMLError as err:
        raise ScenarioError(f"{path}: parse error: {err}") from err
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: expected a key-value document")
    return doc


def _validate(doc: dict, path: str) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc),
                    key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        key = ".".join(str(p) for p in err.absolute_path) or "<document>"
        raise ScenarioError(f"{path}: invalid value at {key}: {err.message}")


def scenario_from_dict(doc: dict, path: str = "<scenario>") -> Scenario:
    """Build a runnable Scenario from a validated configuration tree."""
    _validate(doc, path)

    params_cfg = dict(_DEFAULT_PARAMS)
    params_cfg.update(doc["robot"].get("params", {}))
    kappa_max = math.tan(params_cfg["max_steer"]) / params_cfg["wheelbase"]
    robot = RobotParams(wheelbase=params_cfg["wheelbase"],
                        max_speed=params_cfg["max_speed"],
                        max_accel=params_cfg["max_accel"],
                        max_steer=params_cfg["max_steer"],
                        max_curvature=kappa_max,
                        lateral_accel_limit=params_cfg["lateral_accel_limit"])

    obstacles = []
    for i, poly in enumerate(doc.get("static_obstacles", [])):
        try:
            obstacles.append(Obstacle("static", poly))
        except DomainError as err:
            raise ScenarioError(
                f"{path}: invalid value at static_obstacles[{i}]: "
                f"{err}") from err
    for i, entry in enumerate(doc.get("dynamic_obstacles", [])):
        try:
            obstacles.append(Obstacle("dynamic", entry["polygon"],
                                      velocity=tuple(entry["velocity"])))
        except DomainError as err:
            raise ScenarioError(
                f"{path}: invalid value at dynamic_obstacles[{i}]: "
                f"{err}") from err
    world = WorldMap(float(doc["map"]["width"]), float(doc["map"]["height"]),
                     tuple(obstacles))

    tgt_cfg = doc["target"]
    controls = tgt_cfg.get("controls")
    target = TargetModel(
        np.asarray(tgt_cfg["x0"], dtype=float),
        None if controls is None else np.asarray(controls, dtype=float),
        float(tgt_cfg.get("dt", 1.0)))

    noise_cfg = doc.get("noise", {})
    noise = NoiseModel(float(noise_cfg.get("sigma1", 0.0)),
                       float(noise_cfg.get("sigma2", 0.0)),
                       int(doc.get("seed", 0)))

    plan_cfg = dict(_DEFAULT_PLAN)
    plan_cfg.update({k: v for k, v in doc.get("plan", {}).items()
                     if k != "weights"})
    weights = dict(_DEFAULT_WEIGHTS)
    weights.update(doc.get("plan", {}).get("weights", {}))

    cell = float(doc["map"].get("cell", 1.0))
    grid = GridSpec.for_params(robot, cell_size=cell)
    alpha = float(weights["alpha"])
    smoother = SmootherConfig(kappa_max=kappa_max,
                              w_obs=float(weights["omega_o"]),
                              w_cur=float(weights["omega_kappa"]),
                              w_smo=float(weights["omega_s"]),
                              step_sizes=(alpha, alpha, alpha))
    dp_cost = DPCostConfig(v_max=robot.max_speed)
    speed_cfg = SpeedOptConfig(w_accel=float(weights["omega_1"]),
                               w_terminal=float(weights["omega_2"]),
                               v_max=robot.max_speed,
                               a_min=-robot.max_accel,
                               a_max=robot.max_accel,
                               a_lat_max=robot.lateral_accel_limit)

    try:
        return Scenario(
            world=world, start=tuple(doc["robot"]["start"]), robot=robot,
            target=target, noise=noise, horizon=float(plan_cfg["T"]),
            n_observations=int(plan_cfg["L"]),
            degree=int(plan_cfg["degree"]),
            capture_radius=float(plan_cfg["capture_radius"]),
            v0=float(plan_cfg["v0"]), a0=float(plan_cfg["a0"]),
            grid=grid, smoother=smoother, dp_cost=dp_cost,
            speed_cfg=speed_cfg, sim_dt=float(plan_cfg["sim_dt"]),
            track=str(plan_cfg["track"]),
            replan_period=plan_cfg.get("replan_period"))
    except DomainError as err:
        raise ScenarioError(f"{path}: invalid scenario: {err}") from err


def load_scenario(path: str) -> Scenario:
    """Read, validate, and assemble a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ScenarioError(f"{path}: {err.strerror}") from err
    return scenario_from_dict(_parse_yaml(text, path), path)


def _num(x: float):
    """Integers stay integers so the canonical file reads naturally."""
    f = float(x)
    return int(f) if f.is_integer() and abs(f) < 1e15 else f


def scenario_to_dict(scn: Scenario) -> dict:
    """Canonical configuration tree of a Scenario (defaults made explicit,
    derived values dropped)."""
    doc: dict = {"version": SCHEMA_VERSION, "seed": scn.noise.seed}
    doc["map"] = {"width": _num(scn.world.width),
                  "height": _num(scn.world.height),
                  "cell": _num(scn.grid.cell_size)}
    static = [ob for ob in scn.world.obstacles if ob.kind == "static"]
    dynamic = [ob for ob in scn.world.obstacles if ob.kind == "dynamic"]
    doc["static_obstacles"] = [
        [[_num(x), _num(y)] for x, y in ob.vertices_at_t0] for ob in static]
    doc["dynamic_obstacles"] = [
        {"polygon": [[_num(x), _num(y)] for x, y in ob.vertices_at_t0],
         "velocity": [_num(v) for v in ob.velocity]} for ob in dynamic]
    doc["robot"] = {
        "start": [_num(v) for v in scn.start],
        "params": {"wheelbase": _num(scn.robot.wheelbase),
                   "max_speed": _num(scn.robot.max_speed),
                   "max_accel": _num(scn.robot.max_accel),
                   "max_steer": float(scn.robot.max_steer),
                   "lateral_accel_limit":
                       _num(scn.robot.lateral_accel_limit)},
    }
    target: dict = {"x0": [_num(v) for v in scn.target.x0],
                    "dt": _num(scn.target.dt)}
    if scn.target.controls.shape[0]:
        target["controls"] = [[_num(v) for v in row]
                              for row in scn.target.controls]
    else:
        target["mode"] = "uniform"
    doc["target"] = target
    doc["noise"] = {"sigma1": _num(scn.noise.sigma1),
                    "sigma2": _num(scn.noise.sigma2)}
    plan = {"T": _num(scn.horizon), "L": scn.n_observations,
            "degree": scn.degree,
            "capture_radius": _num(scn.capture_radius),
            "v0": _num(scn.v0), "a0": _num(scn.a0),
            "sim_dt": _num(scn.sim_dt), "track": scn.track}
    if scn.replan_period is not None:
        plan["replan_period"] = _num(scn.replan_period)
    plan["weights"] = {"omega_o": _num(scn.smoother.w_obs),
                       "omega_kappa": _num(scn.smoother.w_cur),
                       "omega_s": _num(scn.smoother.w_smo),
                       "alpha": _num(scn.smoother.step_sizes[0]),
                       "omega_1": _num(scn.speed_cfg.w_accel),
                       "omega_2": _num(scn.speed_cfg.w_terminal)}
    doc["plan"] = plan
    return doc


def serialize_scenario(scn: Scenario) -> str:
    """Canonical YAML text: loading it reproduces the Scenario, and
    serializing again reproduces the text byte for byte."""
    return yaml.safe_dump(scenario_to_dict(scn), sort_keys=False,
                          default_flow_style=None, width=78)
