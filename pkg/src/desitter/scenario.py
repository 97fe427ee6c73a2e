"""Scenario files: JSON descriptions of a single run.

Top-level keys: ell, mass, mode, initial, integrator, acceleration,
thresholds, sweep, outputs.  Exactly one initial-state form is allowed,
either chart {"x": [...], "u": [...]} or bulk {"X": [...], "V": [...]};
whichever is given, both representations are derived from it.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .chart import ChartPoint
from .dynamics import (BulkState, ChartState, Forcing, IntegratorConfig,
                       bulk_to_chart, chart_to_bulk)
from .errors import ScenarioError

MODES = ("intrinsic", "bulk", "both")
_TOP_KEYS = {"ell", "mass", "mode", "initial", "integrator", "acceleration",
             "thresholds", "sweep", "outputs"}
_INTEGRATOR_KEYS = {"method", "h", "abs_tol", "rel_tol", "s_span",
                    "max_steps", "constraint_projection"}
SWEEP_PARAMETERS = ("h", "ell", "s_span")


@dataclass
class Scenario:
    ell: float
    mass: float
    mode: str
    initial: dict
    integrator: IntegratorConfig
    forcing: Forcing | None = None
    thresholds: dict = field(default_factory=dict)
    sweep: tuple | None = None
    outputs: dict = field(default_factory=dict)

    def chart_state(self) -> ChartState:
        if "x" in self.initial:
            point = ChartPoint(self.initial["x"], self.ell)
            return ChartState(point, self.initial["u"])
        return bulk_to_chart(self.bulk_state(), self.ell)

    def bulk_state(self) -> BulkState:
        if "X" in self.initial:
            return BulkState(self.initial["X"], self.initial["V"])
        return chart_to_bulk(self.chart_state())


def _vector(raw, length, label):
    try:
        v = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{label} must be a list of numbers") from exc
    if v.shape != (length,):
        raise ScenarioError(f"{label} must have exactly {length} components")
    if not np.all(np.isfinite(v)):
        raise ScenarioError(f"{label} must be finite")
    return v


def parse_scenario(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")

    ell = data.get("ell", 1.0)
    mass = data.get("mass", 1.0)
    if not (isinstance(ell, (int, float)) and ell > 0):
        raise ScenarioError("ell must be a positive number")
    if not (isinstance(mass, (int, float)) and mass > 0):
        raise ScenarioError("mass must be a positive number")

    mode = data.get("mode", "intrinsic")
    if mode not in MODES:
        raise ScenarioError(f"mode must be one of {MODES}")

    raw_init = data.get("initial")
    if not isinstance(raw_init, dict):
        raise ScenarioError("scenario needs an 'initial' object")
    chart_form = {"x", "u"} <= set(raw_init)
    bulk_form = {"X", "V"} <= set(raw_init)
    if chart_form == bulk_form or set(raw_init) not in ({"x", "u"}, {"X", "V"}):
        raise ScenarioError(
            "initial state must be exactly one of {x, u} or {X, V}")
    if chart_form:
        initial = {"x": _vector(raw_init["x"], 4, "initial.x"),
                   "u": _vector(raw_init["u"], 4, "initial.u")}
    else:
        initial = {"X": _vector(raw_init["X"], 5, "initial.X"),
                   "V": _vector(raw_init["V"], 5, "initial.V")}

    raw_cfg = data.get("integrator", {})
    if not isinstance(raw_cfg, dict):
        raise ScenarioError("integrator must be an object")
    unknown = set(raw_cfg) - _INTEGRATOR_KEYS
    if unknown:
        raise ScenarioError(f"unknown integrator keys: {sorted(unknown)}")
    cfg_kwargs = dict(raw_cfg)
    if "s_span" in cfg_kwargs:
        span = cfg_kwargs["s_span"]
        if not (isinstance(span, (list, tuple)) and len(span) == 2):
            raise ScenarioError("integrator.s_span must be [s0, s1]")
        cfg_kwargs["s_span"] = (float(span[0]), float(span[1]))
    try:
        integrator = IntegratorConfig(**cfg_kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad integrator config: {exc}") from exc

    forcing = None
    if "acceleration" in data:
        raw_acc = data["acceleration"]
        if not isinstance(raw_acc, dict) or "rate" not in raw_acc:
            raise ScenarioError("acceleration needs at least a 'rate'")
        plane = tuple(raw_acc.get("plane", (1, 2)))
        try:
            forcing = Forcing(rate=float(raw_acc["rate"]), plane=plane)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"bad acceleration block: {exc}") from exc
        if mode != "intrinsic":
            raise ScenarioError("acceleration requires intrinsic mode")

    thresholds = data.get("thresholds", {})
    if not isinstance(thresholds, dict):
        raise ScenarioError("thresholds must be an object")
    for key, val in thresholds.items():
        if not (isinstance(val, (int, float)) and val > 0):
            raise ScenarioError(f"threshold {key} must be a positive number")

    sweep = None
    if "sweep" in data:
        raw_sweep = data["sweep"]
        if (not isinstance(raw_sweep, dict)
                or set(raw_sweep) != {"parameter", "values"}):
            raise ScenarioError("sweep needs exactly {parameter, values}")
        param = raw_sweep["parameter"]
        if param not in SWEEP_PARAMETERS:
            raise ScenarioError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
        values = raw_sweep["values"]
        if not (isinstance(values, list) and values):
            raise ScenarioError("sweep values must be a non-empty list")
        vals = []
        for v in values:
            if not isinstance(v, (int, float)):
                raise ScenarioError("sweep values must be numbers")
            vals.append(float(v))
        sweep = (param, vals)

    outputs = data.get("outputs", {})
    if not isinstance(outputs, dict):
        raise ScenarioError("outputs must be an object")

    return Scenario(ell=float(ell), mass=float(mass), mode=mode,
                    initial=initial, integrator=integrator, forcing=forcing,
                    thresholds=dict(thresholds), sweep=sweep,
                    outputs=dict(outputs))


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    return parse_scenario(data)
