"""JSON instance documents, plan tables, state trajectories and metrics files.

Instance documents carry a ``version`` field and reject unknown keys. Plans are
written as ``unit,period,crop,area`` CSV plus a JSON file of per-(unit, period)
agronomic states. Machine-readable metrics are raw CNY with an explicit unit.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .model import (
    AgronomicState,
    Crop,
    CropCategory,
    InteractionMatrix,
    LandType,
    LandUnit,
    Plan,
    PlanningInstance,
    validate_instance,
)
from .optimizer.metrics import PlanMetrics
from .temporal import StateTrajectory
from .uncertainty import ScenarioSet, ScenarioSpec

FORMAT_VERSION = 1
PLAN_HEADER = ("unit", "period", "crop", "area")


class DocumentError(ValueError):
    """A document could not be parsed or failed validation; ``problems`` lists every issue."""

    def __init__(self, path, problems: list[str]):
        self.path = str(path)
        self.problems = list(problems)
        lines = "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(f"{self.path}:\n{lines}")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class UnitDoc(_Strict):
    id: str
    land_type: LandType
    area: float
    productivity_factor: float = 1.0
    fertility_level: int = 3
    irrigated_flag: bool = False
    cells: list[tuple[int, int]]


class CropDoc(_Strict):
    id: str
    category: CropCategory
    baseline_yield: float
    baseline_price: float
    baseline_cost: float
    water_need: float = 0.0
    replant_interval: int = 1
    allowed_land_types: list[LandType]
    area_per_planting: float | None = None
    demand: float | None = None


class InteractionDoc(_Strict):
    crops: list[str]
    entries: list[list[float]]


class ScenarioSpecDoc(_Strict):
    count: int = 200
    yield_radius: float = 0.1
    price_radius: float = 0.05
    cost_radius: float = 0.05
    demand_growth_range: tuple[float, float] = (0.05, 0.10)
    unit_noise: float = 0.0
    correlation: list[list[float]] | None = None


class InstanceDocument(_Strict):
    version: Literal[1]
    name: str = "instance"
    horizon: int
    periods_per_year: int = 2
    water_limits: list[float]
    interaction_yield_gain: float = 0.05
    interaction_clip: float = 0.5
    salvage_fraction: float = 0.0
    legume_window: int | None = None
    demand_cap: bool = False
    units: list[UnitDoc]
    crops: list[CropDoc]
    interaction: InteractionDoc | None = Field(default=None, description="omitted: all zeros")
    history: dict[str, str] = Field(default_factory=dict, description="crop grown in the season before period 1")
    scenarios: ScenarioSpecDoc | None = None


def instance_schema() -> dict:
    return InstanceDocument.model_json_schema()


def _format_errors(err: ValidationError) -> list[str]:
    out = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<document>"
        out.append(f"{loc}: {e['msg']}")
    return out


def _read_json(path: Path):
    text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(path, [f"line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None


def document_to_instance(doc: InstanceDocument) -> PlanningInstance:
    crop_ids = [c.id for c in doc.crops]
    if doc.interaction is None:
        interaction = InteractionMatrix.zeros(crop_ids)
    else:
        interaction = InteractionMatrix(tuple(doc.interaction.crops), np.array(doc.interaction.entries, dtype=float))
    return PlanningInstance(
        units=tuple(
            LandUnit(u.id, u.land_type, u.area, u.productivity_factor, u.fertility_level, u.irrigated_flag,
                     frozenset(u.cells))
            for u in doc.units
        ),
        crops=tuple(
            Crop(c.id, c.category, c.baseline_yield, c.baseline_price, c.baseline_cost, c.water_need,
                 c.replant_interval, frozenset(c.allowed_land_types), c.area_per_planting, c.demand)
            for c in doc.crops
        ),
        interaction=interaction,
        horizon=doc.horizon,
        water_limits=tuple(doc.water_limits),
        interaction_yield_gain=doc.interaction_yield_gain,
        salvage_fraction=doc.salvage_fraction,
        legume_window=doc.legume_window,
        demand_cap=doc.demand_cap,
        periods_per_year=doc.periods_per_year,
        interaction_clip=doc.interaction_clip,
        history=dict(doc.history),
        name=doc.name,
    )


def load_document(path) -> tuple[PlanningInstance, ScenarioSpec | None]:
    """Parse and validate an instance document, returning the optional scenario block too."""
    path = Path(path)
    raw = _read_json(path)
    try:
        doc = InstanceDocument.model_validate(raw)
    except ValidationError as exc:
        raise DocumentError(path, _format_errors(exc)) from None
    try:
        instance = document_to_instance(doc)
    except ValueError as exc:
        raise DocumentError(path, [str(exc)]) from None
    problems = validate_instance(instance)
    if problems:
        raise DocumentError(path, problems)
    spec = None
    if doc.scenarios is not None:
        s = doc.scenarios
        corr = tuple(tuple(r) for r in s.correlation) if s.correlation is not None else None
        spec = ScenarioSpec(s.count, s.yield_radius, s.price_radius, s.cost_radius,
                            tuple(s.demand_growth_range), s.unit_noise, corr)
    return instance, spec


def load_instance(path) -> PlanningInstance:
    return load_document(path)[0]


def _num(x: float):
    """Integers stay integral in JSON so documents read naturally."""
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2**53 else x


def instance_to_dict(instance: PlanningInstance, scenarios: ScenarioSpec | None = None) -> dict:
    out = {
        "version": FORMAT_VERSION,
        "name": instance.name,
        "horizon": instance.horizon,
        "periods_per_year": instance.periods_per_year,
        "water_limits": [_num(w) for w in instance.water_limits],
        "interaction_yield_gain": instance.interaction_yield_gain,
        "interaction_clip": instance.interaction_clip,
        "salvage_fraction": instance.salvage_fraction,
        "legume_window": instance.legume_window,
        "demand_cap": instance.demand_cap,
        "units": [
            {
                "id": u.id,
                "land_type": u.land_type.value,
                "area": _num(u.area),
                "productivity_factor": _num(u.productivity_factor),
                "fertility_level": u.fertility_level,
                "irrigated_flag": u.irrigated_flag,
                "cells": [list(c) for c in sorted(u.cells)],
            }
            for u in instance.units
        ],
        "crops": [
            {
                "id": c.id,
                "category": c.category.value,
                "baseline_yield": _num(c.baseline_yield),
                "baseline_price": _num(c.baseline_price),
                "baseline_cost": _num(c.baseline_cost),
                "water_need": _num(c.water_need),
                "replant_interval": c.replant_interval,
                "allowed_land_types": sorted(t.value for t in c.allowed_land_types),
                "area_per_planting": None if c.area_per_planting is None else _num(c.area_per_planting),
                "demand": None if c.demand is None else _num(c.demand),
            }
            for c in instance.crops
        ],
        "interaction": {
            "crops": list(instance.interaction.crop_ids),
            "entries": [[_num(v) for v in row] for row in instance.interaction.entries],
        },
        "history": dict(sorted(instance.history.items())),
    }
    if scenarios is not None:
        out["scenarios"] = {
            "count": scenarios.count,
            "yield_radius": scenarios.yield_radius,
            "price_radius": scenarios.price_radius,
            "cost_radius": scenarios.cost_radius,
            "demand_growth_range": list(scenarios.demand_growth_range),
            "unit_noise": scenarios.unit_noise,
            "correlation": None if scenarios.correlation is None else [list(r) for r in scenarios.correlation],
        }
    return out


def dumps_instance(instance: PlanningInstance, scenarios: ScenarioSpec | None = None) -> str:
    return json.dumps(instance_to_dict(instance, scenarios), indent=2) + "\n"


def save_instance(instance: PlanningInstance, path, scenarios: ScenarioSpec | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_instance(instance, scenarios), encoding="utf-8")
    return path


# -- plans and states ---------------------------------------------------------


def states_path_for(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".states.json")


def plan_table(plan: Plan, instance: PlanningInstance) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLAN_HEADER)
    order = instance.unit_index
    for uid, t, cid in sorted(plan.plantings(), key=lambda r: (r[1], order[r[0]])):
        w.writerow((uid, t, cid, repr(instance.planted_area(instance.unit(uid), instance.crop(cid)))))
    return buf.getvalue()


def states_document(trajectory: StateTrajectory, instance: PlanningInstance) -> dict:
    order = instance.unit_index
    rows = []
    for (uid, t), s in sorted(trajectory.states.items(), key=lambda kv: (kv[0][1], order[kv[0][0]])):
        rows.append({
            "unit": uid,
            "period": t,
            "last_crop": s.last_crop,
            "rotation_stress": s.rotation_stress,
            "interaction_potential": s.interaction_potential,
        })
    return {"version": FORMAT_VERSION, "states": rows}


def export_plan(plan: Plan, trajectory: StateTrajectory, instance: PlanningInstance, path) -> tuple[Path, Path]:
    """Write the plan table to ``path`` and its states next to it; returns both paths."""
    path = Path(path)
    path.write_text(plan_table(plan, instance), encoding="utf-8")
    states = states_path_for(path)
    states.write_text(json.dumps(states_document(trajectory, instance), indent=2) + "\n", encoding="utf-8")
    return path, states


def load_plan(path, instance: PlanningInstance | None = None) -> Plan:
    """Read a plan table; with ``instance`` the rows are checked against it."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header[:3]) != PLAN_HEADER[:3]:
            raise DocumentError(path, [f"line 1: expected header {','.join(PLAN_HEADER)}"])
        assignment: dict[tuple[str, int], str] = {}
        problems = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 3:
                problems.append(f"line {lineno}: expected at least 3 columns")
                continue
            uid, period, cid = row[0], row[1], row[2]
            try:
                t = int(period)
            except ValueError:
                problems.append(f"line {lineno}: period {period!r} is not an integer")
                continue
            if (uid, t) in assignment:
                problems.append(f"line {lineno}: unit {uid} has two crops in period {t}")
                continue
            if instance is not None:
                if uid not in instance.unit_index:
                    problems.append(f"line {lineno}: unknown unit {uid!r}")
                if cid not in instance.crop_index:
                    problems.append(f"line {lineno}: unknown crop {cid!r}")
                if not 1 <= t <= instance.horizon:
                    problems.append(f"line {lineno}: period {t} outside 1..{instance.horizon}")
            assignment[(uid, t)] = cid
    if problems:
        raise DocumentError(path, problems)
    return Plan(assignment)


def load_states(path) -> StateTrajectory:
    path = Path(path)
    raw = _read_json(path)
    try:
        states = {
            (r["unit"], int(r["period"])): AgronomicState(
                r["last_crop"], float(r["rotation_stress"]), float(r["interaction_potential"])
            )
            for r in raw["states"]
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise DocumentError(path, [f"malformed state record: {exc}"]) from None
    return StateTrajectory(states)


# -- metrics ------------------------------------------------------------------

MONEY_FIELDS = ("total_expected_profit", "worst_case_profit", "volatility", "nominal_profit")


def metrics_document(metrics: PlanMetrics, **extra) -> dict:
    return {"unit": "CNY", **metrics.as_dict(), **extra}


def save_metrics(metrics: PlanMetrics, path, **extra) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(metrics_document(metrics, **extra), indent=2) + "\n", encoding="utf-8")
    return path


def load_metrics(path) -> PlanMetrics:
    raw = _read_json(Path(path))
    if raw.get("unit") != "CNY":
        raise DocumentError(path, [f"unsupported unit {raw.get('unit')!r}"])
    fields = PlanMetrics.__dataclass_fields__
    return PlanMetrics(**{k: v for k, v in raw.items() if k in fields})


def format_metrics(metrics: PlanMetrics) -> str:
    """Human-readable summary with money in units of 10^4 CNY."""
    rows = [
        ("total expected profit", metrics.total_expected_profit / 1e4, "x10^4 CNY"),
        ("worst-case profit", metrics.worst_case_profit / 1e4, "x10^4 CNY"),
        ("volatility (annual sd)", metrics.volatility / 1e4, "x10^4 CNY"),
        ("nominal profit", metrics.nominal_profit / 1e4, "x10^4 CNY"),
    ]
    lines = [f"{name:<24}{value:>14.2f} {unit}" for name, value, unit in rows]
    lines.append(f"{'legume ratio':<24}{metrics.legume_ratio * 100:>13.1f}%")
    lines.append(f"{'rho / scenarios':<24}{metrics.rho:>14g} / {metrics.n_scenarios}")
    return "\n".join(lines)


# -- scenario sets --------------------------------------------------------------


def _encode(v: float):
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _decode(v) -> float:
    return math.nan if v is None else float(v)


def save_scenarios(scenarios: ScenarioSet, path) -> Path:
    """Scenario arrays as a JSON document (exact float round trip)."""
    doc = {"version": FORMAT_VERSION, "seed": scenarios.seed}
    for name in ("yield_factor", "price", "cost", "demand", "weights", "water_factor", "unit_factor", "min_revenue"):
        a = np.asarray(getattr(scenarios, name), dtype=float)
        doc[name] = {"shape": list(a.shape), "data": [_encode(v) for v in a.ravel().tolist()]}
    path = Path(path)
    path.write_text(json.dumps(doc) + "\n", encoding="utf-8")
    return path


def load_scenarios(path) -> ScenarioSet:
    raw = _read_json(Path(path))

    def arr(name):
        block = raw[name]
        return np.array([_decode(v) for v in block["data"]], dtype=float).reshape(block["shape"])

    return ScenarioSet(
        yield_factor=arr("yield_factor"), price=arr("price"), cost=arr("cost"), demand=arr("demand"),
        weights=arr("weights"), water_factor=arr("water_factor"), unit_factor=arr("unit_factor"),
        min_revenue=arr("min_revenue"), seed=raw.get("seed"),
    )
