"""Hard-constraint checks for a complete plan."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import Plan, PlanningInstance
from ..spatial import admissible_actions, capacity_violation, water_use, water_violation
from ..temporal import rotation_legal
from ..uncertainty import ScenarioSet, scenario_revenues


@dataclass(frozen=True, order=True)
class Violation:
    rule: str
    unit: str | None = None
    period: int | None = None
    crop: str | None = None
    detail: str = ""

    def __str__(self) -> str:
        where = ", ".join(
            f"{k}={v}" for k, v in (("unit", self.unit), ("period", self.period), ("crop", self.crop))
            if v is not None
        )
        return f"{self.rule}({where}){': ' + self.detail if self.detail else ''}"


class InfeasiblePlanError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        shown = "; ".join(str(v) for v in violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        super().__init__(f"plan is infeasible: {shown}{more}")


class NoFeasiblePlan(ValueError):
    """Raised when a search cannot produce any plan meeting the hard constraints."""


def check_references(plan: Plan, instance: PlanningInstance) -> list[Violation]:
    out = []
    for (uid, t), cid in sorted(plan.assignment.items()):
        if uid not in instance.unit_index:
            out.append(Violation("unknown_unit", uid, t, cid))
        if cid not in instance.crop_index:
            out.append(Violation("unknown_crop", uid, t, cid))
        if not 1 <= t <= instance.horizon:
            out.append(Violation("period_out_of_range", uid, t, cid))
    return out


def check_admissibility(plan: Plan, instance: PlanningInstance) -> list[Violation]:
    allowed = admissible_actions(instance, 1)
    return [
        Violation("admissibility", uid, t, cid, "crop not admissible on this unit")
        for (uid, t), cid in sorted(plan.assignment.items())
        if cid not in allowed[uid]
    ]


def check_capacity(plan: Plan, instance: PlanningInstance) -> list[Violation]:
    return [
        Violation("capacity", uid, t)
        for t in instance.periods
        for uid in capacity_violation(plan, instance, t)
    ]


def check_water(plan: Plan, instance: PlanningInstance) -> list[Violation]:
    out = []
    for t in instance.periods:
        excess = water_violation(plan, instance, t)
        if excess is not None:
            out.append(Violation("water", period=t, detail=f"excess {excess:g} m3"))
    return out


def check_one_crop_per_period(plantings, instance: PlanningInstance) -> list[Violation]:
    """Works on raw (unit, period, crop) rows, where duplicates are possible."""
    seen: dict[tuple[str, int], str] = {}
    out = []
    for uid, t, cid in plantings:
        if (uid, t) in seen:
            out.append(Violation("one_crop_per_period", uid, t, cid, f"also {seen[(uid, t)]}"))
        seen.setdefault((uid, t), cid)
    return out


def check_rotation(plan: Plan, instance: PlanningInstance) -> list[Violation]:
    return [Violation("rotation", u, t, c) for u, t, c in rotation_legal(plan, instance)]


def check_legume_window(plan: Plan, instance: PlanningInstance) -> list[Violation]:
    """Every run of ``legume_window`` consecutive periods holds a legume on each
    unit that admits one."""
    window = instance.legume_window
    if window is None or window > instance.horizon:
        return []
    allowed = admissible_actions(instance, 1)
    out = []
    for unit in instance.units:
        if not any(instance.crop(c).is_legume for c in allowed[unit.id]):
            continue
        legume = [
            (c := plan.crop_at(unit.id, t)) is not None and instance.crop(c).is_legume
            for t in instance.periods
        ]
        for start in range(instance.horizon - window + 1):
            if not any(legume[start:start + window]):
                out.append(Violation(
                    "legume_window", unit.id, start + 1,
                    detail=f"no legume in periods {start + 1}-{start + window}",
                ))
    return out


def check_scenarios(plan: Plan, instance: PlanningInstance, scenarios: ScenarioSet) -> list[Violation]:
    """Same verdicts as ``scenario_feasible`` per scenario, sharing the
    scenario-independent work."""
    if any(capacity_violation(plan, instance, t) for t in instance.periods):
        bad = range(len(scenarios))
    else:
        use = np.array([water_use(plan, instance, t) for t in instance.periods])
        limits = scenarios.water_factor * np.asarray(instance.water_limits)[None, :]
        bad_water = np.any(use[None, :] > limits, axis=1)
        bad = [k for k in range(len(scenarios)) if bad_water[k]]
        floors = ~np.isnan(scenarios.min_revenue)
        if floors.any():
            totals = scenario_revenues(plan, instance, scenarios).sum(axis=1)
            short = floors & (totals < np.nan_to_num(scenarios.min_revenue))
            bad = sorted(set(bad) | {int(k) for k in np.flatnonzero(short)})
    return [Violation("scenario", detail=f"infeasible under scenario {k}") for k in bad]


def feasible(plan: Plan, instance: PlanningInstance, scenarios: ScenarioSet | None = None) -> list[Violation]:
    """All hard-constraint violations of ``plan``; empty means fully feasible."""
    refs = check_references(plan, instance)
    if refs:
        return refs
    out = (
        check_admissibility(plan, instance)
        + check_capacity(plan, instance)
        + check_water(plan, instance)
        + check_one_crop_per_period(plan.plantings(), instance)
        + check_rotation(plan, instance)
        + check_legume_window(plan, instance)
    )
    if scenarios is not None:
        out += check_scenarios(plan, instance, scenarios)
    return out
