"""Per-scenario revenue of a plan, its robust value, and scenario feasibility."""

from __future__ import annotations

import numpy as np

from ..model import Plan, PlanningInstance
from ..spatial import AdjacencyMatrix, build_adjacency, capacity_violation, water_use
from ..temporal import StateTrajectory, simulate
from .scenarios import Scenario, ScenarioSet
from .wasserstein import AmbiguitySpec, WorstCaseResult, distance_matrix, worst_case_expectation


def scenario_revenue(
    plan: Plan, scenario: Scenario, instance: PlanningInstance, trajectory: StateTrajectory
) -> np.ndarray:
    """Net revenue per period under one scenario (index ``t - 1`` for period ``t``).

    Produced quantity is realised yield times planted area, scaled by
    ``1 + kappa * clip(eta)`` where ``eta`` is the unit's same-period interaction
    potential. With ``instance.demand_cap`` set, sales of each crop are capped by
    the remaining demand (drawn down in unit order) and surplus fetches
    ``salvage_fraction`` of the price; otherwise everything sells at full price.
    """
    kappa = instance.interaction_yield_gain
    clip = instance.interaction_clip
    unit_factor = scenario.unit_factor
    revenue = np.zeros(instance.horizon)
    for t in instance.periods:
        remaining = scenario.demand[:, t - 1].astype(float).copy()
        total = 0.0
        for unit in instance.units:
            cid = plan.crop_at(unit.id, t)
            if cid is None:
                continue
            k = instance.crop_index[cid]
            crop = instance.crops[k]
            area = instance.planted_area(unit, crop)
            eta = min(max(trajectory.realised_interaction(unit.id, t), -clip), clip)
            noise = 1.0 if unit_factor is None or len(unit_factor) == 0 else unit_factor[instance.unit_index[unit.id]]
            realised_yield = scenario.yield_factor[k, t - 1] * noise * unit.productivity_factor * crop.baseline_yield
            produced = realised_yield * (1.0 + kappa * eta) * area
            price = scenario.price[k, t - 1]
            if instance.demand_cap:
                sold = min(produced, remaining[k])
                remaining[k] -= sold
                income = price * sold + instance.salvage_fraction * price * (produced - sold)
            else:
                income = price * produced
            total += income - scenario.cost[k, t - 1] * area
        revenue[t - 1] = total
    return revenue


def scenario_revenues(
    plan: Plan,
    instance: PlanningInstance,
    scenarios: ScenarioSet,
    trajectory: StateTrajectory | None = None,
    adjacency: AdjacencyMatrix | None = None,
) -> np.ndarray:
    """(S, T) matrix of per-period revenues for every scenario."""
    if trajectory is None:
        trajectory = simulate(plan, instance, adjacency or build_adjacency(instance.units))
    return np.stack([scenario_revenue(plan, s, instance, trajectory) for s in scenarios.scenarios])


def robust_value(
    plan: Plan,
    instance: PlanningInstance,
    trajectory: StateTrajectory,
    scenarios: ScenarioSet,
    rho: float,
    ambiguity: AmbiguitySpec | None = None,
    distances: np.ndarray | None = None,
) -> WorstCaseResult:
    """Worst-case expected total revenue over the Wasserstein ball of radius ``rho``."""
    if distances is None:
        spec = ambiguity.with_rho(rho) if ambiguity is not None else AmbiguitySpec.for_instance(instance, rho)
        distances = distance_matrix(scenarios, spec)
    totals = scenario_revenues(plan, instance, scenarios, trajectory).sum(axis=1)
    return worst_case_expectation(totals, scenarios, distances, rho)


def scenario_feasible(
    plan: Plan,
    scenario: Scenario,
    instance: PlanningInstance,
    trajectory: StateTrajectory | None = None,
) -> bool:
    """Capacity and water limits (scaled by the scenario's water availability)
    hold in every period, and total revenue meets the scenario floor if one is set."""
    water = scenario.water_factor if scenario.water_factor is not None else np.ones(instance.horizon)
    for t in instance.periods:
        if capacity_violation(plan, instance, t):
            return False
        if water_use(plan, instance, t) > water[t - 1] * instance.water_limits[t - 1]:
            return False
    if scenario.min_revenue is not None:
        if trajectory is None:
            trajectory = simulate(plan, instance, build_adjacency(instance.units))
        if scenario_revenue(plan, scenario, instance, trajectory).sum() < scenario.min_revenue:
            return False
    return True
