"""Comparator plans and the robustness-radius sweep."""

from __future__ import annotations

import dataclasses
from collections.abc import Sequence

from ..model import InteractionMatrix, Plan, PlanningInstance
from ..spatial import build_adjacency
from ..temporal import simulate
from ..uncertainty import (
    AmbiguitySpec,
    ScenarioSet,
    WassersteinBall,
    distance_matrix,
    nominal_scenarios,
    scenario_revenues,
)
from .annealing import SearchResult, SolverConfig, local_search_optimize
from .metrics import PlanMetrics, evaluate


def without_interactions(instance: PlanningInstance) -> PlanningInstance:
    """Same instance with the interaction matrix zeroed and no yield coupling."""
    return dataclasses.replace(
        instance,
        interaction=InteractionMatrix.zeros(c.id for c in instance.crops),
        interaction_yield_gain=0.0,
    )


def baseline_deterministic(instance: PlanningInstance, config: SolverConfig = SolverConfig()) -> Plan:
    """Maximise profit under the baseline parameters alone, interactions off."""
    flat = without_interactions(instance)
    cfg = dataclasses.replace(config, rho=0.0, stress_penalty=0.0)
    return local_search_optimize(flat, nominal_scenarios(flat), cfg).plan


def baseline_robust(
    instance: PlanningInstance, scenarios: ScenarioSet, config: SolverConfig = SolverConfig()
) -> Plan:
    """Robust objective at the same radius, treating units as independent."""
    return local_search_optimize(without_interactions(instance), scenarios, config).plan


def sensitivity_sweep(
    instance: PlanningInstance,
    scenarios: ScenarioSet,
    plan: Plan,
    rho_grid: Sequence[float],
    resolve: bool = False,
    config: SolverConfig = SolverConfig(),
    ambiguity: AmbiguitySpec | None = None,
) -> list[tuple[float, float]]:
    """Worst-case profit at each radius.

    With ``resolve`` the plan is re-optimised at each radius, starting from
    ``plan``, so the curve dominates the fixed-plan curve pointwise.
    """
    grid = [float(r) for r in rho_grid]
    if not grid:
        raise ValueError("rho_grid is empty")
    if any(r < 0 for r in grid) or any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("rho_grid must be non-negative and ascending")
    spec = ambiguity or AmbiguitySpec.for_instance(instance, 0.0)
    distances = distance_matrix(scenarios, spec)
    if not resolve:
        trajectory = simulate(plan, instance, build_adjacency(instance.units))
        totals = scenario_revenues(plan, instance, scenarios, trajectory).sum(axis=1)
        return [
            (rho, WassersteinBall(distances, scenarios.weights, rho).value(totals)) for rho in grid
        ]
    out = []
    for rho in grid:
        result: SearchResult = local_search_optimize(
            instance, scenarios, dataclasses.replace(config, rho=rho), initial=plan, distances=distances
        )
        out.append((rho, result.metrics.worst_case_profit))
    return out


def compare_methods(
    instance: PlanningInstance,
    scenarios: ScenarioSet,
    config: SolverConfig = SolverConfig(),
) -> dict[str, tuple[Plan, PlanMetrics]]:
    """Solve the proposed model and both baselines, scoring all three on the full model."""
    spec = AmbiguitySpec.for_instance(instance, config.rho)
    distances = distance_matrix(scenarios, spec)
    plans = {
        "baseline-det": baseline_deterministic(instance, config),
        "baseline-rob": baseline_robust(instance, scenarios, config),
        "proposed": local_search_optimize(instance, scenarios, config, distances=distances).plan,
    }
    return {
        name: (plan, evaluate(plan, instance, scenarios, config.rho, distances=distances))
        for name, plan in plans.items()
    }

