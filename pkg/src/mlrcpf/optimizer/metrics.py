"""Plan metrics: expected and worst-case profit, annual volatility, legume share."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..model import Plan, PlanningInstance
from ..spatial import build_adjacency
from ..temporal import simulate
from ..uncertainty import (
    AmbiguitySpec,
    ScenarioSet,
    distance_matrix,
    nominal_scenarios,
    scenario_revenues,
    worst_case_expectation,
)
from .feasibility import InfeasiblePlanError, feasible


@dataclass(frozen=True)
class PlanMetrics:
    """Profits are raw CNY over the whole horizon.

    ``nominal_profit`` is the deterministic baseline's own yardstick: profit
    under the baseline parameters with interaction effects switched off.
    """

    total_expected_profit: float
    worst_case_profit: float
    volatility: float
    legume_ratio: float
    nominal_profit: float = 0.0
    rho: float = 0.0
    n_scenarios: int = 1

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def legume_ratio(plan: Plan, instance: PlanningInstance) -> float:
    if len(plan) == 0:
        return 0.0
    legumes = sum(instance.crop(c).is_legume for c in plan.assignment.values())
    return legumes / len(plan)


def annual_profits(revenue: np.ndarray, instance: PlanningInstance) -> np.ndarray:
    """Fold an (S, T) per-period revenue matrix into (S, years)."""
    years = np.array([instance.year_of(t) for t in instance.periods])
    out = np.zeros((revenue.shape[0], instance.n_years))
    for y in range(instance.n_years):
        out[:, y] = revenue[:, years == y].sum(axis=1)
    return out


def volatility(annual: np.ndarray, weights: np.ndarray) -> float:
    """Standard deviation of annual profit pooled over (scenario, year) pairs."""
    w = np.repeat(weights[:, None] / annual.shape[1], annual.shape[1], axis=1)
    mean = float((w * annual).sum())
    return float(np.sqrt((w * (annual - mean) ** 2).sum()))


def nominal_profit(plan: Plan, instance: PlanningInstance) -> float:
    flat = dataclasses.replace(instance, interaction_yield_gain=0.0)
    return float(scenario_revenues(plan, flat, nominal_scenarios(flat)).sum())


def evaluate(
    plan: Plan,
    instance: PlanningInstance,
    scenarios: ScenarioSet,
    rho: float,
    ambiguity: AmbiguitySpec | None = None,
    distances: np.ndarray | None = None,
) -> PlanMetrics:
    """Score a feasible plan; raises InfeasiblePlanError otherwise."""
    violations = feasible(plan, instance, scenarios)
    if violations:
        raise InfeasiblePlanError(violations)
    trajectory = simulate(plan, instance, build_adjacency(instance.units))
    revenue = scenario_revenues(plan, instance, scenarios, trajectory)
    totals = revenue.sum(axis=1)
    if distances is None:
        spec = ambiguity.with_rho(rho) if ambiguity else AmbiguitySpec.for_instance(instance, rho)
        distances = distance_matrix(scenarios, spec)
    worst = worst_case_expectation(totals, scenarios, distances, rho)
    return PlanMetrics(
        total_expected_profit=float(scenarios.weights @ totals),
        worst_case_profit=worst.value,
        volatility=volatility(annual_profits(revenue, instance), scenarios.weights),
        legume_ratio=legume_ratio(plan, instance),
        nominal_profit=nominal_profit(plan, instance),
        rho=rho,
        n_scenarios=len(scenarios),
    )
