"""Robust uncertainty layer: scenarios, revenue and the Wasserstein worst case."""

from .revenue import robust_value, scenario_feasible, scenario_revenue, scenario_revenues
from .scenarios import Scenario, ScenarioSet, ScenarioSpec, generate_scenarios, nominal_scenarios
from .wasserstein import (
    AmbiguitySpec,
    WassersteinBall,
    WorstCaseResult,
    distance_matrix,
    ground_distance,
    worst_case_expectation,
)

__all__ = [
    "AmbiguitySpec", "Scenario", "ScenarioSet", "ScenarioSpec", "WassersteinBall",
    "WorstCaseResult", "distance_matrix", "generate_scenarios", "ground_distance",
    "nominal_scenarios", "robust_value", "scenario_feasible", "scenario_revenue",
    "scenario_revenues", "worst_case_expectation",
]
