"""Unified robust program: feasibility, metrics, exact oracle, annealing, sweeps."""

from .annealing import SearchResult, SolverConfig, local_search_optimize
from .baselines import (
    baseline_deterministic,
    baseline_robust,
    compare_methods,
    sensitivity_sweep,
    without_interactions,
)
from .feasibility import InfeasiblePlanError, NoFeasiblePlan, Violation, feasible
from .metrics import PlanMetrics, evaluate, legume_ratio, nominal_profit
from .oracle import SearchSpaceTooLarge, brute_force_optimize

__all__ = [
    "InfeasiblePlanError", "NoFeasiblePlan", "PlanMetrics", "SearchResult", "SearchSpaceTooLarge", "SolverConfig",
    "Violation", "baseline_deterministic", "baseline_robust", "brute_force_optimize",
    "compare_methods", "evaluate", "feasible", "legume_ratio", "local_search_optimize",
    "nominal_profit", "sensitivity_sweep", "without_interactions",
]
