"""Exhaustive search over all feasible plans of a tiny instance.

Per-unit crop sequences are enumerated first (admissibility, rotation and the
legume window are per-unit constraints), then combined. Scenario totals for
every combination are computed in vectorised chunks with an implementation
that shares nothing with the incremental engine, which lets it serve as an
independent check on the local search. Since the robust value never exceeds
the expectation, candidates are scored in decreasing order of expectation and
the scan stops once no remaining expectation can beat the incumbent.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from ..model import FALLOW, Plan, PlanningInstance
from ..spatial import admissible_actions, build_adjacency
from ..uncertainty import AmbiguitySpec, ScenarioSet, WassersteinBall, distance_matrix
from .feasibility import NoFeasiblePlan
from .metrics import PlanMetrics, evaluate

DEFAULT_MAX_CANDIDATES = 10**7
_CHUNK = 1 << 14


class SearchSpaceTooLarge(ValueError):
    def __init__(self, size: int, limit: int):
        self.size, self.limit = size, limit
        super().__init__(f"brute force would enumerate {size:,} candidate plans (limit {limit:,})")


def raw_search_space(instance: PlanningInstance) -> int:
    allowed = admissible_actions(instance, 1)
    return math.prod((len(allowed[u.id]) + 1) ** instance.horizon for u in instance.units)


def _unit_sequences(instance: PlanningInstance, unit_id: str, allowed: set[str]) -> np.ndarray:
    options = [FALLOW] + sorted(instance.crop_index[c] for c in allowed)
    legume_ok = any(instance.crops[c].is_legume for c in options if c != FALLOW)
    window = instance.legume_window
    keep = []
    for seq in itertools.product(options, repeat=instance.horizon):
        bad = False
        for t, c in enumerate(seq):
            if c == FALLOW:
                continue
            tau = instance.crops[c].replant_interval
            if any(seq[t + d] == c for d in range(1, tau) if t + d < len(seq)):
                bad = True
                break
        if bad:
            continue
        if window is not None and window <= instance.horizon and legume_ok:
            flags = [c != FALLOW and instance.crops[c].is_legume for c in seq]
            if not all(any(flags[s:s + window]) for s in range(instance.horizon - window + 1)):
                continue
        keep.append(seq)
    return np.array(keep, dtype=np.int64).reshape(len(keep), instance.horizon)


def _scenario_totals(plans: np.ndarray, instance: PlanningInstance, scenarios: ScenarioSet, w: np.ndarray):
    """(N, S) total revenue and (N, T) irrigation water for a batch of (N, U, T) plans."""
    n, n_u, n_t = plans.shape
    n_c = len(instance.crops)
    m = np.zeros((n_c + 1, n_c + 1))
    m[:n_c, :n_c] = instance.interaction_array
    idx = np.where(plans == FALLOW, n_c, plans)
    planted = plans != FALLOW

    # eta[n, i, t] = sum_j W_ij * M[x_i, x_j]
    eta = np.einsum("ij,nijt->nit", w, m[idx[:, :, None, :], idx[:, None, :, :]])
    clip = instance.interaction_clip
    mult = 1.0 + instance.interaction_yield_gain * np.clip(eta, -clip, clip)

    gamma = np.array([u.productivity_factor for u in instance.units])
    area = np.array([[instance.planted_area(u, c) for c in instance.crops] + [0.0] for u in instance.units])
    base = np.array([c.baseline_yield for c in instance.crops] + [0.0])
    water = np.array([c.water_need for c in instance.crops] + [0.0])
    irrigated = np.array([u.irrigated_flag for u in instance.units])

    unit_rows = np.arange(n_u)[None, :, None]
    a = area[unit_rows, idx]  # (N, U, T)
    used = (np.where(irrigated[None, :, None], water[idx], 0.0)).sum(axis=1)

    n_s = len(scenarios)
    totals = np.zeros((n, n_s))
    uf = scenarios.unit_factor if scenarios.unit_factor.shape[1] == n_u else np.ones((n_s, n_u))
    for t in range(n_t):
        for c in range(n_c):
            mask = planted[:, :, t] & (plans[:, :, t] == c)
            if not mask.any():
                continue
            # kg per (plan, unit) before the scenario yield factor
            kg = np.where(mask, gamma[None, :] * base[c] * mult[:, :, t] * a[:, :, t], 0.0)
            qty = (kg[:, :, None] * uf.T[None, :, :]).sum(axis=1) * scenarios.yield_factor[None, :, c, t]
            price = scenarios.price[None, :, c, t]
            if instance.demand_cap:
                cap = scenarios.demand[None, :, c, t]
                sold = np.minimum(qty, cap)
                income = price * (sold + instance.salvage_fraction * (qty - sold))
            else:
                income = price * qty
            area_total = np.where(mask, a[:, :, t], 0.0).sum(axis=1)
            totals += income - area_total[:, None] * scenarios.cost[None, :, c, t]
    return totals, used


def brute_force_optimize(
    instance: PlanningInstance,
    scenarios: ScenarioSet,
    rho: float,
    max_candidates: int = DEFAULT_MAX_CANDIDATES,
    ambiguity: AmbiguitySpec | None = None,
) -> tuple[Plan, PlanMetrics]:
    """Exact maximiser of the robust value; ties go to the lexicographically
    smallest plan matrix (units in instance order, fallow first)."""
    size = raw_search_space(instance)
    if size > max_candidates:
        raise SearchSpaceTooLarge(size, max_candidates)

    allowed = admissible_actions(instance, 1)
    seqs = [_unit_sequences(instance, u.id, allowed[u.id]) for u in instance.units]
    spec = ambiguity.with_rho(rho) if ambiguity else AmbiguitySpec.for_instance(instance, rho)
    distances = distance_matrix(scenarios, spec)
    ball = WassersteinBall(distances, scenarios.weights, rho)
    adjacency = build_adjacency(instance.units).entries.astype(float)
    limits = np.asarray(instance.water_limits) * scenarios.water_factor.min(axis=0)
    floors = scenarios.min_revenue
    has_floor = ~np.isnan(floors)

    counts = [len(s) for s in seqs]
    total = math.prod(counts)
    best_value, best_key = -math.inf, None
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total))
        picks = np.stack(np.unravel_index(flat, counts), axis=1)  # (N, U), lexicographic order
        plans = np.stack([seqs[u][picks[:, u]] for u in range(len(seqs))], axis=1)
        totals, used = _scenario_totals(plans, instance, scenarios, adjacency)
        ok = np.all(used <= limits[None, :] + 1e-9, axis=1)
        if has_floor.any():
            ok &= np.all(totals[:, has_floor] >= floors[has_floor][None, :], axis=1)
        expected = totals @ scenarios.weights
        order = np.flatnonzero(ok)
        order = order[np.argsort(-expected[order], kind="stable")]
        for k in order:
            if expected[k] < best_value - 1e-9 * max(1.0, abs(best_value)):
                break
            value = ball.value(totals[k])
            key = tuple(plans[k].ravel())
            tol = 1e-9 * max(1.0, abs(best_value)) if best_key is not None else 0.0
            if best_key is None or value > best_value + tol or (abs(value - best_value) <= tol and key < best_key):
                best_value, best_key = value, key
    if best_key is None:
        raise NoFeasiblePlan("no plan satisfies the hard constraints")
    x = np.array(best_key, dtype=np.int64).reshape(len(instance.units), instance.horizon)
    plan = Plan.from_array(instance, x)
    return plan, evaluate(plan, instance, scenarios, rho, distances=distances)
