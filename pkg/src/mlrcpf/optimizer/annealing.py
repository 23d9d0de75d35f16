"""Simulated annealing over hard-feasible plans, maximising the robust value."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..model import FALLOW, Plan, PlanningInstance
from ..uncertainty import AmbiguitySpec, ScenarioSet, WassersteinBall, distance_matrix
from .engine import PlanState, StaticData
from .feasibility import NoFeasiblePlan
from .metrics import PlanMetrics, evaluate

LOG_HEADER = "iter,temperature,current_value,best_value,accepted"


@dataclass(frozen=True)
class SolverConfig:
    seed: int = 0
    max_iterations: int = 20_000
    initial_temperature: float | None = None  # None: calibrate from sampled moves
    cooling_rate: float | None = None  # None: cool by 1e-3 over the run
    restarts: int = 1
    rho: float = 0.05
    rotation_penalty_weight: float = 0.0  # > 0 enables soft rotation during search
    stress_penalty: float = 0.0  # CNY per mu per unit of rotation stress per period
    move_weights: tuple[float, float, float] = (0.7, 0.15, 0.15)  # reassign, swap, rotate
    initial: str = "greedy"  # or "empty"
    log_every: int = 100
    polish_passes: int = 3  # first-improvement sweeps over single slots after annealing
    restart_temperature_spread: float = 100.0  # last restart starts this many times hotter than the first

    def __post_init__(self) -> None:
        if self.cooling_rate is not None and not 0 < self.cooling_rate < 1:
            raise ValueError(f"cooling_rate must be in (0, 1), got {self.cooling_rate}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if len(self.move_weights) != 3 or min(self.move_weights) < 0 or sum(self.move_weights) <= 0:
            raise ValueError("move_weights needs three non-negative entries with a positive sum")
        if self.restart_temperature_spread < 1:
            raise ValueError("restart_temperature_spread must be >= 1")
        if self.polish_passes < 0:
            raise ValueError("polish_passes must be >= 0")
        if self.initial not in ("greedy", "empty"):
            raise ValueError("initial must be 'greedy' or 'empty'")


@dataclass
class SearchResult:
    plan: Plan
    metrics: PlanMetrics
    log: list[tuple[int, float, float, float, bool]] = field(default_factory=list)
    objective: float = 0.0

    def __iter__(self):
        return iter((self.plan, self.metrics, self.log))

    def log_lines(self) -> list[str]:
        return [LOG_HEADER] + [
            f"{i},{temp:.6g},{cur:.6f},{best:.6f},{int(acc)}" for i, temp, cur, best, acc in self.log
        ]


def worker_count(jobs: int) -> int:
    cap = os.environ.get("MLRCPF_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(jobs, limit))


class Objective:
    """Robust value of a PlanState, less optional soft penalties."""

    def __init__(self, data: StaticData, scenarios: ScenarioSet, distances: np.ndarray, config: SolverConfig):
        self.ball = WassersteinBall(distances, scenarios.weights, config.rho)
        self.rotation_weight = config.rotation_penalty_weight
        self.stress_penalty = config.stress_penalty
        self.unit_area = data.unit_area

    def penalty(self, state: PlanState, rotation_conflicts: int = 0) -> float:
        out = 0.0
        if self.stress_penalty:
            out += self.stress_penalty * float(self.unit_area @ state.stress)
        if rotation_conflicts:
            out += self.rotation_weight * rotation_conflicts
        return out

    def __call__(self, state: PlanState, rotation_conflicts: int = 0) -> float:
        return self.ball.value(state.totals) - self.penalty(state, rotation_conflicts)


def _rotation_clear(row: np.ndarray, t: int, c: int, tau: int) -> bool:
    lo, hi = max(0, t - tau + 1), min(len(row), t + tau)
    return not any(row[s] == c for s in range(lo, hi) if s != t)


def greedy_plan(data: StaticData, scenarios: ScenarioSet) -> np.ndarray:
    """Constructive start: legumes first to cover the legume window, then every
    free slot gets the crop with the best expected stand-alone margin, respecting
    rotation and water."""
    n_u, n_t = data.n_units, data.n_periods
    w = scenarios.weights
    # expected margin per (unit, crop, period) ignoring interactions and demand caps
    gross = np.einsum("tcs,tcs,s->tc", data.yield_factor, data.price, w)
    cost = np.einsum("tcs,s->tc", data.cost, w)
    margin = data.yield_base[:, None, :] * gross[None] - data.area[:, None, :] * cost[None]  # (U, T, C)
    x = np.full((n_u, n_t), FALLOW, dtype=np.int64)
    water_used = np.zeros(n_t)

    def place(i: int, t: int, options) -> bool:
        for c in sorted(options, key=lambda c: (-margin[i, t, c], c)):
            if water_used[t] + data.water[i, c] > data.water_limit[t]:
                continue
            if not _rotation_clear(x[i], t, c, data.tau[c]):
                continue
            x[i, t] = c
            water_used[t] += data.water[i, c]
            return True
        return False

    window = data.legume_window
    if window is not None and window <= n_t:
        for i in range(n_u):
            legumes = [c for c in data.admissible[i] if data.legume[c]]
            if not legumes:
                continue
            # cover each uncovered window with a legume as late as possible,
            # which needs the fewest legumes and leaves the most replant room
            last = -1
            while last + 1 <= n_t - window:
                for t in range(last + window, last, -1):
                    if place(i, t, legumes):
                        last = t
                        break
                else:
                    break

    for t in range(n_t):
        for i in range(n_u):
            if x[i, t] != FALLOW or data.admissible[i].size == 0:
                continue
            options = [c for c in data.admissible[i] if margin[i, t, c] > 0]
            place(i, t, options)
    return x


def _hard_feasible(state: PlanState) -> bool:
    d = state.data
    if np.any(state.water_used > d.water_limit + 1e-9):
        return False
    if any(state.rotation_conflicts(i) for i in range(d.n_units)):
        return False
    if not all(state.legume_ok(i) for i in range(d.n_units)):
        return False
    return state.floors_ok()


def _propose(state: PlanState, rng: np.random.Generator, cum_weights: np.ndarray):
    d = state.data
    x = state.x
    kind = int(np.searchsorted(cum_weights, rng.random() * cum_weights[-1], side="right"))
    if kind == 0:
        i = int(rng.integers(d.n_units))
        t = int(rng.integers(d.n_periods))
        options = d.admissible[i]
        k = int(rng.integers(options.size + 1))
        c = FALLOW if k == options.size else int(options[k])
        if c == x[i, t]:
            return None
        return [(i, t, c)]
    if kind == 1:
        if d.n_units < 2:
            return None
        t = int(rng.integers(d.n_periods))
        i, j = (int(v) for v in rng.choice(d.n_units, size=2, replace=False))
        a, b = int(x[i, t]), int(x[j, t])
        if a == b:
            return None
        if (b != FALLOW and not d.admissible_mask[i, b]) or (a != FALLOW and not d.admissible_mask[j, a]):
            return None
        return [(i, t, b), (j, t, a)]
    if d.n_periods < 2:
        return None
    i = int(rng.integers(d.n_units))
    t = int(rng.integers(d.n_periods - 1))
    a, b = int(x[i, t]), int(x[i, t + 1])
    if a == b:
        return None
    return [(i, t, b), (i, t + 1, a)]


def _move_feasible(state: PlanState, changes, soft_rotation: bool) -> bool:
    d = state.data
    for t in {t for _, t, _ in changes}:
        if state.water_used[t] > d.water_limit[t] + 1e-9:
            return False
    units = {i for i, _, _ in changes}
    if not soft_rotation:
        for i, t, _ in changes:
            if not state.rotation_ok_at(i, t):
                return False
    if d.legume_window is not None and not all(state.legume_ok(i) for i in units):
        return False
    return state.floors_ok()


def _anneal(
    data: StaticData,
    scenarios: ScenarioSet,
    distances: np.ndarray,
    config: SolverConfig,
    x0: np.ndarray,
    seed_key: tuple[int, ...],
):
    rng = np.random.default_rng(list(seed_key))
    objective = Objective(data, scenarios, distances, config)
    soft = config.rotation_penalty_weight > 0
    state = PlanState(data, x0)
    conflicts = sum(state.rotation_conflicts(i) for i in range(data.n_units)) if soft else 0
    current = objective(state, conflicts)
    best_x, best_value = state.x.copy(), current
    cum = np.cumsum(config.move_weights)

    temperature = config.initial_temperature
    if temperature is None:
        temperature = _calibrate_temperature(state, objective, rng, cum, soft, current)
    if config.restarts > 1:
        # restarts climb a temperature ladder so they explore different basins
        temperature *= config.restart_temperature_spread ** (seed_key[-1] / (config.restarts - 1))

    rate = config.cooling_rate
    if rate is None:
        rate = 1e-3 ** (1.0 / max(config.max_iterations, 1))
    log = []
    for it in range(1, config.max_iterations + 1):
        temp = temperature * rate ** it
        changes = _propose(state, rng, cum)
        accepted = False
        if changes is not None:
            token = state.apply(changes)
            if _move_feasible(state, changes, soft):
                new_conflicts = (
                    conflicts + sum(
                        state.rotation_conflicts(i) - _conflicts_before(state, token, i)
                        for i in {i for i, _, _ in changes}
                    ) if soft else 0
                )
                candidate = objective(state, new_conflicts)
                delta = candidate - current
                if delta >= 0 or (temp > 0 and rng.random() < math.exp(delta / temp)):
                    accepted = True
                    current, conflicts = candidate, new_conflicts
                    if candidate > best_value and (not soft or new_conflicts == 0):
                        best_x, best_value = state.x.copy(), candidate
            if not accepted:
                state.revert(token)
        if it % config.log_every == 0 or it == config.max_iterations:
            log.append((it, temp, current, best_value, accepted))
    if config.polish_passes and config.max_iterations > 0 and not soft:
        state = PlanState(data, best_x)
        best_value = _polish(state, objective, config.polish_passes)
        best_x = state.x.copy()
    return best_x, best_value, log


def _polish(state: PlanState, objective: Objective, passes: int) -> float:
    """Deterministic first-improvement over single-slot reassignments.

    The worst-case expectation moves by at most the largest per-scenario change,
    which screens out most candidates without solving the inner problem.
    """
    d = state.data
    current = objective(state)
    current_penalty = objective.penalty(state)
    totals = state.totals.copy()
    for _ in range(passes):
        improved = False
        for t in range(d.n_periods):
            for i in range(d.n_units):
                for c in [FALLOW, *d.admissible[i].tolist()]:
                    if c == state.x[i, t]:
                        continue
                    changes = [(i, t, c)]
                    token = state.apply(changes)
                    if _move_feasible(state, changes, False):
                        penalty = objective.penalty(state)
                        bound = current + current_penalty + float((state.totals - totals).max()) - penalty
                        if bound > current + 1e-9 * max(1.0, abs(current)):
                            value = objective(state)
                            if value > current + 1e-9 * max(1.0, abs(current)):
                                current, current_penalty, improved = value, penalty, True
                                totals = state.totals.copy()
                                continue
                    state.revert(token)
        if not improved:
            break
    return current


def _conflicts_before(state: PlanState, token, i: int) -> int:
    old = state.x[i].copy()
    for u, t, c in token[0]:
        if u == i:
            old[t] = c
    saved = state.x[i].copy()
    state.x[i] = old
    n = state.rotation_conflicts(i)
    state.x[i] = saved
    return n


def _calibrate_temperature(state, objective, rng, cum, soft, current, samples: int = 60) -> float:
    deltas = []
    for _ in range(samples * 4):
        if len(deltas) >= samples:
            break
        changes = _propose(state, rng, cum)
        if changes is None:
            continue
        token = state.apply(changes)
        if _move_feasible(state, changes, soft):
            deltas.append(abs(objective(state) - current))
        state.revert(token)
    positive = [d for d in deltas if d > 0]
    return float(np.quantile(positive, 0.1)) if positive else 1.0


def _restart_job(args):
    data, scenarios, distances, config, x0, r = args
    return _anneal(data, scenarios, distances, config, x0, (config.seed, r))


def initial_matrix(data: StaticData, scenarios: ScenarioSet, config: SolverConfig, initial: Plan | None, instance):
    if initial is not None:
        return initial.to_array(instance)
    empty = np.full((data.n_units, data.n_periods), FALLOW, dtype=np.int64)
    if config.initial == "empty" and _hard_feasible(PlanState(data, empty)):
        return empty
    # the empty plan can break the legume window, so fall back to construction
    x = greedy_plan(data, scenarios)
    if _hard_feasible(PlanState(data, x)):
        return x
    if _hard_feasible(PlanState(data, empty)):
        return empty
    raise NoFeasiblePlan("could not construct a hard-feasible starting plan; pass one as initial")


def local_search_optimize(
    instance: PlanningInstance,
    scenarios: ScenarioSet,
    config: SolverConfig = SolverConfig(),
    initial: Plan | None = None,
    ambiguity: AmbiguitySpec | None = None,
    distances: np.ndarray | None = None,
) -> SearchResult:
    """Anneal from ``initial`` (default: greedy or empty per config) and return
    the best hard-feasible plan found across restarts.

    Restarts are independent and seeded ``(config.seed, r)``; ties between them
    go to the lexicographically smallest plan matrix.
    """
    if distances is None:
        spec = ambiguity.with_rho(config.rho) if ambiguity else AmbiguitySpec.for_instance(instance, config.rho)
        distances = distance_matrix(scenarios, spec)
    data = StaticData.build(instance, scenarios)
    x0 = initial_matrix(data, scenarios, config, initial, instance)
    start = PlanState(data, x0)
    if not _hard_feasible(start):
        raise ValueError("initial plan violates hard constraints")

    jobs = [(data, scenarios, distances, config, x0, r) for r in range(config.restarts)]
    workers = worker_count(config.restarts)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_restart_job, jobs))
    else:
        runs = [_restart_job(job) for job in jobs]

    best_x, best_value, log = runs[0]
    for x, value, run_log in runs[1:]:
        if value > best_value or (value == best_value and tuple(x.ravel()) < tuple(best_x.ravel())):
            best_x, best_value, log = x, value, run_log
    plan = Plan.from_array(instance, best_x)
    metrics = evaluate(plan, instance, scenarios, config.rho, distances=distances)
    return SearchResult(plan, metrics, log, best_value)
