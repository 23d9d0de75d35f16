"""Worst-case expectation over a type-1 Wasserstein ball with finite support.

The support is fixed to the empirical scenarios, so the adversary can only move
probability mass between scenarios, paying ``distance[k, j]`` per unit moved
from ``k`` to ``j``, with total transport cost at most ``rho``. This is a
linear program with a single coupling (budget) constraint; relaxing it with a
multiplier ``lam`` decouples the sources::

    gain(rho) = min_{lam >= 0}  lam * rho + sum_k p_k * (v_k - min_j (v_j + lam * d_kj))

The dual function is convex and piecewise linear in ``lam``. We minimise it
exactly with a cutting-plane search over its linear pieces and recover the
primal transport plan by blending the two assignments that bracket the optimal
multiplier.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial.distance import cdist

from ..model import PlanningInstance
from .scenarios import Scenario, ScenarioSet

_MAX_CUTS = 500


@dataclass(frozen=True, eq=False)
class AmbiguitySpec:
    """Radius of the ball and the per-dimension scales used in the ground cost.

    ``normalization`` has shape (3, C, T): scales for yield factors, prices and
    costs. The ground cost is the L1 norm of the elementwise-scaled difference.
    """

    rho: float
    normalization: np.ndarray

    def __post_init__(self) -> None:
        if self.rho < 0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")
        arr = np.array(self.normalization, dtype=float)
        if np.any(arr <= 0):
            raise ValueError("normalization scales must be positive")
        arr.setflags(write=False)
        object.__setattr__(self, "normalization", arr)

    @classmethod
    def for_instance(cls, instance: PlanningInstance, rho: float) -> AmbiguitySpec:
        """Relative deviations averaged within each block (yield, price, cost).

        With this scaling the distance is the sum over the three blocks of the
        mean relative deviation from the other scenario.
        """
        n = len(instance.crops) * instance.horizon
        price = np.array([c.baseline_price for c in instance.crops], dtype=float)
        cost = np.array([c.baseline_cost for c in instance.crops], dtype=float)
        price = np.where(price > 0, price, 1.0)
        cost = np.where(cost > 0, cost, 1.0)
        t = instance.horizon
        scales = np.stack([
            np.ones((len(price), t)),
            np.repeat(price[:, None], t, axis=1),
            np.repeat(cost[:, None], t, axis=1),
        ]) * n
        return cls(rho=rho, normalization=scales)

    def with_rho(self, rho: float) -> AmbiguitySpec:
        return AmbiguitySpec(rho, self.normalization)


@dataclass(frozen=True)
class WorstCaseResult:
    value: float
    worst_weights: np.ndarray
    transport_cost_used: float
    multiplier: float = 0.0


def _theta(yield_factor, price, cost, spec: AmbiguitySpec) -> np.ndarray:
    stacked = np.stack([np.asarray(yield_factor), np.asarray(price), np.asarray(cost)], axis=-3)
    return (stacked / spec.normalization).reshape(*stacked.shape[:-3], -1)


def ground_distance(a: Scenario, b: Scenario, spec: AmbiguitySpec) -> float:
    shape = spec.normalization.shape[1:]
    for s in (a, b):
        for arr in (s.yield_factor, s.price, s.cost):
            if arr.shape != shape:
                raise ValueError(f"scenario array shape {arr.shape} does not match {shape}")
    return float(np.abs(_theta(a.yield_factor, a.price, a.cost, spec)
                        - _theta(b.yield_factor, b.price, b.cost, spec)).sum())


def distance_matrix(scenarios: ScenarioSet, spec: AmbiguitySpec) -> np.ndarray:
    if scenarios.price.shape[1:] != spec.normalization.shape[1:]:
        raise ValueError("scenario dimensions do not match the ambiguity normalization")
    theta = _theta(scenarios.yield_factor, scenarios.price, scenarios.cost, spec)
    d = cdist(theta, theta, metric="cityblock")
    np.fill_diagonal(d, 0.0)
    return d


class WassersteinBall:
    """Reusable inner solver for a fixed support, weight vector and radius."""

    def __init__(self, distances, weights, rho: float):
        if rho < 0:
            raise ValueError(f"rho must be >= 0, got {rho}")
        self.d = np.asarray(distances, dtype=float)
        self.p = np.asarray(weights, dtype=float)
        n = len(self.p)
        if self.d.shape != (n, n):
            raise ValueError(f"distance matrix shape {self.d.shape} does not match {n} weights")
        self.rho = float(rho)
        self._warm = None

    @cached_property
    def _positive(self) -> np.ndarray:
        return self.d > 0

    @cached_property
    def _buffer(self) -> np.ndarray:
        return np.empty_like(self.d)

    @cached_property
    def _dmax(self) -> float:
        return float(self.d.max(initial=0.0))

    def _assign(self, v: np.ndarray, lam: float, prefer_low_cost: bool):
        """Best target per source at multiplier ``lam``, ties broken by transport cost."""
        keys = self._buffer
        np.multiply(self.d, lam, out=keys)
        keys += v[None, :]
        j = keys.argmin(axis=1)
        rows = np.arange(len(v))
        best = keys[rows, j]
        tol = 1e-12 * (np.abs(best) + lam * self._dmax + 1.0)
        ties = keys <= (best + tol)[:, None]
        multi = np.flatnonzero(ties.sum(axis=1) > 1)
        if multi.size:
            sub_d, sub_t = self.d[multi], ties[multi]
            if prefer_low_cost:
                j[multi] = np.where(sub_t, sub_d, np.inf).argmin(axis=1)
            else:
                j[multi] = np.where(sub_t, sub_d, -np.inf).argmax(axis=1)
        gain = float(self.p @ (v - v[j]))
        cost = float(self.p @ self.d[rows, j])
        dual = lam * self.rho + float(self.p @ (v - best))
        return j, gain, cost, dual

    def _warm_bracket(self, v: np.ndarray, spread: float = 0.02):
        """Multipliers just below and above the previous optimum, if they still
        straddle the new one; consecutive local-search moves usually keep it close."""
        a, b = self._warm * (1 - spread), self._warm * (1 + spread)
        ja, ga, ca, _ = self._assign(v, a, True)
        if ca <= self.rho:
            return None
        jb, gb, cb, _ = self._assign(v, b, True)
        if cb > self.rho:
            return None
        return (a, ja, ga, ca), (b, jb, gb, cb)

    def _lambda_ceiling(self, v: np.ndarray) -> float:
        diff = v[:, None] - v[None, :]
        mask = self._positive & (diff > 0)
        if not mask.any():
            return 0.0
        return float((diff[mask] / self.d[mask]).max())

    def _solve(self, v: np.ndarray):
        bracket = self._warm_bracket(v) if self._warm is not None else None
        if bracket is None:
            j0, g0, c0, _ = self._assign(v, 0.0, True)
            if c0 <= self.rho:
                return 0.0, (j0, g0, c0), (j0, g0, c0), 1.0
            lo = (0.0, *self._assign(v, 0.0, False)[:3])
            hi_lam = self._lambda_ceiling(v) * (1 + 1e-9) + 1e-300
            hi = (hi_lam, *self._assign(v, hi_lam, True)[:3])
        else:
            lo, hi = bracket

        for _ in range(_MAX_CUTS):
            _, _, g_lo, c_lo = lo
            _, _, g_hi, c_hi = hi
            # supporting lines lam*rho + G - lam*C of the two assignments meet at lam_x
            lam_x = (g_lo - g_hi) / (c_lo - c_hi)
            line = g_lo + lam_x * (self.rho - c_lo)
            j, g, c, dual = self._assign(v, lam_x, True)
            if dual <= line + 1e-12 * (abs(line) + 1.0) or not lo[0] < lam_x < hi[0]:
                break
            if c > self.rho:
                lo = (lam_x, j, g, c)
            else:
                hi = (lam_x, j, g, c)
        else:  # pragma: no cover - finite number of pieces makes this unreachable
            lam_x = 0.5 * (lo[0] + hi[0])

        theta = (self.rho - hi[3]) / (lo[3] - hi[3])
        return lam_x, lo[1:], hi[1:], theta

    def value(self, values) -> float:
        """Worst-case expectation only (no transport plan)."""
        v = np.asarray(values, dtype=float)
        lam, lo, hi, theta = self._solve(v)
        self._warm = lam if lam > 0 else None
        gain = theta * lo[1] + (1.0 - theta) * hi[1]
        return float(self.p @ v) - gain

    def solve(self, values) -> WorstCaseResult:
        v = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("scenario values must be finite")
        lam, lo, hi, theta = self._solve(v)
        q = theta * self._moved(lo[0]) + (1.0 - theta) * self._moved(hi[0])
        cost = theta * lo[2] + (1.0 - theta) * hi[2]
        return WorstCaseResult(float(q @ v), q, float(cost), float(lam))

    def _moved(self, targets: np.ndarray) -> np.ndarray:
        q = np.zeros_like(self.p)
        np.add.at(q, targets, self.p)
        return q


def worst_case_expectation(values, scenarios, distances, rho: float) -> WorstCaseResult:
    """Minimum expectation of ``values`` over distributions within ``rho`` of the
    empirical weights in type-1 Wasserstein distance.

    ``scenarios`` is a ScenarioSet or a plain weight vector.
    """
    weights = scenarios.weights if isinstance(scenarios, ScenarioSet) else scenarios
    return WassersteinBall(distances, weights, rho).solve(values)
