"""Monte Carlo scenarios for yields, prices, costs and demand."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import ndtr

from ..model import CropCategory, PlanningInstance


@dataclass(frozen=True, eq=False)
class Scenario:
    """One joint realisation of the uncertain parameters.

    Arrays are indexed (crop, period) in instance order. Realised yield on unit
    ``i`` is ``yield_factor[c, t] * unit_factor[i] * gamma_i * baseline_yield_c``.
    ``demand`` uses ``inf`` for crops without a sell cap.
    """

    yield_factor: np.ndarray
    price: np.ndarray
    cost: np.ndarray
    demand: np.ndarray
    weight: float
    water_factor: np.ndarray | None = None
    unit_factor: np.ndarray | None = None
    min_revenue: float | None = None


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """Equally shaped scenarios stacked along a leading axis, with empirical weights."""

    yield_factor: np.ndarray  # (S, C, T)
    price: np.ndarray  # (S, C, T)
    cost: np.ndarray  # (S, C, T)
    demand: np.ndarray  # (S, C, T)
    weights: np.ndarray  # (S,)
    water_factor: np.ndarray  # (S, T)
    unit_factor: np.ndarray  # (S, U)
    min_revenue: np.ndarray = field(default=None)  # (S,), nan = no floor
    seed: int | None = None

    def __post_init__(self) -> None:
        s = len(self.weights)
        if s == 0:
            raise ValueError("scenario set is empty")
        if self.min_revenue is None:
            object.__setattr__(self, "min_revenue", np.full(s, np.nan))
        for name in ("yield_factor", "price", "cost", "demand", "weights",
                     "water_factor", "unit_factor", "min_revenue"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape[0] != s:
                raise ValueError(f"{name} has {arr.shape[0]} scenarios, weights has {s}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("scenario weights must be non-negative and sum to 1")
        if np.any(self.yield_factor <= 0) or np.any(self.water_factor <= 0) or np.any(self.unit_factor <= 0):
            raise ValueError("scenario factors must be positive")

    def __len__(self) -> int:
        return len(self.weights)

    def __getitem__(self, k: int) -> Scenario:
        floor = self.min_revenue[k]
        return Scenario(
            yield_factor=self.yield_factor[k],
            price=self.price[k],
            cost=self.cost[k],
            demand=self.demand[k],
            weight=float(self.weights[k]),
            water_factor=self.water_factor[k],
            unit_factor=self.unit_factor[k],
            min_revenue=None if np.isnan(floor) else float(floor),
        )

    @property
    def scenarios(self) -> list[Scenario]:
        return [self[k] for k in range(len(self))]

    @cached_property
    def effective_water_factor(self) -> np.ndarray:
        """Tightest water availability per period across scenarios."""
        return self.water_factor.min(axis=0)

    @classmethod
    def from_scenarios(cls, scenarios: list[Scenario], seed: int | None = None) -> ScenarioSet:
        if not scenarios:
            raise ValueError("scenario set is empty")
        t = scenarios[0].price.shape[1]
        u = next((len(s.unit_factor) for s in scenarios if s.unit_factor is not None), 0)
        return cls(
            yield_factor=np.stack([s.yield_factor for s in scenarios]),
            price=np.stack([s.price for s in scenarios]),
            cost=np.stack([s.cost for s in scenarios]),
            demand=np.stack([s.demand for s in scenarios]),
            weights=np.array([s.weight for s in scenarios]),
            water_factor=np.stack(
                [s.water_factor if s.water_factor is not None else np.ones(t) for s in scenarios]
            ),
            unit_factor=np.stack(
                [s.unit_factor if s.unit_factor is not None else np.ones(u) for s in scenarios]
            ),
            min_revenue=np.array(
                [np.nan if s.min_revenue is None else s.min_revenue for s in scenarios]
            ),
            seed=seed,
        )

    def subset(self, indices) -> ScenarioSet:
        idx = np.asarray(indices)
        w = self.weights[idx]
        return ScenarioSet(
            self.yield_factor[idx], self.price[idx], self.cost[idx], self.demand[idx],
            w / w.sum(), self.water_factor[idx], self.unit_factor[idx],
            self.min_revenue[idx], self.seed,
        )


@dataclass(frozen=True)
class ScenarioSpec:
    count: int = 200
    yield_radius: float = 0.1
    price_radius: float = 0.05
    cost_radius: float = 0.05
    demand_growth_range: tuple[float, float] = (0.05, 0.10)
    unit_noise: float = 0.0
    # 3x3 correlation of (yield, price, cost) shocks, applied through a Gaussian copula
    correlation: tuple[tuple[float, ...], ...] | None = None

    def validate(self) -> None:
        for name in ("yield_radius", "price_radius", "cost_radius", "unit_noise"):
            r = getattr(self, name)
            if not 0 <= r < 1:
                raise ValueError(f"{name} must be in [0, 1), got {r}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        lo, hi = self.demand_growth_range
        if not -1 < lo <= hi:
            raise ValueError(f"demand_growth_range must satisfy -1 < low <= high, got {lo, hi}")
        if self.correlation is not None:
            corr = np.asarray(self.correlation, dtype=float)
            if corr.shape != (3, 3) or not np.allclose(corr, corr.T) or np.any(
                np.linalg.eigvalsh(corr) < -1e-12
            ):
                raise ValueError("correlation must be a symmetric PSD 3x3 matrix")


def nominal_scenarios(instance: PlanningInstance) -> ScenarioSet:
    """Single scenario at the baseline parameters, weight 1."""
    return generate_scenarios(
        instance,
        ScenarioSpec(count=1, yield_radius=0, price_radius=0, cost_radius=0,
                     demand_growth_range=(0.0, 0.0)),
        seed=0,
    )


def _uniform_shocks(rng, spec: ScenarioSpec, shape) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if spec.correlation is None:
        u = rng.random((3, *shape))
    else:
        chol = np.linalg.cholesky(np.asarray(spec.correlation) + 1e-12 * np.eye(3))
        z = np.einsum("ij,j...->i...", chol, rng.standard_normal((3, *shape)))
        u = ndtr(z)
    return u[0], u[1], u[2]


def generate_scenarios(instance: PlanningInstance, spec: ScenarioSpec, seed: int) -> ScenarioSet:
    """Draw ``spec.count`` equally weighted scenarios, reproducibly from ``seed``.

    Yield, price and cost factors are uniform on ``1 +/- radius`` per (crop, period),
    shared by all units. Cereal demand compounds once per year at a growth rate
    drawn per (scenario, crop) from ``demand_growth_range``.
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    n_s, n_c, n_t, n_u = spec.count, len(instance.crops), instance.horizon, len(instance.units)
    shape = (n_s, n_c, n_t)

    u_y, u_p, u_k = _uniform_shocks(rng, spec, shape)
    yield_factor = 1.0 + spec.yield_radius * (2.0 * u_y - 1.0)
    base_price = np.array([c.baseline_price for c in instance.crops])[None, :, None]
    base_cost = np.array([c.baseline_cost for c in instance.crops])[None, :, None]
    price = base_price * (1.0 + spec.price_radius * (2.0 * u_p - 1.0))
    cost = base_cost * (1.0 + spec.cost_radius * (2.0 * u_k - 1.0))

    lo, hi = spec.demand_growth_range
    growth = rng.uniform(lo, hi, size=(n_s, n_c)) if hi > lo else np.full((n_s, n_c), lo)
    years = np.array([instance.year_of(t) for t in instance.periods])
    base_demand = np.array([np.inf if c.demand is None else c.demand for c in instance.crops])
    staple = np.array([c.category is CropCategory.CEREAL for c in instance.crops])
    compounding = np.where(staple[None, :, None], (1.0 + growth)[:, :, None] ** years[None, None, :], 1.0)
    demand = base_demand[None, :, None] * compounding

    if spec.unit_noise > 0:
        unit_factor = rng.uniform(1 - spec.unit_noise, 1 + spec.unit_noise, size=(n_s, n_u))
    else:
        unit_factor = np.ones((n_s, n_u))

    return ScenarioSet(
        yield_factor=yield_factor,
        price=price,
        cost=cost,
        demand=demand,
        weights=np.full(n_s, 1.0 / n_s),
        water_factor=np.ones((n_s, n_t)),
        unit_factor=unit_factor,
        seed=seed,
    )
