"""Array-backed plan state with incremental revenue and constraint bookkeeping.

The local search mutates a (units x periods) matrix of crop indices. Changing
one slot only affects that period's production (through the unit's own crop
and its neighbours' interaction potential), so each move recomputes the
per-scenario revenue of the touched periods and nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import FALLOW, CropCategory, PlanningInstance
from ..spatial import admissible_actions, build_adjacency
from ..temporal import FALLOW_RELIEF, LEGUME_RELIEF, SAME_CATEGORY_STRESS
from ..uncertainty import ScenarioSet


@dataclass
class StaticData:
    """Everything about an (instance, scenario set) pair that moves never change."""

    n_units: int
    n_periods: int
    n_crops: int
    area: np.ndarray  # (U, C) planted area
    unit_area: np.ndarray  # (U,)
    yield_base: np.ndarray  # (U, C) kg at yield factor 1
    water: np.ndarray  # (U, C) water drawn; zero on non-irrigated units
    water_limit: np.ndarray  # (T,) tightest limit across scenarios
    admissible: list[np.ndarray]  # per unit, sorted crop indices
    admissible_mask: np.ndarray  # (U, C)
    adjacency: np.ndarray  # (U, U) float
    neighbors: list[np.ndarray]
    interaction: np.ndarray  # (C+1, C+1); last row/col is fallow (zeros)
    tau: np.ndarray  # (C,)
    category: np.ndarray  # (C,) small ints
    legume: np.ndarray  # (C,) bool
    legume_units: np.ndarray  # (U,) bool: unit admits a legume
    history: np.ndarray  # (U,) crop index or FALLOW
    yield_factor: np.ndarray  # (T, C, S)
    price: np.ndarray  # (T, C, S)
    cost: np.ndarray  # (T, C, S)
    demand: np.ndarray  # (T, C, S)
    unit_factor: np.ndarray  # (U, S)
    min_revenue: np.ndarray  # (S,)
    kappa: float
    clip: float
    salvage: float
    demand_cap: bool
    legume_window: int | None

    @classmethod
    def build(cls, instance: PlanningInstance, scenarios: ScenarioSet) -> StaticData:
        units, crops = instance.units, instance.crops
        n_u, n_c, n_t = len(units), len(crops), instance.horizon
        area = np.array([[instance.planted_area(u, c) for c in crops] for u in units], dtype=float)
        gamma = np.array([u.productivity_factor for u in units])
        base_yield = np.array([c.baseline_yield for c in crops])
        irrigated = np.array([u.irrigated_flag for u in units])
        water_need = np.array([c.water_need for c in crops])
        allowed = admissible_actions(instance, 1)
        admissible = [
            np.array(sorted(instance.crop_index[c] for c in allowed[u.id]), dtype=np.int64) for u in units
        ]
        mask = np.zeros((n_u, n_c), dtype=bool)
        for i, adm in enumerate(admissible):
            mask[i, adm] = True
        adj = build_adjacency(units).entries.astype(float)
        inter = np.zeros((n_c + 1, n_c + 1))
        inter[:n_c, :n_c] = instance.interaction_array
        cats = {cat: k for k, cat in enumerate(CropCategory)}
        legume = np.array([c.is_legume for c in crops], dtype=bool)
        unit_factor = scenarios.unit_factor
        if unit_factor.shape[1] != n_u:
            unit_factor = np.ones((len(scenarios), n_u))
        history = np.array(
            [instance.crop_index[instance.history[u.id]] if u.id in instance.history else FALLOW for u in units],
            dtype=np.int64,
        )
        return cls(
            n_units=n_u,
            n_periods=n_t,
            n_crops=n_c,
            area=area,
            unit_area=np.array([u.area for u in units], dtype=float),
            yield_base=gamma[:, None] * base_yield[None, :] * area,
            water=np.where(irrigated[:, None], water_need[None, :], 0.0),
            water_limit=np.asarray(instance.water_limits) * scenarios.effective_water_factor,
            admissible=admissible,
            admissible_mask=mask,
            adjacency=adj,
            neighbors=[np.flatnonzero(row) for row in adj],
            interaction=inter,
            tau=np.array([c.replant_interval for c in crops], dtype=np.int64),
            category=np.array([cats[c.category] for c in crops], dtype=np.int64),
            legume=legume,
            legume_units=np.array([legume[a].any() for a in admissible], dtype=bool),
            history=history,
            yield_factor=np.ascontiguousarray(scenarios.yield_factor.transpose(2, 1, 0)),
            price=np.ascontiguousarray(scenarios.price.transpose(2, 1, 0)),
            cost=np.ascontiguousarray(scenarios.cost.transpose(2, 1, 0)),
            demand=np.ascontiguousarray(scenarios.demand.transpose(2, 1, 0)),
            unit_factor=np.ascontiguousarray(unit_factor.T),
            min_revenue=scenarios.min_revenue,
            kappa=instance.interaction_yield_gain,
            clip=instance.interaction_clip,
            salvage=instance.salvage_fraction,
            demand_cap=instance.demand_cap,
            legume_window=instance.legume_window,
        )


class PlanState:
    """Mutable plan matrix plus cached per-period revenue (T, S)."""

    def __init__(self, data: StaticData, x: np.ndarray):
        self.data = data
        self.x = np.array(x, dtype=np.int64)
        self.revenue = np.zeros((data.n_periods, len(data.min_revenue)))
        self.eta = np.zeros((data.n_units, data.n_periods))
        self.water_used = np.zeros(data.n_periods)
        for t in range(data.n_periods):
            self._recompute_period(t)
        self.stress = np.array([self.unit_stress(i) for i in range(data.n_units)])

    def copy(self) -> PlanState:
        new = object.__new__(PlanState)
        new.data = self.data
        new.x = self.x.copy()
        new.revenue = self.revenue.copy()
        new.eta = self.eta.copy()
        new.water_used = self.water_used.copy()
        new.stress = self.stress.copy()
        return new

    @property
    def totals(self) -> np.ndarray:
        return self.revenue.sum(axis=0)

    def _recompute_period(self, t: int) -> None:
        d = self.data
        col = self.x[:, t]
        planted = np.flatnonzero(col != FALLOW)
        n_s = self.revenue.shape[1]
        if planted.size == 0:
            self.revenue[t] = 0.0
            self.eta[:, t] = 0.0
            self.water_used[t] = 0.0
            return
        crops = col[planted]
        # fallow maps to the zero row/col of the padded interaction matrix
        padded = np.where(col == FALLOW, d.n_crops, col)
        eta = (d.adjacency * d.interaction[padded[:, None], padded[None, :]]).sum(axis=1)
        self.eta[:, t] = eta
        mult = 1.0 + d.kappa * np.clip(eta[planted], -d.clip, d.clip)
        produced = (d.yield_base[planted, crops] * mult)[:, None] * d.yield_factor[t, crops] * d.unit_factor[planted]
        cost = d.cost[t, crops].T @ d.area[planted, crops]
        self.water_used[t] = d.water[planted, crops].sum()
        uniq, inverse = np.unique(crops, return_inverse=True)
        quantity = np.zeros((len(uniq), n_s))
        np.add.at(quantity, inverse, produced)
        price = d.price[t, uniq]
        if d.demand_cap:
            demand = d.demand[t, uniq]
            sold = np.minimum(quantity, demand)
            income = price * (sold + d.salvage * (quantity - sold))
        else:
            income = price * quantity
        self.revenue[t] = income.sum(axis=0) - cost

    def unit_stress(self, i: int) -> float:
        """Sum over periods of the rotation stress recorded after each period."""
        d = self.data
        last = d.history[i]
        r = 0.0
        total = 0.0
        for c in self.x[i]:
            if c != FALLOW and last != FALLOW and d.category[c] == d.category[last]:
                r += SAME_CATEGORY_STRESS
            elif c != FALLOW and d.legume[c]:
                r -= LEGUME_RELIEF
            elif c == FALLOW:
                r -= FALLOW_RELIEF
            r = max(r, 0.0)
            total += r
            if c != FALLOW:
                last = c
        return total

    # -- constraint checks on a single unit ------------------------------

    def rotation_conflicts(self, i: int) -> int:
        row = self.x[i]
        tau = self.data.tau
        count = 0
        for t, c in enumerate(row):
            if c == FALLOW:
                continue
            for delta in range(1, tau[c]):
                if t + delta < len(row) and row[t + delta] == c:
                    count += 1
        return count

    def rotation_ok_at(self, i: int, t: int) -> bool:
        c = self.x[i, t]
        if c == FALLOW:
            return True
        tau = self.data.tau[c]
        lo, hi = max(0, t - tau + 1), min(self.data.n_periods, t + tau)
        window = self.x[i, lo:hi]
        return int((window == c).sum()) == 1

    def legume_ok(self, i: int) -> bool:
        d = self.data
        w = d.legume_window
        if w is None or w > d.n_periods or not d.legume_units[i]:
            return True
        row = self.x[i]
        has = np.zeros(len(row), dtype=np.int64)
        planted = row != FALLOW
        has[planted] = d.legume[row[planted]]
        run = np.convolve(has, np.ones(w, dtype=np.int64), mode="valid")
        return bool(np.all(run > 0))

    def floors_ok(self) -> bool:
        floors = self.data.min_revenue
        mask = ~np.isnan(floors)
        return not mask.any() or bool(np.all(self.totals[mask] >= floors[mask]))

    # -- moves -------------------------------------------------------------

    def apply(self, changes: list[tuple[int, int, int]]):
        """Set slots and refresh caches; returns an undo token."""
        periods = sorted({t for _, t, _ in changes})
        units = sorted({i for i, _, _ in changes})
        token = (
            [(i, t, int(self.x[i, t])) for i, t, _ in changes],
            periods,
            self.revenue[periods].copy(),
            self.eta[:, periods].copy(),
            self.water_used[periods].copy(),
            units,
            self.stress[units].copy(),
        )
        for i, t, c in changes:
            self.x[i, t] = c
        for t in periods:
            self._recompute_period(t)
        for i in units:
            self.stress[i] = self.unit_stress(i)
        return token

    def revert(self, token) -> None:
        old, periods, revenue, eta, water, units, stress = token
        for i, t, c in old:
            self.x[i, t] = c
        self.revenue[periods] = revenue
        self.eta[:, periods] = eta
        self.water_used[periods] = water
        self.stress[units] = stress
