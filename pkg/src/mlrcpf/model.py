"""Domain types shared by every layer of the planner, plus instance validation.

All types are immutable once built. Periods are 1-indexed throughout; a plan
that leaves a (unit, period) slot unassigned means the unit lies fallow.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType

import numpy as np

FALLOW = -1  # crop index used for fallow slots in array form


class LandType(str, enum.Enum):
    DRY_FLAT = "dry_flat"
    DRY_TERRACE = "dry_terrace"
    DRY_HILLSIDE = "dry_hillside"
    IRRIGATED = "irrigated"
    GREENHOUSE = "greenhouse"
    SMART_GREENHOUSE = "smart_greenhouse"


class CropCategory(str, enum.Enum):
    CEREAL = "cereal"
    LEGUME = "legume"
    VEGETABLE = "vegetable"
    FUNGUS = "fungus"


@dataclass(frozen=True)
class LandUnit:
    id: str
    land_type: LandType
    area: float  # mu
    productivity_factor: float
    fertility_level: int
    irrigated_flag: bool
    cells: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        object.__setattr__(self, "land_type", LandType(self.land_type))
        object.__setattr__(self, "cells", frozenset((int(r), int(c)) for r, c in self.cells))


@dataclass(frozen=True)
class Crop:
    id: str
    category: CropCategory
    baseline_yield: float  # kg / mu
    baseline_price: float  # CNY / kg
    baseline_cost: float  # CNY / mu
    water_need: float  # m3 per planting
    replant_interval: int  # periods
    allowed_land_types: frozenset[LandType]
    area_per_planting: float | None = None  # None: the whole unit
    demand: float | None = None  # kg per period; None: unlimited

    def __post_init__(self) -> None:
        object.__setattr__(self, "category", CropCategory(self.category))
        object.__setattr__(
            self, "allowed_land_types", frozenset(LandType(t) for t in self.allowed_land_types)
        )

    @property
    def is_legume(self) -> bool:
        return self.category is CropCategory.LEGUME


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Signed crop-by-crop coefficients; rows and columns follow ``crop_ids``."""

    crop_ids: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.entries, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "crop_ids", tuple(self.crop_ids))

    def __getitem__(self, pair: tuple[str, str]) -> float:
        a, b = pair
        return float(self.entries[self._index[a], self._index[b]])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InteractionMatrix):
            return NotImplemented
        return self.crop_ids == other.crop_ids and np.array_equal(self.entries, other.entries)

    __hash__ = None  # type: ignore[assignment]

    @cached_property
    def _index(self) -> dict[str, int]:
        return {cid: k for k, cid in enumerate(self.crop_ids)}

    @classmethod
    def zeros(cls, crop_ids: Iterable[str]) -> InteractionMatrix:
        ids = tuple(crop_ids)
        return cls(ids, np.zeros((len(ids), len(ids))))


@dataclass(frozen=True, eq=False)
class PlanningInstance:
    units: tuple[LandUnit, ...]
    crops: tuple[Crop, ...]
    interaction: InteractionMatrix
    horizon: int
    water_limits: tuple[float, ...]
    interaction_yield_gain: float = 0.05
    salvage_fraction: float = 0.0
    legume_window: int | None = None
    demand_cap: bool = False
    periods_per_year: int = 2
    interaction_clip: float = 0.5
    history: Mapping[str, str] = field(default_factory=dict)
    name: str = "instance"

    def __post_init__(self) -> None:
        object.__setattr__(self, "units", tuple(self.units))
        object.__setattr__(self, "crops", tuple(self.crops))
        object.__setattr__(self, "water_limits", tuple(float(w) for w in self.water_limits))
        object.__setattr__(self, "history", MappingProxyType(dict(self.history)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PlanningInstance):
            return NotImplemented
        keys = (
            "units", "crops", "interaction", "horizon", "water_limits",
            "interaction_yield_gain", "salvage_fraction", "legume_window",
            "demand_cap", "periods_per_year", "interaction_clip", "name",
        )
        return all(getattr(self, k) == getattr(other, k) for k in keys) and dict(
            self.history
        ) == dict(other.history)

    __hash__ = None  # type: ignore[assignment]

    @cached_property
    def unit_index(self) -> dict[str, int]:
        return {u.id: i for i, u in enumerate(self.units)}

    @cached_property
    def crop_index(self) -> dict[str, int]:
        return {c.id: k for k, c in enumerate(self.crops)}

    def unit(self, unit_id: str) -> LandUnit:
        return self.units[self.unit_index[unit_id]]

    def crop(self, crop_id: str) -> Crop:
        return self.crops[self.crop_index[crop_id]]

    @property
    def periods(self) -> range:
        return range(1, self.horizon + 1)

    @property
    def n_years(self) -> int:
        return math.ceil(self.horizon / self.periods_per_year)

    def year_of(self, period: int) -> int:
        """0-based year index of a 1-based period."""
        return (period - 1) // self.periods_per_year

    def planted_area(self, unit: LandUnit, crop: Crop) -> float:
        return unit.area if crop.area_per_planting is None else crop.area_per_planting

    @cached_property
    def interaction_array(self) -> np.ndarray:
        """Interaction entries reordered to match ``crops``."""
        m = self.interaction
        if m.crop_ids == tuple(c.id for c in self.crops):
            return m.entries
        order = [m._index[c.id] for c in self.crops]
        return m.entries[np.ix_(order, order)]


@dataclass(frozen=True)
class Plan:
    """Binary planting decision stored sparsely: (unit id, period) -> crop id."""

    assignment: Mapping[tuple[str, int], str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        frozen = {(str(u), int(t)): str(c) for (u, t), c in self.assignment.items()}
        object.__setattr__(self, "assignment", MappingProxyType(frozen))

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.assignment.items())))

    def __len__(self) -> int:
        return len(self.assignment)

    def crop_at(self, unit_id: str, period: int) -> str | None:
        return self.assignment.get((unit_id, period))

    def plantings(self) -> Iterator[tuple[str, int, str]]:
        """Yield (unit, period, crop) sorted by unit id then period."""
        for (u, t), c in sorted(self.assignment.items()):
            yield u, t, c

    def with_assignment(self, unit_id: str, period: int, crop_id: str | None) -> Plan:
        data = dict(self.assignment)
        if crop_id is None:
            data.pop((unit_id, period), None)
        else:
            data[(unit_id, period)] = crop_id
        return Plan(data)

    def to_array(self, instance: PlanningInstance) -> np.ndarray:
        arr = np.full((len(instance.units), instance.horizon), FALLOW, dtype=np.int64)
        for (u, t), c in self.assignment.items():
            arr[instance.unit_index[u], t - 1] = instance.crop_index[c]
        return arr

    @classmethod
    def from_array(cls, instance: PlanningInstance, arr: np.ndarray) -> Plan:
        data = {}
        for i, t in zip(*np.nonzero(np.asarray(arr) != FALLOW)):
            data[(instance.units[i].id, int(t) + 1)] = instance.crops[arr[i, t]].id
        return cls(data)


@dataclass(frozen=True)
class AgronomicState:
    last_crop: str | None = None
    rotation_stress: float = 0.0
    interaction_potential: float = 0.0


def validate_instance(instance: PlanningInstance) -> list[str]:
    """Return one message per broken invariant; an empty list means valid."""
    problems: list[str] = []

    seen_units: dict[str, int] = {}
    for pos, u in enumerate(instance.units):
        if u.id in seen_units:
            problems.append(
                f"unit {u.id!r}: duplicate unit id at positions {seen_units[u.id]} and {pos}"
            )
        seen_units.setdefault(u.id, pos)
        if not u.area > 0:
            problems.append(f"unit {u.id!r}: area must be > 0 (got {u.area})")
        if not u.productivity_factor > 0:
            problems.append(
                f"unit {u.id!r}: productivity_factor must be > 0 (got {u.productivity_factor})"
            )
        if not 1 <= u.fertility_level <= 5:
            problems.append(f"unit {u.id!r}: fertility_level must be in 1..5 (got {u.fertility_level})")
        if not u.cells:
            problems.append(f"unit {u.id!r}: cell set is empty")

    owner: dict[tuple[int, int], str] = {}
    shared: dict[tuple[str, str], list[tuple[int, int]]] = {}
    for u in instance.units:
        for cell in sorted(u.cells):
            if cell in owner and owner[cell] != u.id:
                shared.setdefault((owner[cell], u.id), []).append(cell)
            else:
                owner.setdefault(cell, u.id)
    for (a, b), cells in shared.items():
        listed = ", ".join(str(c) for c in cells)
        problems.append(f"units {a!r} and {b!r}: cell sets overlap at {listed}")

    seen_crops: set[str] = set()
    for c in instance.crops:
        if c.id in seen_crops:
            problems.append(f"crop {c.id!r}: duplicate crop id")
        seen_crops.add(c.id)
        if not c.baseline_yield >= 0:
            problems.append(f"crop {c.id!r}: baseline_yield must be >= 0 (got {c.baseline_yield})")
        if not c.replant_interval >= 1:
            problems.append(f"crop {c.id!r}: replant_interval must be >= 1 (got {c.replant_interval})")
        if not c.allowed_land_types:
            problems.append(f"crop {c.id!r}: allowed_land_types is empty")
        if c.area_per_planting is not None and not c.area_per_planting > 0:
            problems.append(f"crop {c.id!r}: area_per_planting must be > 0 when given")
        if c.demand is not None and not c.demand >= 0:
            problems.append(f"crop {c.id!r}: demand must be >= 0 when given")

    m = instance.interaction
    n = len(instance.crops)
    if m.entries.shape != (n, n):
        problems.append(f"interaction matrix: shape {m.entries.shape} is not ({n}, {n})")
    else:
        if set(m.crop_ids) != {c.id for c in instance.crops} or len(m.crop_ids) != n:
            problems.append("interaction matrix: crop ids do not match the crop library")
        if not np.all(np.isfinite(m.entries)):
            problems.append("interaction matrix: entries must be finite")
        bad = [m.crop_ids[k] for k in range(n) if m.entries[k, k] != 0]
        if bad:
            problems.append(f"interaction matrix: diagonal must be zero (crops {', '.join(bad)})")

    if instance.horizon < 1:
        problems.append(f"instance: horizon must be >= 1 (got {instance.horizon})")
    if len(instance.water_limits) != instance.horizon:
        problems.append(
            f"instance: water_limits has {len(instance.water_limits)} entries, horizon is {instance.horizon}"
        )
    neg = [t + 1 for t, w in enumerate(instance.water_limits) if not w >= 0]
    if neg:
        problems.append(f"instance: water_limits must be >= 0 (periods {neg})")
    if not 0 <= instance.salvage_fraction <= 1:
        problems.append(f"instance: salvage_fraction must be in [0, 1] (got {instance.salvage_fraction})")
    if instance.legume_window is not None and instance.legume_window < 1:
        problems.append(f"instance: legume_window must be >= 1 (got {instance.legume_window})")
    if instance.periods_per_year < 1:
        problems.append("instance: periods_per_year must be >= 1")
    if not instance.interaction_clip >= 0:
        problems.append("instance: interaction_clip must be >= 0")
    for uid, cid in instance.history.items():
        if uid not in seen_units:
            problems.append(f"history: unknown unit {uid!r}")
        if cid not in seen_crops:
            problems.append(f"history: unit {uid!r} references unknown crop {cid!r}")
    return problems
