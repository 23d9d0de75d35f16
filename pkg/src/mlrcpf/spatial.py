"""Spatial layer: unit adjacency on the cell grid, crop admissibility, and
per-period area and irrigation-water limits."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import Crop, LandUnit, Plan, PlanningInstance

_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class OverlappingCellsError(ValueError):
    """Two land units claim the same grid cell."""


@dataclass(frozen=True, eq=False)
class AdjacencyMatrix:
    """Symmetric 0/1 matrix over units; rows follow ``unit_ids``."""

    unit_ids: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.entries, dtype=np.int8)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "unit_ids", tuple(self.unit_ids))

    def __getitem__(self, pair: tuple[str, str]) -> int:
        a, b = pair
        return int(self.entries[self._index[a], self._index[b]])

    @cached_property
    def _index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self.unit_ids)}

    @cached_property
    def neighbor_lists(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(np.flatnonzero(row).tolist()) for row in self.entries)

    def neighbors(self, unit_id: str) -> list[str]:
        return [self.unit_ids[j] for j in self.neighbor_lists[self._index[unit_id]]]


def build_adjacency(units: Sequence[LandUnit]) -> AdjacencyMatrix:
    """Units are adjacent when any of their cells are 4-neighbours (L1 distance 1).

    Raises OverlappingCellsError if two units share a cell.
    """
    owner: dict[tuple[int, int], int] = {}
    for i, unit in enumerate(units):
        for cell in unit.cells:
            j = owner.setdefault(cell, i)
            if j != i:
                raise OverlappingCellsError(
                    f"units {units[j].id!r} and {unit.id!r} both contain cell {cell}"
                )
    n = len(units)
    w = np.zeros((n, n), dtype=np.int8)
    for (r, c), i in owner.items():
        for dr, dc in _STEPS:
            j = owner.get((r + dr, c + dc))
            if j is not None and j != i:
                w[i, j] = w[j, i] = 1
    return AdjacencyMatrix(tuple(u.id for u in units), w)


def feasible_crops(unit: LandUnit, crops: Sequence[Crop]) -> set[str]:
    return {c.id for c in crops if unit.land_type in c.allowed_land_types}


def admissible_actions(instance: PlanningInstance, period: int) -> dict[str, set[str]]:
    """Crops each unit may take in ``period``: land-type feasible and fitting the unit area.

    Area requirements do not vary by period in this model, so the result is the
    same for every period; the argument is kept so callers mirror the per-period
    filtering the model describes.
    """
    del period
    result = {}
    for unit in instance.units:
        allowed = feasible_crops(unit, instance.crops)
        result[unit.id] = {
            cid for cid in allowed if instance.planted_area(unit, instance.crop(cid)) <= unit.area
        }
    return result


def capacity_violation(plan: Plan, instance: PlanningInstance, period: int) -> list[str]:
    """Units whose planted area in ``period`` exceeds their available area."""
    used: dict[str, float] = {}
    for (uid, t), cid in plan.assignment.items():
        if t == period:
            unit = instance.unit(uid)
            used[uid] = used.get(uid, 0.0) + instance.planted_area(unit, instance.crop(cid))
    return sorted(uid for uid, area in used.items() if area > instance.unit(uid).area)


def water_use(plan: Plan, instance: PlanningInstance, period: int) -> float:
    total = 0.0
    for (uid, t), cid in sorted(plan.assignment.items()):
        if t == period and instance.unit(uid).irrigated_flag:
            total += instance.crop(cid).water_need
    return total


def water_violation(
    plan: Plan, instance: PlanningInstance, period: int, limit_factor: float = 1.0
) -> float | None:
    """Excess irrigation water over the period limit, or None when within it.

    ``limit_factor`` scales the limit (scenario-specific water availability).
    """
    excess = water_use(plan, instance, period) - limit_factor * instance.water_limits[period - 1]
    return excess if excess > 0 else None
