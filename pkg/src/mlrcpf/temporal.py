"""Temporal layer: per-unit agronomic state, its period-to-period transition,
rotation-interval legality and neighbour interaction potential."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType

from .model import AgronomicState, Crop, CropCategory, InteractionMatrix, Plan, PlanningInstance
from .spatial import AdjacencyMatrix

SAME_CATEGORY_STRESS = 1.0
LEGUME_RELIEF = 2.0
FALLOW_RELIEF = 1.0


@dataclass(frozen=True)
class StateTrajectory:
    """States keyed by (unit id, period) for periods 1..horizon+1.

    The state at ``t + 1`` records the outcome of period-``t`` decisions, so the
    interaction potential realised while period ``t`` is growing is
    ``states[(unit, t + 1)].interaction_potential``.
    """

    states: Mapping[tuple[str, int], AgronomicState] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", MappingProxyType(dict(self.states)))

    def __getitem__(self, key: tuple[str, int]) -> AgronomicState:
        return self.states[key]

    def realised_interaction(self, unit_id: str, period: int) -> float:
        return self.states[(unit_id, period + 1)].interaction_potential


def initial_states(instance: PlanningInstance) -> dict[str, AgronomicState]:
    return {u.id: AgronomicState(last_crop=instance.history.get(u.id)) for u in instance.units}


def stress_delta(last: Crop | None, chosen: Crop | None) -> float:
    if chosen is not None and last is not None and chosen.category is last.category:
        return SAME_CATEGORY_STRESS
    if chosen is not None and chosen.category is CropCategory.LEGUME:
        return -LEGUME_RELIEF
    if chosen is None:
        return -FALLOW_RELIEF
    return 0.0


def rotation_stress_update(
    state: AgronomicState, chosen: str | None, crops: Sequence[Crop] | Mapping[str, Crop]
) -> float:
    """Next rotation stress: repeats of a category add 1, legumes relieve 2,
    fallow relieves 1; never below zero."""
    lookup = crops if isinstance(crops, Mapping) else {c.id: c for c in crops}
    last = lookup[state.last_crop] if state.last_crop is not None else None
    new = lookup[chosen] if chosen is not None else None
    return max(0.0, state.rotation_stress + stress_delta(last, new))


def interaction_potential(
    unit_id: str,
    period: int,
    plan: Plan,
    adjacency: AdjacencyMatrix,
    interaction: InteractionMatrix,
) -> float:
    """Sum of M[own crop, neighbour crop] over planted neighbours in the same period."""
    own = plan.crop_at(unit_id, period)
    if own is None:
        return 0.0
    total = 0.0
    for nb in adjacency.neighbors(unit_id):
        other = plan.crop_at(nb, period)
        if other is not None:
            total += interaction[own, other]
    return total


def transition(
    states: Mapping[str, AgronomicState],
    plan: Plan,
    period: int,
    adjacency: AdjacencyMatrix,
    instance: PlanningInstance,
) -> dict[str, AgronomicState]:
    """Advance every unit from ``period`` to ``period + 1``.

    Under fallow the last-crop record is kept so replant intervals keep counting.
    """
    lookup = {c.id: c for c in instance.crops}
    out = {}
    for unit in instance.units:
        state = states[unit.id]
        chosen = plan.crop_at(unit.id, period)
        out[unit.id] = AgronomicState(
            last_crop=chosen if chosen is not None else state.last_crop,
            rotation_stress=rotation_stress_update(state, chosen, lookup),
            interaction_potential=interaction_potential(
                unit.id, period, plan, adjacency, instance.interaction
            ),
        )
    return out


def simulate(plan: Plan, instance: PlanningInstance, adjacency: AdjacencyMatrix) -> StateTrajectory:
    states = initial_states(instance)
    record = {(uid, 1): s for uid, s in states.items()}
    for t in instance.periods:
        states = transition(states, plan, t, adjacency, instance)
        record.update({(uid, t + 1): s for uid, s in states.items()})
    return StateTrajectory(record)


def rotation_legal(plan: Plan, instance: PlanningInstance) -> list[tuple[str, int, str]]:
    """(unit, later period, crop) for each pair of plantings closer than the crop's interval."""
    violations = []
    for (uid, t), cid in sorted(plan.assignment.items()):
        tau = instance.crop(cid).replant_interval
        for delta in range(1, tau):
            if plan.crop_at(uid, t + delta) == cid:
                violations.append((uid, t + delta, cid))
    return sorted(violations)
