import dataclasses

import numpy as np
import pytest
from builders import crop, instance, random_instance, random_plan, row_units, unit
from hypothesis import given, settings
from hypothesis import strategies as st

from mlrcpf.casestudy import generate_case_study
from mlrcpf.model import AgronomicState, CropCategory, InteractionMatrix, Plan
from mlrcpf.spatial import build_adjacency
from mlrcpf.temporal import (
    initial_states,
    interaction_potential,
    rotation_legal,
    rotation_stress_update,
    simulate,
    transition,
)

WHEAT = crop("wheat", tau=2)
CORN = crop("corn")
SOY = crop("soy", CropCategory.LEGUME)
CROPS = [WHEAT, CORN, SOY]


def quadruple_eta(i, t, plan, inst, adjacency):
    """Full double sum over neighbour j and crop pairs (c, c') with one-hot decisions."""
    ids = [c.id for c in inst.crops]
    m = inst.interaction.entries
    w = adjacency.entries
    x = plan.to_array(inst)
    total = 0.0
    for j in range(len(inst.units)):
        for a, _ in enumerate(ids):
            for b, _ in enumerate(ids):
                total += w[i, j] * m[a, b] * (x[i, t - 1] == a) * (x[j, t - 1] == b)
    return total


def test_initial_states_default_and_history():
    inst = instance(row_units(3), CROPS, history={"u1": "wheat"})
    states = initial_states(inst)
    assert states["u0"] == AgronomicState()
    assert states["u1"] == AgronomicState(last_crop="wheat")


def test_case_study_initial_states_cover_every_unit():
    inst = generate_case_study(1)
    states = initial_states(inst)
    assert len(states) == 54
    assert all(s.rotation_stress == 0 and s.interaction_potential == 0 for s in states.values())


@pytest.mark.parametrize(
    "stress, last, chosen, expected",
    [
        (0.0, "wheat", "wheat", 1.0),
        (0.0, "corn", "wheat", 1.0),
        (3.0, "wheat", "soy", 1.0),
        (1.0, None, "soy", 0.0),
        (0.0, "wheat", None, 0.0),
        (2.0, "wheat", None, 1.0),
        (2.0, "soy", "wheat", 2.0),
        (2.0, None, "wheat", 2.0),
        (0.0, "soy", "soy", 1.0),
    ],
)
def test_rotation_stress_update(stress, last, chosen, expected):
    state = AgronomicState(last_crop=last, rotation_stress=stress)
    assert rotation_stress_update(state, chosen, CROPS) == expected


def test_isolated_unit_has_zero_eta():
    inst = instance([unit("a", {(0, 0)}), unit("b", {(5, 5)})], CROPS, m=np.full((3, 3), 0.3) - 0.3 * np.eye(3))
    adj = build_adjacency(inst.units)
    assert interaction_potential("a", 1, Plan({("a", 1): "wheat", ("b", 1): "soy"}), adj, inst.interaction) == 0.0


def test_cereal_next_to_legume_picks_up_the_coefficient():
    m = np.zeros((3, 3))
    m[0, 2] = 0.1
    inst = instance(row_units(2), CROPS, m=m)
    adj = build_adjacency(inst.units)
    plan = Plan({("u0", 1): "wheat", ("u1", 1): "soy"})
    assert interaction_potential("u0", 1, plan, adj, inst.interaction) == 0.1
    assert interaction_potential("u1", 1, plan, adj, inst.interaction) == 0.0


def test_symmetric_sole_neighbours():
    m = np.array([[0.0, 0.2, 0.3], [0.2, 0.0, -0.1], [0.3, -0.1, 0.0]])
    inst = instance(row_units(2), CROPS, m=m)
    adj = build_adjacency(inst.units)
    plan = Plan({("u0", 1): "corn", ("u1", 1): "soy"})
    assert interaction_potential("u0", 1, plan, adj, inst.interaction) == -0.1
    assert interaction_potential("u1", 1, plan, adj, inst.interaction) == -0.1


def test_fallow_unit_and_fallow_neighbours_contribute_nothing():
    m = np.full((3, 3), 0.5)
    np.fill_diagonal(m, 0.0)
    inst = instance(row_units(3), CROPS, m=m)
    adj = build_adjacency(inst.units)
    plan = Plan({("u1", 1): "wheat"})
    for uid in ("u0", "u1", "u2"):
        assert interaction_potential(uid, 1, plan, adj, inst.interaction) == 0.0


def test_collapsed_eta_equals_quadruple_sum_on_six_units():
    rng = np.random.default_rng(3)
    for _ in range(20):
        inst = random_instance(rng, n_units=6, n_crops=4, horizon=2)
        adj = build_adjacency(inst.units)
        plan = random_plan(rng, inst, fill=0.9)
        for i, u in enumerate(inst.units):
            for t in inst.periods:
                collapsed = interaction_potential(u.id, t, plan, adj, inst.interaction)
                assert collapsed == quadruple_eta(i, t, plan, inst, adj)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_zero_interaction_matrix_gives_zero_eta(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n_units=5, n_crops=3, horizon=3)
    inst = dataclasses.replace(inst, interaction=InteractionMatrix.zeros(c.id for c in inst.crops))
    trajectory = simulate(random_plan(rng, inst, fill=1.0), inst, build_adjacency(inst.units))
    assert all(s.interaction_potential == 0.0 for s in trajectory.states.values())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_stress_never_negative_and_simulation_deterministic(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n_units=4, n_crops=4, horizon=5)
    adj = build_adjacency(inst.units)
    plan = random_plan(rng, inst)
    first = simulate(plan, inst, adj)
    assert first == simulate(plan, inst, adj)
    assert all(s.rotation_stress >= 0 for s in first.states.values())
    assert set(first.states) == {(u.id, t) for u in inst.units for t in range(1, inst.horizon + 2)}


def test_all_fallow_period_keeps_last_crop_and_decays_stress():
    inst = instance(row_units(2), CROPS)
    states = {"u0": AgronomicState("wheat", 2.0, 0.4), "u1": AgronomicState(None, 0.0, 0.0)}
    nxt = transition(states, Plan({}), 1, build_adjacency(inst.units), inst)
    assert nxt["u0"] == AgronomicState("wheat", 1.0, 0.0)
    assert nxt["u1"] == AgronomicState(None, 0.0, 0.0)


def test_isolated_planting_updates_last_crop():
    inst = instance([unit("a", {(0, 0)})], CROPS)
    nxt = transition(initial_states(inst), Plan({("a", 1): "corn"}), 1, build_adjacency(inst.units), inst)
    assert nxt["a"] == AgronomicState("corn", 0.0, 0.0)


def test_case_study_period_matches_straight_line_recomputation():
    inst = generate_case_study(1)
    adj = build_adjacency(inst.units)
    rng = np.random.default_rng(0)
    plan = random_plan(rng, inst, fill=0.8)
    start = initial_states(inst)
    nxt = transition(start, plan, 1, adj, inst)
    crops = {c.id: c for c in inst.crops}
    m = inst.interaction
    for i, u in enumerate(inst.units):
        chosen = plan.crop_at(u.id, 1)
        last = start[u.id].last_crop
        if chosen is None:
            stress = 0.0
        elif last is not None and crops[last].category is crops[chosen].category:
            stress = 1.0
        else:
            stress = 0.0
        eta = 0.0
        if chosen is not None:
            for j, v in enumerate(inst.units):
                other = plan.crop_at(v.id, 1)
                if adj.entries[i, j] and other is not None:
                    eta += m[chosen, other]
        assert nxt[u.id].last_crop == (chosen or last)
        assert nxt[u.id].rotation_stress == stress
        assert nxt[u.id].interaction_potential == pytest.approx(eta, abs=1e-15)


def test_trajectory_realised_interaction_indexing():
    m = np.zeros((3, 3))
    m[1, 0] = 0.25
    inst = instance(row_units(2), CROPS, horizon=2, m=m)
    plan = Plan({("u0", 2): "corn", ("u1", 2): "wheat"})
    traj = simulate(plan, inst, build_adjacency(inst.units))
    assert traj.realised_interaction("u0", 1) == 0.0
    assert traj.realised_interaction("u0", 2) == 0.25


def test_rotation_legal_examples():
    inst = instance(row_units(1), CROPS, horizon=3)
    assert rotation_legal(Plan({("u0", 1): "wheat", ("u0", 2): "wheat"}), inst) == [("u0", 2, "wheat")]
    assert rotation_legal(Plan({("u0", 1): "wheat", ("u0", 3): "wheat"}), inst) == []
    assert rotation_legal(Plan({("u0", 1): "corn", ("u0", 2): "corn"}), inst) == []


def test_rotation_legal_counts_every_close_pair():
    slow = crop("slow", tau=3)
    inst = instance(row_units(1), [slow], horizon=3)
    plan = Plan({("u0", t): "slow" for t in (1, 2, 3)})
    assert rotation_legal(plan, inst) == [("u0", 2, "slow"), ("u0", 3, "slow"), ("u0", 3, "slow")]
