import dataclasses

import numpy as np
import pytest
from builders import DRY, GH, crop, instance, row_units, unit

from mlrcpf.casestudy import generate_case_study
from mlrcpf.model import FALLOW, InteractionMatrix, Plan, validate_instance


def small():
    return instance(row_units(2), [crop("wheat"), crop("soy", "legume")], horizon=4)


def test_case_study_validates_clean():
    assert validate_instance(generate_case_study(1)) == []


def test_zero_replant_interval_names_the_crop():
    inst = instance(row_units(1), [crop("wheat", tau=0), crop("corn")])
    problems = validate_instance(inst)
    assert len(problems) == 1
    assert "wheat" in problems[0] and "replant_interval" in problems[0]


def test_shared_cell_names_both_units():
    units = [unit("a", {(3, 4), (3, 5)}), unit("b", {(3, 4)})]
    problems = validate_instance(instance(units, [crop("wheat")]))
    assert len(problems) == 1
    assert "'a'" in problems[0] and "'b'" in problems[0] and "(3, 4)" in problems[0]


def test_duplicate_unit_ids_list_both_positions():
    units = [unit("a", {(0, 0)}), unit("a", {(0, 1)})]
    problems = validate_instance(instance(units, [crop("wheat")]))
    assert problems == ["unit 'a': duplicate unit id at positions 0 and 1"]


@pytest.mark.parametrize(
    "change, fragment",
    [
        (dict(horizon=0, water_limits=()), "horizon"),
        (dict(water_limits=(1.0, -1.0)), "water_limits must be >= 0"),
        (dict(salvage_fraction=1.5), "salvage_fraction"),
        (dict(legume_window=0), "legume_window"),
        (dict(water_limits=(1.0,)), "water_limits has 1 entries"),
        (dict(history={"ghost": "wheat"}), "unknown unit"),
        (dict(history={"u0": "rice"}), "unknown crop"),
    ],
)
def test_instance_level_rules(change, fragment):
    inst = dataclasses.replace(small(), **change)
    problems = validate_instance(inst)
    assert any(fragment in p for p in problems), problems


def test_unit_and_crop_field_rules():
    units = [unit("a", {(0, 0)}, area=0.0), dataclasses.replace(unit("b", {(0, 1)}), fertility_level=7)]
    crops = [crop("wheat", y=-1.0), crop("corn", land=()), crop("rye", area_per_planting=0.0)]
    problems = validate_instance(instance(units, crops))
    joined = "\n".join(problems)
    for fragment in ("'a': area", "'b': fertility_level", "'wheat': baseline_yield",
                     "'corn': allowed_land_types", "'rye': area_per_planting"):
        assert fragment in joined


def test_interaction_diagonal_and_finiteness():
    m = np.array([[0.5, 0.0], [np.inf, 0.0]])
    problems = validate_instance(instance(row_units(1), [crop("a"), crop("b")], m=m))
    assert any("diagonal" in p and "a" in p for p in problems)
    assert any("finite" in p for p in problems)


def test_validation_is_idempotent():
    inst = instance([unit("a", {(0, 0)}), unit("b", {(0, 0)})], [crop("w", tau=0)])
    assert validate_instance(inst) == validate_instance(inst)


def test_interaction_matrix_is_read_only_and_indexed_by_id():
    m = InteractionMatrix(("x", "y"), np.array([[0.0, 0.3], [0.1, 0.0]]))
    assert m["x", "y"] == 0.3 and m["y", "x"] == 0.1
    with pytest.raises(ValueError):
        m.entries[0, 1] = 1.0


def test_plan_array_round_trip_and_fallow_encoding():
    inst = small()
    plan = Plan({("u0", 1): "wheat", ("u1", 3): "soy"})
    arr = plan.to_array(inst)
    assert arr.shape == (2, 4)
    assert arr[0, 0] == 0 and arr[1, 2] == 1 and (arr == FALLOW).sum() == 6
    assert Plan.from_array(inst, arr) == plan


def test_plan_helpers():
    plan = Plan({("u1", 2): "soy", ("u0", 1): "wheat"})
    assert list(plan.plantings()) == [("u0", 1, "wheat"), ("u1", 2, "soy")]
    assert plan.crop_at("u0", 2) is None
    assert len(plan.with_assignment("u0", 1, None)) == 1
    assert not Plan({})


def test_years_and_planted_area():
    inst = dataclasses.replace(small(), periods_per_year=2)
    assert [inst.year_of(t) for t in inst.periods] == [0, 0, 1, 1]
    assert inst.n_years == 2
    u = inst.units[0]
    assert inst.planted_area(u, crop("x")) == u.area
    assert inst.planted_area(u, crop("x", area_per_planting=4.0)) == 4.0


def test_instances_compare_by_value():
    assert small() == small()
    assert small() != dataclasses.replace(small(), horizon=3, water_limits=(1.0,) * 3)


def test_land_type_coercion_from_strings():
    u = unit("g", {(0, 0)}, land_type="greenhouse")
    assert u.land_type is GH
    assert crop("w").allowed_land_types == frozenset({DRY})
