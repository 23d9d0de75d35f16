import csv
import json
import re
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from builders import crop, instance, random_instance, random_plan, row_units, unit
from hypothesis import given, settings
from hypothesis import strategies as st

from mlrcpf import validate_instance
from mlrcpf.casestudy import generate_case_study
from mlrcpf.cli import derive_seed, main
from mlrcpf.model import CropCategory, LandType, Plan
from mlrcpf.optimizer import PlanMetrics, feasible
from mlrcpf.render import FALLOW_COLOR, PALETTE, render_map, render_svg
from mlrcpf.serialize import (
    DocumentError,
    InstanceDocument,
    document_to_instance,
    dumps_instance,
    export_plan,
    format_metrics,
    instance_schema,
    load_document,
    load_instance,
    load_metrics,
    load_plan,
    load_scenarios,
    load_states,
    save_instance,
    save_metrics,
    save_scenarios,
    states_path_for,
)
from mlrcpf.spatial import build_adjacency
from mlrcpf.temporal import interaction_potential, simulate
from mlrcpf.uncertainty import ScenarioSpec, generate_scenarios

DOCS = Path(__file__).resolve().parent.parent / "docs"
EXAMPLE = DOCS / "example_instance.json"
DRY_TYPES = {LandType.DRY_FLAT, LandType.DRY_TERRACE, LandType.DRY_HILLSIDE}


@pytest.fixture(scope="module")
def case():
    return generate_case_study(1)


def write_doc(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def tiny_doc():
    inst = instance(row_units(2), [crop("wheat", tau=2), crop("soy", CropCategory.LEGUME)], horizon=2)
    return json.loads(dumps_instance(inst))


# -- case study ------------------------------------------------------------


def test_case_study_census(case):
    types = [u.land_type for u in case.units]
    census = (
        sum(t in DRY_TYPES for t in types),
        types.count(LandType.IRRIGATED),
        types.count(LandType.GREENHOUSE),
        types.count(LandType.SMART_GREENHOUSE),
    )
    assert census == (26, 8, 16, 4)
    assert (len(case.units), len(case.crops), case.horizon) == (54, 41, 14)


def test_case_study_area_and_validity(case):
    assert abs(sum(u.area for u in case.units) - 1201.0) <= 1e-6
    assert validate_instance(case) == []
    assert build_adjacency(case.units).entries.sum() > 2 * len(case.units)


def test_case_study_interaction_signs(case):
    m = case.interaction_array
    assert np.all(np.diag(m) == 0)
    cats = [c.category for c in case.crops]
    legumes = [i for i, c in enumerate(cats) if c is CropCategory.LEGUME]
    cereals = [i for i, c in enumerate(cats) if c is CropCategory.CEREAL]
    assert all(m[a, b] > 0 and m[b, a] > 0 for a in legumes for b in cereals)
    assert (m < 0).any()


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 10**6))
def test_case_study_properties_hold_for_any_seed(seed):
    inst = generate_case_study(seed)
    assert validate_instance(inst) == []
    assert abs(sum(u.area for u in inst.units) - 1201.0) <= 1e-6
    assert np.all(np.diag(inst.interaction_array) == 0)


def test_case_study_is_seed_deterministic():
    assert dumps_instance(generate_case_study(3)) == dumps_instance(generate_case_study(3))
    assert dumps_instance(generate_case_study(3)) != dumps_instance(generate_case_study(4))


# -- instance documents ------------------------------------------------------


def test_schema_file_is_current():
    assert json.loads((DOCS / "instance.schema.json").read_text()) == instance_schema()


def test_bundled_example_loads_clean():
    inst, spec = load_document(EXAMPLE)
    assert validate_instance(inst) == []
    assert spec == ScenarioSpec(count=50)


def test_instance_round_trip(case, tmp_path):
    path = save_instance(case, tmp_path / "case.json", ScenarioSpec(count=20))
    again, spec = load_document(path)
    assert again == case
    assert spec == ScenarioSpec(count=20)
    assert dumps_instance(again) == dumps_instance(case)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_instance_round_trip(seed):
    inst = random_instance(np.random.default_rng(seed), n_units=4, n_crops=3, window=2)
    text = dumps_instance(inst)
    assert document_to_instance(InstanceDocument.model_validate_json(text)) == inst


def test_missing_horizon_names_the_field(tmp_path):
    doc = tiny_doc()
    del doc["horizon"]
    with pytest.raises(DocumentError) as err:
        load_instance(write_doc(tmp_path / "d.json", doc))
    assert any(p.startswith("horizon:") for p in err.value.problems)


def test_unknown_field_rejected_by_name(tmp_path):
    doc = tiny_doc()
    doc["units"][0]["colour"] = "red"
    with pytest.raises(DocumentError) as err:
        load_instance(write_doc(tmp_path / "d.json", doc))
    assert err.value.problems == ["units.0.colour: Extra inputs are not permitted"]


def test_duplicate_unit_ids_listed(tmp_path):
    doc = tiny_doc()
    doc["units"][1]["id"] = doc["units"][0]["id"]
    with pytest.raises(DocumentError) as err:
        load_instance(write_doc(tmp_path / "d.json", doc))
    assert any("duplicate unit id at positions 0 and 1" in p for p in err.value.problems)


def test_every_validation_problem_is_reported(tmp_path):
    doc = tiny_doc()
    doc["crops"][0]["replant_interval"] = 0
    doc["units"][0]["area"] = -1
    with pytest.raises(DocumentError) as err:
        load_instance(write_doc(tmp_path / "d.json", doc))
    assert len(err.value.problems) == 2


def test_malformed_json_reports_the_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "version": 1,\n  "horizon": ,\n}')
    with pytest.raises(DocumentError, match="line 3"):
        load_instance(path)


def test_missing_file_raises():
    with pytest.raises(FileNotFoundError):
        load_instance("/nonexistent/instance.json")


# -- plans, states, metrics, scenarios ---------------------------------------


def test_empty_plan_exports_header_only(tmp_path):
    inst = instance(row_units(2), [crop("wheat")])
    csv_path, states = export_plan(Plan({}), simulate(Plan({}), inst, build_adjacency(inst.units)), inst,
                                   tmp_path / "plan.csv")
    assert csv_path.read_text() == "unit,period,crop,area\n"
    assert states == states_path_for(csv_path) == tmp_path / "plan.states.json"
    assert load_plan(csv_path, inst) == Plan({})


def test_plan_and_states_round_trip_with_eta_column(case, tmp_path):
    rng = np.random.default_rng(5)
    plan = random_plan(rng, case, fill=0.6)
    traj = simulate(plan, case, build_adjacency(case.units))
    csv_path, states_path = export_plan(plan, traj, case, tmp_path / "plan.csv")
    assert load_plan(csv_path, case) == plan
    assert load_states(states_path) == traj
    rows = json.loads(states_path.read_text())["states"]
    assert len(rows) == 54 * 15
    adjacency = build_adjacency(case.units)
    for r in rows:
        if r["period"] > 1:
            t = r["period"] - 1
            assert r["interaction_potential"] == interaction_potential(
                r["unit"], t, plan, adjacency, case.interaction)


def test_plan_table_rows_are_sorted_and_carry_area(tmp_path):
    inst = instance([unit("b", {(0, 0)}, area=2.5), unit("a", {(0, 1)}, area=4.0)], [crop("wheat")], horizon=2)
    plan = Plan({("a", 1): "wheat", ("b", 2): "wheat", ("b", 1): "wheat"})
    path, _ = export_plan(plan, simulate(plan, inst, build_adjacency(inst.units)), inst, tmp_path / "p.csv")
    rows = list(csv.reader(path.open()))
    assert rows[1:] == [["b", "1", "wheat", "2.5"], ["a", "1", "wheat", "4.0"], ["b", "2", "wheat", "2.5"]]


def test_plan_loader_reports_every_bad_line(tmp_path):
    inst = instance(row_units(2), [crop("wheat")], horizon=2)
    path = tmp_path / "p.csv"
    path.write_text("unit,period,crop,area\nu0,1,wheat,10\nu0,1,wheat,10\nzz,x,wheat,1\nu1,5,rice,1\n")
    with pytest.raises(DocumentError) as err:
        load_plan(path, inst)
    problems = err.value.problems
    assert problems[0].startswith("line 3: unit u0 has two crops")
    assert problems[1].startswith("line 4: period 'x'")
    assert {p.split(":")[0] for p in problems[2:]} == {"line 5"} and len(problems) == 4


def test_plan_loader_rejects_wrong_header(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("a,b,c\n")
    with pytest.raises(DocumentError, match="line 1"):
        load_plan(path)


def test_metrics_round_trip_and_units(tmp_path):
    m = PlanMetrics(123456.5, 120000.0, 5000.25, 0.125, 130000.0, 0.05, 200)
    path = save_metrics(m, tmp_path / "m.json", mode="proposed")
    doc = json.loads(path.read_text())
    assert doc["unit"] == "CNY" and doc["mode"] == "proposed"
    assert load_metrics(path) == m
    text = format_metrics(m)
    assert "12.35 x10^4 CNY" in text and "12.5%" in text


def test_scenarios_round_trip_exactly(tmp_path):
    inst = instance(row_units(2), [crop("wheat", demand=500.0), crop("soy", CropCategory.LEGUME)], horizon=3)
    s = generate_scenarios(inst, ScenarioSpec(count=7, unit_noise=0.02), seed=8)
    again = load_scenarios(save_scenarios(s, tmp_path / "s.json"))
    for name in ("yield_factor", "price", "cost", "demand", "weights", "water_factor", "unit_factor"):
        assert np.array_equal(getattr(again, name), getattr(s, name))
    assert np.all(np.isnan(again.min_revenue)) and again.seed == 8


# -- maps ----------------------------------------------------------------------


def cell_fills(svg):
    return re.findall(r'<rect class="cell" data-unit="[^"]*" x="\d+" y="\d+" width="\d+" height="\d+" fill="([^"]+)"',
                      svg)


def test_all_fallow_map(case):
    fills = cell_fills(render_svg(Plan({}), case, 1))
    assert len(fills) == sum(len(u.cells) for u in case.units)
    assert set(fills) == {FALLOW_COLOR}


def test_checkerboard_map_alternates_two_colours():
    units = [unit(f"u{r}{c}", {(r, c)}) for r in range(4) for c in range(4)]
    inst = instance(units, [crop("wheat"), crop("soy", CropCategory.LEGUME)], horizon=1)
    plan = Plan({(f"u{r}{c}", 1): ("soy" if (r + c) % 2 else "wheat") for r in range(4) for c in range(4)})
    svg = render_svg(plan, inst, 1)
    fills = cell_fills(svg)
    assert set(fills) == {PALETTE[CropCategory.CEREAL], PALETTE[CropCategory.LEGUME]}
    grid = {(int(y), int(x)): f for x, y, f in re.findall(r'class="cell" data-unit="[^"]*" x="(\d+)" y="(\d+)"'
                                                          r' width="\d+" height="\d+" fill="([^"]+)"', svg)}
    for (y, x), f in grid.items():
        for dy, dx in ((0, 22), (22, 0)):
            if (y + dy, x + dx) in grid:
                assert grid[(y + dy, x + dx)] != f


def test_one_rect_per_cell_and_a_legend(case):
    plan = random_plan(np.random.default_rng(0), case)
    svg = render_svg(plan, case, 3)
    for u in case.units:
        assert svg.count(f'class="cell" data-unit="{u.id}"') == len(u.cells)
    assert svg.count('class="legend"') == len(CropCategory) + 1


def test_map_bytes_are_deterministic(case, tmp_path):
    plan = random_plan(np.random.default_rng(1), case)
    a = render_map(plan, case, 2, tmp_path / "a.svg").read_bytes()
    b = render_map(plan, case, 2, tmp_path / "b.svg").read_bytes()
    assert a == b


def test_map_period_out_of_range(case):
    with pytest.raises(ValueError, match="outside"):
        render_svg(Plan({}), case, 15)


# -- command line ---------------------------------------------------------------


def run(*argv):
    return main([str(a) for a in argv])


def test_derive_seed_is_stable_and_named():
    assert derive_seed(0, "solver") == derive_seed(0, "solver")
    assert derive_seed(0, "solver") != derive_seed(0, "scenarios")
    assert 0 <= derive_seed(2**40, "x") < 2**63


def test_solve_then_evaluate_gives_identical_metrics(tmp_path, capsys):
    out = tmp_path / "run"
    assert run("solve", "--instance", EXAMPLE, "--scenarios", 12, "--iterations", 400, "--seed", 3,
               "--out", out, "--maps", "ends") == 0
    for name in ("plan.csv", "plan.states.json", "metrics.json", "scenarios.json", "search_log.csv",
                 "maps/period-01.svg", "maps/period-06.svg"):
        assert (out / name).exists(), name
    solved = json.loads((out / "metrics.json").read_text())
    capsys.readouterr()
    assert run("evaluate", "--instance", EXAMPLE, "--plan", out / "plan.csv", "--scenarios", 12, "--seed", 3) == 0
    evaluated = json.loads(capsys.readouterr().out)
    assert {k: v for k, v in solved.items() if k not in ("mode", "seed")} == evaluated
    inst = load_instance(EXAMPLE)
    assert feasible(load_plan(out / "plan.csv", inst), inst) == []


@pytest.mark.parametrize("mode", ["baseline-det", "baseline-rob"])
def test_solve_baselines(mode, tmp_path):
    assert run("solve", "--instance", EXAMPLE, "--scenarios", 5, "--iterations", 200, "--mode", mode,
               "--out", tmp_path, "--maps", "none") == 0
    assert json.loads((tmp_path / "metrics.json").read_text())["mode"] == mode
    assert not (tmp_path / "search_log.csv").exists()


def test_sweep_fixed_plan_is_non_increasing(tmp_path):
    out = tmp_path / "curve.csv"
    grid = ",".join(f"{k / 100:g}" for k in range(21))
    assert run("sweep", "--instance", EXAMPLE, "--scenarios", 15, "--iterations", 300, "--rho-grid", grid,
               "--out", out) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["rho", "worst_case_profit"] and len(rows) == 22
    values = [float(v) for _, v in rows[1:]]
    assert all(b <= a + 1e-9 * abs(a) for a, b in zip(values, values[1:]))


def test_gen_case_study_twice_is_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "new" / "dir" / "b.json"
    assert run("gen-case-study", "--seed", 1, "--out", a) == 0
    assert run("gen-case-study", "--seed", 1, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert validate_instance(load_instance(a)) == []


def test_oracle_command_and_guard(tmp_path):
    doc = write_doc(tmp_path / "tiny.json", tiny_doc())
    assert run("oracle", "--instance", doc, "--scenarios", 3, "--out", tmp_path / "o") == 0
    assert json.loads((tmp_path / "o" / "metrics.json").read_text())["mode"] == "oracle"
    assert run("oracle", "--instance", EXAMPLE, "--out", tmp_path / "big") == 1
    assert not (tmp_path / "big" / "metrics.json").exists()


def test_missing_input_exits_one(tmp_path, capsys):
    assert run("evaluate", "--instance", tmp_path / "nope.json", "--plan", tmp_path / "p.csv") == 1
    assert "no such file" in capsys.readouterr().err


def test_invalid_document_exits_one(tmp_path, capsys):
    doc = tiny_doc()
    del doc["horizon"]
    assert run("solve", "--instance", write_doc(tmp_path / "d.json", doc), "--out", tmp_path / "o") == 1
    assert "horizon" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_bad_rho_grid_exits_non_zero():
    with pytest.raises(SystemExit) as exc:
        run("sweep", "--instance", EXAMPLE, "--rho-grid", "0,abc")
    assert exc.value.code != 0


def test_unknown_flag_prints_usage_and_exits_two():
    proc = subprocess.run([sys.executable, "-m", "mlrcpf.cli", "solve", "--bogus"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage:" in proc.stderr


def test_console_script_runs_across_processes(tmp_path):
    """Separate interpreters (different string-hash seeds) must write the same bytes."""
    outs = []
    for k, hashseed in enumerate(("1", "2")):
        out = tmp_path / f"r{k}"
        cmd = [sys.executable, "-m", "mlrcpf.cli", "solve", "--instance", str(EXAMPLE), "--scenarios", "6",
               "--iterations", "200", "--out", str(out), "--maps", "ends"]
        proc = subprocess.run(cmd, capture_output=True, text=True, env={"PYTHONHASHSEED": hashseed, "PATH": ""})
        assert proc.returncode == 0, proc.stderr
        outs.append(out)
    for name in ("plan.csv", "plan.states.json", "metrics.json", "maps/period-06.svg", "search_log.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name
