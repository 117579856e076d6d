import math

import numpy as np
import pytest

from campusplan.analysis import (
    UnauditedSolutionError,
    aggregation_study,
    decision_tree,
    decompose_costs,
    deterministic_audit,
    deterministic_problem,
    evaluate_plan,
    expected_costs,
    path_reports_csv,
    plan_of,
    run_sensitivity,
    solve_problem,
    supply_mix,
    sweep,
    violation_table_csv,
    violation_tables_csv,
)
from campusplan.domain import GENERATION, Branch, Horizon, InstanceData, TechnologySpec, VersionSpec
from campusplan.model import Problem, VarKey, build
from campusplan.scenario import build_scenario_tree, scenario_paths

from conftest import small_problem


def test_decomposition_reproduces_the_objective(solved_small):
    run = solved_small
    reports = decompose_costs(run.solution, run.problem, run.built.catalog, run.report)
    assert len(reports) == 4
    assert sum(r.probability for r in reports) == pytest.approx(1.0)
    exp = expected_costs(reports)
    assert exp["total"] == pytest.approx(run.solution.objective, rel=1e-9)
    assert exp["installation"] > 0 and exp["grid"] > 0
    csv_text = path_reports_csv(reports)
    assert csv_text.splitlines()[0].startswith("path,label,probability,installation")
    assert len(csv_text.splitlines()) == 5


def test_reports_refuse_unaudited_solutions(solved_small):
    run = solved_small
    with pytest.raises(UnauditedSolutionError):
        decompose_costs(run.solution, run.problem, run.built.catalog, None)


def test_supply_shares_sum_to_one(solved_small):
    run = solved_small
    for path in scenario_paths(run.problem.tree):
        mix = supply_mix(run.solution, run.problem, run.built.catalog, path, run.report)
        total = mix.renewable + mix.storage + mix.grid
        assert np.allclose(total, 1.0)
        assert mix.years.tolist() == [1, 2, 3]
    with pytest.raises(KeyError):
        supply_mix(run.solution, run.problem, run.built.catalog, "S99", run.report)


def test_emission_sweep_is_monotone():
    # a cheap grid makes the final-year cap bind
    p = small_problem(tariff=1.0)
    runs = sweep(p, ["relaxed_emission=0", "relaxed_emission=0.1", "relaxed_emission=0.25", "relaxed_emission=1"], gap=0.0)
    objs = [r.solution.objective for r in runs]
    assert all(r.ok for r in runs)
    assert all(b <= a + 1e-9 for a, b in zip(objs, objs[1:]))
    assert objs[-1] < objs[0]


def test_budget_and_margin_directions():
    p = small_problem()
    base = solve_problem(p, gap=0.0).solution.objective
    rich = solve_problem(p.replace(data=p.data.__class__(**{**p.data.__dict__, "budget": p.data.budget * 3})), gap=0.0)
    assert rich.solution.objective <= base + 1e-9
    margin = solve_problem(p.replace(data=p.data.__class__(**{**p.data.__dict__, "safety_margin": 0.1})), gap=0.0)
    assert margin.solution.objective >= base - 1e-9


def test_sensitivity_rows_keep_order_and_add_up():
    p = small_problem()
    cases = ["none", "price_scale=solar:0.5", "relaxed_emission=1"]
    rows = run_sensitivity(p, cases, gap=0.0)
    assert [r.case for r in rows] == ["base", "price_scale=solar:0.5", "relaxed_emission=1"]
    for r in rows:
        assert r.installation + r.grid + r.om == pytest.approx(r.total, rel=1e-9)
    threaded = run_sensitivity(p, cases, gap=0.0, workers=2)
    assert [r.total for r in threaded] == pytest.approx([r.total for r in rows])
    with pytest.raises(ValueError):
        run_sensitivity(p, ["none", "base"])


def _one_tech(cap: float) -> Problem:
    h = Horizon(1, 1, 4)
    solar = TechnologySpec(
        "solar", GENERATION, (VersionSpec("P", 1.0, 10.0, profile=[0.0, 1.0, 3.0, 0.0]),), lifetime=5
    )
    tree = build_scenario_tree([solar], h)
    data = InstanceData.from_profile(
        h, [2.0, 2.0, 2.0, 2.0], tariff=0.5, budget=[0.0, 100.0], emission_cap=[math.inf, cap], discount_factor=0.9
    )
    return Problem(tree, (solar,), data)


@pytest.mark.parametrize("cap, short", [(3.0, 2.0), (5.0, 0.0), (0.0, 5.0)])
def test_fixed_plan_shortfall_is_analytic(cap, short):
    # one panel leaves deficits 2, 1, 0, 2; the grid may cover ``cap`` of the 5 kWh
    p = _one_tech(cap)
    _, cat = build(p)
    plan = {k: 0.0 for k in cat.keys if k.kind in ("vplus", "vminus")}
    plan[VarKey("vplus", "solar", "P", 1, None, None, 1)] = 1.0
    ops = evaluate_plan(p, plan)
    assert ops.status == "optimal"
    assert ops.violation_energy == pytest.approx(short, abs=1e-9)
    assert ops.violation_cost == pytest.approx(0.5 * short, abs=1e-9)
    assert ops.by_period([1]).get(1, 0.0) == pytest.approx(short, abs=1e-9)


def test_evaluate_plan_rejects_foreign_columns():
    p = _one_tech(3.0)
    with pytest.raises(KeyError):
        evaluate_plan(p, {VarKey("vplus", "wind", "W", 1, None, None, 1): 1.0})


def test_aggregation_block_one_replays_without_violation():
    p = small_problem(stages=2, Q=8)
    rows = aggregation_study(p, [1, 2], gap=0.0)
    assert [r.block for r in rows] == [1, 2]
    assert rows[0].violation_energy == 0.0
    assert rows[0].resolution == "1-hour"
    assert all(r.status in ("optimal", "gap_reached") for r in rows)


def test_deterministic_problem_averages_branches():
    p = small_problem()
    det = deterministic_problem(p)
    assert len(det.tree.leaves()) == 1
    b = det.tech("solar").branches[0]
    assert b.cost_multiplier == pytest.approx(0.8)
    assert b.efficiency_multiplier == pytest.approx(1.075)
    geo = deterministic_problem(p, "geometric").tech("solar").branches[0]
    assert geo.cost_multiplier == pytest.approx(math.sqrt(0.9 * 0.7))
    with pytest.raises(ValueError):
        deterministic_problem(p, "median")


def test_deterministic_audit_tables():
    p = small_problem()
    res = deterministic_audit(p, gap=0.0)
    assert res.mean.demand_total == 0.0 and res.mean.budget_total == 0.0
    assert [v.path for v in res.paths] == ["S1", "S2", "S3", "S4"]
    table = violation_table_csv(res, "demand").splitlines()
    assert table[0].startswith("path,label,probability")
    assert len(table) == 6
    both = violation_tables_csv(res).splitlines()
    assert both[0].startswith("violation,path")
    assert len(both) == 11
    with pytest.raises(ValueError):
        violation_table_csv(res, "area")


def test_decision_tree_document(solved_small):
    run = solved_small
    doc = decision_tree(run.solution, run.problem, run.built.catalog)
    assert [n["id"] for n in doc["nodes"]] == list(range(len(run.problem.tree)))
    leaf = doc["nodes"][-1]
    assert leaf["label"] == "ff"
    solar = leaf["technologies"]["solar"]
    cat = run.built.catalog
    s1 = run.solution.x[cat[VarKey("vplus", "solar", "S1", 3, None, None, leaf["id"])]]
    s2 = run.solution.x[cat[VarKey("vplus", "solar", "S2", 3, None, None, leaf["id"])]]
    assert solar["installed_capacity"]["3"] == pytest.approx(2.0 * s1 + 5.0 * s2)


def test_plan_of_keeps_only_install_decisions(solved_small):
    plan = plan_of(solved_small.solution, solved_small.built.catalog)
    assert {k.kind for k in plan} == {"vplus", "vminus"}
