import numpy as np
import pytest

from campusplan.analysis import solve_problem
from campusplan.model import VarKey
from campusplan.solve import AuditError, audit

from conftest import small_problem


@pytest.fixture(scope="module")
def no_storage_run():
    # no storage and no emission cap: grid purchases at the dark first
    # sub-period equal demand exactly
    return solve_problem(small_problem(storage=False, emission_final=None), gap=0.0)


def test_optimal_solution_passes(solved_small):
    rep = solved_small.report
    assert rep.ok
    assert rep.max_relative <= 1e-6
    assert rep.families["demand"].checked > 0
    assert rep.families["caps"].checked > 0


def test_halving_grid_purchases_gives_the_induced_shortfall(no_storage_run):
    run = no_storage_run
    p, cat = run.problem, run.built.catalog
    x = run.solution.x.copy()
    expected = []
    for node in p.tree:
        if node.id == p.tree.root_id:
            continue
        for t in node.periods:
            j = cat[VarKey("g", t=t, q=0, n=node.id)]
            assert x[j] == pytest.approx(p.data.demand[t][0])
            x[j] /= 2
            expected.append(p.data.demand[t][0] / 2)
    rep = audit(x, p, cat)
    fam = rep.families["demand"]
    assert fam.violations == len(expected) == 7
    assert fam.total_abs == pytest.approx(sum(expected), rel=1e-9)
    assert fam.max_abs == pytest.approx(max(expected), rel=1e-9)
    assert not rep.ok
    # nothing else is disturbed
    assert all(f.violations == 0 for k, f in rep.families.items() if k != "demand")


def test_fractional_install_is_flagged(no_storage_run):
    run = no_storage_run
    cat = run.built.catalog
    x = run.solution.x.copy()
    j = cat[VarKey("vplus", "solar", "S1", 1, None, None, 1)]
    x[j] += 0.5
    rep = audit(x, run.problem, cat)
    assert rep.families["integrality"].violations == 1
    assert rep.families["balance"].violations > 0


def test_budget_overrun_is_measured(no_storage_run):
    run = no_storage_run
    p, cat = run.problem, run.built.catalog
    x = run.solution.x.copy()
    j = cat[VarKey("vplus", "solar", "S2", 1, None, None, 1)]
    x[j] += 10
    rep = audit(x, p, cat)
    spent = sum(
        p.coefficients.install_cost("solar", v, 1, 1) * x[cat[VarKey("vplus", "solar", v, 1, None, None, 1)]]
        for v in ("S1", "S2")
    )
    assert rep.families["budget"].max_abs == pytest.approx(spent - 400.0)


def test_audit_accepts_name_mapping_and_rejects_missing(no_storage_run):
    run = no_storage_run
    cat = run.built.catalog
    values = dict(zip(cat.names, run.solution.x))
    assert audit(values, run.problem, cat).ok
    values.pop(cat.names[0])
    with pytest.raises(AuditError, match="missing"):
        audit(values, run.problem, cat)
    with pytest.raises(AuditError):
        audit(np.zeros(3), run.problem, cat)


def test_summary_is_json_ready(solved_small):
    doc = solved_small.report.summary()
    assert doc["ok"] is True
    assert set(doc["families"]) >= {"demand", "storage", "budget", "emission"}
