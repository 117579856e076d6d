import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from campusplan.domain import DomainError, Horizon, VersionSpec
from campusplan.profiles import (
    SYNTHETIC_SHAPES,
    Coefficients,
    OutOfWindowError,
    aggregate,
    capacity_factor_profile,
    check_annual_generation,
    degradation_factor,
    load_demand_csv,
    load_profiles_csv,
    shear_extrapolate,
    synthetic_shape,
)

from conftest import small_problem


def test_degradation_modes():
    assert degradation_factor(0.01, 0) == 1.0
    assert degradation_factor(0.01, 3) == pytest.approx(0.99**3)
    assert degradation_factor(0.01, 3, "linear") == pytest.approx(0.97)
    assert degradation_factor(0.5, 5, "linear") == 0.0
    with pytest.raises(OutOfWindowError):
        degradation_factor(0.01, -1)
    with pytest.raises(ValueError):
        degradation_factor(0.01, 1, "cubic")


def test_generation_uses_install_node_state_and_age():
    p = small_problem()
    co = p.coefficients
    tree = p.tree
    # a leaf on the fast solar branch at stage 3
    leaf = next(n for n in tree.leaves() if tree.node(n).labels["solar"] == "f" and tree.node(tree.node(n).parent).labels["solar"] == "f")
    mid = tree.node(leaf).parent
    eff_mid = tree.node(mid).state["solar"].efficiency
    ver = p.tech("solar").version("S1")
    # installed at t=2 (owned by the stage-2 node), operating in t=3
    g = co.generation("solar", "S1", 2, 3, leaf)
    assert np.allclose(g, ver.profile * eff_mid * 0.99)
    assert eff_mid == pytest.approx(1.15)


def test_costs_follow_install_state():
    p = small_problem()
    co = p.coefficients
    leaf = p.tree.leaves()[-1]
    assert co.install_cost("solar", "S2", 3, leaf) == pytest.approx(90.0 * 0.7**2)
    assert co.install_cost("battery", "B1", 3, leaf) == pytest.approx(6.0)
    assert co.om_cost("solar", "S1", 1, 3, leaf) == pytest.approx(0.2 * 2.0)


def test_salvage_depreciates_linearly():
    p = small_problem()
    co = p.coefficients
    n = p.tree.leaves()[0]
    cost = co.install_cost("solar", "S1", 1, n)
    assert co.salvage_value("solar", "S1", 1, 1, n) == pytest.approx(0.2 * cost)
    assert co.salvage_value("solar", "S1", 1, 3, n) == pytest.approx(0.2 * cost * (1 - 2 / 10))


def test_window_violation_raises():
    p = small_problem()
    with pytest.raises(OutOfWindowError):
        p.coefficients.generation("solar", "S1", 3, 2, p.tree.leaves()[0])


def test_storage_spatial_scales_with_efficiency_state():
    p = small_problem()
    co = Coefficients(p.tree, p.techs, p.data)
    assert co.spatial("solar", "S2", 1, 1) == pytest.approx(2.2)
    assert co.storage_capacity("battery", "B1", 1, 2, 2) == pytest.approx(1.0)


def test_coefficients_reject_wrong_profile_length():
    p = small_problem()
    short = p.techs[0].__class__(
        "solar", "generation", (VersionSpec("S1", 1.0, 1.0, profile=[1.0, 2.0]),)
    )
    with pytest.raises(DomainError):
        Coefficients(p.tree, (short,), p.data)


def test_aggregate_sums_blocks():
    x = np.arange(12.0)
    assert np.array_equal(aggregate(x, 3), [3.0, 12.0, 21.0, 30.0])
    assert np.array_equal(aggregate(np.vstack([x, x]), 6), [[15.0, 51.0]] * 2)
    with pytest.raises(ValueError):
        aggregate(x, 5)
    with pytest.raises(ValueError):
        aggregate(x, 0)


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(float, st.sampled_from([4, 8, 12, 24]), elements=st.floats(0, 1e3)), st.sampled_from([1, 2, 4]))
def test_aggregate_preserves_totals(x, block):
    out = aggregate(x, block)
    assert out.shape == (len(x) // block,)
    assert out.sum() == pytest.approx(x.sum(), rel=1e-12, abs=1e-9)


def test_shear_extrapolation():
    assert shear_extrapolate(5.0, 10.0, 80.0, 1 / 7) == pytest.approx(5.0 * 8 ** (1 / 7))
    with pytest.raises(DomainError):
        shear_extrapolate(5.0, 0.0, 80.0, 0.14)


def test_check_annual_generation():
    v = VersionSpec("a", 1.0, 1.0, profile=[500.0, 500.0], annual_generation=1000.2)
    assert check_annual_generation(v) == pytest.approx(2e-4, rel=1e-3)
    with pytest.raises(DomainError):
        check_annual_generation(VersionSpec("a", 1.0, 1.0, profile=[1.0], annual_generation=2.0))


def test_capacity_factor_profile_scales_total():
    prof = capacity_factor_profile([0, 1, 3], 50.0, 0.2, 8760)
    assert prof.sum() == pytest.approx(50 * 0.2 * 8760)
    assert prof[0] == 0.0


@pytest.mark.parametrize("kind", SYNTHETIC_SHAPES)
def test_synthetic_shapes_are_deterministic_and_nonnegative(kind):
    a = synthetic_shape(kind, 52, 168, seed=1)
    b = synthetic_shape(kind, 52, 168, seed=1)
    assert np.array_equal(a, b)
    assert a.shape == (52,) and np.all(a >= 0) and a.sum() > 0


def test_bihourly_solar_is_dark_at_night():
    s = synthetic_shape("solar", 4368, 2)
    # first day: sub-periods 0..11 cover 00:00-24:00
    assert s[0] == 0.0 and s[6] > 0.0


def test_csv_loaders_fold_finer_data(tmp_path):
    h = Horizon(1, 1, 2)
    d = tmp_path / "d.csv"
    d.write_text("kwh\n1\n2\n3\n4\n")
    assert np.array_equal(load_demand_csv(d, h), [3.0, 7.0])
    p = tmp_path / "p.csv"
    p.write_text("A, B\n1,0\n2,1\n")
    prof = load_profiles_csv(p, h)
    assert set(prof) == {"A", "B"}
    assert np.array_equal(prof["B"], [0.0, 1.0])
    d.write_text("kwh\n1\n2\n3\n")
    with pytest.raises(DomainError):
        load_demand_csv(d, h)
    d.write_text("kwh\n1\n-2\n")
    with pytest.raises(DomainError):
        load_demand_csv(d, h)
