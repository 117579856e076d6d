import json
import math

import numpy as np
import pytest

from campusplan.config import ConfigError, load_config, parse_horizon, periodic
from campusplan.domain import Horizon, compute_discount

from conftest import CONFIGS


def _write(tmp_path, doc, name="plan.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def tiny_doc():
    return json.loads((CONFIGS / "tiny" / "plan.json").read_text())


def test_tiny_config_loads(tiny_doc):
    cfg = load_config(CONFIGS / "tiny" / "plan.json")
    p = cfg.problem
    assert cfg.name == "tiny"
    assert p.horizon == Horizon(2, 1, 4, 6)
    assert p.data.budget.tolist() == [0.0, 100.0, 100.0]
    assert p.data.emission_cap[2] == 1.5 and math.isinf(p.data.emission_cap[1])
    assert np.array_equal(p.data.demand[1], [2.0, 2.5, 3.0, 2.5])
    assert cfg.solver["gap"] == 0.0


def test_metu_base_uses_clustered_branches_and_fitted_om():
    p = load_config(CONFIGS / "metu_base" / "plan.json").problem
    solar = p.tech("solar")
    assert [b.label for b in solar.branches] == ["s", "f"]
    assert solar.om_annual_multiplier == 0.918
    assert p.data.discount_factor == 0.97
    assert [len(p.tree.stage_nodes(s)) for s in (1, 2, 3)] == [1, 4, 16]


@pytest.mark.parametrize(
    "value, expected",
    [
        (5, [5, 5, 5, 5, 5]),
        ([1, 2, 3, 4], [1, 1, 2, 3, 4]),
        ([9, 1, 2, 3, 4], [9, 1, 2, 3, 4]),
        ({"by_stage": [1, 2]}, [1, 1, 1, 2, 2]),
        ({"default": 3, "periods": {"4": 0}}, [3, 3, 3, 3, 0]),
        ({"by_stage": [1, 2], "period0": 0}, [0, 1, 1, 2, 2]),
        ("inf", [math.inf] * 5),
    ],
)
def test_periodic_forms(value, expected):
    assert periodic(value, Horizon(2, 2, 1), "x").tolist() == expected


def test_periodic_errors():
    h = Horizon(2, 2, 1)
    with pytest.raises(ConfigError):
        periodic([1, 2], h, "x")
    with pytest.raises(ConfigError):
        periodic({"by_stage": [1]}, h, "x")
    with pytest.raises(ConfigError):
        periodic({"default": 1, "periods": {"9": 1}}, h, "x")
    with pytest.raises(ConfigError):
        periodic({"bogus": 1}, h, "x")
    with pytest.raises(ConfigError):
        periodic("lots", h, "x")
    with pytest.raises(ConfigError):
        periodic(None, h, "x")


def test_discount_from_rates(tmp_path, tiny_doc):
    tiny_doc["instance"]["discount_factor"] = {"nominal_rate": 0.1, "inflation": 0.04}
    p = load_config(_write(tmp_path, tiny_doc)).problem
    assert p.data.discount_factor == compute_discount(0.1, 0.04).factor


def test_seed_override_changes_synthetic_wind(tmp_path):
    a = load_config(CONFIGS / "desk" / "plan.json").problem.tech("wind").versions[0].profile
    b = load_config(CONFIGS / "desk" / "plan.json", seed=5).problem.tech("wind").versions[0].profile
    assert a.sum() == pytest.approx(b.sum())
    assert not np.array_equal(a, b)


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d.pop("horizon"), "horizon"),
        (lambda d: d["horizon"].pop("stages"), "stages"),
        (lambda d: d["technologies"][0].update(category="hydro"), "category"),
        (lambda d: d["technologies"][0]["versions"][0].pop("install_cost"), "install_cost"),
        (lambda d: d["technologies"][0]["versions"][0].update(profile=[1.0]), "profile"),
        (lambda d: d["instance"].update(demand=[1.0, 2.0]), "demand"),
        (lambda d: d["instance"].pop("demand"), "demand"),
        (lambda d: d["technologies"][0]["branches"][0].update(probability=0.9), "probabilit"),
        (lambda d: d.update(degradation="cubic"), "degradation"),
    ],
)
def test_config_errors_name_the_problem(tmp_path, tiny_doc, mutate, fragment):
    mutate(tiny_doc)
    path = _write(tmp_path, tiny_doc)
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert fragment in str(info.value)
    assert info.value.source == str(path)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{ nope")
    with pytest.raises(ConfigError, match="line 1"):
        load_config(bad)


def test_sections_may_live_in_separate_files(tmp_path, tiny_doc):
    (tmp_path / "h.json").write_text(json.dumps(tiny_doc["horizon"]))
    tiny_doc["horizon"] = "h.json"
    p = load_config(_write(tmp_path, tiny_doc)).problem
    assert p.horizon.subperiods_per_period == 4


def test_parse_horizon_default_hours():
    assert parse_horizon({"stages": 1, "periods_per_stage": 1, "subperiods_per_period": 2}).subperiod_hours == 1.0
