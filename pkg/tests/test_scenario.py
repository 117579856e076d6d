import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from campusplan.domain import GENERATION, STORAGE, Branch, DomainError, Horizon, TechnologySpec, VersionSpec
from campusplan.scenario import (
    PATH_SEPARATOR,
    build_scenario_tree,
    build_tech_tree,
    combine,
    path_label,
    scenario_paths,
    tree_from_json,
    tree_to_json,
)


def _gen(name, branches, Q=2):
    return TechnologySpec(name, GENERATION, (VersionSpec("a", 1.0, 1.0, profile=np.ones(Q)),), branches=branches)


SOLAR = (Branch(0.856216, 1.055695, 1 / 3, "s"), Branch(0.551027, 1.132768, 2 / 3, "f"))
BATTERY = (Branch(0.857143, 1.05, 0.4, "s"), Branch(0.714286, 1.125, 0.6, "f"))


def _three_tech_tree():
    techs = [
        _gen("solar", SOLAR),
        _gen("wind", (Branch(0.8149, 1.0, 1.0),)),
        TechnologySpec("battery", STORAGE, (VersionSpec("b", 1.0, 1.0, charge_efficiency=0.9),), branches=BATTERY),
    ]
    return build_scenario_tree(techs, Horizon(3, 5, 2))


def test_three_technologies_two_branches_give_1_4_16():
    tree = _three_tech_tree()
    assert [len(tree.stage_nodes(s)) for s in (1, 2, 3)] == [1, 4, 16]
    assert sum(tree.prob(n) for n in tree.leaves()) == pytest.approx(1.0, abs=1e-9)


def test_leaf_probability_is_product_of_branches():
    tree = _three_tech_tree()
    probs = {"s": (1 / 3, 0.4), "f": (2 / 3, 0.6)}
    for leaf in tree.leaves():
        node_ids = tree.ancestor_path(leaf)[2:]
        expected = 1.0
        for m in node_ids:
            labels = tree.node(m).labels
            expected *= probs[labels["solar"]][0] * probs[labels["battery"]][1]
        assert tree.prob(leaf) == pytest.approx(expected, rel=1e-12)


def test_states_compound_along_path():
    tree = _three_tech_tree()
    last = tree.leaves()[-1]  # fast-fast for both technologies
    state = tree.node(last).state
    assert state["solar"].cost == pytest.approx(0.551027**2)
    assert state["battery"].efficiency == pytest.approx(1.125**2)
    assert state["wind"].cost == pytest.approx(0.8149**2)


def test_children_enumerate_first_tree_slowest():
    tree = _three_tech_tree()
    labels = [path_label(tree, n) for n in tree.stage_nodes(2)]
    assert labels == [f"s{PATH_SEPARATOR}s", f"s{PATH_SEPARATOR}f", f"f{PATH_SEPARATOR}s", f"f{PATH_SEPARATOR}f"]


def test_path_names_and_labels():
    tree = _three_tech_tree()
    paths = scenario_paths(tree)
    assert [p.name for p in paths[:3]] == ["S1", "S2", "S3"]
    assert paths[0].label == "ss×ss"
    assert paths[1].label == "ss×sf"
    assert paths[-1].label == "ff×ff"
    assert len({p.label for p in paths}) == 16
    assert all(p.nodes[0] == 0 and p.nodes[1] == 1 for p in paths)


def test_single_branch_technologies_give_a_chain():
    spec = _gen("wind", (Branch(0.8149, 1.0, 1.0),))
    tree = build_scenario_tree([spec], Horizon(3, 1, 2))
    assert len(tree) == 4
    costs = [tree.node(n).state["wind"].cost for n in (1, 2, 3)]
    assert costs == pytest.approx([1.0, 0.8149, 0.8149**2])
    assert path_label(tree, 3) == ""


def test_stage_specific_branches():
    spec = TechnologySpec(
        "x",
        GENERATION,
        (VersionSpec("a", 1.0, 1.0, profile=[1.0]),),
        stage_branches=((Branch(0.9, 1, 0.5, "s"), Branch(0.8, 1, 0.5, "f")), (Branch(1.0, 1, 1.0, "m"),)),
    )
    tt = build_tech_tree(spec, 3)
    assert tt.branching == (2, 1)
    assert len(tt.stage_nodes(3)) == 2


def test_combine_rejects_mismatched_stages():
    spec = _gen("a", SOLAR)
    with pytest.raises(ValueError):
        combine([build_tech_tree(spec, 2)], Horizon(3, 1, 2))
    with pytest.raises(ValueError):
        combine([], Horizon(3, 1, 2))
    with pytest.raises(DomainError):
        build_tech_tree(spec, 0)


def test_json_roundtrip_preserves_tree():
    tree = _three_tech_tree()
    again = tree_from_json(tree_to_json(tree))
    assert tree_to_json(again) == tree_to_json(tree)
    assert [path_label(again, n) for n in again.leaves()] == [path_label(tree, n) for n in tree.leaves()]


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.lists(st.floats(0.05, 1.0), min_size=1, max_size=3), min_size=1, max_size=3),
    st.integers(1, 3),
)
def test_tree_probabilities_and_counts(weight_lists, stages):
    techs = []
    for i, weights in enumerate(weight_lists):
        total = sum(weights)
        branches = tuple(Branch(1.0, 1.0, w / total, f"b{k}") for k, w in enumerate(weights))
        techs.append(_gen(f"t{i}", branches, Q=1))
    tree = build_scenario_tree(techs, Horizon(stages, 1, 1))
    width = int(np.prod([len(w) for w in weight_lists]))
    for s in range(1, stages + 1):
        nodes = tree.stage_nodes(s)
        assert len(nodes) == width ** (s - 1)
        assert sum(tree.prob(n) for n in nodes) == pytest.approx(1.0, abs=1e-9)
    for node in tree:
        kids = tree.children(node.id)
        if kids:
            assert sum(tree.prob(c) for c in kids) == pytest.approx(tree.prob(node.id), rel=1e-9)
