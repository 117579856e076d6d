"""Per-technology advancement trees and their joint scenario tree."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Sequence

from .domain import (
    DomainError,
    Horizon,
    ScenarioNode,
    ScenarioTree,
    TechnologySpec,
    TechState,
)

PATH_SEPARATOR = "×"


@dataclass(frozen=True)
class TechTreeNode:
    index: int
    stage: int
    parent: int | None
    state: TechState
    # conditional probability of the branch entering this node
    branch_probability: float
    label: str
    children: tuple[int, ...] = ()


@dataclass(frozen=True)
class TechTree:
    """Advancement lattice of one technology over decision stages ``1..stages``.

    The stage-1 node carries the baseline state; one branch is applied at
    every later stage transition.
    """

    tech: str
    stages: int
    nodes: tuple[TechTreeNode, ...]
    branching: tuple[int, ...]

    @property
    def first(self) -> TechTreeNode:
        return self.nodes[0]

    def stage_nodes(self, stage: int) -> list[TechTreeNode]:
        return [n for n in self.nodes if n.stage == stage]

    def children(self, index: int) -> list[TechTreeNode]:
        return [self.nodes[i] for i in self.nodes[index].children]

    @property
    def multi_branch(self) -> bool:
        return any(b > 1 for b in self.branching)


def build_tech_tree(spec: TechnologySpec, stages: int) -> TechTree:
    """Enumerate the advancement lattice of ``spec`` over ``stages`` decision stages.

    Stage ``s`` holds ``prod(branches per transition)`` nodes; states are
    products of branch multipliers along the path from the stage-1 node.
    """
    if stages < 1:
        raise DomainError("stages must be >= 1")
    groups = [spec.branches_at(k) for k in range(stages - 1)]
    if any(len(g) == 0 for g in groups):
        raise ValueError(f"{spec.name}: empty branch list")
    nodes: list[dict] = [
        dict(index=0, stage=1, parent=None, state=TechState(), branch_probability=1.0, label="", children=[])
    ]
    frontier = [0]
    for k, group in enumerate(groups):
        nxt = []
        for parent in frontier:
            pstate = nodes[parent]["state"]
            for b in group:
                idx = len(nodes)
                nodes.append(
                    dict(
                        index=idx,
                        stage=k + 2,
                        parent=parent,
                        state=TechState(
                            pstate.cost * b.cost_multiplier,
                            pstate.efficiency * b.efficiency_multiplier,
                        ),
                        branch_probability=b.probability,
                        label=b.label,
                        children=[],
                    )
                )
                nodes[parent]["children"].append(idx)
                nxt.append(idx)
        frontier = nxt
    frozen = tuple(TechTreeNode(**{**n, "children": tuple(n["children"])}) for n in nodes)
    return TechTree(spec.name, stages, frozen, tuple(len(g) for g in groups))


def combine(trees: Sequence[TechTree], horizon: Horizon) -> ScenarioTree:
    """Joint scenario tree as the stage-wise Cartesian product of ``trees``.

    Node 0 is the stage-0 root, node 1 the single stage-1 node; later ids
    follow breadth-first order with the first tree varying slowest. Node
    probabilities are products of the branch probabilities along the path.
    """
    if not trees:
        raise ValueError("at least one technology tree is required")
    if len({t.tech for t in trees}) != len(trees):
        raise ValueError("duplicate technology trees")
    for t in trees:
        if t.stages != horizon.stages:
            raise ValueError(f"tree {t.tech} has {t.stages} stages, horizon has {horizon.stages}")

    names = [t.tech for t in trees]
    baseline = {name: TechState() for name in names}
    nodes = [ScenarioNode(0, 0, None, 1.0, horizon.stage_periods(0), baseline, {})]
    # each joint node is a tuple of per-tree node indices
    combos = {1: tuple(t.first.index for t in trees)}
    nodes.append(
        ScenarioNode(
            1,
            1,
            0,
            1.0,
            horizon.stage_periods(1),
            {name: tree.first.state for name, tree in zip(names, trees)},
            {},
        )
    )
    frontier = [1]
    next_id = 2
    for stage in range(2, horizon.stages + 1):
        nxt = []
        for nid in frontier:
            parent = nodes[nid]
            child_lists = [tree.children(i) for tree, i in zip(trees, combos[nid])]
            for combo in itertools.product(*child_lists):
                prob = parent.probability
                for c in combo:
                    prob *= c.branch_probability
                nodes.append(
                    ScenarioNode(
                        next_id,
                        stage,
                        nid,
                        prob,
                        horizon.stage_periods(stage),
                        {name: c.state for name, c in zip(names, combo)},
                        {name: c.label for name, c in zip(names, combo)},
                    )
                )
                combos[next_id] = tuple(c.index for c in combo)
                nxt.append(next_id)
                next_id += 1
        frontier = nxt
    return ScenarioTree(nodes, horizon, tuple(t.tech for t in trees if t.multi_branch))


def build_scenario_tree(techs: Sequence[TechnologySpec], horizon: Horizon) -> ScenarioTree:
    return combine([build_tech_tree(spec, horizon.stages) for spec in techs], horizon)


@dataclass(frozen=True)
class ScenarioPath:
    name: str
    leaf: int
    nodes: tuple[int, ...]
    probability: float
    label: str


def path_label(tree: ScenarioTree, n: int, techs: Sequence[str] | None = None) -> str:
    """Branch letters per technology along the path to ``n``, joined by ``×``.

    Only technologies with more than one branch appear, e.g. ``"ss×fs"`` is
    slow-slow for the first such technology and fast-slow for the second.
    """
    if techs is None:
        techs = tree.label_techs
    path = tree.ancestor_path(n)
    parts = []
    for tech in techs:
        parts.append("".join(tree.node(m).labels.get(tech, "") for m in path))
    return PATH_SEPARATOR.join(p for p in parts if p)


def scenario_paths(tree: ScenarioTree) -> list[ScenarioPath]:
    """One root-to-leaf path per leaf, named ``S1, S2, ...`` in node-id order."""
    out = []
    for i, leaf in enumerate(tree.leaves(), start=1):
        out.append(
            ScenarioPath(
                name=f"S{i}",
                leaf=leaf,
                nodes=tuple(tree.ancestor_path(leaf)),
                probability=tree.prob(leaf),
                label=path_label(tree, leaf),
            )
        )
    return out


def tree_to_json(tree: ScenarioTree) -> str:
    doc = {
        "label_techs": list(tree.label_techs),
        "horizon": {
            "stages": tree.horizon.stages,
            "periods_per_stage": tree.horizon.periods_per_stage,
            "subperiods_per_period": tree.horizon.subperiods_per_period,
            "subperiod_hours": tree.horizon.subperiod_hours,
        },
        "nodes": [
            {
                "id": node.id,
                "stage": node.stage,
                "parent": node.parent,
                "probability": node.probability,
                "periods": [node.periods.start, node.periods.stop - 1],
                "state": {k: {"cost": s.cost, "efficiency": s.efficiency} for k, s in sorted(node.state.items())},
                "labels": dict(sorted(node.labels.items())),
            }
            for node in tree
        ],
    }
    return json.dumps(doc, indent=2)


def tree_from_json(text: str) -> ScenarioTree:
    doc = json.loads(text)
    horizon = Horizon(**doc["horizon"])
    nodes = [
        ScenarioNode(
            d["id"],
            d["stage"],
            d["parent"],
            d["probability"],
            range(d["periods"][0], d["periods"][1] + 1),
            {k: TechState(v["cost"], v["efficiency"]) for k, v in d["state"].items()},
            d.get("labels", {}),
        )
        for d in doc["nodes"]
    ]
    return ScenarioTree(nodes, horizon, doc.get("label_techs"))
