"""Bilevel abstract planning graph: symbolic breadth-first top level, simulated
bottom-level consolidation, and a path-dependent shortest-path search.

The top level is ordinary STRIPS reachability over grounded operators. The
bottom level replays each edge with the simulator from every concrete state
recorded at its source node, because execution cost (and feasibility) depends
on the concrete state a path arrives with. Consolidation is a cost-ordered
label expansion: a label is one (node, concrete state) pair reached by one
validated path, and each node keeps at most ``path_cap`` labels per kind
(scripted-only and shortcut-bearing are pooled separately, so adding shortcut
edges can never evict a pure path and plan costs are monotone in the edge
set).
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

from slap.env import Action, LiftedOperator
from slap.structs import AbstractState, Atom, Goal, Object, State, \
    goal_satisfied

DEFAULT_PATH_CAP = 8


class UnsolvableTaskError(Exception):
    """No goal abstract state is reachable."""


class NoPlanError(Exception):
    """The consolidated graph has no validated path to a goal node."""


@dataclass(frozen=True)
class GroundedOperator:
    """A lifted operator bound to concrete objects."""

    operator: LiftedOperator
    binding: tuple[Object, ...]
    pre: frozenset[Atom]
    eff_add: frozenset[Atom]
    eff_del: frozenset[Atom]

    @property
    def name(self) -> str:
        args = ",".join(o.name for o in self.binding)
        return f"{self.operator.name}({args})"

    def successor(self, s: AbstractState) -> AbstractState:
        return AbstractState((s.atom_set() - self.eff_del) | self.eff_add)


def ground_all(operators: Sequence[LiftedOperator],
               objects: Sequence[Object]) -> list[GroundedOperator]:
    """Exhaustive typed grounding in deterministic order, no duplicates."""
    by_type: dict[str, list[Object]] = {}
    for obj in objects:
        by_type.setdefault(obj.otype, []).append(obj)
    grounded = []
    for op in operators:
        combos: list[tuple[Object, ...]] = [()]
        for _, otype in op.var:
            combos = [
                c + (o,) for c in combos for o in by_type.get(otype, [])
                if o not in c
            ]
        for binding in combos:
            grounded.append(
                GroundedOperator(
                    operator=op,
                    binding=binding,
                    pre=op.ground_atoms(op.pre, binding),
                    eff_add=op.ground_atoms(op.eff_add, binding),
                    eff_del=op.ground_atoms(op.eff_del, binding),
                ))
    return grounded


@dataclass
class Edge:
    """A directed top-level edge labeled by a grounded operator or a learned
    shortcut."""

    edge_id: int
    source: AbstractState
    target: AbstractState
    label: object
    is_shortcut: bool = False
    succeeded: bool = False
    # pid of source label -> (segment cost, child pid); filled during
    # consolidation for accepted children.
    executions: dict[int, tuple[int, int]] = field(default_factory=dict)

    @property
    def name(self) -> str:
        return getattr(self.label, "name", str(self.label))


@dataclass
class NodeRecord:
    """Top-level node annotation: BFS depth plus recorded path labels."""

    depth: int
    pids: list[int] = field(default_factory=list)


@dataclass
class PathRecord:
    """One validated path label: the concrete state a path arrives with."""

    pid: int
    node: AbstractState
    state: State
    cost: int
    parent: int | None
    edge_id: int | None
    actions: tuple[Action, ...]
    uses_shortcut: bool


@dataclass
class Plan:
    """A root-to-goal sequence of edges with their low-level segments."""

    steps: list[tuple[Edge, tuple[Action, ...]]]
    total_cost: int
    goal_node: AbstractState

    @property
    def actions(self) -> list[Action]:
        return [a for _, seg in self.steps for a in seg]

    @property
    def shortcuts_used(self) -> int:
        return sum(1 for e, _ in self.steps if e.is_shortcut)


class PlanningGraph:
    """Bilevel graph over abstract states."""

    def __init__(self, root: AbstractState) -> None:
        self.root = root
        self.nodes: dict[AbstractState, NodeRecord] = {root: NodeRecord(0)}
        self.edges: dict[int, Edge] = {}
        self.edges_from: dict[AbstractState, list[int]] = {root: []}
        self.goal_nodes: set[AbstractState] = set()
        self.paths: dict[int, PathRecord] = {}
        self.metadata: dict = {}
        self._next_edge_id = 0

    def add_node(self, s: AbstractState, depth: int) -> None:
        assert s not in self.nodes
        self.nodes[s] = NodeRecord(depth)
        self.edges_from[s] = []

    def add_edge(self, source: AbstractState, target: AbstractState,
                 label: object, is_shortcut: bool = False) -> Edge:
        assert source in self.nodes and target in self.nodes
        edge = Edge(self._next_edge_id, source, target, label, is_shortcut)
        self._next_edge_id += 1
        self.edges[edge.edge_id] = edge
        self.edges_from[source].append(edge.edge_id)
        return edge

    def has_edge(self, source: AbstractState, target: AbstractState) -> bool:
        return any(self.edges[i].target == target
                   for i in self.edges_from.get(source, ()))

    def depth(self, s: AbstractState) -> int:
        return self.nodes[s].depth

    def node_states(self, s: AbstractState) -> list[State]:
        """Concrete states recorded at a node, in acceptance order."""
        return [self.paths[p].state for p in self.nodes[s].pids]

    def iter_edges(self) -> list[Edge]:
        return [self.edges[i] for i in sorted(self.edges)]


def build_top_level(x0: State, goal: Goal,
                    grounded: Sequence[GroundedOperator],
                    abstract_fn: Callable[[State], AbstractState]
                    ) -> PlanningGraph:
    """Symbolic BFS from abstract(x0), stopping after the first depth that
    contains at least one goal-satisfying node (all goal nodes at that depth
    are kept)."""
    s0 = abstract_fn(x0)
    graph = PlanningGraph(s0)
    if goal_satisfied(s0, goal):
        graph.goal_nodes.add(s0)
        return graph
    frontier = [s0]
    depth = 0
    while frontier:
        depth += 1
        next_frontier: list[AbstractState] = []
        found_goal = False
        for s in frontier:
            for g in grounded:
                if not g.pre <= s.atom_set():
                    continue
                succ = g.successor(s)
                if succ == s:
                    continue
                if succ not in graph.nodes:
                    graph.add_node(succ, depth)
                    next_frontier.append(succ)
                    if goal_satisfied(succ, goal):
                        graph.goal_nodes.add(succ)
                        found_goal = True
                graph.add_edge(s, succ, g)
        if found_goal:
            return graph
        frontier = next_frontier
    raise UnsolvableTaskError("symbolic search exhausted without a goal")


# An edge executor runs one edge's policy from one concrete state and returns
# (actions, final_state, success).
EdgeExecutor = Callable[[Edge, State],
                        tuple[tuple[Action, ...], State, bool]]


def consolidate_bottom_level(graph: PlanningGraph, x0: State,
                             executor: EdgeExecutor,
                             path_cap: int | None = DEFAULT_PATH_CAP
                             ) -> PlanningGraph:
    """Validate edges by simulation from every recorded concrete state.

    Labels are settled in accumulated-cost order so each node keeps its
    ``path_cap`` cheapest incoming paths (per pool). Edges that never execute
    successfully and nodes left without any accepted label are removed.
    """
    counter = itertools.count()
    heap: list = []
    heapq.heappush(heap, (0, next(counter), graph.root, x0, None, None,
                          (), False))
    accepted_scripted: dict[AbstractState, int] = {}
    accepted_shortcut: dict[AbstractState, int] = {}
    next_pid = 0
    while heap:
        cost, _, node, state, parent, edge_id, actions, via_sc = \
            heapq.heappop(heap)
        pool = accepted_shortcut if via_sc else accepted_scripted
        if path_cap is not None and pool.get(node, 0) >= path_cap:
            continue
        pool[node] = pool.get(node, 0) + 1
        pid = next_pid
        next_pid += 1
        graph.paths[pid] = PathRecord(pid, node, state, cost, parent,
                                      edge_id, actions, via_sc)
        graph.nodes[node].pids.append(pid)
        if parent is not None:
            graph.edges[edge_id].executions[parent] = (len(actions), pid)
        for eid in graph.edges_from[node]:
            edge = graph.edges[eid]
            seg, final, ok = executor(edge, state)
            if not ok:
                continue
            edge.succeeded = True
            heapq.heappush(heap,
                           (cost + len(seg), next(counter), edge.target,
                            final, pid, eid, seg, via_sc or edge.is_shortcut))

    # Prune edges that never executed successfully, then unreachable nodes.
    reachable = {s for s, rec in graph.nodes.items() if rec.pids}
    assert graph.root in reachable
    graph.edges = {
        i: e for i, e in graph.edges.items()
        if e.succeeded and e.source in reachable and e.target in reachable
    }
    graph.nodes = {s: rec for s, rec in graph.nodes.items() if s in reachable}
    graph.edges_from = {
        s: [i for i in ids if i in graph.edges]
        for s, ids in graph.edges_from.items() if s in reachable
    }
    graph.goal_nodes = {
        s for s in graph.goal_nodes
        if s in graph.nodes and graph.nodes[s].pids
    }
    if not graph.goal_nodes:
        raise UnsolvableTaskError(
            "all goal nodes are unreachable after consolidation")
    graph.metadata["path_cap"] = path_cap
    return graph


def shortest_plan(graph: PlanningGraph) -> Plan:
    """Minimum-total-cost plan from the root to any goal node.

    Costs are per (incoming concrete state, edge) as recorded during
    consolidation; ties break on label acceptance order, which follows edge
    insertion order.
    """
    best: PathRecord | None = None
    for goal_node in graph.goal_nodes:
        if goal_node not in graph.nodes:
            continue
        for pid in graph.nodes[goal_node].pids:
            rec = graph.paths[pid]
            if best is None or (rec.cost, rec.pid) < (best.cost, best.pid):
                best = rec
    if best is None:
        raise NoPlanError("no validated path reaches a goal node")
    steps: list[tuple[Edge, tuple[Action, ...]]] = []
    rec = best
    while rec.parent is not None:
        steps.append((graph.edges[rec.edge_id], rec.actions))
        rec = graph.paths[rec.parent]
    steps.reverse()
    plan = Plan(steps, best.cost, best.node)
    assert plan.total_cost == sum(len(seg) for _, seg in plan.steps)
    return plan


def scripted_subplan(graph: PlanningGraph) -> Plan:
    """Minimum-cost plan restricted to scripted-only paths (no shortcuts);
    equivalent to planning on the same graph minus shortcut edges."""
    best: PathRecord | None = None
    for goal_node in graph.goal_nodes:
        if goal_node not in graph.nodes:
            continue
        for pid in graph.nodes[goal_node].pids:
            rec = graph.paths[pid]
            if rec.uses_shortcut:
                continue
            if best is None or (rec.cost, rec.pid) < (best.cost, best.pid):
                best = rec
    if best is None:
        raise NoPlanError("no scripted path reaches a goal node")
    steps: list[tuple[Edge, tuple[Action, ...]]] = []
    rec = best
    while rec.parent is not None:
        steps.append((graph.edges[rec.edge_id], rec.actions))
        rec = graph.paths[rec.parent]
    steps.reverse()
    return Plan(steps, best.cost, best.node)


def graph_to_json(graph: PlanningGraph) -> str:
    """Dump nodes (atoms, depth), edges (with per-path costs), and metadata."""
    node_ids = {s: i for i, s in enumerate(graph.nodes)}
    doc = {
        "metadata": dict(graph.metadata),
        "root": node_ids[graph.root],
        "goal_nodes": sorted(node_ids[s] for s in graph.goal_nodes
                             if s in node_ids),
        "nodes": [{
            "id": node_ids[s],
            "depth": rec.depth,
            "atoms": [repr(a) for a in s.atoms],
            "n_paths": len(rec.pids),
        } for s, rec in graph.nodes.items()],
        "edges": [{
            "source": node_ids[e.source],
            "target": node_ids[e.target],
            "label": e.name,
            "shortcut": e.is_shortcut,
            "path_costs": {str(pid): cost
                           for pid, (cost, _) in sorted(e.executions.items())},
        } for e in graph.iter_edges()],
    }
    return json.dumps(doc, indent=1)
