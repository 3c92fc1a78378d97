"""Scenario enumeration and search over expanded attack trees.

A scenario is a minimal satisfying selection of leaves: exactly one child's
scenario per OR node on included branches, all children per AND/SAND.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Mapping

from .aggregation import MIN_COST, MissingEstimateError, aggregate
from .expansion import ExpandedNode, ExpandedTree, iter_expanded
from .model import GateKind, NodeId

__all__ = [
    "AttackScenario",
    "ScenarioEstimates",
    "ScenarioExplosion",
    "InfeasibleTreeError",
    "DEFAULT_CAP",
    "count_scenarios",
    "enumerate_scenarios",
    "cheapest_attack",
    "most_likely_attack",
    "attacks_within_budget",
    "pareto_frontier",
    "expected_payoff",
    "satisfies",
]

DEFAULT_CAP = 100_000


class ScenarioExplosion(Exception):
    """The scenario set exceeds the enumeration cap; never truncate silently."""

    def __init__(self, count: int | None, cap: int) -> None:
        self.count = count
        self.cap = cap
        if count is None:
            super().__init__(f"scenario set exceeds cap {cap}")
        else:
            super().__init__(f"{count} scenarios exceed cap {cap}")


class InfeasibleTreeError(Exception):
    """A single-scenario query was asked of a tree with no scenarios."""


@dataclass(frozen=True)
class ScenarioEstimates:
    """Per-leaf point values backing scenario metrics.

    cost and probability must cover every leaf of the queried tree; time is
    optional — when absent, scenario times are reported as None.
    """

    cost: Mapping[NodeId, float]
    probability: Mapping[NodeId, float]
    time: Mapping[NodeId, float] | None = None

    def require_complete(self, tree: ExpandedTree) -> None:
        if tree.root is None:
            return
        leaves = [n.id for n in iter_expanded(tree.root) if n.is_leaf]
        for name, table in (("min_cost", self.cost), ("success_prob", self.probability)):
            missing = [leaf for leaf in leaves if leaf not in table]
            if missing:
                raise MissingEstimateError(name, missing)
        if self.time is not None:
            missing = [leaf for leaf in leaves if leaf not in self.time]
            if missing:
                raise MissingEstimateError("min_time", missing)


@dataclass(frozen=True)
class AttackScenario:
    """One attack pathway with its aggregate metrics.

    ordering lists (before, after) precedence pairs between the leaves of
    consecutive stages of each SAND gate on the pathway (the cover relation;
    the full partial order is its transitive closure). time is the critical
    path through that partial order (attackers work in parallel);
    time_serial is the lone-attacker sum. Both are None when the estimate
    set carries no times.
    """

    leaves: tuple[NodeId, ...]
    ordering: tuple[tuple[NodeId, NodeId], ...]
    cost: float
    probability: float
    time: float | None = None
    time_serial: float | None = None

    def sort_key(self) -> tuple:
        return (self.cost, -self.probability, self.leaves)


@dataclass(frozen=True)
class _Partial:
    leaves: tuple[NodeId, ...]  # kept sorted
    ordering: tuple[tuple[NodeId, NodeId], ...]
    cost: float
    probability: float
    time: float | None
    time_serial: float | None

    def finish(self) -> AttackScenario:
        return AttackScenario(self.leaves, tuple(sorted(self.ordering)),
                              self.cost, self.probability, self.time,
                              self.time_serial)


def count_scenarios(tree: ExpandedTree) -> int:
    """Exact scenario count by the product formula (OR sums, AND/SAND multiply)."""
    if tree.root is None:
        return 0
    return _count(tree.root)


def _count(node: ExpandedNode) -> int:
    if node.is_leaf:
        return 1
    if node.gate is GateKind.OR:
        return sum(_count(child) for child in node.children)
    return math.prod(_count(child) for child in node.children)


def _merge(a: tuple[NodeId, ...], b: tuple[NodeId, ...]) -> tuple[NodeId, ...]:
    return tuple(sorted(a + b))


def _scenarios_under(node: ExpandedNode, limit: float, est: ScenarioEstimates,
                     min_cost: Mapping[NodeId, float]) -> Iterator[_Partial]:
    """Yield every scenario of `node` whose cost is ≤ limit.

    Branch-and-bound: each OR alternative and each remaining conjunct is
    bounded below by its min_cost aggregate, so branches that cannot meet
    the limit are never expanded.
    """
    has_time = est.time is not None
    if node.is_leaf:
        cost = est.cost[node.id]
        if cost <= limit:
            t = est.time[node.id] if has_time else None
            yield _Partial((node.id,), (), cost, est.probability[node.id], t, t)
        return
    if node.gate is GateKind.OR:
        for child in node.children:
            if min_cost[child.id] <= limit:
                yield from _scenarios_under(child, limit, est, min_cost)
        return
    children = node.children
    sequential = node.gate is GateKind.SAND
    # rest_min[i] = least possible total cost of children i..end
    rest_min = [0.0] * (len(children) + 1)
    for i in range(len(children) - 1, -1, -1):
        rest_min[i] = rest_min[i + 1] + min_cost[children[i].id]

    def rec(i: int, acc: _Partial, prev_leaves: tuple[NodeId, ...]
            ) -> Iterator[_Partial]:
        if i == len(children):
            yield acc
            return
        if math.isinf(limit) and limit > 0:
            child_limit = limit  # avoid inf − inf when a conjunct costs +inf
        else:
            child_limit = limit - acc.cost - rest_min[i + 1]
        for sub in _scenarios_under(children[i], child_limit, est, min_cost):
            if sequential:
                pairs = acc.ordering + sub.ordering + tuple(
                    (x, y) for x in prev_leaves for y in sub.leaves)
                time = (acc.time + sub.time) if has_time else None
            else:
                pairs = acc.ordering + sub.ordering
                time = max(acc.time, sub.time) if has_time else None
            combined = _Partial(
                _merge(acc.leaves, sub.leaves), pairs,
                acc.cost + sub.cost, acc.probability * sub.probability,
                time,
                (acc.time_serial + sub.time_serial) if has_time else None)
            yield from rec(i + 1, combined, sub.leaves)

    empty = _Partial((), (), 0.0, 1.0, 0.0 if has_time else None,
                     0.0 if has_time else None)
    yield from rec(0, empty, ())


def enumerate_scenarios(tree: ExpandedTree, estimates: ScenarioEstimates,
                        cap: int = DEFAULT_CAP) -> list[AttackScenario]:
    """All scenarios of the tree, or ScenarioExplosion carrying the exact count."""
    if cap <= 0:
        raise ValueError("cap must be positive")
    estimates.require_complete(tree)
    count = count_scenarios(tree)
    if count > cap:
        raise ScenarioExplosion(count, cap)
    if tree.root is None:
        return []
    min_cost = aggregate(tree, MIN_COST, estimates.cost).by_node
    return [p.finish()
            for p in _scenarios_under(tree.root, math.inf, estimates, min_cost)]


def _best(node: ExpandedNode, metric: Mapping[NodeId, float], minimize: bool
          ) -> tuple[float, tuple[NodeId, ...]]:
    """Optimal (metric total, sorted leaf tuple) over the node's scenarios.

    Additive metric; ties resolved toward the lexicographically smallest
    leaf tuple, so the choice is deterministic.
    """
    if node.is_leaf:
        return metric[node.id], (node.id,)
    if node.gate is GateKind.OR:
        candidates = [_best(child, metric, minimize) for child in node.children]
        return min(candidates) if minimize else max(
            candidates, key=lambda c: (c[0], _NegatedTuple(c[1])))
    total = 0.0
    leaves: tuple[NodeId, ...] = ()
    for child in node.children:
        value, sub = _best(child, metric, minimize)
        total += value
        leaves = _merge(leaves, sub)
    return total, leaves


class _NegatedTuple:
    """Orders tuples in reverse, so max() breaks ties toward the smallest."""

    __slots__ = ("value",)

    def __init__(self, value: tuple) -> None:
        self.value = value

    def __lt__(self, other: "_NegatedTuple") -> bool:
        return self.value > other.value

    def __eq__(self, other: object) -> bool:
        return isinstance(other, _NegatedTuple) and self.value == other.value


def _build_scenario(tree: ExpandedTree, leaves: tuple[NodeId, ...],
                    est: ScenarioEstimates) -> AttackScenario:
    """Reconstruct full metrics for a known leaf selection."""
    chosen = set(leaves)
    has_time = est.time is not None
    leaf_sets: dict[int, frozenset[NodeId]] = {}

    def leaf_set(node: ExpandedNode) -> frozenset[NodeId]:
        found = leaf_sets.get(id(node))
        if found is None:
            if node.is_leaf:
                found = frozenset((node.id,))
            else:
                found = frozenset().union(*(leaf_set(c) for c in node.children))
            leaf_sets[id(node)] = found
        return found

    def walk(node: ExpandedNode) -> _Partial:
        if node.is_leaf:
            t = est.time[node.id] if has_time else None
            return _Partial((node.id,), (), est.cost[node.id],
                            est.probability[node.id], t, t)
        if node.gate is GateKind.OR:
            for child in node.children:
                if not chosen.isdisjoint(leaf_set(child)):
                    return walk(child)
            raise AssertionError("selection covers no OR branch")
        acc: _Partial | None = None
        prev: tuple[NodeId, ...] = ()
        for child in node.children:
            sub = walk(child)
            if acc is None:
                acc = sub
            elif node.gate is GateKind.SAND:
                acc = _Partial(
                    _merge(acc.leaves, sub.leaves),
                    acc.ordering + sub.ordering + tuple(
                        (x, y) for x in prev for y in sub.leaves),
                    acc.cost + sub.cost, acc.probability * sub.probability,
                    (acc.time + sub.time) if has_time else None,
                    (acc.time_serial + sub.time_serial) if has_time else None)
            else:
                acc = _Partial(
                    _merge(acc.leaves, sub.leaves), acc.ordering + sub.ordering,
                    acc.cost + sub.cost, acc.probability * sub.probability,
                    max(acc.time, sub.time) if has_time else None,
                    (acc.time_serial + sub.time_serial) if has_time else None)
            prev = sub.leaves
        assert acc is not None
        return acc

    return walk(tree.root).finish()


def cheapest_attack(tree: ExpandedTree,
                    estimates: ScenarioEstimates) -> AttackScenario:
    """Scenario with minimal total cost (= the min_cost aggregate at the root).

    Computed by bottom-up optimization over OR choices, never by full
    enumeration; ties go to the lexicographically smallest leaf set.
    """
    if tree.root is None:
        raise InfeasibleTreeError("tree has no scenarios")
    estimates.require_complete(tree)
    _, leaves = _best(tree.root, estimates.cost, minimize=True)
    return _build_scenario(tree, leaves, estimates)


def most_likely_attack(tree: ExpandedTree,
                       estimates: ScenarioEstimates) -> AttackScenario:
    """Scenario maximizing the product of leaf probabilities.

    The search runs in log space so long products of small probabilities
    compare reliably; ties go to the lexicographically smallest leaf set.
    """
    if tree.root is None:
        raise InfeasibleTreeError("tree has no scenarios")
    estimates.require_complete(tree)
    log_p = {leaf: (math.log(p) if p > 0.0 else -math.inf)
             for leaf, p in estimates.probability.items()}
    _, leaves = _best(tree.root, log_p, minimize=False)
    return _build_scenario(tree, leaves, estimates)


def attacks_within_budget(tree: ExpandedTree, estimates: ScenarioEstimates,
                          budget: float, cap: int = DEFAULT_CAP
                          ) -> list[AttackScenario]:
    """Every scenario with cost ≤ budget, exactly.

    Branch-and-bound on per-subtree min-cost lower bounds; results sorted
    by ascending cost, then descending probability, then leaf ids.
    """
    if cap <= 0:
        raise ValueError("cap must be positive")
    estimates.require_complete(tree)
    if tree.root is None:
        return []
    min_cost = aggregate(tree, MIN_COST, estimates.cost).by_node
    out: list[AttackScenario] = []
    for partial in _scenarios_under(tree.root, budget, estimates, min_cost):
        out.append(partial.finish())
        if len(out) > cap:
            raise ScenarioExplosion(None, cap)
    out.sort(key=AttackScenario.sort_key)
    return out


def pareto_frontier(tree: ExpandedTree, estimates: ScenarioEstimates,
                    cap: int = DEFAULT_CAP) -> list[AttackScenario]:
    """Non-dominated scenarios under (minimize cost, maximize probability).

    A scenario is dropped iff another one is at least as cheap and at least
    as likely, and strictly better on one axis. Computed by a single sweep
    over scenarios sorted by (cost, -probability).
    """
    scenarios = enumerate_scenarios(tree, estimates, cap)
    scenarios.sort(key=AttackScenario.sort_key)
    frontier: list[AttackScenario] = []
    best_cheaper = -math.inf   # max probability at strictly lower cost
    group_cost: float | None = None
    group_best = -math.inf     # max probability within the current cost group
    for s in scenarios:
        if group_cost is None or s.cost > group_cost:
            best_cheaper = max(best_cheaper, group_best)
            group_cost = s.cost
            group_best = -math.inf
        dominated = s.probability <= best_cheaper or s.probability < group_best
        if not dominated:
            frontier.append(s)
        group_best = max(group_best, s.probability)
    return frontier


def expected_payoff(scenario: AttackScenario, gain: float) -> float:
    """Expected attacker value: probability·gain − cost."""
    if gain < 0:
        raise ValueError("gain must be non-negative")
    return scenario.probability * gain - scenario.cost


def satisfies(tree: ExpandedTree, leaves: frozenset[NodeId] | set[NodeId]) -> bool:
    """Boolean satisfaction: does activating exactly these leaves reach the root?"""
    if tree.root is None:
        return False

    def walk(node: ExpandedNode) -> bool:
        if node.is_leaf:
            return node.id in leaves
        if node.gate is GateKind.OR:
            return any(walk(child) for child in node.children)
        return all(walk(child) for child in node.children)

    return walk(tree.root)
