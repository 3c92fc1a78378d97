"""Bottom-up multi-attribute evaluation of expanded attack trees."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping

import numpy as np

from .expansion import ExpandedNode, ExpandedTree
from .model import GateKind, NodeId

__all__ = [
    "AttributeDomain",
    "AggregateResult",
    "MissingEstimateError",
    "TooLargeError",
    "BUILTIN_DOMAINS",
    "get_domain",
    "aggregate",
    "check_against_oracle",
]

_LOG_SPACE_THRESHOLD = 1e-6
_ORACLE_MAX_SCENARIOS = 1_000_000


class MissingEstimateError(Exception):
    """Leaves lack estimates for the requested domain."""

    def __init__(self, domain: str, leaves: list[NodeId]) -> None:
        self.domain = domain
        self.leaves = sorted(leaves)
        names = ", ".join(leaf.qualified() for leaf in self.leaves[:5])
        more = "" if len(self.leaves) <= 5 else f" (+{len(self.leaves) - 5} more)"
        super().__init__(f"missing {domain} estimates for: {names}{more}")


class TooLargeError(Exception):
    """The oracle check refuses trees beyond its enumeration budget."""


@dataclass(frozen=True)
class AttributeDomain:
    """A value domain with one associative combinator per gate kind.

    Combinators are binary with explicit identities, so child lists of any
    arity fold deterministically left to right. The *_vec fields are
    vectorized n-ary equivalents used by the Monte Carlo engine; they must
    agree with the binary ops on every input.
    """

    name: str
    value_type: str  # "number" | "boolean"
    leaf_default: Any  # None means an estimate is required
    or_op: Callable[[Any, Any], Any]
    and_op: Callable[[Any, Any], Any]
    sand_op: Callable[[Any, Any], Any]
    or_identity: Any
    and_identity: Any
    sand_identity: Any
    or_vec: Callable[[list[np.ndarray]], np.ndarray] | None = None
    and_vec: Callable[[list[np.ndarray]], np.ndarray] | None = None
    sand_vec: Callable[[list[np.ndarray]], np.ndarray] | None = None

    def op_for(self, kind: GateKind) -> tuple[Callable[[Any, Any], Any], Any]:
        if kind is GateKind.OR:
            return self.or_op, self.or_identity
        if kind is GateKind.AND:
            return self.and_op, self.and_identity
        if kind is GateKind.SAND:
            return self.sand_op, self.sand_identity
        raise ValueError(f"no combinator for gate {kind}")

    def vec_for(self, kind: GateKind) -> Callable[[list[np.ndarray]], np.ndarray]:
        vec = {GateKind.OR: self.or_vec, GateKind.AND: self.and_vec,
               GateKind.SAND: self.sand_vec}.get(kind)
        if vec is None:
            raise ValueError(f"domain {self.name} has no vectorized {kind} fold")
        return vec


def _prob_and(a: float, b: float) -> float:
    # Products route through log space once factors get tiny, which keeps
    # long chains of small probabilities from losing precision.
    if a == 0.0 or b == 0.0:
        return 0.0
    if min(a, b) < _LOG_SPACE_THRESHOLD:
        return math.exp(math.log(a) + math.log(b))
    return a * b


def _prob_or(a: float, b: float) -> float:
    return 1.0 - (1.0 - a) * (1.0 - b)


def _complement_product(arrays: list[np.ndarray]) -> np.ndarray:
    acc = np.ones_like(arrays[0])
    for arr in arrays:
        acc = acc * (1.0 - arr)
    return 1.0 - acc


def _product(arrays: list[np.ndarray]) -> np.ndarray:
    acc = arrays[0].copy()
    for arr in arrays[1:]:
        acc = acc * arr
    return acc


def _reduce(fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
            ) -> Callable[[list[np.ndarray]], np.ndarray]:
    def fold(arrays: list[np.ndarray]) -> np.ndarray:
        acc = arrays[0]
        for arr in arrays[1:]:
            acc = fn(acc, arr)
        return acc
    return fold


MIN_COST = AttributeDomain(
    name="min_cost", value_type="number", leaf_default=None,
    or_op=min, and_op=lambda a, b: a + b, sand_op=lambda a, b: a + b,
    or_identity=math.inf, and_identity=0.0, sand_identity=0.0,
    or_vec=_reduce(np.minimum), and_vec=_reduce(np.add), sand_vec=_reduce(np.add))

# Conjuncts run in parallel by default (a team of attackers); the lone
# attacker variant sums them instead.
MIN_TIME = AttributeDomain(
    name="min_time", value_type="number", leaf_default=None,
    or_op=min, and_op=max, sand_op=lambda a, b: a + b,
    or_identity=math.inf, and_identity=0.0, sand_identity=0.0,
    or_vec=_reduce(np.minimum), and_vec=_reduce(np.maximum), sand_vec=_reduce(np.add))

MIN_TIME_LONE = AttributeDomain(
    name="min_time_lone", value_type="number", leaf_default=None,
    or_op=min, and_op=lambda a, b: a + b, sand_op=lambda a, b: a + b,
    or_identity=math.inf, and_identity=0.0, sand_identity=0.0,
    or_vec=_reduce(np.minimum), and_vec=_reduce(np.add), sand_vec=_reduce(np.add))

SUCCESS_PROB = AttributeDomain(
    name="success_prob", value_type="number", leaf_default=None,
    or_op=_prob_or, and_op=_prob_and, sand_op=_prob_and,
    or_identity=0.0, and_identity=1.0, sand_identity=1.0,
    or_vec=_complement_product, and_vec=_product, sand_vec=_product)

FEASIBLE = AttributeDomain(
    name="feasible", value_type="boolean", leaf_default=True,
    or_op=lambda a, b: a or b, and_op=lambda a, b: a and b,
    sand_op=lambda a, b: a and b,
    or_identity=False, and_identity=True, sand_identity=True,
    or_vec=_reduce(np.logical_or), and_vec=_reduce(np.logical_and),
    sand_vec=_reduce(np.logical_and))

BUILTIN_DOMAINS: dict[str, AttributeDomain] = {
    d.name: d for d in (MIN_COST, MIN_TIME, MIN_TIME_LONE, SUCCESS_PROB, FEASIBLE)
}


def get_domain(name: str) -> AttributeDomain:
    try:
        return BUILTIN_DOMAINS[name]
    except KeyError:
        raise KeyError(f"unknown attribute domain {name!r}; "
                       f"built-ins: {', '.join(sorted(BUILTIN_DOMAINS))}") from None


@dataclass(frozen=True)
class AggregateResult:
    root: Any
    by_node: dict[NodeId, Any]


def aggregate(tree: ExpandedTree, domain: AttributeDomain,
              estimates: Mapping[NodeId, Any]) -> AggregateResult:
    """Fold leaf estimates up to the root; returns per-node values too.

    An infeasible (empty) tree evaluates to the OR identity: no scenario
    exists, so cost is +inf, probability 0, feasibility False.
    """
    if tree.root is None:
        return AggregateResult(domain.or_identity, {})
    missing: list[NodeId] = []

    def value_of(node: ExpandedNode, out: dict[NodeId, Any]) -> Any:
        if node.is_leaf:
            if node.id in estimates:
                value = estimates[node.id]
            elif domain.leaf_default is not None:
                value = domain.leaf_default
            else:
                missing.append(node.id)
                value = None
            out[node.id] = value
            return value
        # reduce from the first child, not the identity: a gate over one
        # child then evaluates to exactly that child's value
        op, _ = domain.op_for(node.gate)
        values = [value_of(child, out) for child in node.children]
        if missing:
            out[node.id] = None
            return None
        acc = values[0]
        for value in values[1:]:
            acc = op(acc, value)
        out[node.id] = acc
        return acc

    by_node: dict[NodeId, Any] = {}
    root_value = value_of(tree.root, by_node)
    if missing:
        raise MissingEstimateError(domain.name, missing)
    return AggregateResult(root_value, by_node)


# === independent oracle ===================================================


def _count_scenarios(node: ExpandedNode) -> int:
    if node.is_leaf:
        return 1
    if node.gate is GateKind.OR:
        return sum(_count_scenarios(child) for child in node.children)
    return math.prod(_count_scenarios(child) for child in node.children)


def _scenario_values(node: ExpandedNode, domain: AttributeDomain,
                     estimates: Mapping[NodeId, Any]) -> list[Any]:
    """All scenario values at node, by direct enumeration."""
    if node.is_leaf:
        if node.id in estimates:
            return [estimates[node.id]]
        return [domain.leaf_default]
    if node.gate is GateKind.OR:
        out: list[Any] = []
        for child in node.children:
            out.extend(_scenario_values(child, domain, estimates))
        return out
    op, identity = domain.op_for(node.gate)
    acc = [identity]
    for child in node.children:
        child_values = _scenario_values(child, domain, estimates)
        acc = [op(a, c) for a in acc for c in child_values]
    return acc


def _naive_prob(node: ExpandedNode, estimates: Mapping[NodeId, Any]) -> float:
    if node.is_leaf:
        return float(estimates[node.id])
    if node.gate is GateKind.OR:
        complement = 1.0
        for child in node.children:
            complement *= 1.0 - _naive_prob(child, estimates)
        return 1.0 - complement
    product = 1.0
    for child in node.children:
        product *= _naive_prob(child, estimates)
    return product


def check_against_oracle(tree: ExpandedTree, domain: AttributeDomain,
                         estimates: Mapping[NodeId, Any]) -> bool:
    """Compare aggregate() with exhaustive enumeration on a small tree.

    Cost and time compare against the optimum over all enumerated scenario
    values; success_prob against a naive, non-memoized recursion of the
    same product formula; feasible against "some scenario is all-true".
    Number comparisons allow rel 1e-9 / abs 1e-12 for fold-order effects.
    """
    if tree.root is None:
        return True
    count = _count_scenarios(tree.root)
    if count > _ORACLE_MAX_SCENARIOS:
        raise TooLargeError(f"{count} scenarios exceed the oracle budget")
    result = aggregate(tree, domain, estimates)
    if domain.name == "success_prob":
        expected = _naive_prob(tree.root, estimates)
        return math.isclose(result.root, expected, rel_tol=0.0, abs_tol=1e-12)
    values = _scenario_values(tree.root, domain, estimates)
    if domain.value_type == "boolean":
        return result.root == any(values)
    expected = min(values)
    if math.isinf(expected) or math.isinf(result.root):
        return expected == result.root
    return math.isclose(result.root, expected, rel_tol=1e-9, abs_tol=1e-12)
