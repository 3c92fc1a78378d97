"""Instantiate a parameterized tree library into one concrete attack tree.

Expansion resolves references into deep copies, unrolls multiplicities, and
rewrites PARTITION gates. Copies are contextually distinct: every crossing
of a reference or instance boundary appends a tag to the copied NodeIds, so
two leaves sharing (library_key, path) always differ in instance_tags.

Rules, applied bottom-up:
  * "ref k" is replaced by a copy of tree k; copied ids keep k as their
    library_key and gain the referencing site as a tag ("B.2.2").
  * times(m) with m > 1 becomes an AND over m copies tagged "site#1".."#m";
    m = 1 is transparent; m = 0 under an OR drops the branch; m = 0 under
    AND or SAND (or at the root) raises ZeroMultiplicityUnderConjunction.
  * partition(v1+..+vk = T) over k alternatives becomes an AND over T
    instances of OR(alternatives); the count variables are implicit (an
    instance choosing alternative 1 counts toward v1, and so on), giving
    exactly k^T distinct choice vectors at the gate.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    DeploymentParams,
    GateKind,
    NodeId,
    TreeLibrary,
    TreeNode,
    UnboundParameterError,
    UnknownKeyError,
)

__all__ = [
    "ExpandedNode",
    "ExpandedTree",
    "ExpansionError",
    "InvalidMultiplicityError",
    "ZeroMultiplicityUnderConjunction",
    "expand",
    "leaf_inventory",
    "node_count",
    "leaf_count",
    "iter_expanded",
]


class ExpansionError(Exception):
    """Base for failures while instantiating a tree."""


class InvalidMultiplicityError(ExpansionError):
    def __init__(self, node: NodeId, value: int) -> None:
        self.node = node
        self.value = value
        super().__init__(f"multiplicity at {node.qualified()} evaluates to {value}")


class ZeroMultiplicityUnderConjunction(ExpansionError):
    """A conjunct vanished (multiplicity 0), so no expansion satisfies it."""

    def __init__(self, node: NodeId) -> None:
        self.node = node
        super().__init__(
            f"zero-multiplicity conjunct at {node.qualified()} makes the tree unsatisfiable")


@dataclass(frozen=True)
class ExpandedNode:
    """Concrete node: a leaf or a plain OR/AND/SAND gate, no parameters."""

    id: NodeId
    label: str = ""
    gate: GateKind | None = None
    children: tuple[ExpandedNode, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.gate is None


@dataclass(frozen=True)
class ExpandedTree:
    """Expansion result; root is None only for pruned-empty trees."""

    root_key: str
    params: DeploymentParams
    root: ExpandedNode | None

    @property
    def is_infeasible(self) -> bool:
        return self.root is None


def expand(lib: TreeLibrary, root_key: str, params: DeploymentParams) -> ExpandedTree:
    """Expand root_key against params; deterministic for identical inputs."""
    if root_key not in lib.trees:
        raise UnknownKeyError(root_key)
    bindings = params.bindings

    def instantiate(key: str, node: TreeNode,
                    tags: tuple[str, ...]) -> ExpandedNode | None:
        """Expand one instance of node, ignoring its own multiplicity."""
        if node.reference is not None:
            if node.reference not in lib.trees:
                raise UnknownKeyError(node.reference)
            return expand_node(node.reference, lib.trees[node.reference], tags)
        node_id = node.id.with_tags(tags)
        if node.gate is None:
            return ExpandedNode(node_id, node.label)
        if node.gate.kind is GateKind.PARTITION:
            if node.gate.total is None:
                raise ExpansionError(
                    f"partition at {node_id.qualified()} has no constraint")
            total = node.gate.total.evaluate(bindings, node_id.qualified())
            if total < 0:
                raise InvalidMultiplicityError(node_id, total)
            if total == 0:
                return None
            site = node.id.local()

            def instance(inst_tags: tuple[str, ...]) -> ExpandedNode | None:
                alts = []
                for alt in node.children:
                    expanded = expand_node(key, alt, inst_tags)
                    if expanded is not None:
                        alts.append(expanded)
                if not alts:
                    return None
                return ExpandedNode(node.id.with_tags(inst_tags), node.label,
                                    GateKind.OR, tuple(alts))

            if total == 1:
                return instance(tags)
            instances = []
            for index in range(1, total + 1):
                inst = instance(tags + (f"{site}#{index}",))
                if inst is None:
                    raise ZeroMultiplicityUnderConjunction(node_id)
                instances.append(inst)
            return ExpandedNode(node_id, node.label, GateKind.AND, tuple(instances))
        children = []
        for child in node.children:
            expanded = expand_node(key, child, tags)
            if expanded is None:
                if node.gate.kind is GateKind.OR:
                    continue
                raise ZeroMultiplicityUnderConjunction(child.id.with_tags(tags))
            children.append(expanded)
        if not children:
            return None
        return ExpandedNode(node_id, node.label, node.gate.kind, tuple(children))

    def expand_node(key: str, node: TreeNode,
                    tags: tuple[str, ...]) -> ExpandedNode | None:
        count = node.multiplicity.evaluate(bindings, node.id.qualified())
        if count < 0:
            raise InvalidMultiplicityError(node.id.with_tags(tags), count)
        if count == 0:
            return None
        site = node.id.local()
        if count == 1:
            crossing = tags + (site,) if node.reference is not None else tags
            return instantiate(key, node, crossing)
        copies = []
        for index in range(1, count + 1):
            copy = instantiate(key, node, tags + (f"{site}#{index}",))
            if copy is None:
                raise ZeroMultiplicityUnderConjunction(node.id.with_tags(tags))
            copies.append(copy)
        return ExpandedNode(node.id.with_tags(tags), node.label,
                            GateKind.AND, tuple(copies))

    root = expand_node(root_key, lib.trees[root_key], ())
    if root is None:
        raise ZeroMultiplicityUnderConjunction(NodeId(root_key))
    return ExpandedTree(root_key, params, root)


def iter_expanded(root: ExpandedNode):
    """Pre-order iteration."""
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def leaf_inventory(tree: ExpandedTree) -> list[tuple[NodeId, str]]:
    """(id, label) for every leaf, in pre-order."""
    if tree.root is None:
        return []
    return [(n.id, n.label) for n in iter_expanded(tree.root) if n.is_leaf]


def node_count(tree: ExpandedTree) -> int:
    if tree.root is None:
        return 0
    return sum(1 for _ in iter_expanded(tree.root))


def leaf_count(tree: ExpandedTree) -> int:
    return len(leaf_inventory(tree))
