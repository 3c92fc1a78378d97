"""Object model for SAND attack trees parameterized over a deployment."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

__all__ = [
    "GateKind",
    "IntExpr",
    "ONE",
    "Gate",
    "NodeId",
    "TreeNode",
    "LibraryMetadata",
    "TreeLibrary",
    "DeploymentParams",
    "Diagnostic",
    "UnknownKeyError",
    "UnboundParameterError",
    "validate_library",
    "reference_closure",
    "iter_nodes",
]


class UnknownKeyError(Exception):
    """A tree key was requested that the library does not define."""


class UnboundParameterError(Exception):
    """An integer expression was evaluated with a name left unbound."""

    def __init__(self, name: str, where: str = "") -> None:
        self.name = name
        self.where = where
        suffix = f" at {where}" if where else ""
        super().__init__(f"unbound parameter {name!r}{suffix}")


# === integer expressions ==================================================


@dataclass(frozen=True)
class IntExpr:
    """Signed sum of integer literals and parameter names.

    The canonical form is a flat tuple of (sign, atom) pairs where atom is
    an int or a name string. Cardinality-style names keep their bars, so
    "|D|" is an ordinary name. The form is unique for a given source
    expression, which makes round-trips exact.
    """

    terms: tuple[tuple[int, int | str], ...]

    @staticmethod
    def literal(value: int) -> IntExpr:
        return IntExpr(((1, int(value)),))

    @staticmethod
    def name(name: str) -> IntExpr:
        return IntExpr(((1, name),))

    def names(self) -> frozenset[str]:
        return frozenset(a for _, a in self.terms if isinstance(a, str))

    def evaluate(self, bindings: dict[str, int], where: str = "") -> int:
        total = 0
        for sign, atom in self.terms:
            if isinstance(atom, str):
                if atom not in bindings:
                    raise UnboundParameterError(atom, where)
                total += sign * bindings[atom]
            else:
                total += sign * atom
        return total

    def render(self) -> str:
        parts: list[str] = []
        for i, (sign, atom) in enumerate(self.terms):
            if i == 0:
                parts.append(("-" if sign < 0 else "") + str(atom))
            else:
                parts.append(("-" if sign < 0 else "+") + str(atom))
        return "".join(parts)

    def is_one(self) -> bool:
        return self.terms == ((1, 1),)


ONE = IntExpr.literal(1)


# === nodes and gates ======================================================


class GateKind(enum.Enum):
    OR = "or"
    AND = "and"
    SAND = "sand"
    PARTITION = "partition"


@dataclass(frozen=True)
class Gate:
    """Gate of an internal node; PARTITION carries its count constraint."""

    kind: GateKind
    vars: tuple[str, ...] = ()
    total: IntExpr | None = None


@dataclass(frozen=True, order=True)
class NodeId:
    """Stable identity: defining tree, child path, and instance tags.

    Paths are 1-based child indices from the tree root. Instance tags
    accumulate outermost-first as references are crossed and multiplicity
    or partition instances are stamped out, e.g. ("B.2.2#1", "i.2.1.1#2").
    """

    library_key: str
    path: tuple[int, ...] = ()
    instance_tags: tuple[str, ...] = ()

    def local(self) -> str:
        if not self.path:
            return self.library_key
        return self.library_key + "." + ".".join(str(p) for p in self.path)

    def qualified(self) -> str:
        return "/".join((*self.instance_tags, self.local()))

    def child(self, index: int) -> NodeId:
        return NodeId(self.library_key, self.path + (index,), self.instance_tags)

    def with_tags(self, tags: tuple[str, ...]) -> NodeId:
        return NodeId(self.library_key, self.path, tags)


@dataclass(frozen=True)
class TreeNode:
    """One node: a leaf, a gate over children, or a reference to a tree.

    Exactly one of the three shapes holds:
      leaf       gate is None, reference is None, children empty
      gate node  gate set, children present (emptiness is a diagnostic)
      reference  reference set, no gate, no children
    """

    id: NodeId
    label: str = ""
    gate: Gate | None = None
    children: tuple[TreeNode, ...] = ()
    reference: str | None = None
    multiplicity: IntExpr = ONE

    def __post_init__(self) -> None:
        if self.reference is not None and (self.gate is not None or self.children):
            raise ValueError("reference node cannot carry a gate or children")
        if self.gate is None and self.children:
            raise ValueError("children require a gate")

    @property
    def is_leaf(self) -> bool:
        return self.gate is None and self.reference is None


@dataclass(frozen=True)
class LibraryMetadata:
    """In-memory annotations; the text format does not serialize these."""

    title: str = ""
    version: str = ""
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class TreeLibrary:
    """Named trees plus declared deployment parameters.

    `parameters` maps declared names (bars preserved, e.g. "|D|") to their
    optional documentation strings. Insertion order is the deterministic
    merge order: documents sorted by name, declarations in document order.
    """

    trees: dict[str, TreeNode] = field(default_factory=dict)
    parameters: dict[str, str] = field(default_factory=dict)
    metadata: LibraryMetadata = field(default_factory=LibraryMetadata)


@dataclass(frozen=True)
class DeploymentParams:
    """Non-negative integer bindings plus the optional funds at risk."""

    bindings: dict[str, int] = field(default_factory=dict)
    payoff: float | None = None

    def __post_init__(self) -> None:
        for name, value in self.bindings.items():
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ValueError(f"parameter {name!r} must be a non-negative integer")
        k, m = self.bindings.get("K"), self.bindings.get("M")
        if k is not None and m is not None and k > m:
            raise ValueError(f"signing threshold K={k} exceeds manager count M={m}")


# === diagnostics and validation ===========================================


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    tree: str | None = None
    path: tuple[int, ...] = ()

    def render(self) -> str:
        where = ""
        if self.tree is not None:
            where = f" [{NodeId(self.tree, self.path).local()}]"
        return f"{self.severity}[{self.code}]{where}: {self.message}"


def iter_nodes(root: TreeNode):
    """Pre-order iteration over a tree."""
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def _collect_refs(root: TreeNode) -> list[str]:
    return [n.reference for n in iter_nodes(root) if n.reference is not None]


def validate_library(lib: TreeLibrary) -> list[Diagnostic]:
    """Check referential and structural integrity; empty result means valid.

    Reported: unknown references, reference cycles, unbound parameter names
    in multiplicities or partition totals, empty gates, PARTITION nodes
    without a constraint or with fewer than two alternatives.
    """
    diags: list[Diagnostic] = []
    declared = set(lib.parameters)

    def err(code: str, message: str, tree: str, path: tuple[int, ...]) -> None:
        diags.append(Diagnostic("error", code, message, tree, path))

    def walk(key: str, node: TreeNode) -> None:
        # partition count variables (the constraint's left side) never bind
        # anywhere else: they are symbolic slot counts, not numbers, so a
        # multiplicity or total naming one is as unbound as any typo
        for name in sorted(node.multiplicity.names()):
            if name not in declared:
                err("unbound-parameter",
                    f"multiplicity uses undeclared parameter {name!r}",
                    key, node.id.path)
        if node.reference is not None:
            if node.reference not in lib.trees:
                err("unknown-reference",
                    f"reference to unknown tree {node.reference!r}",
                    key, node.id.path)
        elif node.gate is not None:
            if not node.children:
                err("empty-gate", "gate requires at least one child",
                    key, node.id.path)
            if node.gate.kind is GateKind.PARTITION:
                if node.gate.total is None or not node.gate.vars:
                    err("partition-missing-constraint",
                        "partition gate requires a count constraint",
                        key, node.id.path)
                else:
                    for name in sorted(node.gate.total.names()):
                        if name not in declared:
                            err("unbound-parameter",
                                f"partition total uses undeclared parameter {name!r}",
                                key, node.id.path)
                if len(node.children) == 1:
                    err("partition-arity",
                        "partition gate requires at least two alternatives",
                        key, node.id.path)
        for child in node.children:
            walk(key, child)

    for key, root in lib.trees.items():
        walk(key, root)

    # Reference cycles: DFS over the key graph, one diagnostic per cycle.
    edges = {key: sorted(set(_collect_refs(root)) & set(lib.trees))
             for key, root in lib.trees.items()}
    seen_cycles: set[tuple[str, ...]] = set()
    color: dict[str, int] = {}  # 0 unvisited, 1 on stack, 2 done
    stack: list[str] = []

    def dfs(key: str) -> None:
        color[key] = 1
        stack.append(key)
        for nxt in edges[key]:
            state = color.get(nxt, 0)
            if state == 0:
                dfs(nxt)
            elif state == 1:
                cycle = tuple(stack[stack.index(nxt):])
                pivot = cycle.index(min(cycle))
                canon = cycle[pivot:] + cycle[:pivot]
                if canon not in seen_cycles:
                    seen_cycles.add(canon)
        stack.pop()
        color[key] = 2

    for key in lib.trees:
        if color.get(key, 0) == 0:
            dfs(key)
    for canon in sorted(seen_cycles):
        chain = " -> ".join((*canon, canon[0]))
        diags.append(Diagnostic("error", "reference-cycle",
                                f"reference cycle: {chain}", canon[0]))
    return diags


def reference_closure(lib: TreeLibrary, root_key: str) -> frozenset[str]:
    """All tree keys reachable from root_key through references."""
    if root_key not in lib.trees:
        raise UnknownKeyError(root_key)
    seen = {root_key}
    frontier = [root_key]
    while frontier:
        key = frontier.pop()
        for target in _collect_refs(lib.trees[key]):
            if target in lib.trees and target not in seen:
                seen.add(target)
                frontier.append(target)
    return frozenset(seen)
