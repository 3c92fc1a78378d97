"""Graphviz DOT export of expanded attack trees."""

from __future__ import annotations

from .expansion import ExpandedNode, ExpandedTree
from .model import GateKind

__all__ = ["render_dot"]

_GATE_SHAPE = {
    GateKind.OR: "diamond",
    GateKind.AND: "box",
    GateKind.SAND: "box",
}


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _display(node: ExpandedNode) -> str:
    name = node.id.qualified() if node.id.instance_tags else node.id.local()
    if node.label:
        return f"{name}\\n{_escape(node.label)}"
    return name


def render_dot(tree: ExpandedTree, graph_name: str = "attack_tree") -> str:
    """Deterministic DOT text: nodes numbered n0.. in pre-order.

    OR gates render as diamonds, AND and SAND as boxes; SAND edges carry
    ordered labels 1..n (an unlabeled box is therefore an AND). An
    infeasible tree renders as a single placeholder node.
    """
    lines = [f"digraph {graph_name} {{", "  rankdir=TB;",
             '  node [fontname="Helvetica"];']
    if tree.root is None:
        lines.append(f'  n0 [shape=octagon, label="infeasible: {tree.root_key}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    counter = 0

    def walk(node: ExpandedNode) -> str:
        nonlocal counter
        name = f"n{counter}"
        counter += 1
        if node.is_leaf:
            lines.append(f'  {name} [shape=ellipse, label="{_display(node)}"];')
            return name
        shape = _GATE_SHAPE[node.gate]
        tag = node.gate.value.upper()
        lines.append(
            f'  {name} [shape={shape}, label="{tag}: {_display(node)}"];')
        for position, child in enumerate(node.children, start=1):
            child_name = walk(child)
            if node.gate is GateKind.SAND:
                lines.append(f'  {name} -> {child_name} [label="{position}"];')
            else:
                lines.append(f"  {name} -> {child_name};")
        return name

    walk(tree.root)
    lines.append("}")
    return "\n".join(lines) + "\n"
