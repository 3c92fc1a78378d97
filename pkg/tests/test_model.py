"""Core data model: expressions, ids, invariants, validation."""

import pytest

from vaultrisk.model import (DeploymentParams, Gate, GateKind, IntExpr,
                             LibraryMetadata, NodeId, TreeLibrary, TreeNode,
                             UnboundParameterError, UnknownKeyError,
                             reference_closure, validate_library)


def lib_of(trees, parameters=None):
    return TreeLibrary(trees=trees, parameters=parameters or {},
                       metadata=LibraryMetadata())


def leaf(node_id, label="step"):
    return TreeNode(node_id, label=label)


class TestIntExpr:
    def test_literal_evaluates(self):
        assert IntExpr.literal(7).evaluate({}) == 7

    def test_sum_with_params(self):
        expr = IntExpr(((1, "M"), (-1, "K"), (1, 1)))
        assert expr.evaluate({"M": 5, "K": 2}) == 4

    def test_bar_names_are_plain_names(self):
        expr = IntExpr.name("|D|")
        assert expr.evaluate({"|D|": 3}) == 3
        assert expr.names() == frozenset({"|D|"})

    def test_unbound_raises_with_name_and_site(self):
        with pytest.raises(UnboundParameterError) as exc:
            IntExpr.name("N").evaluate({}, where="i.2")
        assert exc.value.name == "N"
        assert "i.2" in str(exc.value)

    def test_render_round_trips_signs(self):
        expr = IntExpr(((1, "M"), (-1, "K"), (1, 1)))
        assert expr.render() == "M-K+1"
        assert IntExpr(((-1, "N"), (1, 2))).render() == "-N+2"

    def test_is_one(self):
        assert IntExpr.literal(1).is_one()
        assert not IntExpr.name("N").is_one()


class TestNodeId:
    def test_local_rendering(self):
        assert NodeId("b").local() == "b"
        assert NodeId("b", (2, 1)).local() == "b.2.1"

    def test_child_extends_path(self):
        assert NodeId("b", (2,)).child(3) == NodeId("b", (2, 3))

    def test_qualified_includes_instance_tags(self):
        node = NodeId("b", (2, 1), instance_tags=("C.3#1", "j.2"))
        assert node.qualified() == "C.3#1/j.2/b.2.1"

    def test_ordering_is_total_and_stable(self):
        ids = [NodeId("b", (2,)), NodeId("a", (9,)), NodeId("b", (1, 5))]
        ordered = sorted(ids)
        assert ordered[0].library_key == "a"
        assert ordered[1] < ordered[2]


class TestTreeNodeInvariants:
    def test_reference_with_children_rejected(self):
        with pytest.raises(ValueError):
            TreeNode(NodeId("t"), reference="x", gate=Gate(GateKind.OR),
                     children=(leaf(NodeId("t", (1,))),))

    def test_children_require_gate(self):
        with pytest.raises(ValueError):
            TreeNode(NodeId("t"), children=(leaf(NodeId("t", (1,))),))

    def test_leaf_is_leaf(self):
        assert leaf(NodeId("t")).is_leaf
        assert not TreeNode(NodeId("t"), gate=Gate(GateKind.OR),
                            children=(leaf(NodeId("t", (1,))),)).is_leaf


class TestDeploymentParams:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            DeploymentParams({"N": -1})

    def test_rejects_threshold_above_managers(self):
        with pytest.raises(ValueError):
            DeploymentParams({"M": 2, "K": 3})

    def test_threshold_at_managers_ok(self):
        params = DeploymentParams({"M": 2, "K": 2})
        assert params.bindings["K"] == 2

    def test_payoff_carried(self):
        assert DeploymentParams({}, payoff=1e6).payoff == 1e6


def _gate(node_id, kind, *children, **kw):
    return TreeNode(node_id, gate=Gate(kind, **kw), children=children)


class TestValidateLibrary:
    def test_clean_library(self):
        root = _gate(NodeId("t"), GateKind.OR,
                     leaf(NodeId("t", (1,))), leaf(NodeId("t", (2,))))
        assert validate_library(lib_of({"t": root})) == []

    def test_unknown_reference(self):
        root = TreeNode(NodeId("t"), reference="ghost")
        codes = [d.code for d in validate_library(lib_of({"t": root}))]
        assert codes == ["unknown-reference"]

    def test_unbound_parameter_in_multiplicity(self):
        root = _gate(NodeId("t"), GateKind.AND,
                     TreeNode(NodeId("t", (1,)), label="x",
                              multiplicity=IntExpr.name("Q")))
        codes = [d.code for d in validate_library(lib_of({"t": root}))]
        assert codes == ["unbound-parameter"]

    def test_declared_parameter_is_bound(self):
        root = _gate(NodeId("t"), GateKind.AND,
                     TreeNode(NodeId("t", (1,)), label="x",
                              multiplicity=IntExpr.name("Q")))
        assert validate_library(lib_of({"t": root}, {"Q": "doc"})) == []

    def test_empty_gate(self):
        root = TreeNode(NodeId("t"), gate=Gate(GateKind.OR), children=())
        codes = [d.code for d in validate_library(lib_of({"t": root}))]
        assert "empty-gate" in codes

    def test_partition_needs_constraint(self):
        root = TreeNode(NodeId("t"), gate=Gate(GateKind.PARTITION),
                        children=(leaf(NodeId("t", (1,))),
                                  leaf(NodeId("t", (2,)))))
        codes = [d.code for d in validate_library(lib_of({"t": root}))]
        assert "partition-missing-constraint" in codes

    def test_partition_needs_two_alternatives(self):
        root = TreeNode(NodeId("t"),
                        gate=Gate(GateKind.PARTITION, vars=("A", "B"),
                                  total=IntExpr.name("N")),
                        children=(leaf(NodeId("t", (1,))),))
        codes = [d.code for d in
                 validate_library(lib_of({"t": root}, {"N": ""}))]
        assert "partition-arity" in codes

    def test_partition_vars_do_not_leak_into_multiplicities(self):
        inner = TreeNode(NodeId("t", (1,)), label="x",
                         multiplicity=IntExpr.name("A"))
        root = TreeNode(NodeId("t"),
                        gate=Gate(GateKind.PARTITION, vars=("A", "B"),
                                  total=IntExpr.name("N")),
                        children=(inner, leaf(NodeId("t", (2,)))))
        codes = [d.code for d in
                 validate_library(lib_of({"t": root}, {"N": ""}))]
        assert "unbound-parameter" in codes

    def test_reference_cycle_reported_once(self):
        a = TreeNode(NodeId("x"), reference="y")
        b = TreeNode(NodeId("y"), reference="x")
        diags = validate_library(lib_of({"x": a, "y": b}))
        cycles = [d for d in diags if d.code == "reference-cycle"]
        assert len(cycles) == 1
        assert "x -> y -> x" in cycles[0].message

    def test_self_cycle(self):
        a = TreeNode(NodeId("x"), reference="x")
        diags = validate_library(lib_of({"x": a}))
        assert [d.code for d in diags] == ["reference-cycle"]


class TestReferenceClosure:
    def test_transitive(self):
        a = TreeNode(NodeId("x"), reference="y")
        b = TreeNode(NodeId("y"), reference="z")
        c = leaf(NodeId("z"))
        lib = lib_of({"x": a, "y": b, "z": c})
        assert reference_closure(lib, "x") == frozenset({"x", "y", "z"})
        assert reference_closure(lib, "z") == frozenset({"z"})

    def test_unknown_key_raises(self):
        with pytest.raises(UnknownKeyError):
            reference_closure(lib_of({"z": leaf(NodeId("z"))}), "nope")
