"""Attribute domains and bottom-up aggregation, checked against enumeration."""

import math
import random
from fractions import Fraction

import numpy as np
import pytest

from gen import random_estimates, random_expanded_tree
from oracles import success_prob_exact
from vaultrisk.aggregation import (BUILTIN_DOMAINS, MIN_COST, MIN_TIME,
                                   MIN_TIME_LONE, SUCCESS_PROB, FEASIBLE,
                                   MissingEstimateError, TooLargeError,
                                   aggregate, check_against_oracle,
                                   get_domain)
from vaultrisk.expansion import ExpandedNode, ExpandedTree, iter_expanded
from vaultrisk.model import DeploymentParams, GateKind, NodeId


def nid(*path):
    return NodeId("t", path)


def leaf(*path):
    return ExpandedNode(nid(*path), label=f"leaf {path}")


def tree_of(root):
    return ExpandedTree("t", DeploymentParams({}), root)


# OR( AND(a, b), SAND(c, d), e )
SAMPLE = tree_of(ExpandedNode(nid(), gate=GateKind.OR, children=(
    ExpandedNode(nid(1), gate=GateKind.AND, children=(leaf(1, 1), leaf(1, 2))),
    ExpandedNode(nid(2), gate=GateKind.SAND, children=(leaf(2, 1), leaf(2, 2))),
    leaf(3),
)))

COSTS = {nid(1, 1): 5.0, nid(1, 2): 7.0, nid(2, 1): 2.0, nid(2, 2): 9.0,
         nid(3): 20.0}
TIMES = dict(COSTS)
PROBS = {nid(1, 1): 0.5, nid(1, 2): 0.5, nid(2, 1): 0.8, nid(2, 2): 0.5,
         nid(3): 0.1}


class TestDomainTables:
    def test_min_cost(self):
        result = aggregate(SAMPLE, MIN_COST, COSTS)
        assert result.root == 11.0
        assert result.by_node[nid(1)] == 12.0
        assert result.by_node[nid(2)] == 11.0

    def test_min_time_runs_conjuncts_in_parallel(self):
        result = aggregate(SAMPLE, MIN_TIME, TIMES)
        assert result.by_node[nid(1)] == 7.0   # max of 5, 7
        assert result.by_node[nid(2)] == 11.0  # sequential stays a sum
        assert result.root == 7.0

    def test_min_time_lone_attacker_sums(self):
        result = aggregate(SAMPLE, MIN_TIME_LONE, TIMES)
        assert result.by_node[nid(1)] == 12.0
        assert result.root == 11.0

    def test_success_prob(self):
        result = aggregate(SAMPLE, SUCCESS_PROB, PROBS)
        assert result.by_node[nid(1)] == pytest.approx(0.25, abs=1e-15)
        assert result.by_node[nid(2)] == pytest.approx(0.40, abs=1e-15)
        assert result.root == pytest.approx(1 - 0.75 * 0.6 * 0.9, abs=1e-15)

    def test_feasible_defaults_to_true(self):
        assert aggregate(SAMPLE, FEASIBLE, {}).root is True

    def test_feasible_false_propagates(self):
        flags = {nid(1, 1): False, nid(2, 2): False, nid(3): False}
        result = aggregate(SAMPLE, FEASIBLE, flags)
        assert result.by_node[nid(1)] is False
        assert result.by_node[nid(2)] is False
        assert result.root is False

    def test_single_child_gate_is_transparent(self):
        lone = tree_of(ExpandedNode(nid(), gate=GateKind.OR,
                                    children=(leaf(1),)))
        assert aggregate(lone, MIN_COST, {nid(1): 4.0}).root == 4.0
        assert aggregate(lone, SUCCESS_PROB, {nid(1): 0.3}).root == 0.3

    def test_infeasible_tree_takes_or_identity(self):
        empty = ExpandedTree("t", DeploymentParams({}), None)
        assert aggregate(empty, MIN_COST, {}).root == math.inf
        assert aggregate(empty, SUCCESS_PROB, {}).root == 0.0
        assert aggregate(empty, FEASIBLE, {}).root is False
        assert aggregate(empty, MIN_COST, {}).by_node == {}


class TestNumerics:
    def test_tiny_probability_chains_stay_accurate(self):
        # a 40-deep AND of small probabilities underflows naive folding
        # precision; compare against exact rational arithmetic
        leaves = tuple(leaf(i) for i in range(1, 41))
        chain = tree_of(ExpandedNode(nid(), gate=GateKind.AND, children=leaves))
        probs = {l.id: 10.0 ** -(3 + (i % 4)) for i, l in enumerate(leaves)}
        exact = success_prob_exact(
            chain.root, {k: Fraction(v) for k, v in probs.items()})
        result = aggregate(chain, SUCCESS_PROB, probs)
        assert result.root == pytest.approx(float(exact), rel=1e-9)

    def test_prob_and_handles_exact_zero(self):
        pair = tree_of(ExpandedNode(nid(), gate=GateKind.SAND,
                                    children=(leaf(1), leaf(2))))
        assert aggregate(pair, SUCCESS_PROB,
                         {nid(1): 0.0, nid(2): 1e-9}).root == 0.0

    def test_vector_folds_agree_with_binary_ops(self):
        rng = np.random.default_rng(5)
        for domain in BUILTIN_DOMAINS.values():
            for kind in (GateKind.OR, GateKind.AND, GateKind.SAND):
                op, identity = domain.op_for(kind)
                fold = domain.vec_for(kind)
                if domain.value_type == "boolean":
                    arrays = [rng.random(64) < 0.5 for _ in range(4)]
                else:
                    arrays = [rng.random(64) for _ in range(4)]
                vectored = fold(arrays)
                for column in range(64):
                    acc = identity
                    for arr in arrays:
                        acc = op(acc, arr[column])
                    assert vectored[column] == pytest.approx(acc, rel=1e-12)


class TestErrors:
    def test_missing_estimates_collected_and_sorted(self):
        with pytest.raises(MissingEstimateError) as exc:
            aggregate(SAMPLE, MIN_COST, {nid(1, 1): 1.0})
        assert exc.value.domain == "min_cost"
        assert exc.value.leaves == sorted(
            [nid(1, 2), nid(2, 1), nid(2, 2), nid(3)])
        assert "min_cost" in str(exc.value)

    def test_missing_estimate_message_truncates(self):
        leaves = tuple(leaf(i) for i in range(1, 10))
        wide = tree_of(ExpandedNode(nid(), gate=GateKind.OR, children=leaves))
        with pytest.raises(MissingEstimateError) as exc:
            aggregate(wide, MIN_COST, {})
        assert "+4 more" in str(exc.value)

    def test_get_domain(self):
        assert get_domain("min_cost") is MIN_COST
        with pytest.raises(KeyError):
            get_domain("charisma")

    def test_op_for_rejects_partition(self):
        with pytest.raises(ValueError):
            MIN_COST.op_for(GateKind.PARTITION)
        with pytest.raises(ValueError):
            MIN_COST.vec_for(GateKind.PARTITION)


class TestOracleAgreement:
    def test_oracle_accepts_all_builtin_domains_on_random_trees(self):
        rng = random.Random(20260814)
        for _ in range(150):
            tree = random_expanded_tree(rng)
            ests = random_estimates(rng, tree)
            flags = {leaf_id: rng.random() < 0.8 for leaf_id in ests.cost}
            assert check_against_oracle(tree, MIN_COST, ests.cost)
            assert check_against_oracle(tree, MIN_TIME, ests.time)
            assert check_against_oracle(tree, MIN_TIME_LONE, ests.time)
            assert check_against_oracle(tree, SUCCESS_PROB, ests.probability)
            assert check_against_oracle(tree, FEASIBLE, flags)

    def test_oracle_refuses_oversized_trees(self):
        pairs = tuple(
            ExpandedNode(nid(i), gate=GateKind.OR,
                         children=(leaf(i, 1), leaf(i, 2)))
            for i in range(1, 22))
        wide = tree_of(ExpandedNode(nid(), gate=GateKind.AND, children=pairs))
        costs = {n.id: 1.0 for n in iter_expanded(wide.root) if n.is_leaf}
        with pytest.raises(TooLargeError):
            check_against_oracle(wide, MIN_COST, costs)

    def test_infeasible_tree_passes_trivially(self):
        empty = ExpandedTree("t", DeploymentParams({}), None)
        assert check_against_oracle(empty, MIN_COST, {})
