"""Scenario enumeration, optimization queries, and their brute-force twins."""

import math
import random
from functools import lru_cache

import pytest

from gen import random_estimates, random_expanded_tree
from oracles import (budget_oracle, min_cost_oracle, max_prob_oracle,
                     pareto_oracle, tree_scenarios_naive)
from vaultrisk.aggregation import (MissingEstimateError, SUCCESS_PROB,
                                   aggregate)
from vaultrisk.expansion import ExpandedNode, ExpandedTree, iter_expanded
from vaultrisk.model import DeploymentParams, GateKind, NodeId
from vaultrisk.scenarios import (DEFAULT_CAP, AttackScenario,
                                 InfeasibleTreeError, ScenarioEstimates,
                                 ScenarioExplosion, attacks_within_budget,
                                 cheapest_attack, count_scenarios,
                                 enumerate_scenarios, expected_payoff,
                                 most_likely_attack, pareto_frontier,
                                 satisfies)


def nid(*path):
    return NodeId("t", path)


def leaf(*path):
    return ExpandedNode(nid(*path), label=f"leaf {path}")


def tree_of(root):
    return ExpandedTree("t", DeploymentParams({}), root)


def gate(kind, node_id, *children):
    return ExpandedNode(node_id, gate=kind, children=children)


EMPTY = ExpandedTree("t", DeploymentParams({}), None)

# OR( AND(a, b), SAND(c, d), e ) with distinct ids per leaf
SAMPLE = tree_of(gate(GateKind.OR, nid(),
                      gate(GateKind.AND, nid(1), leaf(1, 1), leaf(1, 2)),
                      gate(GateKind.SAND, nid(2), leaf(2, 1), leaf(2, 2)),
                      leaf(3)))

EST = ScenarioEstimates(
    cost={nid(1, 1): 5.0, nid(1, 2): 7.0, nid(2, 1): 2.0, nid(2, 2): 9.0,
          nid(3): 20.0},
    probability={nid(1, 1): 0.5, nid(1, 2): 0.5, nid(2, 1): 0.8,
                 nid(2, 2): 0.5, nid(3): 0.1},
    time={nid(1, 1): 5.0, nid(1, 2): 7.0, nid(2, 1): 2.0, nid(2, 2): 9.0,
          nid(3): 20.0})


def dag_longest_path(scenario, time):
    """Critical path recomputed from the precedence pairs alone."""
    after = {}
    for a, b in scenario.ordering:
        after.setdefault(a, []).append(b)

    @lru_cache(maxsize=None)
    def tail(leaf_id):
        rest = [tail(b) for b in after.get(leaf_id, [])]
        return time[leaf_id] + (max(rest) if rest else 0.0)

    return max(tail(l) for l in scenario.leaves)


class TestEnumeration:
    def test_counts(self):
        assert count_scenarios(SAMPLE) == 3
        assert count_scenarios(EMPTY) == 0

    def test_leaf_sets_match_naive_products(self):
        scenarios = enumerate_scenarios(SAMPLE, EST)
        got = {frozenset(s.leaves) for s in scenarios}
        assert got == set(tree_scenarios_naive(SAMPLE))
        assert len(scenarios) == 3

    def test_metrics_of_each_pathway(self):
        by_set = {frozenset(s.leaves): s for s in enumerate_scenarios(SAMPLE, EST)}
        joint = by_set[frozenset((nid(1, 1), nid(1, 2)))]
        assert (joint.cost, joint.probability) == (12.0, 0.25)
        assert joint.time == 7.0          # parallel conjuncts
        assert joint.time_serial == 12.0
        assert joint.ordering == ()
        staged = by_set[frozenset((nid(2, 1), nid(2, 2)))]
        assert (staged.cost, staged.probability) == (11.0, 0.4)
        assert staged.time == 11.0        # sequential stages add up
        assert staged.ordering == ((nid(2, 1), nid(2, 2)),)
        solo = by_set[frozenset((nid(3),))]
        assert (solo.cost, solo.time, solo.time_serial) == (20.0, 20.0, 20.0)

    def test_sand_stage_pairs_cross_full_stage_leaf_sets(self):
        tree = tree_of(gate(GateKind.SAND, nid(),
                            gate(GateKind.AND, nid(1), leaf(1, 1), leaf(1, 2)),
                            leaf(2)))
        est = ScenarioEstimates(
            cost={nid(1, 1): 1, nid(1, 2): 1, nid(2): 1},
            probability={nid(1, 1): .5, nid(1, 2): .5, nid(2): .5},
            time={nid(1, 1): 3.0, nid(1, 2): 8.0, nid(2): 4.0})
        (scenario,) = enumerate_scenarios(tree, est)
        assert set(scenario.ordering) == {(nid(1, 1), nid(2)),
                                          (nid(1, 2), nid(2))}
        assert scenario.time == 12.0      # max(3, 8) + 4
        assert scenario.time_serial == 15.0

    def test_nested_sand_keeps_inner_pairs(self):
        tree = tree_of(gate(GateKind.SAND, nid(), leaf(1),
                            gate(GateKind.SAND, nid(2), leaf(2, 1), leaf(2, 2))))
        est = ScenarioEstimates(
            cost={nid(1): 1, nid(2, 1): 1, nid(2, 2): 1},
            probability={nid(1): .5, nid(2, 1): .5, nid(2, 2): .5})
        (scenario,) = enumerate_scenarios(tree, est)
        assert set(scenario.ordering) == {
            (nid(1), nid(2, 1)), (nid(1), nid(2, 2)),
            (nid(2, 1), nid(2, 2))}
        assert scenario.time is None and scenario.time_serial is None

    def test_without_times_scenario_times_are_none(self):
        est = ScenarioEstimates(cost=EST.cost, probability=EST.probability)
        assert all(s.time is None and s.time_serial is None
                   for s in enumerate_scenarios(SAMPLE, est))

    def test_explosion_carries_exact_count(self):
        wide = tree_of(gate(GateKind.AND, nid(), *(
            gate(GateKind.OR, nid(i), leaf(i, 1), leaf(i, 2))
            for i in range(1, 18))))
        est = ScenarioEstimates(
            cost={n.id: 1.0 for n in iter_expanded(wide.root) if n.is_leaf},
            probability={n.id: 0.5 for n in iter_expanded(wide.root)
                         if n.is_leaf})
        with pytest.raises(ScenarioExplosion) as exc:
            enumerate_scenarios(wide, est)
        assert exc.value.count == 2 ** 17
        assert exc.value.cap == DEFAULT_CAP
        assert enumerate_scenarios(wide, est, cap=2 ** 17)  # exactly at cap

    def test_incomplete_estimates_rejected(self):
        with pytest.raises(MissingEstimateError) as exc:
            enumerate_scenarios(SAMPLE, ScenarioEstimates(
                cost=EST.cost, probability={}))
        assert exc.value.domain == "success_prob"
        partial_time = dict(EST.time)
        del partial_time[nid(3)]
        with pytest.raises(MissingEstimateError):
            enumerate_scenarios(SAMPLE, ScenarioEstimates(
                cost=EST.cost, probability=EST.probability, time=partial_time))

    def test_empty_tree_enumerates_to_nothing(self):
        assert enumerate_scenarios(EMPTY, EST) == []

    def test_cap_must_be_positive(self):
        with pytest.raises(ValueError):
            enumerate_scenarios(SAMPLE, EST, cap=0)


class TestOptimization:
    def test_cheapest(self):
        scenario = cheapest_attack(SAMPLE, EST)
        assert scenario.leaves == (nid(2, 1), nid(2, 2))
        assert scenario.cost == 11.0

    def test_cheapest_tie_breaks_to_smallest_leaf_tuple(self):
        tree = tree_of(gate(GateKind.OR, nid(), leaf(2), leaf(1)))
        est = ScenarioEstimates(cost={nid(1): 3.0, nid(2): 3.0},
                                probability={nid(1): .5, nid(2): .5})
        assert cheapest_attack(tree, est).leaves == (nid(1),)

    def test_most_likely(self):
        scenario = most_likely_attack(SAMPLE, EST)
        assert scenario.leaves == (nid(2, 1), nid(2, 2))
        assert scenario.probability == pytest.approx(0.4)

    def test_most_likely_survives_zero_probabilities(self):
        tree = tree_of(gate(GateKind.OR, nid(),
                            gate(GateKind.AND, nid(1), leaf(1, 1), leaf(1, 2)),
                            leaf(2)))
        est = ScenarioEstimates(
            cost={nid(1, 1): 1, nid(1, 2): 1, nid(2): 1},
            probability={nid(1, 1): 0.0, nid(1, 2): 0.9, nid(2): 0.2})
        assert most_likely_attack(tree, est).leaves == (nid(2),)

    def test_single_scenario_queries_raise_on_empty_tree(self):
        with pytest.raises(InfeasibleTreeError):
            cheapest_attack(EMPTY, EST)
        with pytest.raises(InfeasibleTreeError):
            most_likely_attack(EMPTY, EST)

    def test_payoff(self):
        scenario = most_likely_attack(SAMPLE, EST)
        assert expected_payoff(scenario, 100.0) == pytest.approx(
            0.4 * 100.0 - 11.0)
        with pytest.raises(ValueError):
            expected_payoff(scenario, -1.0)


class TestBudget:
    def test_exact_set_and_ordering(self):
        within = attacks_within_budget(SAMPLE, EST, budget=12.0)
        assert [s.cost for s in within] == [11.0, 12.0]
        assert [s.cost for s in attacks_within_budget(SAMPLE, EST, 10.0)] == []
        got = {frozenset(s.leaves) for s in within}
        assert got == budget_oracle(SAMPLE, EST.cost, 12.0)

    def test_budget_boundary_is_inclusive(self):
        within = attacks_within_budget(SAMPLE, EST, budget=11.0)
        assert [s.cost for s in within] == [11.0]

    def test_results_sorted_by_cost_then_likelihood(self):
        within = attacks_within_budget(SAMPLE, EST, budget=1e9)
        assert [s.sort_key() for s in within] == sorted(
            s.sort_key() for s in within)

    def test_branch_and_bound_handles_huge_scenario_spaces(self):
        # 2^40 scenarios in total, but only one fits the budget
        wide = tree_of(gate(GateKind.AND, nid(), *(
            gate(GateKind.OR, nid(i), leaf(i, 1), leaf(i, 2))
            for i in range(1, 41))))
        cost = {}
        prob = {}
        for i in range(1, 41):
            cost[nid(i, 1)], cost[nid(i, 2)] = 1.0, 1000.0
            prob[nid(i, 1)] = prob[nid(i, 2)] = 0.5
        est = ScenarioEstimates(cost=cost, probability=prob)
        within = attacks_within_budget(wide, est, budget=45.0)
        assert len(within) == 1
        assert within[0].cost == 40.0

    def test_overflowing_result_set_raises(self):
        wide = tree_of(gate(GateKind.AND, nid(), *(
            gate(GateKind.OR, nid(i), leaf(i, 1), leaf(i, 2))
            for i in range(1, 8))))
        est = ScenarioEstimates(
            cost={n.id: 1.0 for n in iter_expanded(wide.root) if n.is_leaf},
            probability={n.id: .5 for n in iter_expanded(wide.root)
                         if n.is_leaf})
        with pytest.raises(ScenarioExplosion) as exc:
            attacks_within_budget(wide, est, budget=100.0, cap=10)
        assert exc.value.count is None and exc.value.cap == 10
        assert len(attacks_within_budget(wide, est, 100.0, cap=128)) == 128

    def test_empty_tree_has_no_affordable_attacks(self):
        assert attacks_within_budget(EMPTY, EST, 1e9) == []


class TestPareto:
    def test_sample_frontier(self):
        frontier = pareto_frontier(SAMPLE, EST)
        # (11, .4) dominates nothing else below; (12, .25) is dearer and less
        # likely; (20, .1) likewise: frontier is the staged scenario alone
        assert [frozenset(s.leaves) for s in frontier] == \
            [frozenset((nid(2, 1), nid(2, 2)))]
        assert {frozenset(s.leaves) for s in frontier} == \
            pareto_oracle(SAMPLE, EST.cost, EST.probability)

    def test_incomparable_points_all_kept(self):
        tree = tree_of(gate(GateKind.OR, nid(), leaf(1), leaf(2), leaf(3)))
        est = ScenarioEstimates(
            cost={nid(1): 1.0, nid(2): 2.0, nid(3): 3.0},
            probability={nid(1): 0.1, nid(2): 0.5, nid(3): 0.9})
        assert len(pareto_frontier(tree, est)) == 3

    def test_equal_cost_keeps_only_most_likely(self):
        tree = tree_of(gate(GateKind.OR, nid(), leaf(1), leaf(2)))
        est = ScenarioEstimates(cost={nid(1): 2.0, nid(2): 2.0},
                                probability={nid(1): 0.3, nid(2): 0.6})
        (kept,) = pareto_frontier(tree, est)
        assert kept.leaves == (nid(2),)

    def test_empty_tree(self):
        assert pareto_frontier(EMPTY, EST) == []


class TestSatisfies:
    def test_basic(self):
        assert satisfies(SAMPLE, {nid(3)})
        assert satisfies(SAMPLE, {nid(1, 1), nid(1, 2)})
        assert not satisfies(SAMPLE, {nid(1, 1)})
        assert not satisfies(SAMPLE, set())
        assert not satisfies(EMPTY, {nid(3)})

    def test_supersets_still_satisfy(self):
        assert satisfies(SAMPLE, {nid(1, 1), nid(1, 2), nid(3)})


class TestRandomAgreement:
    def run_cases(self, seed, rounds):
        rng = random.Random(seed)
        for _ in range(rounds):
            tree = random_expanded_tree(rng)
            yield rng, tree, random_estimates(rng, tree)

    def test_enumeration_and_optima_match_oracles(self):
        for rng, tree, est in self.run_cases(90125, 200):
            scenarios = enumerate_scenarios(tree, est)
            naive = tree_scenarios_naive(tree)
            assert len(scenarios) == count_scenarios(tree) == len(naive)
            assert {frozenset(s.leaves) for s in scenarios} == set(naive)

            cheapest = cheapest_attack(tree, est)
            assert cheapest.cost == min_cost_oracle(tree, est.cost)
            assert sum(est.cost[l] for l in cheapest.leaves) == cheapest.cost

            likely = most_likely_attack(tree, est)
            assert likely.probability == pytest.approx(
                max_prob_oracle(tree, est.probability), rel=1e-12)

            budget = rng.uniform(0.5, 1.5) * cheapest.cost + 1.0
            within = attacks_within_budget(tree, est, budget)
            assert {frozenset(s.leaves) for s in within} == \
                budget_oracle(tree, est.cost, budget)

            frontier = pareto_frontier(tree, est)
            assert {frozenset(s.leaves) for s in frontier} == \
                pareto_oracle(tree, est.cost, est.probability)

    def test_scenarios_are_minimal_and_satisfying(self):
        for _, tree, est in self.run_cases(777, 120):
            for s in enumerate_scenarios(tree, est):
                chosen = set(s.leaves)
                assert satisfies(tree, chosen)
                for dropped in s.leaves:
                    assert not satisfies(tree, chosen - {dropped})

    def test_scenario_probability_never_exceeds_root_aggregate(self):
        for _, tree, est in self.run_cases(31337, 120):
            root_prob = aggregate(tree, SUCCESS_PROB, est.probability).root
            for s in enumerate_scenarios(tree, est):
                assert s.probability <= root_prob + 1e-12

    def test_critical_path_equals_dag_longest_path(self):
        for _, tree, est in self.run_cases(555, 120):
            for s in enumerate_scenarios(tree, est):
                assert s.time == pytest.approx(
                    dag_longest_path(s, est.time), abs=1e-9)
                assert s.time_serial == pytest.approx(
                    sum(est.time[l] for l in s.leaves), abs=1e-9)

    def test_budget_sweep_is_monotonic(self):
        for rng, tree, est in self.run_cases(2024, 40):
            previous: set[frozenset] = set()
            low = min(est.cost.values())
            high = sum(est.cost.values())
            for step in range(8):
                budget = low + (high - low) * step / 7
                got = {frozenset(s.leaves)
                       for s in attacks_within_budget(tree, est, budget)}
                assert previous <= got
                previous = got
