"""Risk quantification for vault-based custody operations.

Attack-tree libraries are parsed from a small text DSL, expanded against
deployment parameters (reference resolution, multiplicity unrolling,
partition constraints), and queried: bottom-up attribute aggregation,
scenario search, Monte Carlo propagation of uncertain estimates, Bayesian
updating, attacker-profile pruning, and countermeasure comparisons. A
transcribed corpus for a Revault-style vault deployment ships with the
package.
"""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    DeploymentParams,
    Diagnostic,
    Gate,
    GateKind,
    IntExpr,
    LibraryMetadata,
    NodeId,
    TreeLibrary,
    TreeNode,
    UnboundParameterError,
    UnknownKeyError,
    iter_nodes,
    reference_closure,
    validate_library,
)
from .dsl import (  # noqa: E402
    ParseDiagnostic,
    ParseResult,
    parse_files,
    parse_library,
    serialize_library,
)
from .expansion import (  # noqa: E402
    ExpandedNode,
    ExpandedTree,
    ExpansionError,
    InvalidMultiplicityError,
    ZeroMultiplicityUnderConjunction,
    expand,
    iter_expanded,
    leaf_count,
    leaf_inventory,
    node_count,
)
from .aggregation import (  # noqa: E402
    BUILTIN_DOMAINS,
    AttributeDomain,
    MissingEstimateError,
    TooLargeError,
    aggregate,
    check_against_oracle,
    get_domain,
)
from .scenarios import (  # noqa: E402
    AttackScenario,
    InfeasibleTreeError,
    ScenarioEstimates,
    ScenarioExplosion,
    attacks_within_budget,
    cheapest_attack,
    count_scenarios,
    enumerate_scenarios,
    expected_payoff,
    most_likely_attack,
    pareto_frontier,
    satisfies,
)
from .estimation import (  # noqa: E402
    AttackerProfile,
    CountermeasureOverlay,
    Distribution,
    EstimateSet,
    InvalidDistribution,
    McSummary,
    bayes_update,
    diff_analysis,
    monte_carlo,
    parse_distribution,
    prune,
    run_query,
)
from .corpus import (  # noqa: E402
    CORPUS_VERSION,
    DEFAULT_PARAMS,
    PROTOCOL_REVISION,
    CorpusError,
    CorpusManifest,
    corpus_manifest,
    corpus_stats,
    load_corpus,
)
from .dot import render_dot  # noqa: E402

__all__ = [
    "__version__",
    # model
    "DeploymentParams", "Diagnostic", "Gate", "GateKind", "IntExpr",
    "LibraryMetadata", "NodeId", "TreeLibrary", "TreeNode",
    "UnboundParameterError", "UnknownKeyError", "iter_nodes",
    "reference_closure", "validate_library",
    # dsl
    "ParseDiagnostic", "ParseResult", "parse_files", "parse_library",
    "serialize_library",
    # expansion
    "ExpandedNode", "ExpandedTree", "ExpansionError",
    "InvalidMultiplicityError", "ZeroMultiplicityUnderConjunction", "expand",
    "iter_expanded", "leaf_count", "leaf_inventory", "node_count",
    # aggregation
    "BUILTIN_DOMAINS", "AttributeDomain", "MissingEstimateError",
    "TooLargeError", "aggregate", "check_against_oracle", "get_domain",
    # scenarios
    "AttackScenario", "InfeasibleTreeError", "ScenarioEstimates",
    "ScenarioExplosion", "attacks_within_budget", "cheapest_attack",
    "count_scenarios", "enumerate_scenarios", "expected_payoff",
    "most_likely_attack", "pareto_frontier", "satisfies",
    # estimation
    "AttackerProfile", "CountermeasureOverlay", "Distribution", "EstimateSet",
    "InvalidDistribution", "McSummary", "bayes_update", "diff_analysis",
    "monte_carlo", "parse_distribution", "prune", "run_query",
    # corpus
    "CORPUS_VERSION", "DEFAULT_PARAMS", "PROTOCOL_REVISION", "CorpusError",
    "CorpusManifest", "corpus_manifest", "corpus_stats", "load_corpus",
    # dot
    "render_dot",
]
