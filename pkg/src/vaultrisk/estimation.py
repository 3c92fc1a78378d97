"""Uncertain leaf estimates and the analyses built on them.

File formats (tab-separated columns; runs of two-plus spaces also separate
columns so files can be hand-aligned; `#` at the start of a line or after
whitespace begins a comment — inside a token it is literal, so instance-tag
patterns like "A.1#2/*" stay writable):

Estimate sets — one row per rule, later rows override earlier ones:

    # pattern            domain        distribution
    *                    success_prob  0.05
    Steal from safe*     min_cost      pert(1000, 5000, 20000)
    A/b.2.1              min_time      lognormal(10, 40)

Attacker profiles — directive rows:

    name      Opportunistic burglar
    notes     No long cons, no custom hardware.
    exclude   Coerce participant*
    override  *            min_cost   triangular(100, 500, 2000)
    budget    10000

Countermeasure overlays — `set` replaces a leaf's distribution, `mul`
scales it, `add` shifts it; rows apply in declaration order:

    name  Watchtower white-list
    set   *watchtower*   success_prob  0
    mul   *HSM*          min_cost      2.5
    add   *              min_time      40

Patterns are shell-style globs (case-sensitive) tested against each leaf's
label, its qualified instance id (e.g. "C.3#1/j.2/b.2.1"), and its local id
(e.g. "b.2.1"); any of the three matching counts as a hit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from fnmatch import fnmatchcase
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .aggregation import (AttributeDomain, MissingEstimateError, aggregate,
                          get_domain)
from .expansion import ExpandedNode, ExpandedTree, iter_expanded
from .model import GateKind, NodeId
from .scenarios import (AttackScenario, ScenarioEstimates, attacks_within_budget,
                        cheapest_attack, expected_payoff, most_likely_attack,
                        pareto_frontier)

__all__ = [
    "Distribution",
    "InvalidDistribution",
    "EstimateRow",
    "EstimateSet",
    "AttackerProfile",
    "OverlayMod",
    "CountermeasureOverlay",
    "McSummary",
    "Z90",
    "RNG_NAME",
    "parse_distribution",
    "prune",
    "monte_carlo",
    "bayes_update",
    "diff_analysis",
    "run_query",
    "scenario_estimates",
]

# one-sided 90% normal quantile, pinning the lognormal(median, p90) spec
Z90 = 1.2815515655446004
RNG_NAME = "philox4x64"

# value ranges enforced on estimates, keyed by attribute domain
_DOMAIN_RANGE: dict[str, tuple[float, float]] = {
    "min_cost": (0.0, math.inf),
    "min_time": (0.0, math.inf),
    "min_time_lone": (0.0, math.inf),
    "success_prob": (0.0, 1.0),
    "feasible": (0.0, 1.0),
}


class InvalidDistribution(Exception):
    """A distribution spec is malformed or violates a parameter invariant."""


@dataclass(frozen=True)
class Distribution:
    """A leaf estimate: a base distribution plus an affine transform.

    kind is one of point(v), triangular(low, mode, high),
    pert(low, mode, high), lognormal(median, p90_upper), beta(alpha, beta).
    Samples and means are mapped through x*mul + shift and then clamped to
    the attribute domain's value range.
    """

    kind: str
    params: tuple[float, ...]
    mul: float = 1.0
    shift: float = 0.0

    def __post_init__(self) -> None:
        p = self.params
        if self.kind == "point":
            if len(p) != 1:
                raise InvalidDistribution("point takes one value")
        elif self.kind in ("triangular", "pert"):
            if len(p) != 3:
                raise InvalidDistribution(f"{self.kind} takes (low, mode, high)")
            low, mode, high = p
            if not low <= mode <= high:
                raise InvalidDistribution(
                    f"{self.kind} needs low <= mode <= high, got {p}")
        elif self.kind == "lognormal":
            if len(p) != 2:
                raise InvalidDistribution("lognormal takes (median, p90_upper)")
            median, upper = p
            if median <= 0 or upper < median:
                raise InvalidDistribution(
                    "lognormal needs 0 < median <= p90_upper")
        elif self.kind == "beta":
            if len(p) != 2:
                raise InvalidDistribution("beta takes (alpha, beta)")
            if p[0] <= 0 or p[1] <= 0:
                raise InvalidDistribution("beta needs alpha, beta > 0")
        else:
            raise InvalidDistribution(f"unknown distribution kind {self.kind!r}")

    # -- affine composition -------------------------------------------------
    def scaled(self, factor: float) -> "Distribution":
        return replace(self, mul=self.mul * factor, shift=self.shift * factor)

    def shifted(self, delta: float) -> "Distribution":
        return replace(self, shift=self.shift + delta)

    # -- statistics ----------------------------------------------------------
    def _base_mean(self) -> float:
        p = self.params
        if self.kind == "point":
            return p[0]
        if self.kind == "triangular":
            return (p[0] + p[1] + p[2]) / 3.0
        if self.kind == "pert":
            return (p[0] + 4.0 * p[1] + p[2]) / 6.0
        if self.kind == "lognormal":
            sigma = math.log(p[1] / p[0]) / Z90
            return math.exp(math.log(p[0]) + 0.5 * sigma * sigma)
        return p[0] / (p[0] + p[1])  # beta

    def _support(self) -> tuple[float, float]:
        p = self.params
        if self.kind == "point":
            base = (p[0], p[0])
        elif self.kind in ("triangular", "pert"):
            base = (p[0], p[2])
        elif self.kind == "lognormal":
            base = (0.0, math.inf)
        else:
            base = (0.0, 1.0)
        lo = base[0] * self.mul + self.shift
        hi = base[1] * self.mul + self.shift
        return (min(lo, hi), max(lo, hi))

    def mean(self, domain: str) -> float:
        lo, hi = _DOMAIN_RANGE.get(domain, (-math.inf, math.inf))
        return min(max(self._base_mean() * self.mul + self.shift, lo), hi)

    def validate_for(self, domain: str) -> list[str]:
        """Warnings for mass that the domain range will clamp away."""
        lo, hi = _DOMAIN_RANGE.get(domain, (-math.inf, math.inf))
        s_lo, s_hi = self._support()
        if s_lo < lo or s_hi > hi:
            return [f"{self.render()} support [{s_lo:g}, {s_hi:g}] clamped to "
                    f"{domain} range [{lo:g}, {hi:g}]"]
        return []

    def sample(self, rng: np.random.Generator, n: int, domain: str) -> np.ndarray:
        p = self.params
        if self.kind == "point":
            draws = np.full(n, p[0], dtype=np.float64)
        elif self.kind == "triangular":
            if p[0] == p[2]:
                draws = np.full(n, p[0], dtype=np.float64)
            else:
                draws = rng.triangular(p[0], p[1], p[2], size=n)
        elif self.kind == "pert":
            if p[0] == p[2]:
                draws = np.full(n, p[0], dtype=np.float64)
            else:
                spread = p[2] - p[0]
                a = 1.0 + 4.0 * (p[1] - p[0]) / spread
                b = 1.0 + 4.0 * (p[2] - p[1]) / spread
                draws = p[0] + spread * rng.beta(a, b, size=n)
        elif self.kind == "lognormal":
            sigma = math.log(p[1] / p[0]) / Z90
            draws = rng.lognormal(math.log(p[0]), sigma, size=n)
        else:
            draws = rng.beta(p[0], p[1], size=n)
        draws = draws * self.mul + self.shift
        lo, hi = _DOMAIN_RANGE.get(domain, (-math.inf, math.inf))
        return np.clip(draws, lo, hi)

    def render(self) -> str:
        def num(x: float) -> str:
            return format(x, "g")
        if self.kind == "point" and self.mul == 1.0 and self.shift == 0.0:
            return num(self.params[0])
        text = f"{self.kind}({', '.join(num(x) for x in self.params)})"
        if self.mul != 1.0:
            text = f"{text}*{num(self.mul)}"
        if self.shift != 0.0:
            text = f"{text}{'+' if self.shift >= 0 else '-'}{num(abs(self.shift))}"
        return text


_DIST_CALL = re.compile(r"^([a-z_]+)\s*\(([^()]*)\)$")


def parse_distribution(text: str) -> Distribution:
    text = text.strip()
    call = _DIST_CALL.match(text)
    if call:
        kind, raw_args = call.group(1), call.group(2)
        parts = [a.strip() for a in raw_args.split(",")] if raw_args.strip() else []
        try:
            args = tuple(float(a) for a in parts)
        except ValueError:
            raise InvalidDistribution(
                f"non-numeric parameter in {text!r}") from None
        return Distribution(kind, args)
    try:
        value = float(text)
    except ValueError:
        raise InvalidDistribution(
            f"expected a number or kind(args), got {text!r}") from None
    return Distribution("point", (value,))


# === tabular files ========================================================

_COLUMN_SPLIT = re.compile(r"\t+| {2,}")


_COMMENT = re.compile(r"(?:^|(?<=\s))#.*$")


def _rows(text: str) -> Iterable[tuple[int, list[str]]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        # comments need whitespace (or line start) before the '#': instance
        # tags such as "A.1#2" carry a literal '#' inside patterns
        line = _COMMENT.sub("", raw).rstrip()
        if not line.strip():
            continue
        yield lineno, [col.strip() for col in _COLUMN_SPLIT.split(line.strip())]


def _matches(pattern: str, leaf: NodeId, label: str) -> bool:
    return (fnmatchcase(label, pattern)
            or fnmatchcase(leaf.qualified(), pattern)
            or fnmatchcase(leaf.local(), pattern))


def _leaves_of(tree: ExpandedTree) -> list[tuple[NodeId, str]]:
    if tree.root is None:
        return []
    return [(n.id, n.label) for n in iter_expanded(tree.root) if n.is_leaf]


@dataclass(frozen=True)
class EstimateRow:
    pattern: str
    domain: str
    distribution: Distribution


@dataclass(frozen=True)
class EstimateSet:
    """An ordered rule list assigning distributions to leaves per domain.

    For each leaf and domain the last matching row wins, so generic
    defaults go first and specific exceptions after.
    """

    rows: tuple[EstimateRow, ...] = ()

    @classmethod
    def parse(cls, text: str, source: str = "<estimates>") -> "EstimateSet":
        rows: list[EstimateRow] = []
        for lineno, cols in _rows(text):
            if len(cols) != 3:
                raise ValueError(
                    f"{source}:{lineno}: expected 3 columns "
                    f"(pattern, domain, distribution), got {len(cols)}")
            pattern, domain, spec = cols
            if domain not in _DOMAIN_RANGE:
                raise ValueError(f"{source}:{lineno}: unknown domain {domain!r}")
            try:
                dist = parse_distribution(spec)
            except InvalidDistribution as exc:
                raise InvalidDistribution(f"{source}:{lineno}: {exc}") from None
            rows.append(EstimateRow(pattern, domain, dist))
        return cls(tuple(rows))

    def merged(self, extra: "EstimateSet") -> "EstimateSet":
        return EstimateSet(self.rows + extra.rows)

    def has_domain(self, domain: str) -> bool:
        return any(row.domain == domain for row in self.rows)

    def resolve(self, tree: ExpandedTree, domain: str,
                warnings: list[str] | None = None,
                partial: bool = False) -> dict[NodeId, Distribution]:
        """Last-match-wins distribution per leaf.

        Uncovered leaves raise unless partial=True, which simply leaves
        them out (callers with a leaf default use that).
        """
        resolved: dict[NodeId, Distribution] = {}
        missing: list[NodeId] = []
        for leaf, label in _leaves_of(tree):
            found: Distribution | None = None
            for row in self.rows:
                if row.domain == domain and _matches(row.pattern, leaf, label):
                    found = row.distribution
            if found is None:
                missing.append(leaf)
            else:
                resolved[leaf] = found
        if missing and not partial:
            raise MissingEstimateError(domain, missing)
        if warnings is not None:
            for leaf, dist in resolved.items():
                for note in dist.validate_for(domain):
                    warnings.append(f"{leaf.qualified()}: {note}")
        return resolved

    def point_values(self, tree: ExpandedTree, domain: str) -> dict[NodeId, float]:
        return {leaf: dist.mean(domain)
                for leaf, dist in self.resolve(tree, domain).items()}


# === attacker profiles ====================================================


@dataclass(frozen=True)
class AttackerProfile:
    """What a given attacker cannot or will not do, plus their economics."""

    name: str = "profile"
    excluded_leaves: tuple[str, ...] = ()
    attribute_overrides: tuple[EstimateRow, ...] = ()
    budget: float | None = None
    notes: str = ""

    @classmethod
    def parse(cls, text: str, source: str = "<profile>") -> "AttackerProfile":
        name, notes, budget = "profile", "", None
        excluded: list[str] = []
        overrides: list[EstimateRow] = []
        for lineno, cols in _rows(text):
            directive = cols[0]
            if directive == "name" and len(cols) == 2:
                name = cols[1]
            elif directive == "notes" and len(cols) == 2:
                notes = cols[1]
            elif directive == "exclude" and len(cols) == 2:
                excluded.append(cols[1])
            elif directive == "budget" and len(cols) == 2:
                budget = float(cols[1])
            elif directive == "override" and len(cols) == 4:
                pattern, domain, spec = cols[1], cols[2], cols[3]
                if domain not in _DOMAIN_RANGE:
                    raise ValueError(
                        f"{source}:{lineno}: unknown domain {domain!r}")
                try:
                    dist = parse_distribution(spec)
                except InvalidDistribution as exc:
                    raise InvalidDistribution(f"{source}:{lineno}: {exc}") from None
                overrides.append(EstimateRow(pattern, domain, dist))
            else:
                raise ValueError(
                    f"{source}:{lineno}: bad profile row {cols!r}; expected "
                    "name/notes/exclude/budget/override")
        return cls(name, tuple(excluded), tuple(overrides), budget, notes)

    def override_rows(self) -> EstimateSet:
        return EstimateSet(self.attribute_overrides)

    def unmatched_patterns(self, tree: ExpandedTree) -> list[str]:
        """Patterns that match no leaf — worth a warning, never an error."""
        leaves = _leaves_of(tree)
        out = []
        for pattern in (*self.excluded_leaves,
                        *(row.pattern for row in self.attribute_overrides)):
            if not any(_matches(pattern, leaf, label) for leaf, label in leaves):
                out.append(pattern)
        return out


def prune(tree: ExpandedTree, profile: AttackerProfile) -> ExpandedTree:
    """Remove leaves the profile excludes, collapsing what cannot succeed.

    An OR that loses every child disappears; an AND/SAND that loses any
    child is unsatisfiable and disappears as a whole. A fully unsatisfiable
    tree comes back with root=None (is_infeasible).
    """
    if tree.root is None or not profile.excluded_leaves:
        return tree

    def walk(node: ExpandedNode) -> ExpandedNode | None:
        if node.is_leaf:
            if any(_matches(p, node.id, node.label)
                   for p in profile.excluded_leaves):
                return None
            return node
        kept: list[ExpandedNode] = []
        for child in node.children:
            new_child = walk(child)
            if new_child is None:
                if node.gate is not GateKind.OR:
                    return None  # a conjunct died with it
            else:
                kept.append(new_child)
        if not kept:
            return None
        return replace(node, children=tuple(kept))

    return ExpandedTree(tree.root_key, tree.params, walk(tree.root))


# === countermeasure overlays ==============================================

_OVERLAY_OPS = ("set", "mul", "add")


@dataclass(frozen=True)
class OverlayMod:
    op: str  # set | mul | add
    pattern: str
    domain: str
    distribution: Distribution | None = None  # for set
    amount: float = 0.0  # for mul / add


@dataclass(frozen=True)
class CountermeasureOverlay:
    """A named bundle of estimate modifications, applied in declaration order."""

    name: str = "overlay"
    mods: tuple[OverlayMod, ...] = ()

    @classmethod
    def parse(cls, text: str, source: str = "<overlay>") -> "CountermeasureOverlay":
        name = "overlay"
        mods: list[OverlayMod] = []
        for lineno, cols in _rows(text):
            directive = cols[0]
            if directive == "name" and len(cols) == 2:
                name = cols[1]
                continue
            if directive not in _OVERLAY_OPS or len(cols) != 4:
                raise ValueError(
                    f"{source}:{lineno}: bad overlay row {cols!r}; expected "
                    "name, or set/mul/add with pattern, domain, value")
            op, pattern, domain, value = directive, cols[1], cols[2], cols[3]
            if domain not in _DOMAIN_RANGE:
                raise ValueError(f"{source}:{lineno}: unknown domain {domain!r}")
            if op == "set":
                try:
                    dist = parse_distribution(value)
                except InvalidDistribution as exc:
                    raise InvalidDistribution(f"{source}:{lineno}: {exc}") from None
                mods.append(OverlayMod(op, pattern, domain, distribution=dist))
            else:
                mods.append(OverlayMod(op, pattern, domain,
                                       amount=float(value)))
        return cls(name, tuple(mods))

    def apply(self, resolved: Mapping[NodeId, Distribution], domain: str,
              labels: Mapping[NodeId, str]) -> dict[NodeId, Distribution]:
        out = dict(resolved)
        for mod in self.mods:
            if mod.domain != domain:
                continue
            for leaf in out:
                if _matches(mod.pattern, leaf, labels.get(leaf, "")):
                    if mod.op == "set":
                        out[leaf] = mod.distribution
                    elif mod.op == "mul":
                        out[leaf] = out[leaf].scaled(mod.amount)
                    else:
                        out[leaf] = out[leaf].shifted(mod.amount)
        return out


# === resolution pipeline ==================================================


def resolve_distributions(tree: ExpandedTree, estimates: EstimateSet,
                          domain: str,
                          profile: AttackerProfile | None = None,
                          overlay: CountermeasureOverlay | None = None,
                          warnings: list[str] | None = None
                          ) -> dict[NodeId, Distribution]:
    """Base rows → profile overrides → overlay mods, for one domain."""
    effective = estimates
    if profile is not None and profile.attribute_overrides:
        effective = estimates.merged(profile.override_rows())
    resolved = effective.resolve(tree, domain, warnings)
    if overlay is not None:
        labels = dict(_leaves_of(tree))
        resolved = overlay.apply(resolved, domain, labels)
        if warnings is not None:
            for leaf, dist in resolved.items():
                for note in dist.validate_for(domain):
                    warnings.append(f"{leaf.qualified()}: {note}")
    return resolved


def point_values(tree: ExpandedTree, estimates: EstimateSet, domain: str,
                 profile: AttackerProfile | None = None,
                 overlay: CountermeasureOverlay | None = None
                 ) -> dict[NodeId, float]:
    resolved = resolve_distributions(tree, estimates, domain, profile, overlay)
    return {leaf: dist.mean(domain) for leaf, dist in resolved.items()}


def scenario_estimates(tree: ExpandedTree, estimates: EstimateSet,
                       profile: AttackerProfile | None = None,
                       overlay: CountermeasureOverlay | None = None
                       ) -> ScenarioEstimates:
    """Point values for scenario queries; times only when fully estimated."""
    cost = point_values(tree, estimates, "min_cost", profile, overlay)
    prob = point_values(tree, estimates, "success_prob", profile, overlay)
    time: dict[NodeId, float] | None
    if estimates.has_domain("min_time") or (
            profile is not None
            and any(r.domain == "min_time" for r in profile.attribute_overrides)):
        time = point_values(tree, estimates, "min_time", profile, overlay)
    else:
        time = None
    return ScenarioEstimates(cost=cost, probability=prob, time=time)


# === Monte Carlo ==========================================================

_EXCEEDANCE_GRID = [round(q * 0.05, 2) for q in range(21)]


@dataclass(frozen=True)
class McSummary:
    domain: str
    trials: int
    seed: int
    rng: str
    mean: float
    sd: float
    p5: float
    p50: float
    p95: float
    exceedance: tuple[tuple[float, float], ...]  # (value, P[result > value])

    def to_dict(self) -> dict[str, Any]:
        return {
            "domain": self.domain, "trials": self.trials, "seed": self.seed,
            "rng": self.rng, "mean": self.mean, "sd": self.sd,
            "p5": self.p5, "p50": self.p50, "p95": self.p95,
            "exceedance": [{"value": v, "prob_exceed": p}
                           for v, p in self.exceedance],
        }


def monte_carlo(tree: ExpandedTree,
                distributional_estimates: "EstimateSet | Mapping[NodeId, Distribution]",
                domain: str | AttributeDomain, trials: int,
                seed: int) -> McSummary:
    """Propagate leaf uncertainty to the root by simulation.

    Each leaf draws from its own counter-based stream keyed by
    (seed, leaf position in document order), so results are deterministic
    for a fixed seed and trial count, and independent of any parallel
    scheduling of the aggregation itself.
    """
    dom = get_domain(domain) if isinstance(domain, str) else domain
    if dom.value_type != "number":
        raise ValueError(f"domain {dom.name} is not sampleable")
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must fit in 64 bits")
    if tree.root is None:
        value = float(dom.or_identity)
        grid = tuple((value, round(1.0 - q, 2)) for q in _EXCEEDANCE_GRID)
        return McSummary(dom.name, trials, seed, RNG_NAME,
                         value, 0.0, value, value, value, grid)

    if isinstance(distributional_estimates, EstimateSet):
        resolved = distributional_estimates.resolve(tree, dom.name)
    else:
        resolved = dict(distributional_estimates)
        missing = [leaf for leaf, _ in _leaves_of(tree) if leaf not in resolved]
        if missing:
            raise MissingEstimateError(dom.name, missing)

    samples: dict[NodeId, np.ndarray] = {}
    for index, (leaf, _) in enumerate(_leaves_of(tree)):
        stream = np.random.Generator(
            np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))
        samples[leaf] = resolved[leaf].sample(stream, trials, dom.name)

    def fold(node: ExpandedNode) -> np.ndarray:
        if node.is_leaf:
            return samples[node.id]
        vec = dom.vec_for(node.gate)
        return vec([fold(child) for child in node.children])

    values = fold(tree.root)
    if bool(np.all(values == values[0])):
        # constant sample: statistics are exact, no floating summation noise
        value = float(values[0])
        grid = tuple((value, round(1.0 - q, 2)) for q in _EXCEEDANCE_GRID)
        return McSummary(dom.name, trials, seed, RNG_NAME,
                         value, 0.0, value, value, value, grid)
    quantiles = np.quantile(values, _EXCEEDANCE_GRID)
    grid = tuple((float(v), round(1.0 - q, 2))
                 for v, q in zip(quantiles, _EXCEEDANCE_GRID))
    sd = float(np.std(values, ddof=1)) if trials > 1 else 0.0
    return McSummary(dom.name, trials, seed, RNG_NAME,
                     float(np.mean(values)), sd,
                     float(np.quantile(values, 0.05)),
                     float(np.quantile(values, 0.50)),
                     float(np.quantile(values, 0.95)),
                     grid)


# === Bayesian updating ====================================================


def bayes_update(prior: Distribution, successes: int, failures: int) -> Distribution:
    """Conjugate beta update: beta(a, b) + evidence → beta(a+s, b+f)."""
    if prior.kind != "beta" or prior.mul != 1.0 or prior.shift != 0.0:
        raise InvalidDistribution("bayes_update needs an untransformed beta prior")
    if successes < 0 or failures < 0:
        raise ValueError("evidence counts must be non-negative")
    a, b = prior.params
    return Distribution("beta", (a + successes, b + failures))


# === query dispatch and differential analysis =============================

_QUERY_FORMS = ("aggregate:<domain>", "cheapest", "most-likely",
                "budget[:<amount>]", "pareto", "payoff[:<gain>]",
                "montecarlo:<domain>:<trials>")


def _scenario_dict(s: AttackScenario, labels: Mapping[NodeId, str]
                   ) -> dict[str, Any]:
    return {
        "leaves": [leaf.qualified() for leaf in s.leaves],
        "labels": [labels.get(leaf, "") for leaf in s.leaves],
        "cost": s.cost,
        "probability": s.probability,
        "time": s.time,
        "time_serial": s.time_serial,
        "ordering": [[a.qualified(), b.qualified()] for a, b in s.ordering],
    }


def run_query(tree: ExpandedTree, estimates: EstimateSet, query: str, *,
              profile: AttackerProfile | None = None,
              overlay: CountermeasureOverlay | None = None,
              gain: float | None = None,
              seed: int = 0) -> dict[str, Any]:
    """Evaluate one query string against a tree; returns a JSON-ready dict.

    Forms: aggregate:<domain> | cheapest | most-likely | budget:<amount>
    (bare `budget` uses the profile's budget) | pareto | payoff:<gain>
    (bare `payoff` uses the supplied gain) | montecarlo:<domain>:<trials>.
    """
    labels = dict(_leaves_of(tree))
    head, _, rest = query.partition(":")

    if head == "aggregate":
        dom = get_domain(rest)
        if tree.root is None:
            root_value: Any = dom.or_identity
        else:
            if dom.name == "feasible":
                # feasible rows are optional; uncovered leaves default True
                effective = estimates
                if profile is not None and profile.attribute_overrides:
                    effective = estimates.merged(profile.override_rows())
                resolved = effective.resolve(tree, dom.name, partial=True)
                if overlay is not None:
                    if any(m.domain == dom.name for m in overlay.mods):
                        for leaf, _ in _leaves_of(tree):
                            resolved.setdefault(leaf, Distribution("point", (1.0,)))
                    resolved = overlay.apply(resolved, dom.name,
                                             dict(_leaves_of(tree)))
                values: Mapping[NodeId, Any] = {
                    leaf: dist.mean(dom.name) > 0.5
                    for leaf, dist in resolved.items()}
            else:
                values = point_values(tree, estimates, dom.name, profile, overlay)
            root_value = aggregate(tree, dom, values).root
        if dom.value_type == "boolean":
            root_value = bool(root_value)
        else:
            root_value = float(root_value)
        return {"query": query, "domain": dom.name, "value": root_value}

    if head == "montecarlo":
        domain_name, _, trials_text = rest.partition(":")
        trials = int(trials_text)
        resolved = resolve_distributions(tree, estimates, domain_name,
                                         profile, overlay)
        summary = monte_carlo(tree, resolved, domain_name, trials, seed)
        return {"query": query, **summary.to_dict()}

    est = scenario_estimates(tree, estimates, profile, overlay)

    if head == "cheapest":
        if tree.root is None:
            return {"query": query, "scenario": None}
        return {"query": query,
                "scenario": _scenario_dict(cheapest_attack(tree, est), labels)}

    if head == "most-likely":
        if tree.root is None:
            return {"query": query, "scenario": None}
        return {"query": query,
                "scenario": _scenario_dict(most_likely_attack(tree, est), labels)}

    if head == "budget":
        if rest:
            amount = float(rest)
        elif profile is not None and profile.budget is not None:
            amount = profile.budget
        else:
            raise ValueError("budget query needs an amount "
                             "(budget:<amount>) or a profile with one")
        found = attacks_within_budget(tree, est, amount)
        return {"query": query, "budget": amount, "count": len(found),
                "scenarios": [_scenario_dict(s, labels) for s in found]}

    if head == "pareto":
        found = pareto_frontier(tree, est)
        return {"query": query, "count": len(found),
                "scenarios": [_scenario_dict(s, labels) for s in found]}

    if head == "payoff":
        if rest:
            amount = float(rest)
        elif gain is not None:
            amount = gain
        else:
            raise ValueError("payoff query needs a gain "
                             "(payoff:<gain>) or deployment payoff")
        if tree.root is None:
            return {"query": query, "gain": amount, "payoff": None,
                    "scenario": None}
        best = most_likely_attack(tree, est)
        return {"query": query, "gain": amount,
                "payoff": expected_payoff(best, amount),
                "scenario": _scenario_dict(best, labels)}

    raise ValueError(f"unknown query {query!r}; forms: {', '.join(_QUERY_FORMS)}")


def diff_analysis(tree: ExpandedTree, estimates: EstimateSet,
                  overlays: Sequence[CountermeasureOverlay],
                  queries: Sequence[str] | None = None, *,
                  profile: AttackerProfile | None = None,
                  gain: float | None = None,
                  seed: int = 0) -> dict[str, Any]:
    """Rerun the same queries for the baseline and each overlay, from scratch.

    Default queries: min_cost and success_prob aggregates, the cheapest and
    most likely attacks, and (when a gain is known) the expected pay-off.
    """
    if queries is None:
        queries = ["aggregate:min_cost", "aggregate:success_prob",
                   "cheapest", "most-likely"]
        if gain is not None:
            queries = [*queries, "payoff"]
    names = [overlay.name for overlay in overlays]
    duplicates = {n for n in names if names.count(n) > 1}
    if duplicates or "baseline" in names:
        bad = sorted(duplicates | ({"baseline"} & set(names)))
        raise ValueError(f"overlay names must be unique and not 'baseline': {bad}")

    def row(overlay: CountermeasureOverlay | None) -> dict[str, Any]:
        return {q: run_query(tree, estimates, q, profile=profile,
                             overlay=overlay, gain=gain, seed=seed)
                for q in queries}

    table: dict[str, Any] = {"baseline": row(None)}
    for overlay in overlays:
        table[overlay.name] = row(overlay)
    return {"queries": list(queries), "rows": table}
