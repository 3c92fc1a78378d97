"""Command-line front end.

Subcommands: validate, analyze, export-dot, diff, stats. Exit codes:
0 success, 1 validation/analysis findings, 2 usage or I/O errors.

The bundled corpus is used unless RISK_CORPUS_DIR points at a directory of
`.atk` files. Deployment parameters go on --params as KEY=INT pairs; the
size-style keys contain pipe characters and need shell quoting, e.g.

    vaultrisk analyze B --params N=3 M=2 K=2 W_total=3 "|D|"=1 "|U|"=1 \
        --estimates samples/estimates.tsv --query budget:10000
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Sequence

from . import __version__
from .corpus import (CORPUS_VERSION, DEFAULT_PARAMS, PROTOCOL_REVISION,
                     CorpusError, corpus_stats, load_corpus)
from .dsl import ParseDiagnostic, parse_files
from .dot import render_dot
from .estimation import (AttackerProfile, CountermeasureOverlay, EstimateSet,
                         InvalidDistribution, diff_analysis, prune, run_query)
from .expansion import ExpansionError, expand
from .model import (DeploymentParams, Diagnostic, NodeId,
                    UnboundParameterError, validate_library)
from .report import build_report, render_json

EX_OK = 0
EX_FINDINGS = 1
EX_USAGE = 2


class _UsageError(Exception):
    pass


# === shared helpers =======================================================


def _parse_param_pairs(pairs: Sequence[str] | None,
                       payoff: float | None) -> DeploymentParams:
    bindings: dict[str, int] = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        key = key.strip()
        if not sep or not key:
            raise _UsageError(f"--params takes KEY=INT pairs, got {pair!r}")
        try:
            bindings[key] = int(value)
        except ValueError:
            raise _UsageError(f"parameter {key!r} needs an integer, "
                              f"got {value!r}") from None
    if not bindings:
        bindings = dict(DEFAULT_PARAMS.bindings)
    try:
        return DeploymentParams(bindings, payoff=payoff)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _parse_diag_dict(d: ParseDiagnostic) -> dict[str, Any]:
    return {"severity": d.severity, "message": d.message,
            "file": d.file, "line": d.line, "col": d.col}


def _model_diag_dict(d: Diagnostic) -> dict[str, Any]:
    path = NodeId(d.tree, d.path).local() if d.tree is not None else None
    return {"severity": d.severity, "code": d.code, "message": d.message,
            "tree": d.tree, "path": path}


def _warning_dict(message: str) -> dict[str, Any]:
    return {"severity": "warning", "message": message}


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _load_inputs(args: argparse.Namespace):
    """Corpus → params → expand → optional prune; shared by analysis commands."""
    library = load_corpus()
    payoff = getattr(args, "payoff", None)
    params = _parse_param_pairs(args.params, payoff)
    if args.tree not in library.trees:
        raise _UsageError(
            f"unknown tree {args.tree!r}; corpus has: "
            f"{', '.join(sorted(library.trees))}")
    tree = expand(library, args.tree, params)
    profile = None
    warnings: list[str] = []
    if getattr(args, "profile", None):
        profile = AttackerProfile.parse(_read_text(args.profile), args.profile)
        for pattern in profile.unmatched_patterns(tree):
            warnings.append(
                f"profile pattern {pattern!r} matches no leaf of {args.tree}")
        tree = prune(tree, profile)
    return library, params, tree, profile, warnings


def _load_estimates(args: argparse.Namespace) -> EstimateSet:
    if not getattr(args, "estimates", None):
        raise _UsageError("--estimates FILE is required for this command")
    return EstimateSet.parse(_read_text(args.estimates), args.estimates)


def _load_overlays(paths: Sequence[str] | None) -> list[CountermeasureOverlay]:
    return [CountermeasureOverlay.parse(_read_text(p), p) for p in paths or ()]


def _clamp_warnings(tree, estimates: EstimateSet, profile) -> list[str]:
    notes: list[str] = []
    for domain in ("min_cost", "min_time", "success_prob"):
        if estimates.has_domain(domain):
            effective = estimates
            if profile is not None and profile.attribute_overrides:
                effective = estimates.merged(profile.override_rows())
            effective.resolve(tree, domain, warnings=notes, partial=True)
    seen: set[str] = set()
    unique = []
    for note in notes:
        if note not in seen:
            seen.add(note)
            unique.append(note)
    return unique


# === subcommands ==========================================================


def _cmd_validate(args: argparse.Namespace) -> int:
    diagnostics: list[dict[str, Any]] = []
    files: list[str]
    if args.files:
        files = list(args.files)
        result = parse_files(files)
        diagnostics.extend(_parse_diag_dict(d) for d in result.diagnostics)
        if result.library is not None:
            diagnostics.extend(
                _model_diag_dict(d) for d in validate_library(result.library))
    else:
        files = []
        try:
            load_corpus()
        except CorpusError as exc:
            diagnostics.append({"severity": "error", "message": str(exc)})
    has_errors = any(d["severity"] == "error" for d in diagnostics)
    if args.format == "json":
        document = {"command": "validate", "ok": not has_errors,
                    "files": files, "diagnostics": diagnostics}
        _emit(render_json(document), args.out)
    else:
        for d in diagnostics:
            where = d.get("file") or d.get("tree") or ""
            line = f":{d['line']}" if d.get("line") else ""
            prefix = f"{where}{line}: " if where else ""
            print(f"{prefix}{d['severity']}: {d['message']}", file=sys.stderr)
        if not has_errors:
            what = f"{len(files)} file(s)" if files else "corpus"
            print(f"ok: {what} validated", file=sys.stderr)
    return EX_FINDINGS if has_errors else EX_OK


def _cmd_analyze(args: argparse.Namespace) -> int:
    payoff = args.payoff
    try:
        _, params, tree, profile, warnings = _load_inputs(args)
    except (ExpansionError, UnboundParameterError) as exc:
        # parameters bound fine as flags but the tree cannot exist for them
        document = build_report(
            "analyze", version=__version__, corpus_version=CORPUS_VERSION,
            protocol_revision=PROTOCOL_REVISION, seed=args.seed,
            payoff=payoff, tree=args.tree, results=[],
            diagnostics=[{"severity": "error",
                          "code": type(exc).__name__,
                          "message": str(exc), "tree": args.tree}])
        _emit(render_json(document), args.out)
        return EX_FINDINGS
    estimates = _load_estimates(args)
    overlays = _load_overlays(args.overlay)
    overlay = None
    if overlays:
        mods = tuple(m for o in overlays for m in o.mods)
        name = "+".join(o.name for o in overlays)
        overlay = CountermeasureOverlay(name, mods)
    warnings.extend(_clamp_warnings(tree, estimates, profile))
    queries: list[str] = args.query or ["aggregate:min_cost",
                                        "aggregate:success_prob", "cheapest"]

    def evaluate(query: str) -> dict[str, Any]:
        try:
            return run_query(tree, estimates, query, profile=profile,
                             overlay=overlay, gain=params.payoff,
                             seed=args.seed)
        except Exception as exc:  # every failure becomes a named object
            return {"query": query,
                    "error": {"type": type(exc).__name__, "message": str(exc)}}

    workers = max(1, args.workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, queries))
    else:
        results = [evaluate(q) for q in queries]

    document = build_report(
        "analyze", version=__version__, corpus_version=CORPUS_VERSION,
        protocol_revision=PROTOCOL_REVISION, seed=args.seed,
        params=params.bindings, payoff=params.payoff, tree=args.tree,
        results=results,
        diagnostics=[_warning_dict(w) for w in warnings])
    if profile is not None:
        document["metadata"]["profile"] = profile.name
    if overlay is not None:
        document["metadata"]["overlay"] = overlay.name
    if tree.root is None:
        document["metadata"]["infeasible"] = True
    _emit(render_json(document), args.out)
    failed = any("error" in r for r in results)
    return EX_FINDINGS if failed else EX_OK


def _cmd_export_dot(args: argparse.Namespace) -> int:
    _, _, tree, _, warnings = _load_inputs(args)
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    _emit(render_dot(tree), args.out)
    return EX_OK


def _cmd_diff(args: argparse.Namespace) -> int:
    _, params, tree, profile, warnings = _load_inputs(args)
    estimates = _load_estimates(args)
    overlays = _load_overlays(args.overlay)
    if not overlays:
        raise _UsageError("diff needs at least one --overlay file")
    warnings.extend(_clamp_warnings(tree, estimates, profile))
    table = diff_analysis(tree, estimates, overlays, args.query or None,
                          profile=profile, gain=params.payoff, seed=args.seed)
    document = build_report(
        "diff", version=__version__, corpus_version=CORPUS_VERSION,
        seed=args.seed, params=params.bindings, payoff=params.payoff,
        tree=args.tree, diagnostics=[_warning_dict(w) for w in warnings],
        extra=table)
    del document["results"]
    if args.format == "json":
        _emit(render_json(document), args.out)
    else:
        _emit(_render_diff_text(table), args.out)
    return EX_OK


def _cell(result: dict[str, Any]) -> str:
    if "error" in result:
        return f"error:{result['error']['type']}"
    if "value" in result:
        value = result["value"]
        return f"{value:.6g}" if isinstance(value, float) else str(value)
    if "payoff" in result:
        return "-" if result["payoff"] is None else f"{result['payoff']:.6g}"
    if "scenario" in result:
        scenario = result["scenario"]
        if scenario is None:
            return "infeasible"
        if result["query"].startswith("most-likely"):
            return f"p={scenario['probability']:.6g}"
        return f"cost={scenario['cost']:.6g}"
    if "scenarios" in result:
        return f"{result['count']} scenarios"
    if "mean" in result:
        return f"mean={result['mean']:.6g}"
    return "-"


def _render_diff_text(table: dict[str, Any]) -> str:
    queries = table["queries"]
    names = list(table["rows"])
    widths = [max(len("overlay"), *(len(n) for n in names))]
    cells = {name: [_cell(table["rows"][name][q]) for q in queries]
             for name in names}
    for index, query in enumerate(queries):
        widths.append(max(len(query), *(len(cells[n][index]) for n in names)))
    header = ["overlay".ljust(widths[0])]
    header += [q.ljust(widths[i + 1]) for i, q in enumerate(queries)]
    lines = ["  ".join(header).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for name in names:
        row = [name.ljust(widths[0])]
        row += [cells[name][i].ljust(widths[i + 1]) for i in range(len(queries))]
        lines.append("  ".join(row).rstrip())
    return "\n".join(lines) + "\n"


def _cmd_stats(args: argparse.Namespace) -> int:
    params = _parse_param_pairs(args.params, None)
    rows = corpus_stats(params)
    if args.format == "json":
        document = {"command": "stats", "params": params.bindings, "rows": rows}
        _emit(render_json(document), args.out)
    else:
        lines = [f"{'tree':<6}{'nodes':>8}{'leaves':>8}  scenarios"]
        for row in rows:
            lines.append(f"{row['tree']:<6}{row['nodes']:>8}{row['leaves']:>8}"
                         f"  {row['scenarios']}")
        _emit("\n".join(lines) + "\n", args.out)
    return EX_OK


# === entry point ==========================================================


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vaultrisk",
        description="Risk quantification over attack-tree models of "
                    "vault-based custody operations.")
    parser.add_argument("--version", action="version",
                        version=f"vaultrisk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, *, params: bool = True) -> None:
        if params:
            p.add_argument("--params", nargs="*", metavar="KEY=INT",
                           help="deployment parameters (quote keys like "
                                '"|D|"=1); defaults to the baseline')
        p.add_argument("--out", metavar="FILE",
                       help="write output here instead of standard output")

    p_validate = sub.add_parser("validate",
                                help="parse and validate tree files "
                                     "(or the active corpus)")
    p_validate.add_argument("files", nargs="*", metavar="FILE")
    p_validate.add_argument("--format", choices=("text", "json"),
                            default="text")
    p_validate.add_argument("--out", metavar="FILE")
    p_validate.set_defaults(func=_cmd_validate)

    p_analyze = sub.add_parser("analyze", help="expand a tree and run queries")
    p_analyze.add_argument("tree", metavar="TREE")
    common(p_analyze)
    p_analyze.add_argument("--estimates", metavar="FILE", required=True)
    p_analyze.add_argument("--profile", metavar="FILE")
    p_analyze.add_argument("--overlay", action="append", metavar="FILE")
    p_analyze.add_argument("--query", action="append", metavar="QUERY",
                           help="aggregate:<domain> | cheapest | most-likely |"
                                " budget:<amount> | pareto | payoff:<gain> |"
                                " montecarlo:<domain>:<trials>")
    p_analyze.add_argument("--seed", type=int, default=0)
    p_analyze.add_argument("--workers", type=int, default=1)
    p_analyze.add_argument("--payoff", type=float, default=None,
                           help="funds at risk, used by payoff queries")
    p_analyze.set_defaults(func=_cmd_analyze)

    p_dot = sub.add_parser("export-dot", help="render an expanded tree as DOT")
    p_dot.add_argument("tree", metavar="TREE")
    common(p_dot)
    p_dot.add_argument("--profile", metavar="FILE")
    p_dot.set_defaults(func=_cmd_export_dot)

    p_diff = sub.add_parser("diff",
                            help="compare countermeasure overlays "
                                 "against the baseline")
    p_diff.add_argument("tree", metavar="TREE")
    common(p_diff)
    p_diff.add_argument("--estimates", metavar="FILE", required=True)
    p_diff.add_argument("--profile", metavar="FILE")
    p_diff.add_argument("--overlay", action="append", metavar="FILE",
                        required=True)
    p_diff.add_argument("--query", action="append", metavar="QUERY")
    p_diff.add_argument("--seed", type=int, default=0)
    p_diff.add_argument("--payoff", type=float, default=None)
    p_diff.add_argument("--format", choices=("text", "json"), default="json")
    p_diff.set_defaults(func=_cmd_diff)

    p_stats = sub.add_parser("stats", help="corpus size table at given params")
    common(p_stats)
    p_stats.add_argument("--format", choices=("text", "json"), default="text")
    p_stats.set_defaults(func=_cmd_stats)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_USAGE
    except CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_USAGE
    except (ValueError, InvalidDistribution) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_USAGE
    except Exception as exc:  # analysis failures: findings, not crashes
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EX_FINDINGS


if __name__ == "__main__":
    sys.exit(main())
