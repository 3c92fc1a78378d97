"""Bundled attack-tree corpus for a Revault-style vault deployment.

Eleven shared sub-trees (keys a–k) and eleven top-level attack trees
(keys A–K), shipped as `.atk` files next to this module. The environment
variable RISK_CORPUS_DIR points the loader at an alternative directory
containing `.atk` files, for corpus experiments without reinstalling.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..dsl import parse_library
from ..expansion import expand, leaf_count, node_count
from ..model import DeploymentParams, TreeLibrary, validate_library
from ..scenarios import count_scenarios

__all__ = [
    "CORPUS_ENV_VAR",
    "CORPUS_VERSION",
    "PROTOCOL_REVISION",
    "SUB_TREES",
    "ATTACK_TREES",
    "DEFAULT_PARAMS",
    "CorpusError",
    "CorpusManifest",
    "load_corpus",
    "corpus_manifest",
    "corpus_stats",
]

CORPUS_ENV_VAR = "RISK_CORPUS_DIR"
CORPUS_VERSION = "1.0.0"
# revision of the protocol specification this model was written against
PROTOCOL_REVISION = "609b40dda07155abe5cd4a5af77fc2211d11fbc1"

SUB_TREES = tuple("abcdefghijk")
ATTACK_TREES = tuple("ABCDEFGHIJK")

# baseline deployment: 3 watchtower-guarded stakeholders, 2 managers acting
# 2-of-2, one deposit / one unvaulting attempt / one unvault expiration in
# flight. X (the unvault lock-time) never occurs in a multiplicity, so it
# needs no binding here.
DEFAULT_PARAMS = DeploymentParams({
    "N": 3, "M": 2, "K": 2, "W_total": 3, "|D|": 1, "|U|": 1, "|E|": 1,
})

# Scoping assumptions the model inherits; risks below are treated as benign
# and deliberately have no nodes in any tree.
ASSUMPTIONS = (
    "The Bitcoin network keeps its liveness and availability properties.",
    "Hash rate is high enough that chain reorganizations never reach deeper "
    "than the unvault transaction's relative lock-time.",
    "The transaction model is robust: scripts enforce the intended access "
    "control, with no surprises from malleability or network propagation.",
    "Initialization was secure: keys and backups correctly and privately "
    "created per participant, software and hardware integrity verified, and "
    "public wallet/communication configuration correctly shared across "
    "wallet clients, watchtowers, anti-replay oracles, and the coordinator.",
    "The communication layer provides the authentication and confidentiality "
    "each message needs.",
    "Deployed software faithfully implements the protocol (the development "
    "life-cycle itself is not attacked).",
    "Deposit transactions lock funds to the intended deposit descriptor; "
    "their creators are not man-in-the-middled to an attacker's address.",
)


class CorpusError(Exception):
    """The bundled (or substituted) corpus failed to parse or validate."""


def _corpus_documents(directory: str | os.PathLike | None
                      ) -> list[tuple[str, str]]:
    if directory is None:
        directory = os.environ.get(CORPUS_ENV_VAR) or None
    documents: list[tuple[str, str]] = []
    if directory is not None:
        root = Path(directory)
        if not root.is_dir():
            raise CorpusError(f"corpus directory not found: {root}")
        for path in sorted(root.glob("*.atk")):
            documents.append((path.name, path.read_text(encoding="utf-8")))
    else:
        package = resources.files(__package__)
        for entry in package.iterdir():
            if entry.name.endswith(".atk"):
                documents.append((entry.name, entry.read_text(encoding="utf-8")))
        documents.sort(key=lambda pair: pair[0])
    if not documents:
        raise CorpusError("no .atk files found")
    return documents


def load_corpus(directory: str | os.PathLike | None = None) -> TreeLibrary:
    """Parse and validate the corpus; any finding at all is a hard error."""
    documents = _corpus_documents(directory)
    result = parse_library(documents)
    if not result.ok or result.library is None:
        details = "; ".join(d.render() for d in result.diagnostics)
        raise CorpusError(f"corpus failed to parse: {details}")
    findings = validate_library(result.library)
    if findings:
        details = "; ".join(d.render() for d in findings)
        raise CorpusError(f"corpus failed validation: {details}")
    return result.library


@dataclass(frozen=True)
class CorpusManifest:
    version: str
    protocol_revision: str
    files: tuple[str, ...]
    params: dict[str, str]
    sub_trees: tuple[str, ...]
    attack_trees: tuple[str, ...]
    titles: dict[str, str]
    assumptions: tuple[str, ...]


def corpus_manifest(library: TreeLibrary | None = None,
                    directory: str | os.PathLike | None = None
                    ) -> CorpusManifest:
    files = tuple(name for name, _ in _corpus_documents(directory))
    if library is None:
        library = load_corpus(directory)
    titles = {key: root.label for key, root in library.trees.items()}
    return CorpusManifest(
        version=CORPUS_VERSION,
        protocol_revision=PROTOCOL_REVISION,
        files=files,
        params=dict(library.parameters),
        sub_trees=SUB_TREES,
        attack_trees=ATTACK_TREES,
        titles=titles,
        assumptions=ASSUMPTIONS,
    )


def _key_order(key: str) -> tuple[bool, str]:
    return (key.isupper(), key)  # sub-trees a–k first, then attacks A–K


def corpus_stats(params: DeploymentParams,
                 library: TreeLibrary | None = None) -> list[dict[str, object]]:
    """Size table per tree: expanded node/leaf counts and exact scenario count."""
    if library is None:
        library = load_corpus()
    rows: list[dict[str, object]] = []
    for key in sorted(library.trees, key=_key_order):
        expanded = expand(library, key, params)
        rows.append({
            "tree": key,
            "nodes": node_count(expanded),
            "leaves": leaf_count(expanded),
            "scenarios": count_scenarios(expanded),
        })
    return rows
