"""Stable JSON report documents.

Reports are rendered with sorted keys and a fixed indent, so two runs with
the same inputs and seed differ only in the timestamp field. Non-finite
numbers are encoded as the strings "inf", "-inf", and "nan" because strict
JSON has no spelling for them.
"""

from __future__ import annotations

import json
import math
from datetime import datetime, timezone
from typing import Any, Mapping, Sequence

__all__ = ["json_ready", "render_json", "build_report"]


def json_ready(value: Any) -> Any:
    """Recursively convert a result object into strict-JSON-safe values."""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return value
    if isinstance(value, Mapping):
        return {str(k): json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_ready(v) for v in value]
    if isinstance(value, (str, int, bool)) or value is None:
        return value
    return str(value)


def render_json(document: Any) -> str:
    return json.dumps(json_ready(document), indent=2, sort_keys=True,
                      allow_nan=False) + "\n"


def build_report(command: str, *, version: str, corpus_version: str,
                 protocol_revision: str | None = None,
                 seed: int | None = None,
                 params: Mapping[str, int] | None = None,
                 payoff: float | None = None,
                 tree: str | None = None,
                 results: Sequence[Mapping[str, Any]] = (),
                 diagnostics: Sequence[Mapping[str, Any]] = (),
                 extra: Mapping[str, Any] | None = None) -> dict[str, Any]:
    metadata: dict[str, Any] = {
        "tool": "vaultrisk",
        "version": version,
        "corpus_version": corpus_version,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    if protocol_revision is not None:
        metadata["protocol_revision"] = protocol_revision
    if seed is not None:
        metadata["seed"] = seed
    if params is not None:
        metadata["params"] = dict(params)
    if payoff is not None:
        metadata["payoff"] = payoff
    if tree is not None:
        metadata["tree"] = tree
    document: dict[str, Any] = {
        "command": command,
        "metadata": metadata,
        "results": list(results),
        "diagnostics": list(diagnostics),
    }
    if extra:
        document.update(extra)
    return document
