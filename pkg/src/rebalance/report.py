"""Report documents and their canonical JSON serialization.

Reports are plain dicts built in a fixed key order and serialized with a
deterministic emitter: floats carry 17 significant digits (enough to
round-trip doubles exactly), non-finite numbers become null, and keys keep
insertion order. Two runs with the same inputs and seed produce
byte-identical files.
"""

from __future__ import annotations

import json
import math
import os
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .diagnostics import AsmdTable, OutcomeReport, PlotSeries, WeightSummary

SCHEMA_VERSION = 1


def _format_number(x: float) -> str:
    if isinstance(x, bool):  # bool is an int subclass; handled by caller
        raise TypeError
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def dumps_canonical(obj, indent: int = 0) -> str:
    """Serialize to JSON deterministically (see module docstring)."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_number(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            return "[]"
        body = ",\n".join(inner + dumps_canonical(v, indent + 1) for v in items)
        return "[\n" + body + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        body = ",\n".join(
            f"{inner}{json.dumps(str(k), ensure_ascii=False)}: "
            + dumps_canonical(v, indent + 1)
            for k, v in obj.items()
        )
        return "{\n" + body + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__} to report JSON")


def _run_timestamp() -> str | None:
    """ISO timestamp from SOURCE_DATE_EPOCH, else null for reproducibility."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    try:
        ts = int(epoch)
    except ValueError:
        return None
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


def asmd_section(table: AsmdTable) -> dict:
    return {
        "aggregated": table.aggregated,
        "rows": table.to_records(),
    }


def weight_summary_section(summary: WeightSummary) -> dict:
    return summary.to_dict()


def outcome_section(report: OutcomeReport) -> list[dict]:
    rows = []
    for r in report.rows:
        rows.append(
            {
                "outcome": r.outcome,
                "self": r.self_mean,
                "self_ci": list(r.self_ci),
                "unadjusted": r.unadjusted_mean,
                "unadjusted_ci": list(r.unadjusted_ci),
                "target": r.target_mean,
                "target_ci": list(r.target_ci) if r.target_ci is not None else None,
            }
        )
    return rows


def plot_section(series_list: list[PlotSeries]) -> list[dict]:
    out = []
    for s in series_list:
        out.append(
            {
                "variable": s.variable,
                "kind": s.kind,
                "series": {
                    source: [list(point) for point in points]
                    for source, points in s.series.items()
                },
            }
        )
    return out


def build_report(
    command: str,
    version: str,
    input_summary: dict,
    asmd_pre: AsmdTable,
    asmd_post: AsmdTable | None = None,
    weight_summary: WeightSummary | None = None,
    outcomes: OutcomeReport | None = None,
    fit_meta: dict | None = None,
    summary: dict | None = None,
    plots: list[PlotSeries] | None = None,
    seed: int | None = None,
    method: str | None = None,
) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "rebalance", "version": version},
        "run": {
            "command": command,
            "method": method,
            "seed": seed,
            "timestamp": _run_timestamp(),
        },
        "input_summary": input_summary,
        "asmd_pre": asmd_section(asmd_pre),
        "asmd_post": asmd_section(asmd_post) if asmd_post is not None else None,
        "weight_summary": (
            weight_summary_section(weight_summary) if weight_summary is not None else None
        ),
        "outcomes": outcome_section(outcomes) if outcomes is not None else [],
        "summary": summary,
        "fit_meta": fit_meta if fit_meta is not None else {},
    }
    if plots is not None:
        doc["plots"] = plot_section(plots)
    return doc


def export_report(doc: dict, path: str | Path, format: str = "json") -> None:
    """Write the report document as canonical JSON."""
    if format != "json":
        raise ValueError(f"unsupported report format {format!r}")
    text = dumps_canonical(doc) + "\n"
    Path(path).write_text(text, encoding="utf-8")
