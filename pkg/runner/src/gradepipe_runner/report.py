"""Writing the machine-readable run report.

The schema is the contract with the pipeline that launched us:
{schema_version, status, questions: [{name, passed, traceback}],
style_error_count, duration_s} plus optional detail and warnings.
"""

from __future__ import annotations

import json
from pathlib import Path

from .execute import QuestionOutcome

REPORT_SCHEMA_VERSION = 1


def emit_report(
    out_path: Path,
    status: str,
    questions: list[QuestionOutcome],
    style_error_count: int,
    duration_s: float,
    detail: str = "",
    warnings: list[str] | None = None,
) -> None:
    document = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "status": status,
        "questions": [
            {
                "name": q.name,
                "passed": q.passed,
                "traceback": q.traceback_text,
            }
            for q in questions
        ],
        "style_error_count": style_error_count,
        "duration_s": duration_s,
    }
    if detail:
        document["detail"] = detail
    if warnings:
        document["warnings"] = warnings
    out_path.write_text(json.dumps(document, indent=2) + "\n")
