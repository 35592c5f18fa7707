"""Runner entry point.

    gradepipe-runner --suite <suite_id> --dir <sandbox> --out report.json

Exit status 0 for any completed run, including failed tests and syntax
errors in the student file; nonzero (3) only when the runner itself
cannot do its job. The launching pipeline treats everything else it
needs to know from the report file.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import suiteapi
from .execute import SuiteSpec, run_suite
from .loader import SuiteError, import_student_module
from .report import emit_report
from .stylecheck import CHECKER_VERSION, count_style_errors

MALFUNCTION_EXIT = 3


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="gradepipe-runner")
    parser.add_argument("--suite", required=True, help="suite identifier")
    parser.add_argument("--dir", required=True, help="sandbox directory")
    parser.add_argument("--out", required=True, help="report file to write")
    args = parser.parse_args(argv)

    sandbox = Path(args.dir).resolve()
    out_path = Path(args.out)
    if not out_path.is_absolute():
        out_path = sandbox / out_path

    started = time.monotonic()
    try:
        spec = SuiteSpec.load(sandbox)
        if spec.suite_id != args.suite:
            print(
                f"warning: sandbox holds suite {spec.suite_id!r}, "
                f"launched for {args.suite!r}",
                file=sys.stderr,
            )

        module, import_error = import_student_module(
            sandbox / spec.module_filename
        )
        if module is None:
            emit_report(
                out_path,
                status="syntax_error",
                questions=[],
                style_error_count=0,
                duration_s=time.monotonic() - started,
                detail=import_error or "",
            )
            return 0

        suiteapi.bind_student_module(module)
        outcomes = run_suite(sandbox, spec)

        warnings = []
        if spec.checker_version and spec.checker_version != CHECKER_VERSION:
            warnings.append(
                f"style checker version mismatch: suite pins "
                f"{spec.checker_version}, running {CHECKER_VERSION}"
            )
        style_errors = count_style_errors(
            sandbox / spec.module_filename, spec.style_ignore
        )

        emit_report(
            out_path,
            status="ok",
            questions=outcomes,
            style_error_count=style_errors,
            duration_s=time.monotonic() - started,
            warnings=warnings,
        )
        return 0
    except SuiteError as exc:
        print(f"runner malfunction: {exc}", file=sys.stderr)
        return MALFUNCTION_EXIT


if __name__ == "__main__":
    sys.exit(main())
