"""Importing the student's module, with syntax failures kept apart."""

from __future__ import annotations

import importlib.util
import sys
import traceback
from pathlib import Path
from types import ModuleType


class SuiteError(Exception):
    """The suite or sandbox is broken; a runner malfunction, not a
    student outcome."""


def import_student_module(path: Path) -> tuple[ModuleType | None, str | None]:
    """Import the student file; returns (module, None) or (None, detail).

    Any failure to import is a student outcome, not a malfunction: the
    detail carries the interpreter's error text so the student can see
    what went wrong. Top-level code runs during import, so runaway code
    here is ended by the sandbox limits around the whole runner.
    """
    if not path.exists():
        raise SuiteError(f"student module {path.name} is not in the sandbox")
    spec = importlib.util.spec_from_file_location(path.stem, path)
    module = importlib.util.module_from_spec(spec)
    try:
        spec.loader.exec_module(module)
    except SyntaxError as exc:
        return None, "".join(traceback.format_exception_only(exc)).strip()
    except BaseException as exc:  # the import executed and blew up
        detail = "".join(traceback.format_exception_only(exc)).strip()
        return None, f"importing the file failed:\n{detail}"
    sys.modules[path.stem] = module
    sys.modules["s"] = module
    return module, None
