"""Names available to suite test files.

A suite imports the student's module under the short alias ``s`` plus
the shared checks:

    from gradepipe_runner.suiteapi import s, docstring_test

``s`` is bound to the student module by the runner before the suite file
is imported, so test functions can call ``s.pyramid_volume(...)``.
"""

from __future__ import annotations

import inspect
import string
from types import ModuleType

s: ModuleType | None = None


def bind_student_module(module: ModuleType) -> None:
    global s
    s = module


def docstring_test(function) -> bool:
    """Assert that a function carries a useful documentation string.

    It must exist, contain several words, and one of the words must be
    "return" (the reader should learn what the function gives back).
    """
    doc = inspect.getdoc(function)
    assert doc and doc.strip(), "no documentation string found"
    words = [w.strip(string.punctuation).lower() for w in doc.split()]
    words = [w for w in words if w]
    assert len(words) >= 3, "the documentation string must contain several words"
    assert "return" in words, "the documentation string must mention 'return'"
    return True
